"""Batch command-line surface.

Subcommands: theory-pmf, chi0, simulate, compare, moments, mc,
selftest.  Every output embeds the resolved configuration and seed;
JSON files are canonical (sorted keys, 17-significant-digit floats)
plus a timestamp field that determinism checks ignore.

Exit codes: 0 success, 2 validation error, 3 numerical error,
4 resource-guard rejection.

A flat key=value config file can pre-seed any subcommand's flags
(--config FILE); explicit flags win.  The COKLAB_WORKERS environment
variable overrides the worker count for simulation runs.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import estimators, pgroup, plinalg, simulate, theory
from .entrydist import make_symmetric_dist, parse_dist, vanish_prob
from .errors import NumericalError, ResourceGuardError, ValidationError
from .simulate import (FluctuationHistogram, canonical_dumps, format_float,
                       read_json_file, write_json_file)


def parse_partition(text: str) -> tuple:
    text = text.strip()
    if text in ("", "0", "-"):
        return ()
    try:
        parts = tuple(int(x) for x in text.split(","))
    except ValueError as exc:
        raise ValidationError(f"bad partition {text!r}") from exc
    return pgroup.as_partition(parts)


def parse_lambdas(text: str) -> list:
    return [parse_partition(item) for item in text.split(";") if item.strip()]


def _positive(kind):
    def conv(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value
    return conv


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="coklab", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("theory-pmf", help="tabulate the d=1 limit pmf")
    sp.add_argument("--config")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--chi", type=float, required=True)
    sp.add_argument("--xmin", type=int, required=True)
    sp.add_argument("--xmax", type=int, required=True)
    sp.add_argument("--out")
    sp.add_argument("--format", choices=("json", "csv"), default="csv")

    sp = sub.add_parser("chi0", help="closed-form and/or Monte Carlo chi0")
    sp.add_argument("--config")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--dist")
    sp.add_argument("--n", type=_positive(int))
    sp.add_argument("--trials", type=_positive(int))
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")

    sp = sub.add_parser("simulate", help="run a fluctuation experiment")
    sp.add_argument("--config")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--d", type=_positive(int), required=True)
    sp.add_argument("--n", type=_positive(int), required=True)
    sp.add_argument("--trials", type=_positive(int), required=True)
    sp.add_argument("--dist", required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--zeta", default="auto")
    sp.add_argument("--E", type=int)
    sp.add_argument("--budget", type=float, default=1e12)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("compare", help="fit a histogram against the limit law")
    sp.add_argument("--config")
    sp.add_argument("--hist", required=True)
    sp.add_argument("--chi0", type=float)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--lambdas")
    sp.add_argument("--out", required=True)
    sp.add_argument("--table-csv", dest="table_csv")

    sp = sub.add_parser("moments", help="rescaled Hom-count moments vs theory")
    sp.add_argument("--config")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--G", required=True, help="partition of the target group")
    sp.add_argument("--n", type=_positive(int), required=True)
    sp.add_argument("--trials", type=_positive(int), required=True)
    sp.add_argument("--dist", required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--E", type=int)
    sp.add_argument("--out")

    sp = sub.add_parser("mc", help="exact maximal-chain count of an abelian p-group")
    sp.add_argument("--config")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--partition", required=True)

    sp = sub.add_parser("selftest", help="run the brute-force oracle suite")
    sp.add_argument("--config")
    return top


def _apply_config_file(argv: list) -> list:
    """Inject key=value pairs from --config FILE as defaults (flags win)."""
    if not argv or argv[0].startswith("-"):
        return argv
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
            break
        if tok.startswith("--config="):
            path = tok.split("=", 1)[1]
            break
    if path is None:
        return argv
    injected = []
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ValidationError(f"bad config line {line!r}")
                key, value = line.split("=", 1)
                injected += [f"--{key.strip()}", value.strip()]
    except OSError as exc:
        raise ValidationError(f"cannot read config file {path}: {exc}") from exc
    return [argv[0]] + injected + argv[1:]


def cmd_theory_pmf(args) -> int:
    if args.xmin > args.xmax:
        raise ValidationError(f"xmin {args.xmin} > xmax {args.xmax}")
    rows = []
    cum = 0.0
    for x in range(args.xmin, args.xmax + 1):
        q = theory.fluctuation_pmf(args.p, args.chi, x)
        cum += q
        rows.append({"x": x, "pmf": q, "cumulative": cum})
    total = cum
    config = {"p": args.p, "chi": args.chi, "xmin": args.xmin, "xmax": args.xmax}
    if args.format == "csv":
        lines = ["x,pmf,cumulative"]
        for r in rows:
            lines.append(f"{r['x']},{format_float(r['pmf'])},{format_float(r['cumulative'])}")
        lines.append(f"sum,{format_float(total)},")
        text = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    else:
        obj = {"rows": rows, "sum": total, "config": config}
        if args.out:
            write_json_file(args.out, obj)
        else:
            print(canonical_dumps(obj))
    return 0


def cmd_chi0(args) -> int:
    if (args.alpha is None) == (args.dist is None):
        raise ValidationError("pass exactly one of --alpha / --dist")
    report = {"p": args.p}
    if args.alpha is not None:
        closed = theory.chi0_symmetric(args.p, args.alpha)
        report["alpha"] = args.alpha
        report["closed_form"] = closed
        print(f"chi0 closed form (p={args.p}, alpha={args.alpha}): {closed!r}")
        dist = make_symmetric_dist(args.p, args.alpha)
    else:
        dist = parse_dist(args.dist, args.p, precision=1)
        report["dist"] = simulate.dist_text(dist)
    estimates = []
    if args.n is not None or args.dist is not None:
        if args.n is None or args.trials is None or args.seed is None:
            raise ValidationError("the estimator path needs --n, --trials and --seed")
        ns = [args.n] if args.alpha is not None else [args.n, 2 * args.n, 4 * args.n]
        for n in ns:
            res = estimators.estimate_chi0(dist.reduce_mod_p(), n, args.trials, args.seed)
            estimates.append({"n": n, "estimate": res.estimate, "stderr": res.stderr,
                              "trials": res.trials, "seed": res.seed})
            print(f"chi0 estimate (n={n}, trials={args.trials}): "
                  f"{res.estimate!r} +- {res.stderr!r}")
        if args.alpha is not None:
            gap = abs(estimates[0]["estimate"] - report["closed_form"])
            report["abs_gap"] = gap
            print(f"|closed form - estimate| = {gap!r} "
                  f"({gap / max(estimates[0]['stderr'], 1e-300):.2f} stderr)")
    report["estimates"] = estimates
    if args.out:
        write_json_file(args.out, report)
    return 0


def _build_experiment(args) -> simulate.ExperimentConfig:
    E = args.E if args.E is not None else simulate.default_precision(args.p, args.d)
    dist = parse_dist(args.dist, args.p, precision=E)
    if args.zeta == "auto":
        policy, zeta = "auto", None
    else:
        try:
            zeta = float(args.zeta)
        except ValueError as exc:
            raise ValidationError(f"--zeta must be 'auto' or a number, got {args.zeta!r}") from exc
        policy = "explicit"
    return simulate.ExperimentConfig(
        p=args.p, d=args.d, n=args.n, trials=args.trials, dist=dist,
        seed=args.seed, zeta_policy=policy, zeta=zeta, E=E, budget=args.budget)


def cmd_simulate(args) -> int:
    cfg = _build_experiment(args)
    hist = simulate.run_experiment(cfg, workers=args.workers)
    write_json_file(args.out, hist.to_json_obj())
    print(f"wrote histogram ({hist.trials} trials, {len(hist.counts)} support points) "
          f"to {args.out}")
    return 0


def cmd_compare(args) -> int:
    hist = FluctuationHistogram.from_json_obj(read_json_file(args.hist))
    if (args.chi0 is None) == (args.alpha is None):
        raise ValidationError("pass exactly one of --chi0 / --alpha")
    chi0 = args.chi0 if args.chi0 is not None else theory.chi0_symmetric(hist.p, args.alpha)
    params = theory.TheoryParams.from_chi0(hist.p, hist.d, hist.zeta, chi0)
    lambdas = parse_lambdas(args.lambdas) if args.lambdas else \
        [tuple(1 for _ in range(j)) for j in range(1, hist.d + 1)]
    mom_report = simulate.compare_moments(hist, params, lambdas)
    if hist.d == 1:
        fit = simulate.compare_to_theory(hist, params)
        fit.moments = mom_report.moments
        fit.diagnostics.update(mom_report.diagnostics)
        print(f"TV = {fit.tv!r}, chi2 = {fit.chi2!r} (dof {fit.dof}, "
              f"p-value {fit.pvalue!r})")
    else:
        fit = mom_report
    for row in fit.moments:
        print(f"lambda={row['lambda']}: empirical {row['empirical']!r} "
              f"+- {row['stderr']!r}, theory {row['theory']!r}")
    write_json_file(args.out, fit.to_json_obj())
    if args.table_csv:
        if not fit.table:
            raise ValidationError("no per-point table for d >= 2 histograms")
        with open(args.table_csv, "w") as fh:
            fh.write(simulate.table_csv(fit))
    return 0


def cmd_moments(args) -> int:
    G = parse_partition(args.G)
    ell = pgroup.group_order_exponent(G)
    E = args.E if args.E is not None else max(G[0] if G else 1, 1)
    dist = parse_dist(args.dist, args.p, precision=E)
    res = estimators.estimate_hom_moment(dist, G, args.n, args.trials, args.seed)
    mc = pgroup.maximal_chain_count(G, args.p)
    report = {
        "p": args.p, "G": list(G), "n": args.n, "trials": args.trials,
        "seed": args.seed, "dist": simulate.dist_text(dist),
        "empirical": res.estimate, "stderr": res.stderr,
        "mc": mc, "diagnostics": res.diagnostics,
    }
    if dist.kind in ("symmetric", "uniform"):
        chi0 = theory.chi0_symmetric(args.p, dist.alpha)
        report["chi0"] = chi0
        report["chi0_source"] = "closed_form"
    else:
        nested = estimators.estimate_chi0(dist.reduce_mod_p(), n=1000,
                                          trials=50000, seed=args.seed + 1)
        chi0 = nested.estimate
        report["chi0"] = chi0
        report["chi0_source"] = "nested_estimate"
        report["chi0_stderr"] = nested.stderr
    theory_limit = chi0 ** ell * float(mc) / math.factorial(ell)
    report["theory_limit"] = theory_limit
    print(f"E|Hom(cok, G)| / n^{ell} = {res.estimate!r} +- {res.stderr!r}; "
          f"limit chi0^{ell} MC(G)/{ell}! = {theory_limit!r} (MC = {mc})")
    if args.out:
        write_json_file(args.out, report)
    return 0


def cmd_mc(args) -> int:
    lam = parse_partition(args.partition)
    print(pgroup.maximal_chain_count(lam, args.p))
    return 0


def cmd_selftest(args) -> int:
    failures = 0

    def check(label: str, ok: bool):
        nonlocal failures
        print(f"{'PASS' if ok else 'FAIL'}  {label}")
        if not ok:
            failures += 1

    for lam in [(1,), (2,), (1, 1), (2, 1), (1, 1, 1), (2, 2)]:
        for p in (2, 3):
            check(f"maximal chains {lam} p={p}",
                  pgroup.maximal_chain_count(lam, p)
                  == pgroup.brute_force_maximal_chains(lam, p))
    for lam, mu in [((1,), (1,)), ((2,), (1,)), ((1, 1), (2,)), ((2, 1), (2,)),
                    ((2, 2), (2, 1)), ((1, 1, 1), (2, 1))]:
        check(f"hom count {lam} -> {mu} p=2",
              2 ** pgroup.hom_count_exponent(lam, mu)
              == pgroup.brute_force_hom_count(lam, mu, 2))
    rng = np.random.default_rng(20240817)
    ok = True
    for _ in range(60):
        n = int(rng.integers(1, 7))
        rows = [[int(rng.integers(-20, 21)) for _ in range(i + 1)] for i in range(n)]
        full = [[rows[i][j] if j <= i else 0 for j in range(n)] for i in range(n)]
        for p, E in ((2, 6), (3, 4)):
            M = plinalg.TriMatrix.from_rows(rows, p, E)
            got = plinalg.invariant_valuations(M).valuations
            want = tuple(sorted(min(v, E) if v != plinalg.INF else plinalg.INF
                                for v in plinalg.exact_snf_valuations(full, p)))
            want = tuple(plinalg.INF if v >= E else v for v in want)
            if got != want:
                ok = False
    check("invariant valuations vs exact Smith form", ok)
    dist = make_symmetric_dist(2, 0.75)
    ok = True
    for k in range(0, 8):
        v = [(1,)] * k
        want = (1.0 + (2 * 0.75 - 1.0) ** k) / 2.0
        if abs(vanish_prob(dist, (1,), v) - want) > 1e-12:
            ok = False
    check("vanishing probabilities vs symmetric closed form", ok)
    total = sum(theory.fluctuation_pmf(2, 0.5, x) for x in range(-40, 41))
    check("pmf normalization (p=2, chi=0.5)", abs(total - 1.0) < 1e-10)
    if failures:
        raise NumericalError(f"{failures} selftest checks failed")
    print("selftest: all checks passed")
    return 0


_COMMANDS = {
    "theory-pmf": cmd_theory_pmf,
    "chi0": cmd_chi0,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "moments": cmd_moments,
    "mc": cmd_mc,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _apply_config_file(argv)
        args = _build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResourceGuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return 4
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
