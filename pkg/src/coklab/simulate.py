"""End-to-end fluctuation experiments and goodness-of-fit reports.

A run samples lower triangular matrices with i.i.d. entries, extracts
the d ranks rank(p^{i-1} cok), subtracts the centering
floor(log_p(n) + zeta + 1/2) from every coordinate, and histograms the
resulting lattice vectors.  Reports compare the histogram against the
limit law: total variation + Pearson chi-square for d = 1 (explicit
pmf), exponential moments with bootstrap error bars for any d.

Seeding contract: trial t uses SeedSequence(entropy=seed, spawn_key=(t,));
histogram merging is integer addition, so results are byte-identical
for any worker count or chunking.

File formats (the package's external interface):

* histogram JSON: {"p","d","n","zeta","trials","seed","counts":
  [{"x": [d ints], "count": int}, ...]} plus "config" echo;
* fit report JSON: {"tv","chi2","dof","moments":[{"lambda","empirical",
  "stderr","theory"}, ...]} plus "pvalue","table","diagnostics";
* per-point CSV with header "x,empirical,theory".

JSON is written canonically (sorted keys, floats at 17 significant
digits); a "timestamp" field is added on write and excluded from the
canonical byte form used for determinism checks.
"""

from __future__ import annotations

import concurrent.futures
import datetime
import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from . import gf2
from .entrydist import EntryDist, parse_dist
from .errors import NumericalError, ResourceGuardError, ValidationError
from .pgroup import as_partition
from .plinalg import (TriMatrix, check_precision, check_prime,
                      invariant_valuations, rank_profile, sample_planes,
                      sample_tri_matrix)
from .theory import TheoryParams, centering, fluctuation_moment, fluctuation_pmf, zeta_from_n

WORKERS_ENV = "COKLAB_WORKERS"
_DEFAULT_BUDGET = 1e12
_CHUNK = 256
_BOOTSTRAP_RESAMPLES = 200
_MOM_GROUPS = 16


def dist_text(dist: EntryDist) -> str:
    """Render an entry law in the CLI's textual syntax (round-trips)."""
    if dist.kind == "uniform":
        return "uniform"
    if dist.kind == "symmetric":
        return f"symmetric:alpha={format_float(dist.alpha)}"
    items = [f"{r}:{format_float(float(w))}" for r, w in enumerate(dist.probs) if w > 0]
    return ",".join(items)


@dataclass(frozen=True)
class ExperimentConfig:
    p: int
    d: int
    n: int
    trials: int
    dist: EntryDist
    seed: int
    zeta_policy: str = "auto"  # "auto": zeta = {-log_p n}; "explicit": given value
    zeta: float | None = None
    E: int | None = None
    budget: float = _DEFAULT_BUDGET

    def __post_init__(self):
        check_prime(self.p)
        if self.d < 1:
            raise ValidationError(f"d must be >= 1, got {self.d}")
        if self.n < 1:
            raise ValidationError(f"n must be >= 1, got {self.n}")
        if self.trials < 1:
            raise ValidationError(f"trials must be >= 1, got {self.trials}")
        if self.dist.p != self.p:
            raise ValidationError("entry law prime differs from experiment prime")
        if self.dist.precision < self.d:
            raise ValidationError(
                f"rank profile up to d={self.d} needs entries mod p^{self.d}; "
                f"entry law has precision {self.dist.precision}")
        if self.zeta_policy not in ("auto", "explicit"):
            raise ValidationError(f"unknown zeta policy {self.zeta_policy!r}")
        if self.zeta_policy == "explicit":
            if self.zeta is None or not 0.0 <= self.zeta < 1.0:
                raise ValidationError(f"explicit zeta must lie in [0,1), got {self.zeta}")
        E = self.E if self.E is not None else default_precision(self.p, self.d)
        check_precision(self.p, E)
        if E < self.d + 1:
            raise ValidationError(f"precision E={E} must be >= d+1 = {self.d + 1}")
        object.__setattr__(self, "E", E)

    def resolved_zeta(self) -> float:
        if self.zeta_policy == "auto":
            return zeta_from_n(self.p, self.n)
        return float(self.zeta)

    def echo(self) -> dict:
        return {
            "p": self.p, "d": self.d, "n": self.n, "trials": self.trials,
            "seed": self.seed, "E": self.E, "zeta_policy": self.zeta_policy,
            "zeta": self.resolved_zeta(), "dist": dist_text(self.dist),
            "budget": self.budget,
        }


def default_precision(p: int, d: int) -> int:
    """d + 8, lowered until p^E fits the 62-bit bound."""
    E = d + 8
    while E > d + 1 and p ** E >= (1 << 62):
        E -= 1
    return E


@dataclass
class FluctuationHistogram:
    p: int
    d: int
    n: int
    zeta: float
    trials: int
    seed: int
    counts: dict
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        total = sum(self.counts.values())
        if total != self.trials:
            raise ValidationError(f"histogram mass {total} != trials {self.trials}")
        for key in self.counts:
            if len(key) != self.d:
                raise ValidationError(f"key {key} is not a {self.d}-tuple")

    def to_json_obj(self) -> dict:
        return {
            "p": self.p, "d": self.d, "n": self.n, "zeta": self.zeta,
            "trials": self.trials, "seed": self.seed,
            "counts": [{"x": list(k), "count": int(v)}
                       for k, v in sorted(self.counts.items())],
            "config": self.config,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "FluctuationHistogram":
        try:
            counts = {tuple(int(v) for v in row["x"]): int(row["count"])
                      for row in obj["counts"]}
            return cls(p=int(obj["p"]), d=int(obj["d"]), n=int(obj["n"]),
                       zeta=float(obj["zeta"]), trials=int(obj["trials"]),
                       seed=int(obj["seed"]), counts=counts,
                       config=obj.get("config", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed histogram object: {exc}") from exc


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(trial,))
    return np.random.Generator(np.random.PCG64(ss))


def _uses_fast_path(cfg: ExperimentConfig) -> bool:
    return cfg.p == 2 and cfg.d <= 2


def check_budget(cfg: ExperimentConfig):
    per_entry = 1.0 / 64.0 if _uses_fast_path(cfg) else 1.0
    cost = float(cfg.n) ** 2 * cfg.trials * per_entry
    if cost > cfg.budget:
        raise ResourceGuardError(
            f"run needs ~{cost:.3g} entry-operations, budget is {cfg.budget:.3g}")


def _trial_profile(cfg: ExperimentConfig, rng: np.random.Generator) -> tuple:
    n, d = cfg.n, cfg.d
    if _uses_fast_path(cfg):
        planes = sample_planes(cfg.dist, n, rng, d)
        if d == 1:
            c, _ = gf2.kernel_tracker(planes[0], n, gf2.TRACKER_CAPACITY)
            if c < 0:
                c = int(gf2.corank_packed(planes[0], n))
            return (int(c),)
        cv, ge2 = gf2.count_low_valuations(planes[0], planes[1], n,
                                           gf2.TRACKER_CAPACITY)
        if cv >= 0:
            return (int(cv), int(ge2))
        M = _matrix_from_planes(planes, n)
        return rank_profile(invariant_valuations(M), d)
    work_E = min(cfg.E, cfg.dist.precision)
    M = sample_tri_matrix(cfg.dist, n, rng)
    if work_E < M.E:
        pe = cfg.p ** work_E
        M = TriMatrix(n=n, p=cfg.p, E=work_E, rows=M.rows % pe)
    return rank_profile(invariant_valuations(M), d, E=work_E)


def _matrix_from_planes(planes, n: int) -> TriMatrix:
    rows = np.zeros((n, n), dtype=np.int64)
    for b, plane in enumerate(planes):
        rows += gf2.unpack_rows(plane, n) << b
    return TriMatrix(n=n, p=2, E=len(planes), rows=rows)


def _run_chunk(cfg: ExperimentConfig, start: int, count: int) -> Counter:
    center = centering(cfg.p, cfg.n, cfg.resolved_zeta())
    out: Counter = Counter()
    for t in range(start, start + count):
        profile = _trial_profile(cfg, trial_rng(cfg.seed, t))
        out[tuple(r - center for r in profile)] += 1
    return out


def resolve_workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise ValidationError(f"worker count must be >= 1, got {workers}")
    return workers


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> FluctuationHistogram:
    """Sample cfg.trials matrices and histogram the centered rank vectors."""
    check_budget(cfg)
    workers = resolve_workers(workers)
    starts = [(s, min(_CHUNK, cfg.trials - s)) for s in range(0, cfg.trials, _CHUNK)]
    counts: Counter = Counter()
    if workers == 1 or len(starts) == 1:
        for s, c in starts:
            counts.update(_run_chunk(cfg, s, c))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, cfg, s, c) for s, c in starts]
            for fut in concurrent.futures.as_completed(futures):
                counts.update(fut.result())
    return FluctuationHistogram(
        p=cfg.p, d=cfg.d, n=cfg.n, zeta=cfg.resolved_zeta(), trials=cfg.trials,
        seed=cfg.seed, counts=dict(counts), config=cfg.echo())


@dataclass
class FitReport:
    tv: float | None = None
    chi2: float | None = None
    dof: int | None = None
    pvalue: float | None = None
    moments: list = field(default_factory=list)
    table: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            "tv": self.tv, "chi2": self.chi2, "dof": self.dof,
            "pvalue": self.pvalue, "moments": self.moments,
            "table": self.table, "diagnostics": self.diagnostics,
            "config": self.config,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "FitReport":
        try:
            return cls(tv=obj["tv"], chi2=obj["chi2"], dof=obj["dof"],
                       pvalue=obj.get("pvalue"), moments=obj["moments"],
                       table=obj.get("table", []),
                       diagnostics=obj.get("diagnostics", {}),
                       config=obj.get("config", {}))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed fit report: {exc}") from exc


def _pmf_table(p: int, chi: float, lo: int, hi: int) -> dict:
    """pmf on [lo, hi] extended left/right until the mass is negligible."""
    table = {x: fluctuation_pmf(p, chi, x) for x in range(lo, hi + 1)}
    x = lo
    while table[x] > 1e-13 and x > lo - 200:
        x -= 1
        table[x] = fluctuation_pmf(p, chi, x)
    x = hi
    while table[x] > 1e-13 and x < hi + 200:
        x += 1
        table[x] = fluctuation_pmf(p, chi, x)
    return dict(sorted(table.items()))


def compare_to_theory(hist: FluctuationHistogram, params: TheoryParams) -> FitReport:
    """Total variation + tail-merged Pearson chi-square, d = 1 only."""
    if hist.d != 1:
        raise ValidationError("no closed-form pmf for d >= 2; use compare_moments")
    if params.p != hist.p:
        raise ValidationError("prime mismatch between histogram and parameters")
    emp = {k[0]: v / hist.trials for k, v in hist.counts.items()}
    lo, hi = min(emp), max(emp)
    pmf = _pmf_table(hist.p, params.chi, lo, hi)
    residual = max(0.0, 1.0 - sum(pmf.values()))
    tv = 0.5 * (sum(abs(emp.get(x, 0.0) - q) for x, q in pmf.items()) + residual)
    # chi-square: merge cells outward-in until each bin expects >= 5
    xs = sorted(pmf)
    bins = []
    acc_e = 0.0
    acc_o = 0
    for x in xs:
        acc_e += pmf[x] * hist.trials
        acc_o += hist.counts.get((x,), 0)
        if acc_e >= 5.0:
            bins.append((acc_o, acc_e))
            acc_e = 0.0
            acc_o = 0
    if bins and (acc_e or acc_o):
        o, e = bins.pop()
        bins.append((o + acc_o, e + acc_e))
    chi2 = sum((o - e) ** 2 / e for o, e in bins)
    dof = max(len(bins) - 1, 1)
    pvalue = float(scipy.stats.chi2.sf(chi2, dof))
    table = [{"x": x, "empirical": emp.get(x, 0.0), "theory": q}
             for x, q in pmf.items()]
    return FitReport(
        tv=tv, chi2=float(chi2), dof=dof, pvalue=pvalue, table=table,
        diagnostics={"pmf_residual_mass": residual, "bins": float(len(bins))},
        config={"params": {"p": params.p, "d": params.d, "zeta": params.zeta,
                           "chi0": params.chi0, "chi": params.chi},
                "histogram": hist.config})


def compare_moments(hist: FluctuationHistogram, params: TheoryParams,
                    lambdas) -> FitReport:
    """Empirical E[p^<X,lam>] vs the closed-form limit moments.

    Standard errors come from 200 seeded multinomial resamples of the
    histogram; a median-of-16-group-means estimate is reported as a
    heavy-tail diagnostic next to each plain mean.
    """
    keys = sorted(hist.counts)
    counts = np.array([hist.counts[k] for k in keys], dtype=np.int64)
    probs = counts / hist.trials
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=hist.seed, spawn_key=(0xB007,))))
    resampled = rng.multinomial(hist.trials, probs, size=_BOOTSTRAP_RESAMPLES)
    groups = rng.multinomial(counts, np.full(_MOM_GROUPS, 1.0 / _MOM_GROUPS))
    moments = []
    diagnostics = {}
    for lam in lambdas:
        lam = as_partition(lam)
        if len(lam) > hist.d:
            raise ValidationError(f"lambda {lam} has more than d={hist.d} parts")
        padded = lam + (0,) * (hist.d - len(lam))
        w = np.array([float(hist.p) ** sum(x * l for x, l in zip(k, padded))
                      for k in keys])
        empirical = float(probs @ w)
        boot = (resampled @ w) / hist.trials
        stderr = float(boot.std(ddof=1))
        gsizes = groups.sum(axis=0)
        gmeans = (w @ groups) / np.maximum(gsizes, 1)
        mom = float(np.median(gmeans))
        theory = fluctuation_moment(hist.p, params.chi, lam) if lam else 1.0
        moments.append({"lambda": list(lam), "empirical": empirical,
                        "stderr": stderr, "theory": theory})
        diagnostics[f"median_of_means[{','.join(map(str, lam))}]"] = mom
    return FitReport(
        moments=moments, diagnostics=diagnostics,
        config={"params": {"p": params.p, "d": params.d, "zeta": params.zeta,
                           "chi0": params.chi0, "chi": params.chi},
                "histogram": hist.config})


def table_csv(report: FitReport) -> str:
    lines = ["x,empirical,theory"]
    for row in report.table:
        lines.append(f"{row['x']},{format_float(row['empirical'])},"
                     f"{format_float(row['theory'])}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# canonical JSON


def format_float(x: float) -> str:
    """17-significant-digit decimal that round-trips float64 exactly."""
    if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
        raise NumericalError(f"cannot serialize {x}")
    s = format(float(x), ".17g")
    if not any(c in s for c in ".e"):
        s += ".0"
    return s


def canonical_dumps(obj) -> str:
    """Sorted keys, fixed float formatting; byte-stable across runs."""
    return _canon(obj)


def _canon(obj) -> str:
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        return "{" + ",".join(f"{json.dumps(str(k))}:{_canon(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_canon(v) for v in obj) + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    raise ValidationError(f"cannot serialize {type(obj)!r} canonically")


def canonical_bytes(obj: dict) -> bytes:
    """Canonical form used for determinism checks: timestamp excluded."""
    trimmed = {k: v for k, v in obj.items() if k != "timestamp"}
    return canonical_dumps(trimmed).encode()


def write_json_file(path: str, obj: dict):
    stamped = dict(obj)
    stamped["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(path, "w") as fh:
        fh.write(canonical_dumps(stamped) + "\n")


def read_json_file(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read JSON file {path}: {exc}") from exc
