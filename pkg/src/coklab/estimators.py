"""Monte Carlo and exact-DP estimators for the limit quantities.

Two deliberately different routes to the same numbers:

* ``estimate_chi0`` samples kernel-candidate vectors and multiplies
  exact prefix vanishing probabilities (no linear algebra, low
  variance);
* ``estimate_hom_moment`` samples matrices and counts homomorphisms
  from the cokernel, the quantity whose n^-|G| rescaling converges to
  chi0^l MC(G)/l!.

``exact_moment_symmetric`` removes Monte Carlo error entirely for the
symmetric entry family via an O(n^2) dynamic program over (prefix
length, number of nonzero coordinates).

Seeding contract: work is split into fixed-size blocks; block b uses
the substream SeedSequence(entropy=seed, spawn_key=(b,)). Results are
accumulated in block order, so identical (seed, parameters) give
bit-identical estimates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gf2
from .entrydist import CharacterTable, EntryDist
from .errors import ResourceGuardError, ValidationError
from .pgroup import as_partition, conjugate, group_order_exponent
from .plinalg import (TriMatrix, invariant_valuations, rank_profile,
                      sample_planes, sample_tri_matrix)

_CHI0_BLOCK = 4096  # fixed: part of the reproducibility contract
_EXACT_MOMENT_GUARD = 100_000


def substream(seed: int, index: int) -> np.random.Generator:
    """Deterministic per-block generator; independent of scheduling."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class EstimateResult:
    estimate: float
    stderr: float
    trials: int
    n: int
    seed: int
    diagnostics: dict = field(default_factory=dict)


def estimate_chi0(dist: EntryDist, n: int, trials: int, seed: int) -> EstimateResult:
    """Monte Carlo estimate of E|{v in F_p^n : v_1 != 0, L_n v = 0}|.

    Samples v uniformly with v_1 != 0 and averages the exact product
    prod_i p * vanish_prob(v_{<=i}); the estimate is (p-1)/p times that
    mean.  Unbiased for the finite-n quantity, which converges to chi0.
    """
    if dist.precision != 1:
        raise ValidationError("chi0 depends only on xi mod p; pass a precision-1 law")
    if trials < 2:
        raise ValidationError("need at least 2 trials for a standard error")
    if n < 1:
        raise ValidationError("need n >= 1")
    p = dist.p
    table = CharacterTable(dist, (1,))
    phi = table.phi  # (p, p): phi[w, g]
    values = np.empty(trials)
    done = 0
    block = 0
    while done < trials:
        m = min(_CHI0_BLOCK, trials - done)
        rng = substream(seed, block)
        prods = np.ones((m, p), dtype=np.complex128)
        y = np.ones(m)
        for i in range(n):
            if i == 0:
                v = rng.integers(1, p, size=m)
            else:
                v = rng.integers(0, p, size=m)
            prods *= phi[:, v].T
            tau = np.maximum(prods.sum(axis=1).real / p, 0.0)
            y *= p * tau
        values[done:done + m] = y
        done += m
        block += 1
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    scale = (p - 1) / p
    return EstimateResult(
        estimate=scale * mean,
        stderr=scale * sd / np.sqrt(trials),
        trials=trials,
        n=n,
        seed=seed,
        diagnostics={
            "max_product": float(values.max()),
            "mean_product": mean,
            "heavy_tail_ratio": float(values.max() / mean) if mean else float("inf"),
        },
    )


def exact_moment_symmetric(p: int, alpha: float, n: int,
                           restrict_first_nonzero: bool = False) -> float:
    """E|{v in F_p^n : L_n v = 0}| exactly, for the symmetric entry family.

    P(L_n v = 0) = prod_i vanish_prob(v_{<=i}) depends on v only through
    the running count of nonzero coordinates (vanish_prob = beta_k / p
    for k nonzeros), so a DP over (prefix length, nonzero count) sums
    all p^n vectors in O(n^2).  The all-zero vector contributes exactly
    1; callers subtract it before rescaling by n.

    With restrict_first_nonzero the sum runs over v with v_1 != 0,
    matching the estimate_chi0 target.
    """
    if n < 1 or n > _EXACT_MOMENT_GUARD:
        raise ResourceGuardError(f"n = {n} outside (0, {_EXACT_MOMENT_GUARD}]")
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0,1), got {alpha}")
    q = (p * alpha - 1.0) / (p - 1.0)
    ks = np.arange(n + 1, dtype=np.float64)
    beta = 1.0 + (p - 1.0) * np.power(q, ks)
    beta[0] = p  # the empty-support prefix has vanishing probability 1
    tau = beta / p
    W = np.zeros(n + 1)
    W[0] = 1.0
    for i in range(n):
        nxt = W.copy()
        nxt[1:] += (p - 1.0) * W[:-1]
        W = nxt * tau
        if i == 0 and restrict_first_nonzero:
            W[0] = 0.0
    return float(W.sum())


def _hom_exponent_from_profile(profile, mu_conj) -> int:
    """log_p |Hom(cok, G_mu)| = sum_j mu'_j * rank(p^{j-1} cok).

    rank(p^{j-1} cok) counts invariant factors of valuation >= j plus
    the free rank, which is exactly what Hom into a group of exponent
    p^{mu_1} sees; truncated valuations >= E behave like free summands
    whenever mu_1 <= E.
    """
    return sum(mc * r for mc, r in zip(mu_conj, profile))


def estimate_hom_moment(dist: EntryDist, G, n: int, trials: int,
                        seed: int) -> EstimateResult:
    """Monte Carlo estimate of E |Hom(cok(L_n), G)| / n^log_p|G|."""
    mu = as_partition(G)
    ell = group_order_exponent(mu)
    if not mu:
        return EstimateResult(estimate=1.0, stderr=0.0, trials=trials, n=n,
                              seed=seed, diagnostics={"exact": 1.0})
    if trials < 2:
        raise ValidationError("need at least 2 trials for a standard error")
    p = dist.p
    mu1 = mu[0]
    if mu1 > dist.precision:
        raise ValidationError(
            f"exponent p^{mu1} of G exceeds entry precision p^{dist.precision}")
    mu_conj = conjugate(mu)
    fast = p == 2 and mu1 <= 2
    values = np.empty(trials)
    scale = float(n) ** ell
    for t in range(trials):
        rng = substream(seed, t)
        profile = None
        if fast:
            planes = sample_planes(dist, n, rng, mu1)
            if mu1 == 1:
                c, _ = gf2.kernel_tracker(planes[0], n, gf2.TRACKER_CAPACITY)
                if c >= 0:
                    profile = (c,)
                else:
                    profile = (int(gf2.corank_packed(planes[0], n)),)
            else:
                cv, ge2 = gf2.count_low_valuations(planes[0], planes[1], n,
                                                   gf2.TRACKER_CAPACITY)
                if cv >= 0:
                    profile = (cv, ge2)
                else:
                    M = _matrix_from_planes(planes, n, p)
                    profile = rank_profile(invariant_valuations(M), mu1)
        if profile is None:
            M = sample_tri_matrix(dist, n, rng)
            profile = rank_profile(invariant_valuations(M), mu1, E=dist.precision)
        e = _hom_exponent_from_profile(profile, mu_conj)
        values[t] = float(p) ** e / scale
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    return EstimateResult(
        estimate=mean,
        stderr=sd / np.sqrt(trials),
        trials=trials,
        n=n,
        seed=seed,
        diagnostics={
            "max_value": float(values.max()),
            "heavy_tail_ratio": float(values.max() / mean) if mean else float("inf"),
            "log_p_group_order": float(ell),
        },
    )


def _matrix_from_planes(planes, n: int, p: int) -> TriMatrix:
    rows = np.zeros((n, n), dtype=np.int64)
    for b, plane in enumerate(planes):
        rows += gf2.unpack_rows(plane, n) << b
    return TriMatrix(n=n, p=p, E=len(planes), rows=rows)
