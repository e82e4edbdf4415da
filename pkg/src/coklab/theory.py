"""Closed-form side of the limit law of centered rank fluctuations.

The d-dimensional limit law with parameters (p, chi) is pinned down by
its exponential moments

    E p^<X, lam> = ((p-1) chi)^|lam| / |lam|! * MC(G_{lam'}),

and for d = 1 it has an explicit pmf (an alternating q-series).  chi
is derived from the base intensity chi0 and the log-scale offset zeta
via chi = chi0 * p^-zeta / (p - 1); chi0 has a closed form (infinite
product) whenever the entry law is symmetric on the nonzero classes
mod p.

Series and products carry explicit truncation accounting (SeriesInfo).
The pmf's alternating series cancels catastrophically in the far right
tail (the true values decay superfactorially); when float64 loses the
value, evaluation transparently escalates to mpmath with enough digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp

from .errors import NumericalError, ValidationError
from .pgroup import as_partition, conjugate, group_order_exponent, maximal_chain_count
from .plinalg import check_prime

_EXP_UNDERFLOW = 745.0  # exp(-x) is 0.0 in float64 beyond this
_CANCEL_GUARD = 1e-10


@dataclass(frozen=True)
class SeriesInfo:
    """Truncation-error accounting for a series/product evaluation."""

    value: float
    terms: int
    tail_bound: float
    underflow: bool = False
    escalated_dps: int = 0


@dataclass(frozen=True)
class TheoryParams:
    """(p, d, zeta, chi0, chi) bundle with chi = chi0 * p^-zeta / (p-1)."""

    p: int
    d: int
    zeta: float
    chi0: float
    chi: float

    def __post_init__(self):
        check_prime(self.p)
        if self.d < 1:
            raise ValidationError(f"d must be >= 1, got {self.d}")
        if not 0.0 <= self.zeta < 1.0:
            raise ValidationError(f"zeta must lie in [0,1), got {self.zeta}")
        if not (0.0 < self.chi0 < math.inf):
            raise ValidationError(f"chi0 must lie in (0, inf), got {self.chi0}")
        expected = chi_from_zeta(self.p, self.chi0, self.zeta)
        if abs(self.chi - expected) > 1e-12 * max(1.0, abs(expected)):
            raise ValidationError(
                f"chi={self.chi} inconsistent with chi0*p^-zeta/(p-1)={expected}")

    @classmethod
    def from_chi0(cls, p: int, d: int, zeta: float, chi0: float) -> "TheoryParams":
        return cls(p=p, d=d, zeta=float(zeta), chi0=float(chi0),
                   chi=chi_from_zeta(p, chi0, zeta))


def chi_from_zeta(p: int, chi0: float, zeta: float) -> float:
    if not 0.0 <= zeta < 1.0:
        raise ValidationError(f"zeta must lie in [0,1), got {zeta}")
    if chi0 <= 0:
        raise ValidationError(f"chi0 must be positive, got {chi0}")
    return chi0 * float(p) ** (-zeta) / (p - 1)


def chi0_symmetric_info(p: int, alpha: float, tol: float = 1e-16) -> SeriesInfo:
    """chi0 = (p-1)/p * prod_i (p-1) beta_i / (p - beta_i).

    beta_i = 1 + (p-1) q^i with q = (p alpha - 1)/(p - 1); |q| < 1 so the
    factors tend to 1 geometrically.  Truncated when |factor - 1| < tol,
    with a geometric bound on the dropped log-tail.
    """
    check_prime(p)
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0,1), got {alpha}")
    q = (p * alpha - 1.0) / (p - 1.0)
    prod = 1.0
    i = 0
    dev = 0.0
    while i < 200000:
        i += 1
        beta = 1.0 + (p - 1.0) * q ** i
        if not 0.0 < beta < p:
            raise NumericalError(f"beta_{i} = {beta} escaped (0, p)")
        factor = (p - 1.0) * beta / (p - beta)
        prod *= factor
        dev = abs(factor - 1.0)
        if dev < tol:
            break
    value = (p - 1.0) / p * prod
    tail = 0.0 if q == 0.0 else 2.0 * dev * abs(q) / (1.0 - abs(q)) * value
    return SeriesInfo(value=value, terms=i, tail_bound=tail)


def chi0_symmetric(p: int, alpha: float, tol: float = 1e-16) -> float:
    return chi0_symmetric_info(p, alpha, tol).value


def _exact_ilog(n: int, p: int) -> int:
    """Largest e with p^e <= n, by exact integer comparison."""
    e = 0
    q = p
    while q <= n:
        q *= p
        e += 1
    return e


def centering(p: int, n: int, zeta: float) -> int:
    """floor(log_p(n) + zeta + 0.5), i.e. log_p(n) + zeta rounded to nearest.

    Floating log with an exactness guard: near-integer values are
    recomputed from the exact integer part of log_p(n).
    """
    check_prime(p)
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    x = math.log2(n) / math.log2(p) + zeta + 0.5
    if abs(x - round(x)) < 1e-9:
        e = _exact_ilog(n, p)
        if p ** e == n:
            x = e + zeta + 0.5
    return math.floor(x)


def zeta_from_n(p: int, n: int) -> float:
    """Fractional part of -log_p(n): the natural zeta for a single n."""
    check_prime(p)
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    e = _exact_ilog(p=p, n=n)
    if p ** e == n:
        return 0.0
    frac = math.log2(n) / math.log2(p) - e
    frac = min(max(frac, 0.0), 1.0)
    return 1.0 - frac


def _prefactor_product(p: int, tol: float) -> tuple:
    """(prod_i (1 - p^-i), terms, tail bound on the dropped log-tail)."""
    prod = 1.0
    i = 0
    while True:
        i += 1
        t = float(p) ** (-i)
        prod *= 1.0 - t
        if t < tol:
            break
    tail = float(p) ** (-i - 1) / (1.0 - 1.0 / p)
    return prod, i, tail


def _pmf_terms_f64(p: int, chi: float, x: int, term_tol: float):
    """Kahan-summed alternating series; returns (sum, max|term|, terms, all_underflowed)."""
    logp = math.log(p)
    logchi = math.log(chi)
    s = 0.0
    comp = 0.0
    qm = 1.0
    sign = 1.0
    max_abs = 0.0
    consec = 0
    m = 0
    any_nonzero = False
    while m < 100000:
        if m:
            qm *= 1.0 - float(p) ** (-m)
        la = logchi + (m - x) * logp
        eterm = math.exp(-math.exp(la)) if la < math.log(_EXP_UNDERFLOW) else 0.0
        binom = float(p) ** (-(m * (m - 1) // 2))
        term = eterm * sign * binom / qm
        if term != 0.0:
            any_nonzero = True
        y = term - comp
        t = s + y
        comp = (t - s) - y
        s = t
        max_abs = max(max_abs, abs(term))
        if abs(term) < term_tol * (abs(s) + 1e-300):
            consec += 1
            if consec >= 3:
                break
        else:
            consec = 0
        sign = -sign
        m += 1
    return s, max_abs, m + 1, not any_nonzero


def _pmf_mp(p: int, chi: float, x: int, dps: int):
    """Same series in mpmath at the requested working precision."""
    with mp.workdps(dps):
        pm = mp.mpf(p)
        chim = mp.mpf(chi)
        s = mp.mpf(0)
        qm = mp.mpf(1)
        maxabs = mp.mpf(0)
        m = 0
        while True:
            if m:
                qm *= 1 - pm ** (-m)
            term = (mp.exp(-chim * pm ** (m - x)) * (-1) ** m
                    * pm ** (-(m * (m - 1) // 2)) / qm)
            s += term
            maxabs = max(maxabs, abs(term))
            if abs(term) < mp.mpf(10) ** (-dps - 10) * (abs(s) + mp.mpf(10) ** (-dps * 3)):
                if m > 3:
                    break
            m += 1
            if m > 100000:
                break
        pref = mp.mpf(1)
        i = 1
        while True:
            t = pm ** (-i)
            pref *= 1 - t
            if t < mp.mpf(10) ** (-dps - 10):
                break
            i += 1
        return s / pref, maxabs


def fluctuation_pmf_info(p: int, chi: float, x: int,
                         term_tol: float = 1e-15,
                         prefactor_tol: float = 1e-16) -> SeriesInfo:
    """P(X = x) for the d = 1 limit law, with truncation accounting.

    Adaptive truncation: stop once three consecutive terms fall below
    term_tol * |partial sum|.  When the alternating series cancels past
    float64 (right tail: the value decays superfactorially while the
    terms stay O(1)), the evaluation escalates to mpmath with enough
    digits and the result is rounded back to float.
    """
    check_prime(p)
    if not chi > 0:
        raise ValidationError(f"chi must be positive, got {chi}")
    x = int(x)
    prefactor, pref_terms, pref_tail = _prefactor_product(p, prefactor_tol)
    s, max_abs, terms, underflow = _pmf_terms_f64(p, chi, x, term_tol)
    if underflow:
        return SeriesInfo(value=0.0, terms=terms, tail_bound=0.0, underflow=True)
    escalated = 0
    if abs(s) < max_abs * _CANCEL_GUARD:
        dps = 40
        while True:
            s_mp, max_mp = _pmf_mp(p, chi, x, dps)
            if abs(s_mp) > max_mp * mp.mpf(10) ** (-(dps - 20)) or dps >= 2560:
                break
            dps *= 2
        escalated = dps
        value = float(s_mp)
        if value < 0.0:
            if value < -1e-12:
                raise NumericalError(f"pmf({x}) evaluated to {value} < -1e-12")
            value = 0.0
        return SeriesInfo(value=value, terms=terms, tail_bound=pref_tail,
                          underflow=(value == 0.0 and s_mp > 0), escalated_dps=escalated)
    value = s / prefactor
    if value < 0.0:
        if value < -1e-12:
            raise NumericalError(f"pmf({x}) evaluated to {value} < -1e-12")
        value = 0.0
    tail = pref_tail + term_tol * abs(value)
    return SeriesInfo(value=value, terms=terms, tail_bound=tail)


def fluctuation_pmf(p: int, chi: float, x: int, term_tol: float = 1e-15) -> float:
    return fluctuation_pmf_info(p, chi, x, term_tol=term_tol).value


def fluctuation_moment(p: int, chi: float, lam) -> float:
    """E p^<X, lam> = ((p-1) chi)^|lam| / |lam|! * MC(G_{lam'})."""
    check_prime(p)
    if not chi > 0:
        raise ValidationError(f"chi must be positive, got {chi}")
    lam = as_partition(lam)
    k = group_order_exponent(lam)
    mc = maximal_chain_count(conjugate(lam), p)
    try:
        return ((p - 1) * chi) ** k / math.factorial(k) * float(mc)
    except OverflowError as exc:
        raise NumericalError(f"moment overflows float range for lam={lam}") from exc
