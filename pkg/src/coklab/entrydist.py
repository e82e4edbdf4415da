"""The entry random variable xi modulo p^E and its character transform.

Everything this package measures is a function of the matrix entries
modulo p^E, so the entry law is represented exactly as a finite
probability vector on residues 0..p^E-1.  The standing assumption
0 < P(xi = 0 mod p) < 1 is enforced at construction.

The vanishing probability of a weighted combination,

    vanish_prob(v) = P(sum_i xi_i v_i = 0 in H),

is computed exactly (to float rounding) through the discrete Fourier
inversion |H| P(sum = g) = sum_chars rho(-g) prod_i E[rho(xi v_i)].
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .pgroup import as_partition
from .plinalg import check_precision, check_prime

_PROB_TOL = 1e-12
_GROUP_GUARD = 1 << 12


@dataclass(frozen=True)
class EntryDist:
    """Law of the entry variable on residues mod p^precision.

    ``kind`` ("uniform" | "symmetric" | "general") is a sampling hint
    used by the bit-plane fast paths; it never affects semantics.
    """

    p: int
    precision: int
    probs: np.ndarray
    kind: str = "general"
    alpha: float | None = None

    def __post_init__(self):
        check_prime(self.p)
        check_precision(self.p, self.precision)
        pe = self.p ** self.precision
        if self.probs.shape != (pe,):
            raise ValidationError(f"need {pe} probabilities, got {self.probs.shape}")
        if np.any(self.probs < 0):
            raise ValidationError("probabilities must be nonnegative")
        total = float(self.probs.sum())
        if abs(total - 1.0) > _PROB_TOL:
            raise ValidationError(f"probabilities sum to {total}, not 1")
        p0 = self.prob_divisible_by_p()
        if not (_PROB_TOL < p0 < 1.0 - _PROB_TOL):
            raise ValidationError(
                f"P(xi = 0 mod p) = {p0} violates the standing assumption 0 < . < 1")
        self.probs.flags.writeable = False

    def prob_divisible_by_p(self) -> float:
        return float(self.probs[:: self.p].sum()) if self.p > 1 else 1.0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        """Residues drawn with the declared probabilities (inverse CDF)."""
        pe = self.p ** self.precision
        if self.kind == "uniform":
            return rng.integers(0, pe, size=size, dtype=np.int64)
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        u = rng.random(size=size)
        return np.searchsorted(cdf, u, side="right").astype(np.int64)

    def reduce_mod_p(self) -> "EntryDist":
        """Marginal law mod p (precision-1 distribution)."""
        if self.precision == 1:
            return self
        probs = np.zeros(self.p)
        for r in range(self.p ** self.precision):
            probs[r % self.p] += self.probs[r]
        return EntryDist(p=self.p, precision=1, probs=probs,
                         kind=self.kind, alpha=self.alpha)


def from_probs(p: int, precision: int, mapping: dict, kind: str = "general",
               alpha: float | None = None) -> EntryDist:
    pe = check_prime(p) ** check_precision(p, precision)
    probs = np.zeros(pe)
    for r, w in mapping.items():
        r = int(r)
        if not 0 <= r < pe:
            raise ValidationError(f"residue {r} out of range [0, {pe})")
        if w < 0:
            raise ValidationError(f"negative weight for residue {r}")
        probs[r] += float(w)
    total = probs.sum()
    if total <= 0:
        raise ValidationError("weights must have positive total")
    return EntryDist(p=p, precision=precision, probs=probs / total,
                     kind=kind, alpha=alpha)


def make_symmetric_dist(p: int, alpha: float, precision: int = 1) -> EntryDist:
    """Mass alpha on the zero class mod p, (1-alpha)/(p-1) on each other class.

    For precision > 1 each class is spread uniformly over its p^(E-1)
    lifts; the mod-p marginal (the only thing chi0 depends on) is
    unchanged.
    """
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0,1), got {alpha}")
    p = check_prime(p)
    E = check_precision(p, precision)
    pe = p ** E
    lift = p ** (E - 1)
    other = (1.0 - alpha) / (p - 1)
    probs = np.array([(alpha if r % p == 0 else other) / lift for r in range(pe)])
    return EntryDist(p=p, precision=E, probs=probs, kind="symmetric", alpha=alpha)


def uniform_dist(p: int, precision: int = 1) -> EntryDist:
    pe = check_prime(p) ** check_precision(p, precision)
    return EntryDist(p=p, precision=precision, probs=np.full(pe, 1.0 / pe),
                     kind="uniform", alpha=1.0 / p)


def parse_dist(text: str, p: int, precision: int = 1) -> EntryDist:
    """CLI syntax: "r1:w1,r2:w2,..." | "symmetric:alpha=A" | "uniform"."""
    text = text.strip()
    if text == "uniform":
        return uniform_dist(p, precision)
    if text.startswith("symmetric:"):
        body = text[len("symmetric:"):]
        if not body.startswith("alpha="):
            raise ValidationError(f"expected symmetric:alpha=VALUE, got {text!r}")
        try:
            alpha = float(body[len("alpha="):])
        except ValueError as exc:
            raise ValidationError(f"bad alpha in {text!r}") from exc
        return make_symmetric_dist(p, alpha, precision)
    mapping = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            r, w = item.split(":")
            mapping[int(r)] = float(w)
        except ValueError as exc:
            raise ValidationError(f"bad residue:weight entry {item!r}") from exc
    if not mapping:
        raise ValidationError(f"empty distribution spec {text!r}")
    return from_probs(p, precision, mapping)


def group_elements(group, p: int) -> list:
    """All elements of (+)_t Z/p^{mu_t} as coordinate tuples."""
    mu = as_partition(group)
    return list(itertools.product(*[range(p ** m) for m in mu]))


class CharacterTable:
    """phi[w, g] = E[rho_w(xi * g)] for every character w and element g.

    Characters of H = (+) Z/p^{mu_t} are indexed by elements w via
    rho_w(g) = exp(2 pi i sum_t w_t g_t / p^{mu_t}).  Since rho_w(r*g)
    = z^r with z = rho_w(g), phi only depends on the pairing value
    sum_t w_t g_t p^{mu_1 - mu_t} mod p^{mu_1}, and a table of the
    characteristic function of xi on p^{mu_1}-th roots of unity covers
    all (w, g) pairs.
    """

    def __init__(self, dist: EntryDist, group):
        mu = as_partition(group)
        self.dist = dist
        self.group = mu
        self.p = dist.p
        exponent = mu[0] if mu else 0
        if exponent > dist.precision:
            raise ValidationError(
                f"group exponent p^{exponent} exceeds entry precision p^{dist.precision}")
        order = self.p ** sum(mu)
        if order > _GROUP_GUARD:
            raise ValidationError(f"group order {order} exceeds character-table guard")
        self.order = order
        self.elements = group_elements(mu, self.p)
        self.index = {g: i for i, g in enumerate(self.elements)}
        q = self.p ** exponent if mu else 1
        self._q = q
        res = np.arange(self.p ** dist.precision)
        roots = np.exp(2j * np.pi * np.outer(np.arange(q), res % q) / q)
        charfun = roots @ dist.probs  # E[exp(2 pi i k xi / q)] for k = 0..q-1
        if mu:
            strides = np.array([self.p ** (exponent - m) for m in mu], dtype=np.int64)
            elems = np.array(self.elements, dtype=np.int64)
            pairing = (elems * strides[None, :]) @ elems.T % q
        else:
            pairing = np.zeros((1, 1), dtype=np.int64)
        self.pairing = pairing
        self.phi = charfun[pairing]
        self.rho = np.exp(2j * np.pi * pairing / q)

    def kernel_mask(self) -> np.ndarray:
        """mask[w, g] True iff g lies in the kernel of character w."""
        return self.pairing == 0


def vanish_prob(dist: EntryDist, group, v, target=None) -> float:
    """P(sum_i xi_i v_i = target in the group), i.i.d. xi_i ~ dist.

    ``v`` is a sequence of coordinate tuples; ``target`` defaults to 0.
    Exact up to an error budget of |H| * len(v) * 1e-14.
    """
    table = CharacterTable(dist, group)
    return _vanish_from_table(table, v, target)


def _vanish_from_table(table: CharacterTable, v, target=None) -> float:
    idx = [table.index[tuple(g)] for g in v]
    prods = np.ones(table.order, dtype=np.complex128)
    for i in idx:
        prods *= table.phi[:, i]
    if target is not None and any(target):
        prods = prods * np.conj(table.rho[:, table.index[tuple(target)]])
    total = prods.sum() / table.order
    if abs(total.imag) > table.order * max(len(idx), 1) * 1e-14:
        raise ValidationError(f"character sum has imaginary part {total.imag}")
    return min(max(float(total.real), 0.0), 1.0)


class VanishTracker:
    """Running prefix vanishing probabilities in O(|H|) per element.

    Maintains prod_i phi[w, v_i] per character w; ``push`` appends one
    element and returns vanish_prob of the extended prefix.
    """

    def __init__(self, dist: EntryDist, group):
        self.table = CharacterTable(dist, group)
        self.reset()

    def reset(self):
        self._prods = np.ones(self.table.order, dtype=np.complex128)

    def push(self, element) -> float:
        self._prods *= self.table.phi[:, self.table.index[tuple(element)]]
        return float(self._prods.sum().real) / self.table.order


def spectral_gap(dist: EntryDist, group) -> float:
    """max |phi[w, g]| over nontrivial characters w and g outside ker w.

    Diagnostic only: strict inequality < 1 is the testable shadow of the
    exponential character bound; no quantitative claim is made.
    """
    table = CharacterTable(dist, group)
    outside = ~table.kernel_mask()
    outside[0, :] = False  # trivial character
    if not outside.any():
        return 0.0
    return float(np.abs(table.phi[outside]).max())
