"""Linear algebra over F_p and over the truncated local ring Z/p^E.

The two workhorses are mod-p corank (bit-packed for p = 2) and
elimination with minimal-valuation pivoting, which is a valid Smith
normal form algorithm over Z/p^E because every element of that ring is
a unit times a power of p.  Valuations >= E are indistinguishable from
infinity after truncation; they are reported as ``math.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import gf2
from .errors import NumericalError, ValidationError

INF = math.inf

# int64 products stay exact below this modulus bound
_INT64_SAFE_MODULUS = 1 << 31


def check_prime(p: int) -> int:
    p = int(p)
    if p < 2:
        raise ValidationError(f"p must be a prime, got {p}")
    f = 2
    while f * f <= p:
        if p % f == 0:
            raise ValidationError(f"p must be a prime, got {p}")
        f += 1
    return p


def check_precision(p: int, E: int) -> int:
    E = int(E)
    if E < 1:
        raise ValidationError(f"precision must be >= 1, got {E}")
    if p ** E >= (1 << 62):
        raise ValidationError(f"p^E must stay below 2^62, got p={p} E={E}")
    return E


@dataclass(frozen=True)
class TriMatrix:
    """Lower triangular matrix of residues mod p^E.

    ``rows`` is a dense (n, n) array; entries above the diagonal are
    zero.  dtype is int64 when p^E allows exact int64 products, object
    (Python ints) otherwise.
    """

    n: int
    p: int
    E: int
    rows: np.ndarray

    def __post_init__(self):
        check_prime(self.p)
        check_precision(self.p, self.E)
        if self.rows.shape != (self.n, self.n):
            raise ValidationError("rows must be an (n, n) array")

    @classmethod
    def from_rows(cls, rows, p: int, E: int) -> "TriMatrix":
        p = check_prime(p)
        E = check_precision(p, E)
        pe = p ** E
        n = len(rows)
        dtype = np.int64 if pe < _INT64_SAFE_MODULUS else object
        M = np.zeros((n, n), dtype=dtype)
        for i, row in enumerate(rows):
            if len(row) > i + 1:
                raise ValidationError(f"row {i} has {len(row)} entries, expected <= {i + 1}")
            for j, x in enumerate(row):
                M[i, j] = int(x) % pe
        return cls(n=n, p=p, E=E, rows=M)


def sample_tri_matrix(dist, n: int, rng: np.random.Generator) -> TriMatrix:
    """Draw an n x n lower triangular matrix with i.i.d. entries from dist."""
    pe = dist.p ** dist.precision
    res = dist.sample(rng, size=(n, n))
    dtype = np.int64 if pe < _INT64_SAFE_MODULUS else object
    M = np.tril(res).astype(dtype)
    return TriMatrix(n=n, p=dist.p, E=dist.precision, rows=M)


_UINT64_MAX = np.iinfo(np.uint64).max


def sample_planes(dist, n: int, rng: np.random.Generator, nplanes: int) -> list:
    """Packed bit planes of a random lower triangular matrix mod 2^nplanes.

    Only meaningful for p = 2.  Uniform and symmetric entry laws have
    independent bit planes (the symmetric family lifts uniformly within
    each mod-2 class), so those are drawn as raw 64-bit words / biased
    bits; general laws sample residues and split them into planes.
    Entries above the diagonal are zeroed.
    """
    if dist.p != 2:
        raise ValidationError("bit planes require p = 2")
    if nplanes > dist.precision:
        raise ValidationError(
            f"entry law has precision {dist.precision}, cannot provide {nplanes} planes")
    nw = gf2.nwords(n)
    if dist.kind == "uniform":
        planes = [rng.integers(0, _UINT64_MAX, size=(n, nw), dtype=np.uint64,
                               endpoint=True) for _ in range(nplanes)]
    elif dist.kind == "symmetric":
        bits = rng.random((n, n)) < (1.0 - dist.alpha)
        planes = [gf2.pack_rows(bits)]
        planes.extend(rng.integers(0, _UINT64_MAX, size=(n, nw), dtype=np.uint64,
                                   endpoint=True) for _ in range(1, nplanes))
    else:
        res = dist.sample(rng, size=(n, n))
        planes = [gf2.pack_rows((res >> b) & 1) for b in range(nplanes)]
    mask = _lower_mask_cached(n)
    return [plane & mask for plane in planes]


_MASK_CACHE: dict = {}


def _lower_mask_cached(n: int) -> np.ndarray:
    mask = _MASK_CACHE.get(n)
    if mask is None:
        mask = gf2.lower_mask(n)
        mask.flags.writeable = False
        if len(_MASK_CACHE) < 16:
            _MASK_CACHE[n] = mask
    return mask


@dataclass(frozen=True)
class CokernelType:
    """Multiset of p-adic valuations of the invariant factors.

    ``math.inf`` encodes valuation >= E (free rank and deep torsion are
    deliberately conflated by the truncation; only rank(p^{i-1} cok)
    for i <= E is ever derived from this).
    """

    n: int
    valuations: tuple = field(default=())

    def __post_init__(self):
        if len(self.valuations) != self.n:
            raise ValidationError("need one valuation per matrix column")

    def count_less_than(self, i: int) -> int:
        return sum(1 for v in self.valuations if v < i)


def rank_profile(ct: CokernelType, d: int, E: int | None = None) -> tuple:
    """(rank(p^{i-1} cok))_{i=1..d} = (n - #{valuations < i})_{i=1..d}."""
    if E is not None and d > E:
        raise ValidationError(f"rank profile needs d <= E, got d={d} E={E}")
    prof = tuple(ct.n - ct.count_less_than(i) for i in range(1, d + 1))
    for a, b in zip(prof, prof[1:]):
        if a < b:
            raise NumericalError(f"rank profile must be weakly decreasing, got {prof}")
    return prof


def corank_mod_p(M: TriMatrix) -> int:
    """dim ker of the matrix reduced mod p."""
    if M.n == 0:
        return 0
    if M.p == 2:
        plane = gf2.pack_rows(np.asarray(M.rows % 2, dtype=np.int64))
        return int(gf2.corank_packed(plane, M.n))
    return _corank_dense(np.asarray(M.rows % M.p, dtype=np.int64), M.p)


def _corank_dense(A: np.ndarray, p: int) -> int:
    M = A % p
    nr, nc = M.shape
    r = 0
    for col in range(nc):
        if r == nr:
            break
        nz = np.nonzero(M[r:, col])[0]
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            M[[r, piv]] = M[[piv, r]]
        inv = pow(int(M[r, col]), -1, p)
        below = M[r + 1:, col]
        sel = np.nonzero(below)[0]
        if sel.size:
            factors = (below[sel] * inv) % p
            M[r + 1 + sel] = (M[r + 1 + sel] - factors[:, None] * M[r][None, :]) % p
        r += 1
    return nr - r


def invariant_valuations(M: TriMatrix) -> CokernelType:
    """Valuations of the invariant factors of M over Z/p^E.

    Elimination picks the remaining entry of minimal valuation as pivot
    (ties: smallest row index, then smallest column index) and clears
    its row and column; this yields the Smith form over the local ring.
    """
    p, E, n = M.p, M.E, M.n
    if n == 0:
        return CokernelType(n=0, valuations=())
    if p ** E < _INT64_SAFE_MODULUS and M.rows.dtype != object:
        raw = _valuations_numpy(np.asarray(M.rows, dtype=np.int64), p, E)
    else:
        raw = valuation_pivot_valuations([list(map(int, r)) for r in M.rows], n, p, E)
    vals = tuple(sorted(INF if v >= E else v for v in raw))
    return CokernelType(n=n, valuations=vals)


def _val_matrix(A: np.ndarray, p: int, E: int) -> np.ndarray:
    vals = np.full(A.shape, E, dtype=np.int64)
    x = A.copy()
    nz = x != 0
    vals[nz] = 0
    for _ in range(E):
        div = (x != 0) & (x % p == 0)
        if not div.any():
            break
        x[div] //= p
        vals[div] += 1
    vals[vals > E] = E
    return vals


def _valuations_numpy(A: np.ndarray, p: int, E: int) -> list:
    pe = p ** E
    M = A % pe
    nr, nc = M.shape
    rows_act = list(range(nr))
    cols_act = list(range(nc))
    out = []
    while rows_act and cols_act:
        ridx = np.array(rows_act)
        cidx = np.array(cols_act)
        vals = _val_matrix(M[np.ix_(ridx, cidx)], p, E)
        flat = int(np.argmin(vals))  # row-major argmin = smallest row, then column
        ri, ci = divmod(flat, vals.shape[1])
        v = int(vals[ri, ci])
        if v >= E:
            break
        i0, j0 = rows_act[ri], cols_act[ci]
        u = int(M[i0, j0]) // p ** v
        uinv = pow(u, -1, p ** (E - v))
        colv = M[ridx, j0]
        sel = ridx[(colv != 0) & (ridx != i0)]
        if sel.size:
            factors = ((M[sel, j0] // p ** v) * uinv) % (p ** (E - v))
            M[sel] = (M[sel] - factors[:, None] * M[i0][None, :]) % pe
        rowv = M[i0, cidx]
        selc = cidx[(rowv != 0) & (cidx != j0)]
        if selc.size:
            factors = ((M[i0, selc] // p ** v) * uinv) % (p ** (E - v))
            M[:, selc] = (M[:, selc] - M[:, j0][:, None] * factors[None, :]) % pe
        out.append(v)
        rows_act.remove(i0)
        cols_act.remove(j0)
    out.extend([E] * min(len(rows_act), len(cols_act)))
    return out


def valuation_pivot_valuations(rows: list, ncols: int, p: int, E: int) -> list:
    """Exact big-integer variant of the valuation-pivot elimination.

    Works for any modulus p^E; shared by the p-group module (subgroup
    type identification) and by TriMatrix when int64 would overflow.
    Returns one valuation per eliminated position, E meaning >= E.
    """
    pe = p ** E

    def val(x):
        if x == 0:
            return E
        v = 0
        while x % p == 0 and v < E:
            x //= p
            v += 1
        return v

    M = [[int(x) % pe for x in r] for r in rows]
    rows_act = list(range(len(M)))
    cols_act = list(range(ncols))
    out = []
    while rows_act and cols_act:
        bestv, i0, j0 = E, None, None
        for i in rows_act:
            Mi = M[i]
            for j in cols_act:
                v = val(Mi[j])
                if v < bestv:
                    bestv, i0, j0 = v, i, j
                    if v == 0:
                        break
            if bestv == 0:
                break
        if i0 is None:
            break
        v = bestv
        pv = p ** v
        u = M[i0][j0] // pv
        mod = p ** (E - v)
        uinv = pow(u, -1, mod)
        M0 = M[i0]
        for i in rows_act:
            if i == i0:
                continue
            Mi = M[i]
            b = Mi[j0]
            if b:
                f = ((b // pv) * uinv) % mod
                for j in cols_act:
                    Mi[j] = (Mi[j] - f * M0[j]) % pe
        for j in cols_act:
            if j == j0:
                continue
            b = M0[j]
            if b:
                f = ((b // pv) * uinv) % mod
                for i in rows_act:
                    Mi = M[i]
                    Mi[j] = (Mi[j] - f * Mi[j0]) % pe
        out.append(v)
        rows_act.remove(i0)
        cols_act.remove(j0)
    out.extend([E] * min(len(rows_act), len(cols_act)))
    return out


def exact_snf_valuations(rows, p: int) -> list:
    """p-adic valuations of the Smith normal form diagonal, exactly over Z.

    Reference oracle: no truncation, Euclidean row/column reduction on
    Python big integers, always re-selecting the smallest nonzero entry
    as pivot (keeps coefficient growth in check).  ``math.inf`` marks
    zero invariant factors.  The sorted multiset of valuations of any
    unimodular diagonalization equals that of the Smith form
    (determinantal divisors argument), so no divisibility normalization
    pass is needed.
    """
    check_prime(p)
    M = [[int(x) for x in r] for r in rows]
    nr = len(M)
    nc = len(M[0]) if nr else 0
    k = min(nr, nc)
    vals: list = []
    t = 0
    while t < k:
        # move the smallest nonzero entry of the submatrix to (t, t)
        piv = None
        for i in range(t, nr):
            for j in range(t, nc):
                if M[i][j] and (piv is None or abs(M[i][j]) < abs(M[piv[0]][piv[1]])):
                    piv = (i, j)
        if piv is None:
            break
        if piv[0] != t:
            M[t], M[piv[0]] = M[piv[0]], M[t]
        if piv[1] != t:
            for r in M:
                r[t], r[piv[1]] = r[piv[1]], r[t]
        a = M[t][t]
        clean = True
        for i in range(t + 1, nr):
            if M[i][t]:
                q = M[i][t] // a
                for j in range(t, nc):
                    M[i][j] -= q * M[t][j]
                if M[i][t]:
                    clean = False
        if clean:
            for j in range(t + 1, nc):
                if M[t][j]:
                    q = M[t][j] // a
                    for i in range(t, nr):
                        M[i][j] -= q * M[i][t]
                    if M[t][j]:
                        clean = False
        if not clean:
            # a remainder smaller than the pivot exists; re-pick the pivot
            continue
        d = abs(a)
        v = 0
        while d % p == 0:
            d //= p
            v += 1
        vals.append(v)
        t += 1
    vals.extend([INF] * (k - t))
    return sorted(vals)


def dump_matrix(M: TriMatrix) -> str:
    """Debug dump: header "p E n", then one line per row (lower part)."""
    lines = [f"{M.p} {M.E} {M.n}"]
    for i in range(M.n):
        lines.append(" ".join(str(int(M.rows[i, j])) for j in range(i + 1)))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> TriMatrix:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValidationError("empty matrix dump")
    try:
        p, E, n = (int(x) for x in lines[0].split())
    except ValueError as exc:
        raise ValidationError(f"bad matrix header {lines[0]!r}") from exc
    if len(lines) != n + 1:
        raise ValidationError(f"expected {n} rows, got {len(lines) - 1}")
    rows = [[int(x) for x in ln.split()] for ln in lines[1:]]
    for i, row in enumerate(rows):
        if len(row) != i + 1:
            raise ValidationError(f"row {i} must have {i + 1} entries")
    return TriMatrix.from_rows(rows, p, E)
