"""Bit-packed linear algebra over GF(2) and its mod-4 lift.

Rows of a lower triangular matrix are packed LSB-first into uint64 words
(bit j of word w in row i is entry (i, 64*w + j)).  Two access patterns:

* ``corank_packed`` runs plain Gaussian elimination with word-wide XOR.
* ``kernel_tracker`` streams rows top to bottom and maintains a basis of
  the right kernel of the leading block.  For a random triangular matrix
  the kernel stays O(log n)-dimensional, which makes a trial O(n^2 c/64)
  instead of O(n^3/64); this is the path that makes large Monte Carlo
  runs affordable.
* ``count_low_valuations`` combines two kernel sweeps with a mod-4 lift
  to additionally count invariant factors of valuation >= 2 without a
  full Smith-form elimination.

All numba kernels are deterministic: pivot choices are always the first
eligible index.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_FULL = np.uint64(0xFFFFFFFFFFFFFFFF)
_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)

# Kernel bases larger than this make the tracker slower than plain
# elimination; callers fall back when the tracker reports -1.
TRACKER_CAPACITY = 96


def nwords(n: int) -> int:
    return (n + 63) // 64


def lower_mask(n: int) -> np.ndarray:
    """(n, nwords) mask keeping bits on and below the diagonal."""
    nw = nwords(n)
    mask = np.zeros((n, nw), dtype=np.uint64)
    for i in range(n):
        w = i >> 6
        mask[i, :w] = _FULL
        mask[i, w] = np.uint64((1 << ((i & 63) + 1)) - 1)
    return mask


def pack_rows(rows: np.ndarray) -> np.ndarray:
    """Pack a 0/1 matrix (n x n) into (n, nwords) uint64, LSB first."""
    n = rows.shape[0]
    nw = nwords(n)
    bits = np.zeros((n, nw * 64), dtype=np.uint8)
    bits[:, :n] = rows & 1
    packed = np.packbits(bits, axis=1, bitorder="little")
    return np.ascontiguousarray(packed).view(np.uint64).reshape(n, nw)


def unpack_rows(plane: np.ndarray, n: int) -> np.ndarray:
    bytes_ = plane.reshape(plane.shape[0], -1).view(np.uint8)
    bits = np.unpackbits(bytes_, axis=1, bitorder="little")
    return bits[:, :n].astype(np.int64)


@njit(cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return (x * _H01) >> np.uint64(56)


@njit(cache=True, inline="always")
def _parity(x):
    x ^= x >> np.uint64(32)
    x ^= x >> np.uint64(16)
    x ^= x >> np.uint64(8)
    x ^= x >> np.uint64(4)
    x ^= x >> np.uint64(2)
    x ^= x >> np.uint64(1)
    return x & np.uint64(1)


@njit(cache=True)
def corank_packed(plane, n):
    """n - rank over GF(2); Gaussian elimination with word-wide XOR."""
    M = plane.copy()
    nw = M.shape[1]
    one = np.uint64(1)
    r = 0
    for col in range(n):
        w = col >> 6
        b = np.uint64(col & 63)
        piv = -1
        for i in range(r, n):
            if (M[i, w] >> b) & one:
                piv = i
                break
        if piv < 0:
            continue
        if piv != r:
            for q in range(w, nw):
                t = M[r, q]
                M[r, q] = M[piv, q]
                M[piv, q] = t
        for i in range(piv + 1, n):
            if (M[i, w] >> b) & one:
                for q in range(w, nw):
                    M[i, q] ^= M[r, q]
        r += 1
        if r == n:
            break
    return n - r


@njit(cache=True)
def kernel_tracker(plane, n, cap):
    """Right-kernel basis of a packed lower triangular matrix over GF(2).

    Returns (dim, basis); dim == -1 when the basis would exceed ``cap``
    (caller must fall back to plain elimination).
    """
    nw = plane.shape[1]
    V = np.zeros((cap, nw), dtype=np.uint64)
    par = np.zeros(cap, dtype=np.uint64)
    cnt = 0
    one = np.uint64(1)
    for k in range(n):
        kw = k >> 6
        kb = np.uint64(k & 63)
        a = (plane[k, kw] >> kb) & one
        for j in range(cnt):
            acc = np.uint64(0)
            for w in range(kw + 1):
                acc ^= plane[k, w] & V[j, w]
            par[j] = _parity(acc)
        if a == one:
            # new coordinate is determined: v_k = <row, v>
            for j in range(cnt):
                if par[j] == one:
                    V[j, kw] |= one << kb
        else:
            # row constrains the old coordinates; v_k is free
            piv = -1
            for j in range(cnt):
                if par[j] == one:
                    piv = j
                    break
            if piv >= 0:
                for j in range(cnt):
                    if j != piv and par[j] == one:
                        for w in range(kw + 1):
                            V[j, w] ^= V[piv, w]
                cnt -= 1
                if piv != cnt:
                    for w in range(nw):
                        V[piv, w] = V[cnt, w]
                for w in range(nw):
                    V[cnt, w] = np.uint64(0)
            if cnt >= cap:
                return -1, V
            V[cnt, kw] = one << kb
            cnt += 1
    return cnt, V


@njit(cache=True, inline="always")
def _anti_transpose64(A):
    # b(r, c) = a(63 - c, 63 - r) for an LSB-first packed 64x64 block
    j = 32
    m = np.uint64(0x00000000FFFFFFFF)
    while j != 0:
        k = 0
        while k < 64:
            if (k & j) == 0:
                t = (A[k] ^ (A[k + j] >> np.uint64(j))) & m
                A[k] = A[k] ^ t
                A[k + j] = A[k + j] ^ (t << np.uint64(j))
            k += 1
        j >>= 1
        m = m ^ (m << np.uint64(j))


@njit(cache=True)
def reverse_transpose(plane, n):
    """out(i, j) = in(n-1-j, n-1-i).

    Flipping both indices turns the transpose of a lower triangular
    matrix back into a lower triangular one, so the same kernel tracker
    computes left kernels.  ``plane`` must be zero outside its n x n
    leading block.
    """
    nw = plane.shape[1]
    npad = nw * 64
    s = npad - n
    outP = np.zeros((npad, nw), dtype=np.uint64)
    blk = np.zeros(64, dtype=np.uint64)
    nrows = plane.shape[0]
    for BI in range(nw):
        for BJ in range(nw):
            sb = (nw - 1 - BJ) * 64
            for r in range(64):
                src = sb + r
                blk[r] = plane[src, nw - 1 - BI] if src < nrows else np.uint64(0)
            _anti_transpose64(blk)
            for r in range(64):
                outP[BI * 64 + r, BJ] = blk[r]
    if s == 0:
        return outP[:n]
    out = np.zeros((n, nw), dtype=np.uint64)
    sh = np.uint64(s)
    ish = np.uint64(64 - s)
    for i in range(n):
        src = i + s
        for w in range(nw - 1):
            out[i, w] = (outP[src, w] >> sh) | (outP[src, w + 1] << ish)
        out[i, nw - 1] = outP[src, nw - 1] >> sh
    return out


@njit(cache=True)
def count_low_valuations(plane0, plane1, n, cap):
    """(corank mod 2, #invariant factors with 2-adic valuation >= 2).

    plane0/plane1 are the bit planes of the matrix mod 4.  Writing a
    kernel vector v of the mod-2 reduction as a 0/1 integer vector, L v
    is 2*u mod 4 for some 0/1 vector u; the number of valuation->=2
    invariant factors is corank minus the rank of the pairing between
    the left kernel and these lifts u.

    Returns (-1, -1) when a kernel basis exceeds ``cap``.
    """
    cv, V = kernel_tracker(plane0, n, cap)
    if cv < 0:
        return -1, -1
    rt = reverse_transpose(plane0, n)
    cy, Y = kernel_tracker(rt, n, cap)
    if cy < 0:
        return -1, -1
    nw = plane0.shape[1]
    one = np.uint64(1)
    # lift vectors, packed over rows in the reversed order used by Y
    U = np.zeros((cv, nw), dtype=np.uint64)
    for j in range(cv):
        for i in range(n):
            s0 = np.uint64(0)
            s1 = np.uint64(0)
            for w in range((i >> 6) + 1):
                s0 += _popcount(plane0[i, w] & V[j, w])
                s1 += _popcount(plane1[i, w] & V[j, w])
            u = ((s0 >> one) + s1) & one
            if u:
                ii = n - 1 - i
                U[j, ii >> 6] |= one << np.uint64(ii & 63)
    # rank over GF(2) of the cy x cv pairing matrix, rows as bitmasks
    mat = np.zeros(cy, dtype=np.uint64)
    for jy in range(cy):
        row = np.uint64(0)
        for jv in range(cv):
            acc = np.uint64(0)
            for w in range(nw):
                acc ^= Y[jy, w] & U[jv, w]
            if _parity(acc):
                row |= one << np.uint64(jv)
        mat[jy] = row
    rank = 0
    for col in range(cv):
        piv = -1
        for r in range(rank, cy):
            if (mat[r] >> np.uint64(col)) & one:
                piv = r
                break
        if piv < 0:
            continue
        t = mat[rank]
        mat[rank] = mat[piv]
        mat[piv] = t
        for r in range(cy):
            if r != rank and ((mat[r] >> np.uint64(col)) & one):
                mat[r] ^= mat[rank]
        rank += 1
    return cv, cv - rank


def corank_tracker_reference(rows: list[int], n: int) -> int:
    """Pure-Python mirror of kernel_tracker (rows as int bitsets); test oracle."""
    basis: list[int] = []
    for k in range(n):
        row = rows[k]
        a = (row >> k) & 1
        pars = [bin(row & v).count("1") & 1 for v in basis]
        if a:
            for j, s in enumerate(pars):
                if s:
                    basis[j] |= 1 << k
        else:
            piv = next((j for j, s in enumerate(pars) if s), None)
            if piv is not None:
                pv = basis[piv]
                basis = [v ^ pv if (j != piv and pars[j]) else v
                         for j, v in enumerate(basis)]
                basis.pop(piv)
            basis.append(1 << k)
    return len(basis)
