import itertools
import math

import numpy as np
import pytest

from coklab import plinalg
from coklab.entrydist import uniform_dist
from coklab.errors import NumericalError, ValidationError
from coklab.plinalg import (INF, CokernelType, TriMatrix, corank_mod_p,
                            dump_matrix, exact_snf_valuations,
                            invariant_valuations, parse_matrix, rank_profile,
                            sample_tri_matrix, valuation_pivot_valuations)


def tri_from_square(square, p, E):
    n = len(square)
    return TriMatrix.from_rows([row[: i + 1] for i, row in enumerate(square)], p, E)


def brute_corank(square, p):
    """Exhaustive kernel count: dim ker = log_p #{v : Mv = 0 mod p}."""
    n = len(square)
    count = 0
    for v in itertools.product(range(p), repeat=n):
        if all(sum(square[i][j] * v[j] for j in range(n)) % p == 0 for i in range(n)):
            count += 1
    return round(math.log(count, p))


def test_corank_identity_and_zero():
    for p in (2, 3):
        n = 5
        ident = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
        zero = [[0] * n for _ in range(n)]
        assert corank_mod_p(tri_from_square(ident, p, 2)) == 0
        assert corank_mod_p(tri_from_square(zero, p, 2)) == n


def test_corank_small_example_against_kernel_enumeration():
    # rows (0), (1,1), (1,0,0): kernel of the mod-2 reduction is {e_3},
    # so the corank is 1 (exhaustive enumeration below confirms)
    square = [[0, 0, 0], [1, 1, 0], [1, 0, 0]]
    assert brute_corank(square, 2) == 1
    assert corank_mod_p(tri_from_square(square, 2, 1)) == 1


@pytest.mark.parametrize("p", [2, 3, 5])
def test_corank_matches_kernel_enumeration_random(p):
    rng = np.random.default_rng(100 + p)
    for _ in range(40):
        n = int(rng.integers(1, 5))
        square = np.tril(rng.integers(0, p, size=(n, n))).tolist()
        assert corank_mod_p(tri_from_square(square, p, 1)) == brute_corank(square, p)


def test_invariant_valuations_examples():
    p = 3
    M = tri_from_square([[1, 0, 0], [0, p, 0], [0, 0, p * p]], p, 4)
    assert invariant_valuations(M).valuations == (0, 1, 2)
    M = tri_from_square([[p, 0], [1, p]], p, 4)
    assert invariant_valuations(M).valuations == (0, 2)
    M = tri_from_square([[0, 0], [0, 0]], p, 4)
    assert invariant_valuations(M).valuations == (INF, INF)


def test_invariant_valuations_matches_exact_smith_form():
    rng = np.random.default_rng(2024)
    for trial in range(120):
        n = int(rng.integers(1, 9))
        p = int(rng.choice([2, 3, 5]))
        E = int(rng.integers(2, 7))
        square = np.tril(rng.integers(-20, 21, size=(n, n)))
        got = invariant_valuations(tri_from_square(square.tolist(), p, E)).valuations
        exact = exact_snf_valuations(square.tolist(), p)
        want = tuple(sorted(INF if v >= E else v for v in exact))
        assert got == want, (square, p, E)


def test_pure_python_elimination_matches_numpy_path():
    rng = np.random.default_rng(55)
    for _ in range(60):
        n = int(rng.integers(1, 7))
        p = int(rng.choice([2, 3, 5]))
        E = int(rng.integers(1, 5))
        square = np.tril(rng.integers(0, p ** E, size=(n, n)))
        a = sorted(valuation_pivot_valuations(square.tolist(), n, p, E))
        b = sorted(plinalg._valuations_numpy(square.astype(np.int64), p, E))
        assert a == b


def test_corank_equals_count_of_zero_valuations():
    # module invariant, 10^4 random instances across p in {2,3,5}
    rng = np.random.default_rng(808)
    for trial in range(10_000):
        n = int(rng.integers(1, 65))
        p = int(rng.choice([2, 3, 5]))
        E = int(rng.integers(1, 4))
        square = np.tril(rng.integers(0, p ** E, size=(n, n)))
        M = tri_from_square(square.tolist(), p, E)
        ct = invariant_valuations(M)
        assert corank_mod_p(M) == n - sum(1 for v in ct.valuations if v == 0)


def test_bit_packed_corank_matches_generic_elimination():
    rng = np.random.default_rng(909)
    for trial in range(1000):
        n = int(rng.integers(1, 257))
        square = np.tril(rng.integers(0, 2, size=(n, n)))
        M = tri_from_square(square.tolist(), 2, 1)
        assert corank_mod_p(M) == plinalg._corank_dense(square.astype(np.int64), 2)


def test_rank_profile_examples():
    p = 2
    ident = tri_from_square([[1, 0], [0, 1]], p, 3)
    assert rank_profile(invariant_valuations(ident), 2) == (0, 0)
    p = 3
    M = tri_from_square([[1, 0, 0], [0, 3, 0], [0, 0, 9]], p, 4)
    assert rank_profile(invariant_valuations(M), 3) == (2, 1, 0)
    zero = tri_from_square([[0, 0], [0, 0]], p, 4)
    assert rank_profile(invariant_valuations(zero), 2) == (2, 2)


def test_rank_profile_guard_and_monotonicity():
    ct = CokernelType(n=3, valuations=(0, 1, INF))
    assert rank_profile(ct, 2) == (2, 1)
    with pytest.raises(ValidationError):
        rank_profile(ct, 3, E=2)
    rng = np.random.default_rng(31)
    for _ in range(50):
        n = int(rng.integers(1, 20))
        square = np.tril(rng.integers(0, 8, size=(n, n)))
        prof = rank_profile(invariant_valuations(tri_from_square(square.tolist(), 2, 3)), 3)
        assert all(a >= b for a, b in zip(prof, prof[1:]))


def test_determinism_identical_inputs():
    rng = np.random.default_rng(77)
    square = np.tril(rng.integers(0, 9, size=(12, 12)))
    M1 = tri_from_square(square.tolist(), 3, 2)
    M2 = tri_from_square(square.tolist(), 3, 2)
    assert invariant_valuations(M1) == invariant_valuations(M2)
    assert corank_mod_p(M1) == corank_mod_p(M2)


def test_big_modulus_uses_exact_path():
    # p^E >= 2^31 forces the big-integer elimination
    p, E = 97, 9
    assert p ** E >= (1 << 31)
    M = tri_from_square([[97, 0], [1, 97 ** 2]], p, E)
    assert invariant_valuations(M).valuations == (0, 3)


def test_precision_guard():
    with pytest.raises(ValidationError):
        TriMatrix.from_rows([[1]], 3, 40)  # 3^40 >= 2^62
    with pytest.raises(ValidationError):
        TriMatrix.from_rows([[1]], 4, 2)  # not prime


def test_dump_parse_round_trip():
    rng = np.random.default_rng(13)
    square = np.tril(rng.integers(0, 9, size=(5, 5)))
    M = tri_from_square(square.tolist(), 3, 2)
    again = parse_matrix(dump_matrix(M))
    assert again.n == M.n and again.p == M.p and again.E == M.E
    assert np.array_equal(np.asarray(again.rows, dtype=np.int64),
                          np.asarray(M.rows, dtype=np.int64))
    assert dump_matrix(M).splitlines()[0] == "3 2 5"
    with pytest.raises(ValidationError):
        parse_matrix("junk header\n1\n")
    with pytest.raises(ValidationError):
        parse_matrix("2 1 2\n1\n1 1 1\n")


def test_sample_tri_matrix_shape_and_range():
    d = uniform_dist(3, 2)
    M = sample_tri_matrix(d, 6, np.random.default_rng(5))
    assert M.n == 6 and M.p == 3 and M.E == 2
    rows = np.asarray(M.rows, dtype=np.int64)
    assert np.all(np.triu(rows, 1) == 0)
    assert rows.min() >= 0 and rows.max() < 9
