import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coklab import pgroup
from coklab.errors import InstanceTooLargeError, ValidationError


def partitions_of(n):
    if n == 0:
        yield ()
        return

    def rec(remaining, maxpart):
        if remaining == 0:
            yield ()
            return
        for first in range(min(remaining, maxpart), 0, -1):
            for rest in rec(remaining - first, first):
                yield (first,) + rest

    yield from rec(n, n)


def all_partitions(max_size):
    for n in range(max_size + 1):
        yield from partitions_of(n)


partition_strategy = st.lists(st.integers(1, 6), min_size=0, max_size=5).map(
    lambda parts: tuple(sorted(parts, reverse=True)))


def test_as_partition_rejects_bad_shapes():
    with pytest.raises(ValidationError):
        pgroup.as_partition((1, 2))
    with pytest.raises(ValidationError):
        pgroup.as_partition((0,))
    with pytest.raises(ValidationError):
        pgroup.as_partition((3, -1))


def test_conjugate_examples():
    assert pgroup.conjugate((2, 1)) == (2, 1)
    assert pgroup.conjugate((3,)) == (1, 1, 1)
    # columns of the Young diagram of (4,2,1), counted by hand
    assert pgroup.conjugate((4, 2, 1)) == (3, 2, 1, 1)
    assert pgroup.conjugate(()) == ()


def test_conjugate_involution_exhaustive_up_to_12():
    for lam in all_partitions(12):
        conj = pgroup.conjugate(lam)
        assert pgroup.conjugate(conj) == lam
        assert sum(conj) == sum(lam)


def test_group_order_exponent():
    assert pgroup.group_order_exponent((2, 1)) == 3
    assert pgroup.group_order_exponent(()) == 0
    assert pgroup.group_order_exponent((1, 1, 1, 1)) == 4


def test_hom_count_exponent_examples():
    assert pgroup.hom_count_exponent((1,), (1,)) == 1
    assert pgroup.hom_count_exponent((2,), (1,)) == 1
    assert pgroup.hom_count_exponent((1, 1), (2,)) == 2


@given(partition_strategy, partition_strategy)
def test_hom_count_exponent_symmetric(lam, mu):
    assert pgroup.hom_count_exponent(lam, mu) == pgroup.hom_count_exponent(mu, lam)


def test_brute_force_hom_examples():
    assert pgroup.brute_force_hom_count((1,), (1,), 2) == 2
    assert pgroup.brute_force_hom_count((1, 1), (1,), 2) == 4
    assert pgroup.brute_force_hom_count((2, 1), (2,), 2) == 8


def test_brute_force_hom_guard():
    with pytest.raises(InstanceTooLargeError):
        pgroup.brute_force_hom_count((5,), (4,), 2)
    with pytest.raises(InstanceTooLargeError):
        pgroup.brute_force_hom_count((4,), (3,), 3)


@pytest.mark.parametrize("p,limit", [(2, 8), (3, 6)])
def test_hom_exponent_matches_brute_force_on_all_guarded_instances(p, limit):
    for a in range(limit + 1):
        for lam in partitions_of(a):
            for mu in partitions_of(limit - a):
                want = pgroup.brute_force_hom_count(lam, mu, p)
                assert p ** pgroup.hom_count_exponent(lam, mu) == want


@pytest.mark.parametrize("p", [2, 3, 5, 97])
@pytest.mark.parametrize("k", [1, 2, 5])
def test_maximal_chains_cyclic(p, k):
    assert pgroup.maximal_chain_count((k,), p) == 1


@pytest.mark.parametrize("p", [2, 3, 5])
def test_maximal_chains_rank_two_elementary(p):
    assert pgroup.maximal_chain_count((1, 1), p) == p + 1


def test_maximal_chains_rank_three_p2():
    assert pgroup.maximal_chain_count((1, 1, 1), 2) == 21


@pytest.mark.parametrize("p", [2, 3, 5])
@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_maximal_chains_complete_flag_count(p, k):
    flags = 1
    for i in range(1, k + 1):
        flags *= (p ** i - 1) // (p - 1)
    assert pgroup.maximal_chain_count((1,) * k, p) == flags


@pytest.mark.parametrize("p", [2, 3])
def test_maximal_chains_match_brute_force_up_to_size_four(p):
    for size in range(5):
        for lam in partitions_of(size):
            assert pgroup.maximal_chain_count(lam, p) == \
                pgroup.brute_force_maximal_chains(lam, p), (lam, p)


def test_brute_force_chain_examples():
    assert pgroup.brute_force_maximal_chains((2,), 3) == 1
    assert pgroup.brute_force_maximal_chains((1, 1), 3) == 4
    assert pgroup.brute_force_maximal_chains((2, 1), 2) == \
        pgroup.maximal_chain_count((2, 1), 2)


def test_brute_force_chain_guard():
    with pytest.raises(InstanceTooLargeError):
        pgroup.brute_force_maximal_chains((1,) * 13, 2)


def _two_row_chain_count(a, b, p):
    # independent recursion for two-part types: removing a box from the
    # larger part is forced by the single functional supported there,
    # the smaller part absorbs the other p functional classes
    if b == 0:
        return 1
    if a == b:
        return (p + 1) * _two_row_chain_count(a, b - 1, p)
    return _two_row_chain_count(a - 1, b, p) + p * _two_row_chain_count(a, b - 1, p)


@pytest.mark.parametrize("p", [2, 3])
@pytest.mark.parametrize("shape", [(2, 1), (2, 2), (3, 2), (4, 3)])
def test_maximal_chains_two_row_recursion(shape, p):
    a, b = shape
    assert pgroup.maximal_chain_count(shape, p) == _two_row_chain_count(a, b, p)


def test_maximal_chains_big_integer_no_overflow():
    # |lam| = 30 at p = 97: the count must be an exact big integer
    value = pgroup.maximal_chain_count((15, 15), 97)
    assert value == _two_row_chain_count(15, 15, 97)
    assert value.bit_length() > 100
    assert pgroup.maximal_chain_count((10, 10, 10), 5) > 0


@settings(max_examples=25, deadline=None)
@given(partition_strategy)
def test_maximal_chain_count_deterministic(lam):
    assert pgroup.maximal_chain_count(lam, 3) == pgroup.maximal_chain_count(lam, 3)
