import math

import mpmath as mp
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coklab import theory
from coklab.errors import NumericalError, ValidationError
from coklab.theory import (TheoryParams, centering, chi0_symmetric,
                           chi0_symmetric_info, chi_from_zeta,
                           fluctuation_moment, fluctuation_pmf,
                           fluctuation_pmf_info, zeta_from_n)

# frozen via a 60-digit evaluation of the 300-term product (beta_i = 1 + 2^-i)
CHI0_P2_A075 = 4.127993967889125


def chi0_highprec_oracle(p, alpha, terms=200):
    with mp.workdps(50):
        q = (p * mp.mpf(alpha) - 1) / (p - 1)
        prod = mp.mpf(1)
        for i in range(1, terms + 1):
            beta = 1 + (p - 1) * q ** i
            prod *= (p - 1) * beta / (p - beta)
        return float((p - 1) / mp.mpf(p) * prod)


def test_chi0_uniform_degeneration_is_exact():
    for p in (2, 3, 5, 7):
        assert abs(chi0_symmetric(p, 1 / p) - (p - 1) / p) < 1e-14


def test_chi0_examples():
    assert chi0_symmetric(2, 0.5) == 0.5
    assert abs(chi0_symmetric(3, 1 / 3) - 2 / 3) < 1e-14
    got = chi0_symmetric(2, 0.75)
    assert abs(got - CHI0_P2_A075) < 1e-13
    assert abs(got - chi0_highprec_oracle(2, 0.75)) < 1e-13


def test_chi0_rejects_bad_alpha():
    for alpha in (0.0, 1.0, -1.0, 2.0):
        with pytest.raises(ValidationError):
            chi0_symmetric(2, alpha)


def test_chi0_series_info_reports_truncation():
    info = chi0_symmetric_info(2, 0.9)
    assert info.terms > 10
    assert 0 <= info.tail_bound < 1e-12 * info.value


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.floats(0.02, 0.98))
def test_chi0_positive_and_finite(p, alpha):
    value = chi0_symmetric(p, alpha)
    assert 0.0 < value < math.inf


def test_chi_from_zeta_examples():
    assert chi_from_zeta(2, 0.5, 0.0) == 0.5
    assert abs(chi_from_zeta(2, 0.5, 1.0 - 1e-15) - 0.25) < 1e-13
    assert abs(chi_from_zeta(3, 2 / 3, 0.5) - 0.19245008972987525) < 1e-12


def test_chi_from_zeta_strictly_decreasing_in_zeta():
    values = [chi_from_zeta(3, 1.7, z / 10) for z in range(10)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_centering_examples():
    assert centering(2, 1024, 0.0) == 10
    assert centering(2, 1024, 0.5) == 11
    assert centering(3, 100, 0.0) == 4
    assert centering(2, 1, 0.0) == 0


def test_centering_exact_power_guard():
    # 2^50 is not exactly representable through naive log arithmetic
    for e in (10, 20, 50):
        assert centering(2, 2 ** e, 0.0) == e
        assert centering(2, 2 ** e, 0.5) == e + 1
    assert centering(3, 3 ** 30, 0.0) == 30


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.integers(1, 10 ** 6),
       st.floats(0.0, 0.95))
def test_centering_translation_consistency(p, n, zeta):
    x = math.log2(n) / math.log2(p) + zeta + 0.5
    if abs(x - round(x)) < 1e-6:  # skip rounding boundaries
        return
    assert centering(p, p * n, zeta) == centering(p, n, zeta) + 1


def test_zeta_from_n():
    assert zeta_from_n(2, 1024) == 0.0
    assert zeta_from_n(5, 1) == 0.0
    z = zeta_from_n(3, 100)
    assert 0.0 < z < 1.0
    # with the matched zeta, log_p(n) + zeta is the next integer up
    assert centering(3, 100, z) == 5


@pytest.mark.parametrize("p", [2, 3, 5])
@pytest.mark.parametrize("chi", [0.05, 0.5, 5.0])
def test_pmf_normalizes(p, chi):
    total = sum(fluctuation_pmf(p, chi, x) for x in range(-60, 61))
    assert abs(total - 1.0) < 1e-10


@pytest.mark.parametrize("k", [1, 2, 3])
def test_pmf_moment_identity(k):
    p, chi = 2, 0.5
    total = sum(float(p) ** (k * x) * fluctuation_pmf(p, chi, x)
                for x in range(-60, 61))
    want = fluctuation_moment(p, chi, (k,))
    assert abs(total - want) <= 1e-6 * want


def test_pmf_left_tail_underflows_to_exact_zero():
    info = fluctuation_pmf_info(2, 0.5, -40)
    assert info.value == 0.0
    assert info.underflow
    # monotone decay into the left tail before underflow
    values = [fluctuation_pmf(2, 0.5, x) for x in range(-2, -12, -1)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] >= 0.0


def test_pmf_right_tail_escalates_and_matches_highprec():
    # frozen from a 120-digit evaluation of the same series
    info = fluctuation_pmf_info(2, 0.5, 15)
    assert info.escalated_dps >= 40
    assert info.value == pytest.approx(3.1270351665574441564e-53, rel=1e-12)
    assert fluctuation_pmf(2, 0.5, 8) == pytest.approx(1.9646723695587763e-19, rel=1e-12)


def test_pmf_input_validation():
    with pytest.raises(ValidationError):
        fluctuation_pmf(4, 0.5, 0)
    with pytest.raises(ValidationError):
        fluctuation_pmf(2, -1.0, 0)


def test_moment_examples():
    for p, chi in ((2, 0.5), (3, 0.7), (5, 2.0)):
        assert fluctuation_moment(p, chi, (1,)) == pytest.approx((p - 1) * chi)
    # MC((Z/2)^2) = 3 through the conjugate map
    assert fluctuation_moment(2, 0.5, (2,)) == pytest.approx(0.375)
    # lam = (1,1) conjugates to the cyclic group Z/4, one chain
    assert fluctuation_moment(2, 0.5, (1, 1)) == pytest.approx(0.125)
    assert fluctuation_moment(2, 0.5, ()) == 1.0


def test_theory_params_validation():
    params = TheoryParams.from_chi0(2, 1, 0.0, 0.5)
    assert params.chi == 0.5
    with pytest.raises(ValidationError):
        TheoryParams(p=2, d=1, zeta=0.0, chi0=0.5, chi=0.3)
    with pytest.raises(ValidationError):
        TheoryParams.from_chi0(2, 0, 0.0, 0.5)
    with pytest.raises(ValidationError):
        TheoryParams.from_chi0(2, 1, 1.5, 0.5)
    with pytest.raises(ValidationError):
        TheoryParams.from_chi0(2, 1, 0.0, -1.0)
