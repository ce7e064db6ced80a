import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdlattice.errors import DomainError, PreconditionError
from cdlattice.kernels import (NAMED_SEQUENCES, SparseWeight, check_S2, check_S3, check_thin_support,
                               kernel_from_config, make_exp_power, make_finite, make_fractional,
                               make_log_corrected, make_power, make_sparse, tail_mass)


def test_power_kernel_values_and_symmetry():
    k = make_power(2.0, 1.0)
    assert k.eval(2) == pytest.approx(0.5)
    assert k.eval(-3) == k.eval(3)
    assert k.eval(0) == 0.0


@pytest.mark.parametrize("beta", [0.5, 1.0, 1.5, 3.0])
def test_power_mass_against_zeta(beta):
    k = make_power(1.0, beta)
    assert k.mass.contains(2.0 * float(mpmath.zeta(1.0 + beta)))
    assert k.mass.rigorous


def test_power_second_moment_finite_only_above_two():
    assert math.isinf(make_power(1.0, 1.5).second_moment.lo)
    k = make_power(1.0, 3.0)
    assert k.second_moment.contains(2.0 * float(mpmath.zeta(2.0)))


@pytest.mark.parametrize("R, p", [(10, 0.0), (100, 1.0), (3, 0.5)])
def test_power_tail_moment_against_hurwitz(R, p):
    beta = 1.5
    k = make_power(1.0, beta)
    exact = 2.0 * float(mpmath.zeta(1.0 + beta - p, R + 1))
    assert k.tail_moment(R, p).contains(exact)


def test_tail_mass_of_finite_kernel_is_exact():
    k = make_finite({1: 1.0, 3: 0.5})
    assert tail_mass(k, 1).lo == tail_mass(k, 1).hi == 1.0
    assert tail_mass(k, 3).hi == 0.0
    assert k.max_offset == 3


def test_finite_kernel_rejects_bad_weights():
    with pytest.raises(DomainError):
        make_finite({0: 1.0})
    with pytest.raises(DomainError):
        make_finite({1: -1.0})
    with pytest.raises(PreconditionError):
        make_finite({})


def test_exp_power_mass_against_quadrature():
    k = make_exp_power(1.0, 0.5, 1.0, 0.0)
    exact = 2.0 / math.expm1(0.5)
    assert k.mass.contains(exact)


def test_exp_power_monotone_index_for_rising_kernel():
    k = make_exp_power(1.0, 1.0, 1.0, -3.0)
    assert k.monotone_from == 3
    js = np.arange(k.monotone_from, 60)
    assert np.all(np.diff(k.eval(js)) <= 0)


def test_log_corrected_second_moment_finite():
    k = make_log_corrected(1.0, 0.5)
    f = lambda x: 1.0 / (x * (1.0 + mpmath.log(x)) ** 1.5)
    exact = 2.0 * mpmath.nsum(f, [1, mpmath.inf])
    assert k.second_moment.is_finite
    assert k.second_moment.lo <= exact <= k.second_moment.hi


def _half_integer_gamma(n2):
    """Gamma(n2/2) for a positive integer n2, as a multiple of sqrt(pi) or an integer."""
    if n2 % 2 == 0:
        return math.factorial(n2 // 2 - 1)
    n = (n2 - 1) // 2
    return math.factorial(2 * n) / (4 ** n * math.factorial(n)) * math.sqrt(math.pi)


def test_fractional_kernel_beta_one_matches_half_integer_gamma():
    # C(1) = 2 Gamma(1) / (sqrt(pi) |Gamma(-1/2)|), |Gamma(-1/2)| = 2 sqrt(pi)
    C = 2.0 * _half_integer_gamma(2) / (math.sqrt(math.pi) * 2.0 * math.sqrt(math.pi))
    for j in (1, 2, 5):
        exact = C * _half_integer_gamma(2 * j - 1) / _half_integer_gamma(2 * j + 3)
        assert make_fractional(1.0).eval(j) == pytest.approx(exact, rel=1e-13)
    assert make_fractional(1.0).eval(1) == pytest.approx(4.0 / (3.0 * math.pi), rel=1e-14)


@pytest.mark.parametrize("beta", [0.5, 1.0, 1.5])
def test_fractional_kernel_matches_mpmath_gamma_ratio(beta):
    k = make_fractional(beta)
    C = mpmath.power(4, beta / 2) * mpmath.gamma((1 + beta) / 2) / (
        mpmath.sqrt(mpmath.pi) * abs(mpmath.gamma(-beta / 2)))
    for j in (1, 7, 300):
        exact = C * mpmath.gamma(j - beta / 2) / mpmath.gamma(j + 1 + beta / 2)
        assert k.eval(j) == pytest.approx(float(exact), rel=1e-12)


def test_fractional_mass_contains_direct_sum():
    k = make_fractional(1.0)
    # for beta = 1 the kernel is 1/(pi (j^2 - 1/4)), which telescopes to mass 4/pi
    assert k.mass.contains(4.0 / math.pi)


def test_fractional_rejects_out_of_range_beta():
    with pytest.raises(DomainError):
        make_fractional(2.0)


def test_sparse_kernel_support_and_weights():
    k = make_sparse("pow2", SparseWeight("exp", delta=1.0))
    assert list(k.positive_offsets(20)) == [1, 2, 4, 8, 16]
    assert k.eval(3) == 0.0
    assert k.eval(4) == pytest.approx(math.exp(-4))


def test_sequence_index_lookup():
    seq = NAMED_SEQUENCES["pow3_plus_l"]
    assert seq.prefix(100) == [1, 4, 11, 30, 85]
    assert seq.index_of(30) == 3
    assert seq.index_of(31) is None
    assert seq.first_index_above(30) == 4


def test_ratio_checks():
    exp2 = make_sparse("pow2", SparseWeight("exp", delta=1.0))
    s2 = check_S2(exp2)
    # (k(2x)/k(x))**2 = exp(-2x) along x = 2**l
    exact = math.fsum(math.exp(-2.0 * 2.0 ** l) for l in range(0, 12))
    assert s2.total.contains(exact)
    assert math.isinf(check_S2(make_sparse("pow2", SparseWeight("power", beta=1.0))).total.hi)
    assert check_S3(make_sparse("pow3", SparseWeight("exp", delta=1.0))).total.is_finite


def test_thin_support_brute_force():
    k = make_sparse("pow3_plus_l", SparseWeight("geometric", q=0.5))
    rep = check_thin_support(k, 10 ** 6)
    assert rep.passed and rep.N_witness == 0
    # naturals violate condition (i) at every scale
    nat = make_sparse("naturals", SparseWeight("geometric", q=0.5))
    assert not check_thin_support(nat, 2000).passed
    assert check_thin_support(make_finite({1: 1.0}), 10).passed


def test_kernel_from_config_errors():
    assert kernel_from_config({"family": "power", "beta": 1.5}).params["beta"] == 1.5
    with pytest.raises(PreconditionError):
        kernel_from_config({"family": "power"})
    with pytest.raises(PreconditionError):
        kernel_from_config({"family": "nope"})


def test_unregistered_tail_is_flagged():
    k = make_sparse("pow2", lambda l: 0.5 ** l)
    t = k.tail_moment(5, 0.0)
    assert not t.rigorous and math.isinf(t.hi)


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.integers(1, 12), st.floats(1e-3, 1.0), min_size=1, max_size=6))
def test_truncation_preserves_values(weights):
    k = make_finite(weights)
    if not any(o <= 6 for o in weights):
        with pytest.raises(PreconditionError):
            k.truncate(6)
        return
    t = k.truncate(6)
    for j in range(-8, 9):
        assert t.eval(j) == (k.eval(j) if abs(j) <= 6 else 0.0)
