import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cdlattice.errors import AdmissibilityError, DomainError, NumericError, PreconditionError
from cdlattice.kernels import make_finite, make_power
from cdlattice.operators import (LatticeFunction, admissible, apply_L, cd_quotients, cd_ratio,
                                 gamma1, gamma2, implied_dimension, ly_identity_residual,
                                 require_admissible, symmetrize_and_center)
from cdlattice.enclosure import Enclosure


# --- oracle: Gamma calculus straight from the generator ---------------------------------

def _gen(weights):
    pairs = [(j, Fraction(w)) for j, w in weights.items()] + [(-j, Fraction(w)) for j, w in weights.items()]

    def L(f):
        return lambda x: sum(w * (f(x + j) - f(x)) for j, w in pairs)

    def Gamma(f, g):
        Lfg, Lf, Lg = L(lambda y: f(y) * g(y)), L(f), L(g)
        return lambda x: (Lfg(x) - f(x) * Lg(x) - g(x) * Lf(x)) / 2

    def Gamma2(u):
        Lu = L(u)
        G = Gamma(u, u)
        LG = L(G)
        Gmix = Gamma(u, Lu)
        return lambda x: LG(x) / 2 - Gmix(x)

    return L, Gamma, Gamma2


def _exact_values(u_map):
    return lambda x: Fraction(u_map.get(x, 0.0))


def _random_case(rng, A=6):
    size = int(rng.integers(1, 5))
    offs = rng.choice(np.arange(1, 7), size=size, replace=False)
    weights = {int(j): float(rng.integers(1, 9)) / 8.0 for j in offs}
    vals = rng.integers(-5, 6, size=2 * A + 1).astype(float)
    u_map = {j: v for j, v in zip(range(-A, A + 1), vals) if v != 0}
    return weights, u_map


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("x", [0, 2])
def test_operators_match_generator_oracle(seed, x):
    rng = np.random.default_rng(seed)
    weights, u_map = _random_case(rng)
    k = make_finite(weights)
    u = LatticeFunction.explicit(u_map)
    L, Gamma, Gamma2 = _gen(weights)
    f = _exact_values(u_map)
    assert apply_L(k, u, x).contains(float(L(f)(x)))
    assert gamma1(k, u, x).contains(float(Gamma(f, f)(x)))
    assert gamma2(k, u, x).contains(float(Gamma2(f)(x)))


def test_laplacian_on_square():
    k = make_finite({1: 1.0})
    u = LatticeFunction.explicit(start=-10, array=np.arange(-10, 11) ** 2.0)
    assert apply_L(k, u, 0).contains(2.0)
    assert gamma1(k, u, 3).contains(37.0)
    assert gamma2(k, u, 0).contains(4.0)


def test_linear_function_has_zero_gamma2():
    k = make_finite({1: 1.0, 2: 0.5})
    u = LatticeFunction.explicit(start=-8, array=np.arange(-8, 9, dtype=float))
    assert gamma2(k, u, 0).contains(0.0)
    assert gamma1(k, u, 0).contains(1.0 + 4 * 0.5)


def test_power_kernel_family_against_mpmath_zeta():
    from cdlattice.witnesses import power_witness
    beta, eps = 1.5, 0.25
    k = make_power(1.0, beta)
    L = apply_L(k, power_witness(beta, eps), 0)
    assert L.contains(2.0 * float(mpmath.zeta(1.0 + eps)))
    assert L.rigorous


def test_power_kernel_explicit_core_against_brute_force():
    rng = np.random.default_rng(3)
    beta = 1.5
    k = make_power(1.0, beta)
    A = 6
    vals = rng.normal(size=2 * A + 1)
    u = LatticeFunction.explicit(start=-A, array=vals)
    f = lambda j: vals[j + A] if abs(j) <= A else 0.0
    # brute force of the sum-of-squares form with a large cutoff plus an mpmath tail
    R = 3000
    ks = {j: abs(j) ** (-1.0 - beta) for j in range(-R, R + 1) if j}
    direct = math.fsum(kj * (f(j) - f(0)) for j, kj in ks.items())
    tail = 2.0 * float(mpmath.zeta(1 + beta, R + 1)) * (-f(0))
    assert apply_L(k, u, 0).contains(direct + tail, tol=1e-12)
    G2 = gamma2(k, u, 0)
    js = np.array([j for j in range(-R, R + 1) if j])
    kj = np.abs(js) ** (-1.0 - beta)
    fv = np.vectorize(f)
    fj = fv(js)
    fjl = fv(js[:, None] + js[None, :])
    core = 0.25 * np.sum(kj[:, None] * kj[None, :] * (fjl - fj[:, None] - fj[None, :] + f(0)) ** 2)
    # pairs with a leg beyond R: squares are at most (4 max|u|)**2
    T = 2.0 * float(mpmath.zeta(1 + beta, R + 1))
    rest = 0.25 * 2.0 * T * k.mass.hi * (4.0 * np.abs(vals).max()) ** 2
    assert G2.hi >= core * (1 - 1e-12)
    assert G2.lo <= core + rest


def test_identity_residual_is_tiny():
    rng = np.random.default_rng(0)
    for _ in range(20):
        w = {int(j): float(rng.uniform(0.01, 1)) for j in rng.choice(np.arange(1, 9), 3, replace=False)}
        u = LatticeFunction.explicit(start=-8, array=rng.normal(size=17))
        assert ly_identity_residual(make_finite(w), u) < 1e-12


def test_identity_rejects_infinite_kernel():
    with pytest.raises(PreconditionError):
        ly_identity_residual(make_power(1.0, 1.0), LatticeFunction.explicit({1: 1.0}))


def test_implied_dimension():
    assert implied_dimension(1.0, math.inf, 2.0) == 4.0
    assert implied_dimension(1.0, 2.0, 1.0) == pytest.approx(4.0 / 4.0)
    with pytest.raises(DomainError):
        implied_dimension(0.0, math.inf, 1.0)


def test_cd_quotients_none_for_degenerate_denominators():
    rd, rc = cd_quotients(Enclosure(-1, 1), Enclosure(1, 1), Enclosure(2, 2))
    assert rd is None and rc.contains(2.0)
    with pytest.raises(NumericError):
        cd_ratio(make_finite({1: 1.0}), LatticeFunction.explicit({}), 0)


def test_admissibility():
    from cdlattice.witnesses import square_witness
    k = make_power(1.0, 1.5)
    assert not admissible(k, square_witness())
    with pytest.raises(AdmissibilityError):
        require_admissible(k, square_witness())
    assert admissible(make_finite({1: 1.0}), square_witness())


def test_family_growth_check():
    with pytest.raises(PreconditionError):
        LatticeFunction.family("bad", lambda j: np.asarray(j, float) ** 2, 1.0, 1.0, probe=100)


# --- properties -------------------------------------------------------------------------------

weights_st = st.dictionaries(st.integers(1, 6), st.floats(0.05, 1.0), min_size=1, max_size=4)
values_st = st.lists(st.floats(-3, 3, allow_nan=False), min_size=13, max_size=13)


def _explicit(vals):
    return LatticeFunction.explicit(start=-6, array=np.asarray(vals))


@settings(max_examples=60, deadline=None)
@given(weights_st, values_st, st.integers(-3, 3))
def test_gamma2_nonnegative(weights, vals, x):
    assert gamma2(make_finite(weights), _explicit(vals), x).lo >= 0.0


@settings(max_examples=60, deadline=None)
@given(weights_st, st.lists(st.floats(-3, 3), min_size=6, max_size=6))
def test_basic_estimate_for_even_centered(weights, half):
    vals = np.concatenate([half[::-1], [0.0], half])
    u = _explicit(vals)
    k = make_finite(weights)
    lower = math.fsum(2.0 * k.eval(j) ** 2 * u(j) ** 2 for j in range(1, 7))
    assert gamma2(k, u, 0).hi >= lower * (1 - 1e-12) - 1e-12


@settings(max_examples=40, deadline=None)
@given(weights_st, values_st, st.integers(-4, 4))
def test_translation_covariance(weights, vals, x):
    k = make_finite(weights)
    u = _explicit(vals)
    shifted = LatticeFunction.explicit(start=-6 - x, array=np.asarray(vals))
    for op in (apply_L, gamma1, gamma2):
        a, b = op(k, u, x), op(k, shifted, 0)
        assert a.overlaps(b)


@settings(max_examples=60, deadline=None)
@given(weights_st, values_st)
def test_curvature_dimension_minus_mass_two(weights, vals):
    k = make_finite(weights)
    u = _explicit(vals)
    L, G, G2 = apply_L(k, u, 0), gamma1(k, u, 0), gamma2(k, u, 0)
    mass = k.mass.hi
    rhs = -mass * G.hi + 0.5 * L.square().lo
    assert G2.hi >= rhs - 1e-9 * (1 + mass * G.hi + L.square().hi)


@settings(max_examples=60, deadline=None)
@given(weights_st, values_st)
def test_min_weight_curvature_floor(weights, vals):
    k = make_finite(weights)
    u = _explicit(vals)
    c = min(weights.values())
    L, G, G2 = apply_L(k, u, 0), gamma1(k, u, 0), gamma2(k, u, 0)
    kappa = 2 * c - k.mass.hi
    rhs = kappa * G.mid + 0.5 * L.mid ** 2
    assert G2.hi >= rhs - 1e-9 * (1 + abs(kappa) * G.hi + L.square().hi)


@settings(max_examples=40, deadline=None)
@given(weights_st, values_st, st.integers(-2, 2))
def test_symmetrization_keeps_L_and_lowers_gammas(weights, vals, x):
    k = make_finite(weights)
    u = _explicit(vals)
    v = symmetrize_and_center(u, x)
    assert v(0) == 0.0 and all(v(j) == pytest.approx(v(-j), abs=1e-15) for j in range(1, 8))
    assert apply_L(k, v, 0).overlaps(apply_L(k, u, x))
    assert gamma1(k, v, 0).lo <= gamma1(k, u, x).hi
    assert gamma2(k, v, 0).lo <= gamma2(k, u, x).hi
