import math

import mpmath
import numpy as np
import pytest

from cdlattice.errors import DomainError, PreconditionError
from cdlattice.kernels import SparseWeight, make_finite, make_power, make_sparse
from cdlattice.operators import LatticeFunction, apply_L, gamma1, gamma2
from cdlattice.witnesses import (cutoff_profile, jk_sums, linear_cutoff_witness, power_witness,
                                 sharpness_witness, sparse_witness, square_witness,
                                 truncated_witness, witness_from_config)


def _jk_brute(beta, eps, rows):
    g = beta - eps
    U = np.arange(2 * rows + 1, dtype=float) ** g
    w = np.arange(1, rows + 1, dtype=float) ** (-1.0 - beta)
    J = K = 0.0
    for j in range(1, rows + 1):
        l = np.arange(1, j + 1)
        J += w[j - 1] * np.dot(w[:j], (U[j + l] - U[j] - U[l]) ** 2)
        K += w[j - 1] * np.dot(w[:j], (U[j - l] - U[j] - U[l]) ** 2)
    return J, K


@pytest.mark.parametrize("beta, eps", [(1.5, 0.4), (1.0, 0.2), (0.6, 0.3), (2.0, 0.2)])
def test_jk_sums_bracket_brute_force(beta, eps):
    small = jk_sums(beta, eps, 64)
    J_part, K_part = _jk_brute(beta, eps, 1500)
    # summands are nonnegative, so partial sums are lower bounds
    assert small.J.hi >= J_part and small.K.hi >= K_part
    core_J, core_K = _jk_brute(beta, eps, 64)
    assert small.J_core.contains(core_J, tol=1e-12 * core_J)
    assert small.K_core.contains(core_K, tol=1e-12 * core_K)
    big = jk_sums(beta, eps, 1500)
    assert small.J.overlaps(big.J) and small.K.overlaps(big.K)


def test_jk_sums_preconditions():
    with pytest.raises(DomainError):
        jk_sums(2.5, 0.1)
    with pytest.raises(DomainError):
        jk_sums(1.5, 0.1, 4)


def test_power_witness_L_matches_zeta():
    for beta, eps in [(1.0, 0.4), (1.5, 0.1)]:
        L = apply_L(make_power(1.0, beta), power_witness(beta, eps), 0)
        assert L.contains(2.0 * float(mpmath.zeta(1.0 + eps)))


def test_power_witness_gamma2_closed_form_agrees_with_generic_path():
    beta, eps = 1.5, 0.9
    g = beta - eps
    k = make_power(1.0, beta)
    closed = gamma2(k, power_witness(beta, eps), 0, 2000)
    plain = LatticeFunction.family("plain", lambda j: np.abs(j).astype(float) ** g, g, 1.0 + 1e-15,
                                   symmetry="even", eval_rel=2.0 ** -52)
    generic = gamma2(k, plain, 0, 2000)
    assert closed.rigorous and generic.rigorous
    assert closed.overlaps(generic)


def test_power_witness_gamma_is_infinite_when_square_not_summable():
    G = gamma1(make_power(1.0, 1.5), power_witness(1.5, 0.1), 0)
    assert math.isinf(G.lo)


def test_power_witness_rejects_eps():
    with pytest.raises(DomainError):
        power_witness(1.0, 1.0)


@pytest.mark.parametrize("N", [1, 2, 3, 5])
def test_sharpness_values(N):
    k, u = sharpness_witness(N)
    assert apply_L(k, u, 0).contains(2.0 * N)
    assert gamma2(k, u, 0).contains(2.0 * N)
    assert gamma1(k, u, 0).contains(float(N))


def test_square_witness_closed_form_matches_explicit():
    k = make_finite({1: 0.5, 3: 0.25})
    sq = square_witness()
    ex = LatticeFunction.explicit(start=-10, array=np.arange(-10, 11) ** 2.0)
    for op in (apply_L, gamma1, gamma2):
        assert op(k, sq, 0).overlaps(op(k, ex, 0))
    assert gamma1(k, sq, 2).overlaps(gamma1(k, ex, 2))


def test_truncated_witness_shape():
    beta, eps, N = 1.5, 0.1, 10
    v = truncated_witness(beta, eps, N)
    u = power_witness(beta, eps)
    js = np.arange(-N, N + 1)
    assert np.allclose(v(js), u(js), rtol=1e-15)
    assert v(N * N) == 0.0 and v(N * N + 5) == 0.0
    assert v(-(N + 3)) == v(N + 3)
    assert np.all(np.diff(v(np.arange(N, N * N + 1))) <= 0)
    with pytest.raises(DomainError):
        truncated_witness(beta, 1.0, N)  # 2 beta - 2 eps - 1 = 0
    with pytest.raises(DomainError):
        truncated_witness(beta, eps, 11)


def test_linear_cutoff_shape():
    u = linear_cutoff_witness(8)
    phi = cutoff_profile(8)
    js = np.arange(-20, 21)
    assert np.allclose(u(js), js * phi(js))
    assert np.allclose(u(js), -u(-js))
    assert u(16) == 0.0 and u(8) == 8.0
    with pytest.raises(DomainError):
        linear_cutoff_witness(8, T_N=12)


def test_sparse_witness_matches_truncated_kernel():
    k = make_sparse("pow3_plus_l", SparseWeight("geometric", q=0.5))
    sw = sparse_witness(k, 30, 0)
    assert sw.xi == 4 and sw.M == 0.0
    # the witness is additive on sums of support points, so any truncation radius
    # past n gives the same values once the window covers all sums
    kt = k.truncate(300)
    vals = sw.function(np.arange(-600, 601))
    ex = LatticeFunction.explicit(start=-600, array=vals)
    L = apply_L(kt, ex, 0)
    assert apply_L(k, sw.function, 0).overlaps(L)
    assert gamma2(k, sw.function, 0).overlaps(gamma2(kt, ex, 0))


def test_sparse_witness_preconditions():
    k = make_sparse("pow3_plus_l", SparseWeight("geometric", q=0.5))
    with pytest.raises(PreconditionError):
        sparse_witness(k, 2, 1)
    with pytest.raises(PreconditionError):
        sparse_witness(make_power(1.0, 1.0), 10, 0)


def test_witness_from_config():
    spec = witness_from_config({"family": "sharpness", "N": 2})
    assert spec.kernel is not None
    assert witness_from_config({"family": "power_eps", "beta": 1.5, "eps": 0.2}).name == "power_eps"
    with pytest.raises(PreconditionError):
        witness_from_config({"family": "truncated", "beta": 1.5})
    with pytest.raises(PreconditionError):
        witness_from_config({"family": "sparse", "n": 30})
