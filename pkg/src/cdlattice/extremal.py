"""Optimal dimension and curvature at the origin for a kernel truncated to [-R, R].

With ``u(0) = 0`` and the kernel cut at ``R``, the three operators at 0 only
read ``u`` on ``I = (P u (P + P)) \\ {0}`` (``P`` the signed support), where

    Gamma_2(u)(0) = u^T Q u,    Gamma(u)(0) = u^T G u,    L u(0) = b^T u.

``d*(R) = 1 / min{u^T Q u : b^T u = 1}`` and ``kappa*(R)`` is the smallest
generalised eigenvalue of ``(Q, G)`` once the variables outside ``P`` are
eliminated.  Eigenproblems go through a cyclic Jacobi iteration.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NumericError, PreconditionError
from .kernels import Kernel
from .operators import implied_dimension

EIG_TOL = 1e-12
NULL_TOL = 1e-10
MAX_SWEEPS = 60


# --- symmetric eigensolver --------------------------------------------------------

def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings of ``0..n-1`` (n even) such that every pair meets once per sweep."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        p = np.array(players[: n // 2])
        q = np.array(players[n // 2:][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _offdiag_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A - np.diag(np.diag(A))))


def jacobi_eigh(A: np.ndarray, tol: float = EIG_TOL, max_sweeps: int = MAX_SWEEPS):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix.

    Parallel-order cyclic Jacobi: each round applies ``n/2`` disjoint plane
    rotations at once.  Stops when the off-diagonal Frobenius norm falls below
    ``tol`` times the Frobenius norm of ``A``.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise PreconditionError("jacobi_eigh needs a square matrix")
    if not np.allclose(A, A.T, rtol=0, atol=1e-13 * (np.abs(A).max() + 1e-300)):
        raise PreconditionError("jacobi_eigh needs a symmetric matrix")
    A = 0.5 * (A + A.T)
    n0 = A.shape[0]
    if n0 == 0:
        return np.zeros(0), np.zeros((0, 0))
    n = n0 + (n0 % 2)
    if n != n0:
        # a decoupled dummy row keeps the pairing even
        B = np.zeros((n, n))
        B[:n0, :n0] = A
        A = B
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0.0:
        return np.zeros(n0), np.eye(n0)
    rounds = _round_robin(n)
    for sweep in range(max_sweeps):
        off = _offdiag_norm(A)
        if off <= tol * scale:
            break
        for p, q in rounds:
            apq = A[p, q]
            active = np.abs(apq) > 1e-300
            if not np.any(active):
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (A[q, q] - A[p, p]) / (2.0 * apq)
            big = np.abs(theta) > 1e150
            th = np.where(big, 1.0, theta)
            t = np.sign(th) / (np.abs(th) + np.sqrt(th * th + 1.0))
            t = np.where(big, 0.5 / np.where(big, theta, 1.0), t)
            t[theta == 0.0] = 1.0
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            Ap, Aq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = Ap * c - Aq * s
            A[:, q] = Ap * s + Aq * c
            Vp, Vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = Vp * c - Vq * s
            V[:, q] = Vp * s + Vq * c
    else:
        off = _offdiag_norm(A)
        raise NumericError(f"Jacobi iteration did not converge: off-diagonal norm {off:.3e} "
                           f"after {max_sweeps} sweeps (matrix norm {scale:.3e})")
    # the dummy coordinate is never rotated, so it splits off exactly
    w = np.diag(A)[:n0].copy()
    V = V[:n0, :n0]
    order = np.argsort(w)
    return w[order], V[:, order]


def pinv_sym(A: np.ndarray, rtol: float = NULL_TOL) -> tuple[np.ndarray, int]:
    """Pseudo-inverse of a symmetric positive semidefinite matrix and its numerical rank."""
    w, V = jacobi_eigh(A)
    cut = rtol * max(abs(w).max(initial=0.0), 1e-300)
    keep = w > cut
    return (V[:, keep] / w[keep]) @ V[:, keep].T, int(keep.sum())


def _householder_deflate(v: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the complement of ``v``."""
    v = v / np.linalg.norm(v)
    e = np.zeros_like(v)
    e[0] = 1.0
    sign = 1.0 if v[0] >= 0 else -1.0
    h = v + sign * e
    h /= np.linalg.norm(h)
    H = np.eye(len(v)) - 2.0 * np.outer(h, h)
    return H[:, 1:]


# --- quadratic forms -----------------------------------------------------------------

@dataclass
class QuadraticForms:
    """``Gamma_2 = u^T Q u``, ``Gamma = u^T G u`` and ``L = b^T u`` at 0 on the index set."""

    R: int
    index: np.ndarray
    Q: np.ndarray
    G: np.ndarray
    b: np.ndarray
    support: np.ndarray          # signed support within [-R, R]
    weights: np.ndarray          # kernel values on ``support``

    def position(self, j: int) -> int:
        return int(np.searchsorted(self.index, j))

    def vector(self, fn) -> np.ndarray:
        """Values of a function on the index set."""
        return np.asarray(fn(self.index), dtype=float)

    @property
    def mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def support_count(self) -> int:
        return int(np.sum(self.support > 0))


def build_forms(kernel: Kernel, R: int) -> QuadraticForms:
    """Assemble ``Q``, ``G`` and ``b`` for the kernel truncated to ``[-R, R]``."""
    R = int(R)
    if R < 1:
        raise PreconditionError("R must be at least 1")
    P = kernel.positive_offsets(R)
    w = kernel.positive_values(P) if len(P) else np.zeros(0)
    P, w = P[w > 0], w[w > 0]
    if len(P) == 0:
        raise PreconditionError(f"no support point in [1, {R}]")
    S = np.concatenate([-P[::-1], P])
    K = np.concatenate([w[::-1], w])
    sums = (S[:, None] + S[None, :]).ravel()
    index = np.unique(np.concatenate([S, sums[sums != 0]]))
    n = len(index)
    pos = {int(v): i for i, v in enumerate(index)}
    m = len(S)
    # one row per ordered pair (j, l): e_{j+l} - e_j - e_l
    rows = np.arange(m * m)
    A = np.zeros((m * m, n))
    jj = np.repeat(np.arange(m), m)
    ll = np.tile(np.arange(m), m)
    sidx = np.array([pos[int(s)] for s in S])
    np.add.at(A, (rows, sidx[jj]), -1.0)
    np.add.at(A, (rows, sidx[ll]), -1.0)
    nz = sums != 0
    np.add.at(A, (rows[nz], np.array([pos[int(v)] for v in sums[nz]])), 1.0)
    weight = 0.25 * K[jj] * K[ll]
    Q = (A * weight[:, None]).T @ A
    Q = 0.5 * (Q + Q.T)
    G = np.zeros((n, n))
    b = np.zeros(n)
    G[sidx, sidx] = 0.5 * K
    b[sidx] = K
    return QuadraticForms(R, index, Q, G, b, S, K)


# --- optimal dimension ------------------------------------------------------------------

@dataclass
class DimensionResult:
    d_star: float
    minimizer: np.ndarray
    extra_null: int
    residual: float


def optimal_dimension(kernel: Kernel, R: int, forms: QuadraticForms | None = None) -> DimensionResult:
    """``d*(R) = max (b^T u)**2 / u^T Q u``; also returns the minimiser of ``u^T Q u`` on ``b^T u = 1``.

    The linear function spans a known null direction of ``Q``; it is removed by
    a Householder reflection before the eigen-solve, and any further null
    directions are counted in ``extra_null``.
    """
    F = forms or build_forms(kernel, R)
    lin = F.index.astype(float)
    if abs(F.b @ lin) > 1e-12 * np.abs(F.b).sum() * np.abs(lin).max():
        raise NumericError("the linear function is not orthogonal to b")
    # diagonal scaling u = D v; the weights span many orders of magnitude
    D = 1.0 / np.sqrt(np.diag(F.Q))
    Qs = D[:, None] * F.Q * D[None, :]
    bs = D * F.b
    B = _householder_deflate(lin / D)
    Qd = B.T @ Qs @ B
    bd = B.T @ bs
    w, V = jacobi_eigh(0.5 * (Qd + Qd.T))
    cut = NULL_TOL * max(w.max(initial=0.0), 1e-300)
    keep = w > cut
    extra = int((~keep).sum())
    coef = V.T @ bd
    if extra and np.any(np.abs(coef[~keep]) > 1e-8 * np.linalg.norm(bd)):
        raise NumericError(f"b has a component in {extra} near-null directions of Q "
                           f"(smallest eigenvalue {w[0]:.3e}): the minimum is 0")
    y = V[:, keep] @ (coef[keep] / w[keep])
    d = float(bd @ y)
    u = D * (B @ y) / d
    residual = float(np.linalg.norm(F.Q @ u - F.b / d) / max(np.linalg.norm(F.b / d), 1e-300))
    return DimensionResult(d, u, extra, residual)


# --- optimal curvature ---------------------------------------------------------------------

@dataclass
class CurvatureResult:
    kappa_star: float
    kappa_deflated: float
    minimizer: np.ndarray
    minimizer_deflated: np.ndarray
    residual: float


def optimal_curvature(kernel: Kernel, R: int, forms: QuadraticForms | None = None) -> CurvatureResult:
    """Smallest ``u^T Q u / u^T G u`` after eliminating the variables where ``G`` vanishes.

    ``kappa_star`` is the smallest generalised eigenvalue.  It is 0 at every
    radius, attained by the linear function (``Gamma_2 = 0``, ``Gamma > 0``);
    negative rounding noise is clipped since ``Q`` is semidefinite.
    ``kappa_deflated`` is the next eigenvalue, i.e. the minimum over functions
    G-orthogonal to the linear one, and carries the actual dependence on ``R``.
    """
    F = forms or build_forms(kernel, R)
    g = np.diag(F.G)
    on = g > 0
    Q11 = F.Q[np.ix_(on, on)]
    Q12 = F.Q[np.ix_(on, ~on)]
    Q22 = F.Q[np.ix_(~on, ~on)]
    if Q22.size:
        Q22p, _ = pinv_sym(Q22)
        S = Q11 - Q12 @ Q22p @ Q12.T
    else:
        Q22p = np.zeros((0, 0))
        S = Q11
    ginv = 1.0 / np.sqrt(g[on])
    M = ginv[:, None] * S * ginv[None, :]
    M = 0.5 * (M + M.T)
    w_raw, _ = jacobi_eigh(M)
    lin = np.sqrt(g[on]) * F.index[on]
    B = _householder_deflate(lin)
    w, V = jacobi_eigh(B.T @ M @ B)
    kappa = float(w[0])
    y = ginv * (B @ V[:, 0])
    u = np.zeros(len(F.index))
    u[on] = y
    if Q22.size:
        u[~on] = -Q22p @ Q12.T @ y
    num = float(u @ F.Q @ u)
    den = float(u @ F.G @ u)
    residual = abs(num / den - kappa) / max(abs(kappa), 1e-300) if den > 0 else math.inf
    lin_u = F.index.astype(float)
    return CurvatureResult(max(float(w_raw[0]), 0.0), kappa, lin_u, u, residual)


# --- explicit bound ---------------------------------------------------------------------------

def explicit_dimension_bound(kernel: Kernel, delta: float, j0: int = 1) -> float:
    """A dimension ``d`` for which CD(0, d) holds, assembled from explicit kernel constants.

    ``C (sum_{j<=j0} 1/(2 j**2 k(j)) + M/(1 - delta))`` with ``C = 2 * (two-sided second moment)``
    and ``M = (1 + 1/delta)(4/k(1) + |k|_1/(2 k(1)**2)) + (1 + delta/j0)/(2 j0 k(j0))``.
    The kernel must be non-increasing from ``j0`` on (the sum runs over support points).

    >>> from cdlattice.kernels import make_finite
    >>> explicit_dimension_bound(make_finite({1: 1.0}), 0.5)
    128.0
    """
    if not 0.0 < delta < 1.0:
        raise PreconditionError(f"delta must lie in (0, 1), got {delta}")
    j0 = int(j0)
    if j0 < 1:
        raise PreconditionError("j0 must be a positive integer")
    k1 = float(kernel.eval(1))
    kj0 = float(kernel.eval(j0))
    if not k1 > 0 or not kj0 > 0:
        raise PreconditionError("the bound needs k(1) > 0 and k(j0) > 0")
    if kernel.monotone_from is None or kernel.monotone_from > j0:
        raise PreconditionError(f"the kernel must be non-increasing from j0 = {j0} on")
    m2 = kernel.second_moment.hi
    mass = kernel.mass.hi
    if not (math.isfinite(m2) and math.isfinite(mass)):
        raise PreconditionError("the bound needs a finite second moment")
    C = 2.0 * m2
    head = sum(1.0 / (2.0 * j * j * float(kernel.eval(j)))
               for j in range(1, j0 + 1) if float(kernel.eval(j)) > 0)
    M = (1.0 + 1.0 / delta) * (4.0 / k1 + mass / (2.0 * k1 * k1)) + (1.0 + delta / j0) / (2.0 * j0 * kj0)
    return C * (head + M / (1.0 - delta))


def best_dimension_bound(kernel: Kernel, deltas=None, j0s=(1,)) -> tuple[float, float, int]:
    """Minimum of :func:`explicit_dimension_bound` over a grid; returns ``(d, delta, j0)``."""
    deltas = np.linspace(0.05, 0.95, 19) if deltas is None else deltas
    best = (math.inf, math.nan, 0)
    for j0 in j0s:
        for dl in deltas:
            try:
                d = explicit_dimension_bound(kernel, float(dl), j0)
            except PreconditionError:
                continue
            if d < best[0]:
                best = (d, float(dl), int(j0))
    return best


# --- reports -----------------------------------------------------------------------------------

@dataclass
class ExtremalReport:
    radius: int
    d_star: float
    kappa_star: float
    kappa_deflated: float
    support_count: int
    mass: float
    bound_checks: dict = field(default_factory=dict)
    minimizers: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    extra_null: int = 0

    def to_json(self, with_minimizers: bool = False) -> dict:
        out = asdict(self)
        if not with_minimizers:
            out.pop("minimizers")
        return out


def extremal_report(kernel: Kernel, R: int) -> ExtremalReport:
    """``d*``, ``kappa*`` and the structural bounds they must satisfy at radius ``R``."""
    F = build_forms(kernel, R)
    dim = optimal_dimension(kernel, R, F)
    cur = optimal_curvature(kernel, R, F)
    n_supp = F.support_count
    mass = F.mass
    floor = 2.0 * float(F.weights.min()) - mass
    checks = {
        "d_star >= 1": bool(dim.d_star >= 1.0 - 1e-8),
        "d_star <= 2 N_supp": bool(dim.d_star <= 2 * n_supp + 1e-8),
        "kappa_star >= 2 min k - |k|_1": bool(cur.kappa_star >= floor - 1e-8),
        "kappa_deflated >= 2 min k - |k|_1": bool(cur.kappa_deflated >= floor - 1e-8),
    }
    if cur.kappa_deflated > 1e-12:
        # adding a linear function changes neither Gamma_2 nor L, so the deflated bound applies
        checks["d_star <= 2|k|_1/kappa_deflated"] = bool(
            dim.d_star <= implied_dimension(cur.kappa_deflated, math.inf, mass) * (1 + 1e-8))
    mins = {"index": F.index.tolist(), "dimension": dim.minimizer.tolist(),
            "curvature": cur.minimizer.tolist(),
            "curvature_deflated": cur.minimizer_deflated.tolist()}
    res = {"dimension": dim.residual, "curvature_deflated": cur.residual}
    return ExtremalReport(int(R), dim.d_star, cur.kappa_star, cur.kappa_deflated, n_supp, mass,
                          checks, mins, res, dim.extra_null)


def run_ladder(kernel: Kernel, radii=(8, 16, 32, 64)) -> list[ExtremalReport]:
    return [extremal_report(kernel, R) for R in radii]


def reports_to_json(reports: list[ExtremalReport], with_minimizers: bool = False) -> str:
    return json.dumps([r.to_json(with_minimizers) for r in reports], indent=2, sort_keys=True)
