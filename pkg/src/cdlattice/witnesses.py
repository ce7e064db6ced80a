"""Explicit test functions for the CD inequalities and closed-form data attached to them.

Each constructor returns a :class:`LatticeFunction`.  Witnesses whose values
at the origin have a closed form register it, so the operators can skip the
generic double sum (and its growth-based remainder) for infinite kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

import numpy as np

from .enclosure import (INF, UNIT_ROUNDOFF, Enclosure, accumulation_bound,
                        enclose_fraction, normalizing_power, phi_ratio_bounds,
                        power_sum_bounds, psi_ratio_bounds, square_bounds)
from .errors import DomainError, NumericError, PreconditionError
from .kernels import FiniteSet, Kernel, SparseSequence, make_finite, make_power
from .operators import LatticeFunction

_U = UNIT_ROUNDOFF
_CLOSED_PAD = 1e-9


# --- helpers -------------------------------------------------------------------

def _partial_moment(kernel: Kernel, R: int, p: float) -> Enclosure:
    """``sum_{1 <= j <= R} k(j) j**p`` (one side)."""
    P = kernel.positive_offsets(R)
    if len(P) == 0:
        return Enclosure.exact(0.0)
    terms = kernel.positive_values(P) * P.astype(float) ** p
    s = math.fsum(terms)
    err = (kernel.rel_error(R) + 4.0 * _U) * s
    return Enclosure(max(s - err, 0.0), s + err).widen_rel()


def _two_sided_moment(kernel: Kernel, R: int, p: float) -> Enclosure:
    if kernel.max_offset is not None:
        return _partial_moment(kernel, kernel.max_offset, p) * 2.0
    return _partial_moment(kernel, R, p) * 2.0 + kernel.tail_moment(R, p)


def _power_partial(gamma: float, R: int) -> Enclosure:
    """``sum_{m=1}^{R} m**gamma`` from float powers (each faithful to one ulp)."""
    t = np.arange(1, R + 1, dtype=float) ** gamma
    s = math.fsum(t)
    e = (4.0 * _U) * math.fsum(np.abs(t))
    return Enclosure(s - e, s + e).widen_rel()


def _check_eps(beta: float, eps: float):
    if not 0.0 < eps < beta:
        raise DomainError(f"need 0 < eps < beta, got eps={eps}, beta={beta}")


# --- power witness and the J/K sums ------------------------------------------------

@dataclass(frozen=True)
class JKSums:
    """Enclosures of the two triangular double sums of the power witness (unit kernel constant).

    ``J = sum_{j>=1} sum_{l<=j} k(j)k(l) (u(j+l) - u(j) - u(l))**2`` and ``K`` the
    same with ``u(j-l)``; ``J_core``/``K_core`` cover rows ``j <= R`` only.
    """

    J: Enclosure
    K: Enclosure
    J_core: Enclosure
    K_core: Enclosure
    R: int


def _jk_core(beta: float, eps: float, R: int) -> tuple[Enclosure, Enclosure]:
    g = beta - eps
    U = np.arange(2 * R + 1, dtype=float) ** g
    w = np.arange(1, R + 1, dtype=float) ** (-1.0 - beta)
    W = np.cumsum(w)
    rowsJ, rowsK, errJ, errK = [], [], [], []
    for j in range(1, R + 1):
        wl = w[:j]
        base = U[j] + U[1:j + 1]
        tJ = U[j + 1:2 * j + 1] - base
        tK = U[j - 1::-1] - base
        sJ = np.dot(wl, tJ * tJ)
        sK = np.dot(wl, tK * tK)
        kj = w[j - 1]
        rel = 10.0 * _U + accumulation_bound(j)
        dJ = 20.0 * _U * U[2 * j]
        dK = 20.0 * _U * U[j]
        errJ.append(kj * (2.0 * dJ * np.dot(wl, np.abs(tJ)) + dJ * dJ * W[j - 1] + rel * sJ))
        errK.append(kj * (2.0 * dK * np.dot(wl, np.abs(tK)) + dK * dK * W[j - 1] + rel * sK))
        rowsJ.append(kj * sJ)
        rowsK.append(kj * sK)
    out = []
    for rows, errs in ((rowsJ, errJ), (rowsK, errK)):
        s = math.fsum(rows)
        e = math.fsum(errs) * (1.0 + 1e-6) + 2.0 * _U * s
        out.append(Enclosure(max(s - e, 0.0), s + e))
    return out[0], out[1]


def _cell_edges(R: int) -> np.ndarray:
    x0 = max(min(64.0 / R, 0.05), 0.002, 2.0 / R)
    edges = [0.0, x0]
    a = x0
    while a < 1.0:
        a = min(max(1.02 * a, a + 16.0 / R), 1.0)
        edges.append(a)
    return np.array(edges)


def _cell_sums(a: np.ndarray, b: np.ndarray, q: float, R: int):
    """Bounds of ``j**-(q+1) sum_{aj < l <= bj} l**q`` for every ``j > R`` (cells with ``a > 0``)."""
    h = 1.0 / R
    if q == -1.0:
        lo = np.log(b / (a + h))
        hi = np.log(b / (a - h))
    else:
        p = q + 1.0
        if q >= 0.0:
            lo = ((b - h) ** p - a ** p) / p
            hi = ((b + h) ** p - a ** p) / p
        else:
            lo = (b ** p - (a + h) ** p) / p
            hi = (b ** p - (a - h) ** p) / p
    return np.maximum(lo, 0.0), hi


def _log_moment_tail(eps: float, R: int) -> Enclosure:
    """``sum_{j>R} j**(-1-2eps) log j`` by integral comparison (decreasing summand for ``j >= 3``)."""
    e2 = 2.0 * eps

    def F(x):
        return x ** -e2 * (math.log(x) / e2 + 1.0 / (e2 * e2))

    return Enclosure(F(R + 1.0), F(float(R))).widen_rel(_CLOSED_PAD)


def _jk_tail(beta: float, eps: float, R: int, which: str) -> Enclosure:
    g = beta - eps
    s = normalizing_power(g)
    q = 2.0 * s - 1.0 - beta
    edges = _cell_edges(R)
    a, b = edges[:-1], edges[1:]
    ratio = phi_ratio_bounds if which == "J" else psi_ratio_bounds
    rlo, rhi = ratio(a, b, g)
    r2lo, r2hi = square_bounds(rlo, rhi)
    Z = power_sum_bounds(-1.0 - 2.0 * eps, R + 1).widen_rel(_CLOSED_PAD)
    # cells away from the origin scale like j**(-1-2eps)
    Ilo, Ihi = _cell_sums(a[1:], b[1:], q, R)
    C = Enclosure(math.fsum(r2lo[1:] * Ilo), math.fsum(r2hi[1:] * Ihi)).widen_rel(_CLOSED_PAD)
    tail = Z * C
    x0 = b[0]
    reach = x0 * (R + 1) >= 1.0
    if q > -1.0:
        p = q + 1.0
        if q >= 0.0:
            lo = max(((x0 - 1.0 / R) ** p) / p, 0.0)
            hi = ((x0 + 1.0 / R) ** p) / p
        else:
            lo = max((x0 ** p - float(R) ** -p) / p, 0.0)
            hi = x0 ** p / p
        first = Z * Enclosure(r2lo[0] * lo, r2hi[0] * hi).widen_rel(_CLOSED_PAD)
    elif q == -1.0:
        ZL = _log_moment_tail(eps, R)
        lx = math.log(x0)
        lo = (ZL + Z * lx).lo if reach else 0.0
        hi = (ZL + Z * (1.0 + lx)).hi
        first = Enclosure(r2lo[0] * max(lo, 0.0), r2hi[0] * hi).widen_rel(_CLOSED_PAD)
    else:
        Zb = power_sum_bounds(-1.0 - beta, R + 1).widen_rel(_CLOSED_PAD)
        lo = r2lo[0] * Zb.lo if reach else 0.0
        hi = r2hi[0] * (1.0 + 1.0 / (-q - 1.0)) * Zb.hi
        first = Enclosure(lo, hi).widen_rel(_CLOSED_PAD)
    return tail + first


@lru_cache(maxsize=64)
def jk_sums(beta: float, eps: float, R: int = 20_000) -> JKSums:
    """Enclose the J and K sums of ``u(j) = |j|**(beta-eps)`` for the kernel ``|j|**(-1-beta)``.

    Rows ``j <= R`` are summed directly; for ``j > R`` each row is split into
    cells ``l/j`` in ``(a, b]`` on which the normalised second differences are
    bounded, and the cell counts of ``l**q`` are bounded by integrals.
    """
    beta, eps, R = float(beta), float(eps), int(R)
    _check_eps(beta, eps)
    if not 0.0 < beta <= 2.0:
        raise DomainError(f"beta must lie in (0, 2], got {beta}")
    if R < 8:
        raise DomainError("jk_sums needs R >= 8")
    Jc, Kc = _jk_core(beta, eps, R)
    J = Jc + _jk_tail(beta, eps, R, "J")
    K = Kc + _jk_tail(beta, eps, R, "K")
    return JKSums(J, K, Jc, Kc, R)


def _power_closed_form(beta: float, eps: float):
    g = beta - eps

    def closed(quantity: str, kernel: Kernel, x: int, R: int):
        if x != 0:
            return None
        if quantity == "L":
            return _two_sided_moment(kernel, R, g)
        if quantity == "Gamma":
            return _two_sided_moment(kernel, R, 2.0 * g) * 0.5
        if kernel.family != "power" or abs(float(kernel.params["beta"]) - beta) > 0.0:
            return None
        c = float(kernel.params["c"])
        jk = jk_sums(beta, eps, min(int(R), DEFAULT_JK_RADIUS))
        Z = _power_partial(-2.0 - 2.0 * eps, R) + power_sum_bounds(-2.0 - 2.0 * eps, R + 1)
        diag = ((2.0 ** g - 2.0) ** 2 + 4.0) * 0.5
        val = (jk.J + jk.K - Z * diag) * (c * c)
        return Enclosure(max(val.lo, 0.0), val.hi, val.rigorous)

    return closed


DEFAULT_JK_RADIUS = 20_000


def power_witness(beta: float, eps: float) -> LatticeFunction:
    """``u(j) = |j|**(beta - eps)`` with ``0 < eps < beta``.

    >>> power_witness(1.5, 0.5)(4)
    4.0
    """
    beta, eps = float(beta), float(eps)
    _check_eps(beta, eps)
    g = beta - eps
    return LatticeFunction.family(
        "power_eps", lambda j: np.abs(j).astype(float) ** g, g, 1.0 + 4.0 * _U,
        params={"beta": beta, "eps": eps}, symmetry="even", eval_rel=2.0 * _U,
        closed_form=_power_closed_form(beta, eps))


# --- truncated power witness ----------------------------------------------------------

def truncated_witness(beta: float, eps: float, N: int) -> LatticeFunction:
    """Power witness cut off linearly between ``N`` and ``N**2``.

    ``|j|**g`` for ``|j| <= N``, ``N**g (N**2 - |j|)/(N**2 - N)`` for
    ``N < |j| <= N**2`` and 0 beyond, with ``g = beta - eps``.
    """
    beta, eps = float(beta), float(eps)
    _check_eps(beta, eps)
    if abs(2.0 * beta - 2.0 * eps - 1.0) < 1e-12:
        raise DomainError("eps with 2*beta - 2*eps - 1 = 0 is excluded")
    if int(N) != N or N < 2:
        raise DomainError(f"N must be a positive integer >= 2, got {N!r}")
    N = int(N)
    if N % 2:
        raise DomainError(f"N must be even, got {N}")
    g = beta - eps
    top = N * N
    js = np.arange(0, top + 1)
    vals = np.zeros(top + 1)
    vals[:N + 1] = js[:N + 1].astype(float) ** g
    vals[N + 1:] = -(N ** g / (top - N)) * js[N + 1:] + N ** (g + 2) / (top - N)
    vals[top] = 0.0
    full = np.concatenate([vals[:0:-1], vals])
    return LatticeFunction.explicit(start=-top, array=full, name="truncated",
                                    params={"beta": beta, "eps": eps, "N": N}, symmetry="even")


# --- sharpness example ---------------------------------------------------------------------

def sharpness_witness(N: int) -> tuple[Kernel, LatticeFunction]:
    """Unit weights on the odd offsets ``+-1, ..., +-(2N-1)`` and the function 1 on odd, 2 on even nonzero points."""
    if int(N) != N or N < 1:
        raise DomainError(f"N must be a positive integer, got {N!r}")
    N = int(N)
    kernel = make_finite({2 * i + 1: 1.0 for i in range(N)})

    def ev(j):
        j = np.asarray(j, dtype=np.int64)
        return np.where(j == 0, 0.0, np.where(j % 2 == 1, 1.0, 2.0))

    u = LatticeFunction.family("sharpness", ev, 0.0, 2.0, params={"N": N}, symmetry="even")
    return kernel, u


# --- square ------------------------------------------------------------------------------------

def _square_closed(quantity: str, kernel: Kernel, x: int, R: int):
    m2 = _two_sided_moment(kernel, R, 2.0)
    if quantity == "L":
        return m2
    if quantity == "Gamma":
        return m2 * (2.0 * x * x) + _two_sided_moment(kernel, R, 4.0) * 0.5
    return m2.square()


def square_witness() -> LatticeFunction:
    """``u(j) = j**2``; L, Gamma and Gamma_2 reduce to kernel moments."""
    return LatticeFunction.family("square", lambda j: np.asarray(j, dtype=float) ** 2, 2.0, 1.0,
                                  symmetry="even", closed_form=_square_closed)


# --- linear cutoff -----------------------------------------------------------------------------

def linear_cutoff_witness(N: int, T_N: int | None = None) -> LatticeFunction:
    """``u(j) = j phi(|j|)`` with ``phi = 1`` up to ``N``, linear down to 0 at ``T_N`` (default ``2N``)."""
    if int(N) != N or N < 1:
        raise DomainError(f"N must be a positive integer, got {N!r}")
    N = int(N)
    if N % 2:
        raise DomainError(f"N must be even, got {N}")
    T = 2 * N if T_N is None else int(T_N)
    if T <= N:
        raise DomainError(f"T_N must exceed N, got T_N={T}, N={N}")
    if (T - N) / T < 0.5:
        raise DomainError(f"(T_N - N)/T_N = {(T - N) / T:.3g} is below 1/2")
    js = np.arange(-T, T + 1)
    a = np.abs(js)
    phi = np.where(a <= N, 1.0, (T - a) / (T - N))
    return LatticeFunction.explicit(start=-T, array=js * phi, name="linear_cutoff",
                                    params={"N": N, "T_N": T}, symmetry="odd")


def cutoff_profile(N: int, T_N: int | None = None):
    """The profile ``phi`` of :func:`linear_cutoff_witness` as a vectorised function."""
    T = 2 * int(N) if T_N is None else int(T_N)

    def phi(j):
        a = np.abs(np.asarray(j, dtype=float))
        return np.clip(np.where(a <= N, 1.0, (T - a) / (T - N)), 0.0, 1.0)

    return phi


# --- sparse witness --------------------------------------------------------------------------

@dataclass(frozen=True)
class SparseWitness:
    """The sparse witness together with its support count ``xi`` and the bounded remainder ``M``."""

    function: LatticeFunction
    xi: int
    M: float
    N: int
    n: int
    rigorous: bool


def _positive_support(kernel: Kernel, limit: int) -> list[int]:
    sup = kernel.support
    if isinstance(sup, FiniteSet):
        return [j for j in sup.offsets if j <= limit]
    if isinstance(sup, SparseSequence):
        return sup.prefix(limit)
    raise PreconditionError("the sparse witness needs a finite or sparse support")


def sparse_witness(kernel: Kernel, n: int, N: int, probe_limit: int = 10 ** 6) -> SparseWitness:
    """Reciprocal-weight witness on a thin support.

    ``u = 1/k`` on support points in ``(2N, n]``, ``u(j + l) = u(j) + u(l)`` when
    ``j + l`` has a unique decomposition into support points, and 0 otherwise;
    extended evenly.  ``N`` is the witness returned by the thin-support check.
    """
    n, N = int(n), int(N)
    if N < 0:
        raise DomainError("N must be nonnegative")
    if n <= 2 * N:
        raise PreconditionError(f"need n > 2N, got n={n}, N={N}")
    small = [s for s in _positive_support(kernel, n) if s > 2 * N]
    if not small:
        raise PreconditionError(f"no support point in (2N, n] = ({2 * N}, {n}]")
    kvals = [float(kernel.eval(s)) for s in small]
    if min(kvals) <= 0.0:
        raise NumericError("kernel weight underflows on the witness support")
    uvals = {s: 1.0 / k for s, k in zip(small, kvals)}
    finite = isinstance(kernel.support, FiniteSet)
    signed_small = sorted([-s for s in small] + small)
    sval = np.array([uvals[abs(s)] for s in signed_small])
    sarr = np.array(signed_small, dtype=np.int64)

    # a unique decomposition of m through the small points
    if finite:
        pos = np.array(kernel.support.offsets, dtype=np.int64)
    pool_cache: dict[int, np.ndarray] = {}

    def support_upto(limit: int) -> np.ndarray:
        if finite:
            return pos
        key = 1 << max(int(limit), 1).bit_length()
        if key not in pool_cache:
            pool_cache[key] = np.array(kernel.support.prefix(key), dtype=np.int64)
        return pool_cache[key]

    def ev(j):
        j = np.asarray(j, dtype=np.int64)
        m = np.abs(j).ravel()
        out = np.zeros(m.shape)
        if m.size == 0:
            return out.reshape(j.shape)
        pool = support_upto(int(m.max()) + int(sarr.max()) + 1)
        # support points themselves
        idx = np.searchsorted(sarr, m)
        on = (idx < len(sarr)) & (sarr[np.minimum(idx, len(sarr) - 1)] == m)
        out[on] = sval[np.minimum(idx, len(sarr) - 1)][on]
        done = on | np.isin(m, pool) | (m == 0)
        if 2 * N > 0:
            done |= m <= 2 * N
        for s, v in zip(sarr, sval):
            r = np.abs(m - s)
            hit = ~done & (r > 0) & np.isin(r, pool)
            if np.any(hit):
                rv = np.zeros(hit.sum())
                rr = r[hit]
                ri = np.searchsorted(sarr, rr)
                ok = (ri < len(sarr)) & (sarr[np.minimum(ri, len(sarr) - 1)] == rr)
                rv[ok] = sval[np.minimum(ri, len(sarr) - 1)][ok]
                out[hit] = v + rv
                done |= hit
        return out.reshape(j.shape)

    # bounded remainder: pairs of support points with 1 <= |j + l| <= 2N
    pts = _positive_support(kernel, min(probe_limit, 10 ** 7)) if not finite else list(kernel.support.offsets)
    spts = np.array(sorted([-p for p in pts] + pts), dtype=np.int64)
    M = 0.0
    if N > 0:
        kk = kernel.eval(spts)
        us = ev(spts)
        for a, ja in enumerate(spts):
            sums = ja + spts
            sel = (np.abs(sums) >= 1) & (np.abs(sums) <= 2 * N)
            if np.any(sel):
                t = ev(sums[sel]) - us[a] - us[sel]
                M += float(kk[a] * np.dot(kk[sel], t * t))
    xi = len(small)
    rigorous = finite or N == 0
    gmax = 2.0 * max(uvals.values())

    def closed(quantity: str, kern: Kernel, x: int, R: int):
        if x != 0 or kern is not kernel:
            return None
        fk = [Fraction(k) for k in kvals]
        fu = [Fraction(uvals[s]) for s in small]
        if quantity == "L":
            return enclose_fraction(2 * sum((k * v for k, v in zip(fk, fu)), Fraction(0)), rigorous)
        if quantity == "Gamma":
            return enclose_fraction(sum((k * v * v for k, v in zip(fk, fu)), Fraction(0)), rigorous)
        # pairs l = -j contribute k(j)^2 (2u(j))^2; the rest vanish outside |j+l| <= 2N
        diag = 2 * sum((k * k * 4 * v * v for k, v in zip(fk, fu)), Fraction(0))
        core = enclose_fraction(diag / 4, rigorous)
        return core + Enclosure.around(0.25 * M, 1e-12 * abs(M) + 0.0, rigorous)

    u = LatticeFunction.family("sparse", ev, 0.0, gmax * (1.0 + 1e-12),
                               params={"n": n, "N": N, "xi": xi, "M": M}, symmetry="even",
                               closed_form=closed, probe=2000)
    return SparseWitness(u, xi, M, N, n, rigorous)


# --- config -----------------------------------------------------------------------------------

WITNESS_NAMES = ("power_eps", "truncated", "sharpness", "square", "sparse", "linear_cutoff")


@dataclass(frozen=True)
class WitnessSpec:
    """A named witness with its parameters, the function and (for ``sharpness``) its own kernel."""

    name: str
    params: Mapping[str, object]
    function: LatticeFunction
    kernel: Kernel | None = None
    extra: Mapping[str, object] = field(default_factory=dict)


def witness_from_config(table: Mapping, kernel: Kernel | None = None) -> WitnessSpec:
    """Build a witness from a ``[witness]`` TOML table."""
    name = table.get("family")
    if name not in WITNESS_NAMES:
        raise PreconditionError(f"unknown witness family {name!r}; expected one of {WITNESS_NAMES}")
    p = {k: v for k, v in table.items() if k != "family"}
    try:
        if name == "power_eps":
            return WitnessSpec(name, p, power_witness(p["beta"], p["eps"]))
        if name == "truncated":
            return WitnessSpec(name, p, truncated_witness(p["beta"], p["eps"], p["N"]))
        if name == "sharpness":
            k, u = sharpness_witness(p["N"])
            return WitnessSpec(name, p, u, k)
        if name == "square":
            return WitnessSpec(name, p, square_witness())
        if name == "linear_cutoff":
            return WitnessSpec(name, p, linear_cutoff_witness(p["N"], p.get("T_N")))
        if kernel is None:
            raise PreconditionError("the sparse witness needs a kernel")
        sw = sparse_witness(kernel, p["n"], p.get("N", 0))
        return WitnessSpec(name, p, sw.function, None, {"xi": sw.xi, "M": sw.M})
    except KeyError as exc:
        raise PreconditionError(f"witness {name!r} is missing parameter {exc}") from None
