"""The generator L, the carre du champ Gamma and the iterated Gamma_2 at a lattice point.

For a kernel ``k`` and a function ``u`` on Z

    L u(x)      = sum_j k(j) (u(x+j) - u(x))
    Gamma(u)(x) = 1/2 sum_j k(j) (u(x+j) - u(x))**2
    Gamma2(u)(x) = 1/4 sum_{j,l} k(j) k(l) (u(x+j+l) - u(x+j) - u(x+l) + u(x))**2

Every evaluation returns an :class:`Enclosure`: a core sum over ``|j|, |l| <= R``
with a rounding-error bound, plus an enclosure of the remainder.  Small exact
inputs (finite kernels, explicit functions) are summed in rational arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from .enclosure import (INF, UNIT_ROUNDOFF, Enclosure, accumulation_bound,
                        enclose_fraction)
from .errors import AdmissibilityError, DomainError, NumericError, PreconditionError
from .kernels import Kernel

DEFAULT_RADIUS = 20_000
SWEEP_RADIUS = 2_000
# rational arithmetic is used up to this many (j, l) pairs
EXACT_PAIRS = 4096
_U = UNIT_ROUNDOFF


# --- lattice functions --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LatticeFunction:
    """A real function on Z.

    Two kinds exist.  ``explicit`` functions store ``u(start + i) = data[i]``
    and vanish elsewhere.  ``family`` functions carry a vectorised evaluator
    with a growth bound ``|u(j)| <= growth_const * (1 + |j|)**growth``.

    ``closed_form(quantity, kernel, x, R)`` may return a ready enclosure of
    ``"L"``, ``"Gamma"`` or ``"Gamma2"`` for infinite kernels, or None.
    """

    kind: str
    name: str = "explicit"
    params: Mapping[str, object] = field(default_factory=dict)
    start: int = 0
    data: np.ndarray | None = field(default=None, repr=False)
    evaluator: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False)
    growth: float | None = None
    growth_const: float | None = None
    symmetry: str | None = None
    eval_rel: float = 0.0
    closed_form: Callable | None = field(default=None, repr=False)

    # --- constructors ---------------------------------------------------------
    @classmethod
    def explicit(cls, values: Mapping[int, float] | None = None, *, start: int | None = None,
                 array=None, name: str = "explicit", params: Mapping | None = None,
                 symmetry: str | None = None) -> "LatticeFunction":
        """Finitely supported function from a map ``{j: u(j)}`` or from ``start`` and ``array``."""
        if values is not None:
            if array is not None:
                raise PreconditionError("give either a value map or an array")
            items = {int(k): float(v) for k, v in values.items()}
            if not items:
                start, arr = 0, np.zeros(0)
            else:
                lo, hi = min(items), max(items)
                arr = np.zeros(hi - lo + 1)
                for k, v in items.items():
                    arr[k - lo] = v
                start = lo
        else:
            arr = np.asarray(array if array is not None else [], dtype=float).copy()
            start = 0 if start is None else int(start)
        if not np.all(np.isfinite(arr)):
            raise DomainError("explicit values must be finite")
        nz = np.nonzero(arr)[0]
        if len(nz) == 0:
            start, arr = 0, np.zeros(0)
        else:
            start, arr = start + int(nz[0]), arr[nz[0]:nz[-1] + 1]
        arr.setflags(write=False)
        return cls("explicit", name, dict(params or {}), start, arr, symmetry=symmetry)

    @classmethod
    def family(cls, name: str, evaluator: Callable[[np.ndarray], np.ndarray], growth: float,
               growth_const: float, params: Mapping | None = None, symmetry: str | None = None,
               eval_rel: float = 0.0, closed_form: Callable | None = None,
               probe: int = 10_000) -> "LatticeFunction":
        """Function given by an evaluator; growth and symmetry are checked on ``[-probe, probe]``."""
        if growth < 0 or growth_const < 0:
            raise DomainError("growth exponent and constant must be nonnegative")
        u = cls("family", name, dict(params or {}), evaluator=evaluator, growth=float(growth),
                growth_const=float(growth_const), symmetry=symmetry, eval_rel=float(eval_rel),
                closed_form=closed_form)
        js = np.arange(-probe, probe + 1, dtype=np.int64)
        vals = u(js)
        if not np.all(np.isfinite(vals)):
            raise NumericError(f"{name}: evaluator returned non-finite values")
        bound = growth_const * (1.0 + np.abs(js)) ** growth
        if np.any(np.abs(vals) > bound * (1.0 + 1e-12)):
            bad = js[np.argmax(np.abs(vals) - bound)]
            raise PreconditionError(f"{name}: growth bound fails at j={bad}")
        _check_symmetry(u, vals, probe)
        return u

    # --- evaluation -------------------------------------------------------------
    def __call__(self, j):
        arr = np.asarray(j, dtype=np.int64)
        if self.kind == "explicit":
            out = np.zeros(arr.shape)
            if len(self.data):
                idx = arr - self.start
                ok = (idx >= 0) & (idx < len(self.data))
                out[ok] = self.data[idx[ok]]
        else:
            out = np.asarray(self.evaluator(arr), dtype=float)
            if out.shape != arr.shape:
                out = np.broadcast_to(out, arr.shape).astype(float)
        return float(out) if out.ndim == 0 else out

    @property
    def is_explicit(self) -> bool:
        return self.kind == "explicit"

    @property
    def support(self) -> tuple[int, int] | None:
        """Smallest interval ``[lo, hi]`` containing the support of an explicit function."""
        if not self.is_explicit or len(self.data) == 0:
            return None
        return self.start, self.start + len(self.data) - 1

    def support_radius(self, x: int = 0) -> int:
        """``max |i|`` over ``u(x + i) != 0``; explicit functions only."""
        if not self.is_explicit:
            raise PreconditionError("support radius is defined for explicit functions only")
        sup = self.support
        if sup is None:
            return 0
        return max(abs(sup[0] - x), abs(sup[1] - x))

    def square_norm(self) -> float:
        if not self.is_explicit:
            raise PreconditionError("square norm is defined for explicit functions only")
        return math.fsum(self.data * self.data)

    def describe(self) -> dict:
        out = {"kind": self.kind, "name": self.name, "params": dict(self.params),
               "symmetry": self.symmetry}
        if self.is_explicit:
            out["support"] = list(self.support) if self.support else None
        else:
            out["growth"] = [self.growth_const, self.growth]
        return out


def _check_symmetry(u: LatticeFunction, vals: np.ndarray, probe: int):
    if u.symmetry is None:
        return
    rev = vals[::-1]
    if u.symmetry == "even":
        ok = np.allclose(vals, rev, rtol=1e-12, atol=0.0)
    elif u.symmetry == "odd":
        ok = np.allclose(vals, -rev, rtol=1e-12, atol=0.0)
    else:
        raise DomainError(f"unknown symmetry flag {u.symmetry!r}")
    if not ok:
        raise PreconditionError(f"{u.name}: not {u.symmetry} on [-{probe}, {probe}]")


def symmetrize_and_center(u: LatticeFunction, x: int = 0) -> LatticeFunction:
    """``v(y) = (u(x+y) - u(x))/2 + (u(x-y) - u(x))/2``: even, with ``v(0) = 0``.

    L is unchanged by this map and Gamma and Gamma_2 at the origin can only
    decrease.
    """
    x = int(x)
    c = u(x)
    if u.is_explicit and c == 0.0:
        A = u.support_radius(x)
        ys = np.arange(-A, A + 1, dtype=np.int64)
        vals = 0.5 * u(x + ys) + 0.5 * u(x - ys)
        return LatticeFunction.explicit(start=-A, array=vals, name=f"sym({u.name})",
                                        params={"x": x}, symmetry="even")

    def ev(ys, u=u, x=x, c=c):
        return 0.5 * (u(x + ys) - c) + 0.5 * (u(x - ys) - c)

    if u.is_explicit:
        growth, const = 0.0, 2.0 * float(np.max(np.abs(u.data)))
    else:
        growth = u.growth
        const = u.growth_const * (1.0 + abs(x)) ** growth + abs(c)
    return LatticeFunction.family(f"sym({u.name})", ev, growth, const * (1.0 + 1e-12),
                                  params={"x": x}, symmetry="even",
                                  eval_rel=u.eval_rel + 4.0 * _U, probe=1000)


# --- kernel data on a window ---------------------------------------------------

@dataclass(frozen=True)
class _Window:
    offsets: np.ndarray       # signed support offsets with |j| <= R, increasing
    weights: np.ndarray
    rel: float                # relative error of each weight
    R: int
    T: Enclosure              # sum_{|j|>R} k(j)
    finite: bool


def _window(kernel: Kernel, R: int) -> _Window:
    if kernel.max_offset is not None:
        R = max(int(R), kernel.max_offset)
    P = kernel.positive_offsets(R)
    w = kernel.positive_values(P) if len(P) else np.zeros(0)
    keep = w > 0
    P, w = P[keep], w[keep]
    offsets = np.concatenate([-P[::-1], P])
    weights = np.concatenate([w[::-1], w])
    finite = kernel.max_offset is not None
    T = Enclosure.exact(0.0) if finite else kernel.tail_moment(R, 0.0)
    return _Window(offsets, weights, float(kernel.rel_error(R)), R, T, finite)


def _effective_radius(kernel: Kernel, u: LatticeFunction, x: int, R: int) -> int:
    if R < 1:
        raise PreconditionError("cutoff radius must be at least 1")
    if u.is_explicit:
        R = max(R, u.support_radius(x))
    return R


def _fsum_enclosure(total: float, mag: float, coef: float, rigorous: bool = True) -> Enclosure:
    # total was computed with |error| <= coef * mag (plus one rounding of the final fsum)
    return Enclosure.around(total, coef * mag + 2.0 * _U * abs(total), rigorous)


def _use_exact(win: _Window, u: LatticeFunction, pairs: int) -> bool:
    return win.rel == 0.0 and u.eval_rel == 0.0 and pairs <= EXACT_PAIRS


def _F(a) -> list[Fraction]:
    return [Fraction(float(v)) for v in np.ravel(a)]


# --- cores ------------------------------------------------------------------------

def _core_L(win: _Window, u: LatticeFunction, x: int) -> Enclosure:
    S, K = win.offsets, win.weights
    if len(S) == 0:
        return Enclosure.exact(0.0)
    w0 = u(x)
    w = u(x + S)
    if _use_exact(win, u, len(S)):
        f0 = Fraction(w0)
        return enclose_fraction(sum((k * (v - f0) for k, v in zip(_F(K), _F(w))), Fraction(0)))
    d = w - w0
    total = math.fsum(K * d)
    mag = math.fsum(K * (np.abs(w) + abs(w0)))
    coef = 4 * _U + 2 * u.eval_rel + win.rel
    return _fsum_enclosure(total, mag, coef)


def _core_Gamma(win: _Window, u: LatticeFunction, x: int) -> Enclosure:
    S, K = win.offsets, win.weights
    if len(S) == 0:
        return Enclosure.exact(0.0)
    w0 = u(x)
    w = u(x + S)
    if _use_exact(win, u, len(S)):
        f0 = Fraction(w0)
        total = sum((k * (v - f0) ** 2 for k, v in zip(_F(K), _F(w))), Fraction(0))
        return enclose_fraction(total / 2)
    d = w - w0
    total = 0.5 * math.fsum(K * d * d)
    mag = 0.5 * math.fsum(K * (np.abs(w) + abs(w0)) ** 2)
    coef = 8 * _U + 4 * u.eval_rel + win.rel
    return _fsum_enclosure(total, mag, coef)


def _core_Gamma2_family(win: _Window, u: LatticeFunction, x: int) -> Enclosure:
    """Direct double sum over the window for an arbitrary function."""
    S, K = win.offsets, win.weights
    n = len(S)
    if n == 0:
        return Enclosure.exact(0.0)
    w0 = u(x)
    wS = u(x + S)
    if _use_exact(win, u, n * n):
        fK, fS, f0 = _F(K), _F(wS), Fraction(w0)
        sums = (S[:, None] + S[None, :]).ravel()
        fJL = _F(u(x + sums))
        total = Fraction(0)
        for a in range(n):
            row = Fraction(0)
            for b in range(n):
                t = fJL[a * n + b] - fS[a] - fS[b] + f0
                row += fK[b] * t * t
            total += fK[a] * row
        return enclose_fraction(total / 4)
    dense = n * n > 4 * win.R + 1
    if dense:
        lo = x - 2 * win.R
        W = u(np.arange(lo, x + 2 * win.R + 1, dtype=np.int64))
    totals, mags = [], []
    aS = np.abs(wS)
    for a in range(n):
        if dense:
            wjl = W[S[a] + S - lo + x]
        else:
            wjl = u(x + S[a] + S)
        t = wjl - wS[a] - wS + w0
        totals.append(K[a] * np.dot(K, t * t))
        m = np.abs(wjl) + aS[a] + aS + abs(w0)
        mags.append(K[a] * np.dot(K, m * m))
    coef = 16 * _U + 8 * u.eval_rel + 3 * win.rel + accumulation_bound(n)
    return _fsum_enclosure(0.25 * math.fsum(totals), 0.25 * math.fsum(mags), coef)


def _core_Gamma2_explicit(win: _Window, u: LatticeFunction, x: int) -> Enclosure:
    """Double sum for a finitely supported function, organised by support radius.

    Offsets split into inner (``|j| <= A``) and outer ones, ``A`` being the
    support radius of ``u`` around ``x``.  Pairs with an outer member only see
    ``u`` through ``u(x+j+l)`` with ``|j+l| <= A``, so their sums reduce to
    short correlations instead of a full ``(2R)**2`` scan.
    """
    S, K = win.offsets, win.weights
    n = len(S)
    if n == 0:
        return Enclosure.exact(0.0)
    if _use_exact(win, u, n * n):
        return _core_Gamma2_family(win, u, x)
    A = u.support_radius(x)
    w0 = u(x)
    Wp = u(np.arange(x - 2 * A, x + 2 * A + 1, dtype=np.int64))   # w(i) for |i| <= 2A

    def w_at(idx):
        return Wp[idx + 2 * A]

    inner = np.abs(S) <= A
    Si, Ki = S[inner], K[inner]
    So, Ko = S[~inner], K[~inner]
    wi = w_at(Si)
    awi = np.abs(wi)
    parts, mags = [], []
    maxlen = max(len(Si), 1)

    # inner x inner
    for a in range(len(Si)):
        wjl = w_at(Si[a] + Si)
        t = wjl - wi[a] - wi + w0
        parts.append(Ki[a] * np.dot(Ki, t * t))
        m = np.abs(wjl) + awi[a] + awi + abs(w0)
        mags.append(Ki[a] * np.dot(Ki, m * m))

    if len(So):
        Kout = math.fsum(Ko)
        # inner x outer, counted twice by symmetry of the summand in (j, l)
        io, io_mag = [], []
        for a in range(len(Si)):
            aj = wi[a] - w0
            lo_i = np.searchsorted(So, -A - Si[a], side="left")
            hi_i = np.searchsorted(So, A - Si[a], side="right")
            base = aj * aj * Kout
            bmag = (abs(wi[a]) + abs(w0)) ** 2 * Kout
            if hi_i > lo_i:
                v = w_at(Si[a] + So[lo_i:hi_i])
                kk = Ko[lo_i:hi_i]
                corr = np.dot(kk, v * (v - 2.0 * aj))
                cmag = np.dot(kk, np.abs(v) * (np.abs(v) + 2.0 * abs(aj)))
            else:
                corr = cmag = 0.0
            io.append(Ki[a] * (base + corr))
            io_mag.append(Ki[a] * (bmag + cmag))
            maxlen = max(maxlen, hi_i - lo_i)
        parts.append(2.0 * math.fsum(io))
        mags.append(2.0 * math.fsum(io_mag))
        # outer x outer: sum_m (w(m)+w0)^2 C(m) with C the autocorrelation of the outer weights
        ms = np.arange(-A, A + 1, dtype=np.int64)
        g = w_at(ms) * (w_at(ms) + 2.0 * w0)
        gmag = np.abs(w_at(ms)) * (np.abs(w_at(ms)) + 2.0 * abs(w0))
        C = _outer_autocorrelation(So, Ko, A)
        parts.append(w0 * w0 * Kout * Kout + math.fsum(g * C))
        mags.append(w0 * w0 * Kout * Kout + math.fsum(gmag * C))
        maxlen = max(maxlen, len(So))
    coef = 16 * _U + 3 * win.rel + accumulation_bound(maxlen + 2)
    return _fsum_enclosure(0.25 * math.fsum(parts), 0.25 * math.fsum(mags), coef)


def _outer_autocorrelation(So: np.ndarray, Ko: np.ndarray, A: int) -> np.ndarray:
    """``C(m) = sum_{j, m-j outer} k(j) k(m-j)`` for ``|m| <= A``."""
    C = np.zeros(2 * A + 1)
    lo, hi = int(So[0]), int(So[-1])
    span = hi - lo + 1
    if span <= 4 * len(So) and span <= 10 ** 7:
        # dense: lay the outer weights on an array indexed by offset
        D = np.zeros(span)
        D[So - lo] = Ko
        Drev = D[::-1]
        for m in range(0, A + 1):
            # pairs (j, m - j) with j and m - j in [lo, hi]
            j_lo = max(lo, m - hi)
            j_hi = min(hi, m - lo)
            if j_hi < j_lo:
                continue
            a = D[j_lo - lo:j_hi - lo + 1]
            # index of m - j in D runs from (m - j_lo - lo) downwards
            start = span - 1 - (m - j_lo - lo)
            b = Drev[start:start + len(a)]
            C[A + m] = np.dot(a, b)
        C[:A] = C[A + 1:][::-1]
        return C
    pos = {int(s): i for i, s in enumerate(So)}
    for i, s in enumerate(So):
        for m in range(-A, A + 1):
            t = pos.get(m - int(s))
            if t is not None:
                C[A + m] += Ko[i] * Ko[t]
    return C


# --- remainders ---------------------------------------------------------------------

def _explicit_tails(kernel: Kernel, win: _Window, u: LatticeFunction, x: int,
                    gamma_core: Enclosure) -> dict[str, Enclosure]:
    """Remainders beyond the window for finitely supported ``u`` (window radius >= support radius)."""
    if win.finite:
        zero = Enclosure.exact(0.0)
        return {"L": zero, "Gamma": zero, "Gamma2": zero}
    w0 = u(x)
    T = win.T
    L_tail = T * (-w0)
    G_tail = T * (0.5 * w0 * w0)
    S = kernel.sup_beyond(win.R)
    V = Enclosure.exact(u.square_norm()).widen_rel(1e-12)
    M = kernel.mass
    two_TG = T * gamma_core * 2.0
    hi = (two_TG + V * M * S + V * T * (0.5 * S) + T.square() * (0.5 * w0 * w0)).hi
    rig = T.rigorous and M.rigorous
    return {"L": L_tail, "Gamma": G_tail, "Gamma2": Enclosure(0.0, hi, rig)}


def _growth_tails(kernel: Kernel, win: _Window, u: LatticeFunction, x: int) -> dict[str, Enclosure] | None:
    """Remainders from the growth bound ``|u(j)| <= C (1+|j|)**g``; None when they diverge."""
    if win.finite:
        zero = Enclosure.exact(0.0)
        return {"L": zero, "Gamma": zero, "Gamma2": zero}
    g, C = u.growth, u.growth_const
    R = win.R
    ux = abs(u(x))
    Cx = C * (1.0 + abs(x)) ** g * (1.0 + 1.0 / R) ** g
    T = win.T.hi
    Mg = kernel.tail_moment(R, g)
    M2g = kernel.tail_moment(R, 2 * g)
    out = {}
    lt = Cx * Mg.hi + ux * T
    out["L"] = Enclosure(-lt, lt, Mg.rigorous) if math.isfinite(lt) else None
    gt = Cx * Cx * M2g.hi + ux * ux * T
    out["Gamma"] = Enclosure(0.0, gt, M2g.rigorous) if math.isfinite(gt) else None
    # pairs with max(|j|, |l|) > R, using (1+|x|+|j|+|l|) <= (1+|x|)(1+|j|)(1+|l|)
    Cx2 = (C * (1.0 + abs(x)) ** g) ** 2
    full = kernel.tail_moment(1, 2 * g)
    k1 = 2.0 * float(kernel.eval(1)) * (1.0 + win.rel + 4 * _U)
    A0 = 2.0 ** (2 * g) * (k1 + full.hi)          # bounds sum_j k(j) (1+|j|)**(2g)
    AR = (1.0 + 1.0 / R) ** (2 * g) * M2g.hi
    Mhi = kernel.mass.hi
    g2 = 2 * Cx2 * AR * A0 + 2 * Cx2 * (AR * Mhi + T * A0) + 2 * ux * ux * T * Mhi
    out["Gamma2"] = Enclosure(0.0, g2, full.rigorous and M2g.rigorous) if math.isfinite(g2) else None
    return out


def _heuristic(core_fn, kernel: Kernel, u: LatticeFunction, x: int, R: int, signed: bool) -> Enclosure:
    core = core_fn(_window(kernel, R), u, x)
    half = core_fn(_window(kernel, max(R // 2, 1)), u, x)
    est = abs(core.mid - half.mid)
    lo = core.lo - est if signed else core.lo
    return Enclosure(lo, core.hi + est, rigorous=False)


# --- public operators ------------------------------------------------------------------

def _evaluate(quantity: str, kernel: Kernel, u: LatticeFunction, x: int, R: int) -> Enclosure:
    x = int(x)
    R = _effective_radius(kernel, u, x, int(R))
    infinite = kernel.max_offset is None
    if infinite and u.closed_form is not None:
        res = u.closed_form(quantity, kernel, x, R)
        if res is not None:
            return res
    win = _window(kernel, R)
    core_fns = {"L": _core_L, "Gamma": _core_Gamma,
                "Gamma2": _core_Gamma2_explicit if u.is_explicit else _core_Gamma2_family}
    core = core_fns[quantity](win, u, x)
    if u.is_explicit:
        gcore = core if quantity == "Gamma" else (_core_Gamma(win, u, x) if quantity == "Gamma2" else None)
        tails = _explicit_tails(kernel, win, u, x, gcore if gcore is not None else Enclosure.exact(0.0))
        return core + tails[quantity]
    tails = _growth_tails(kernel, win, u, x)
    if tails is not None and tails[quantity] is not None:
        return core + tails[quantity]
    return _heuristic(core_fns[quantity], kernel, u, x, R, signed=quantity == "L")


def apply_L(kernel: Kernel, u: LatticeFunction, x: int = 0, R: int = DEFAULT_RADIUS) -> Enclosure:
    """Enclose ``L u(x) = sum_j k(j) (u(x+j) - u(x))``.

    Examples
    --------
    >>> from cdlattice.kernels import make_finite
    >>> sq = LatticeFunction.explicit({-1: 1.0, 1: 1.0})
    >>> print(apply_L(make_finite({1: 1.0}), sq))
    [2, 2]
    """
    return _evaluate("L", kernel, u, x, R)


def gamma1(kernel: Kernel, u: LatticeFunction, x: int = 0, R: int = DEFAULT_RADIUS) -> Enclosure:
    """Enclose ``Gamma(u)(x) = 1/2 sum_j k(j) (u(x+j) - u(x))**2``."""
    return _evaluate("Gamma", kernel, u, x, R)


def gamma2(kernel: Kernel, u: LatticeFunction, x: int = 0, R: int = DEFAULT_RADIUS) -> Enclosure:
    """Enclose ``Gamma_2(u)(x)``.

    Finitely supported ``u`` get a rigorous remainder from the kernel tail;
    other functions rely on a registered closed form or on their growth bound,
    and fall back to a flagged estimate when neither applies.
    """
    res = _evaluate("Gamma2", kernel, u, x, R)
    if res.lo < 0.0:
        res = Enclosure(0.0, max(res.hi, 0.0), res.rigorous)
    return res


def ly_identity_residual(kernel: Kernel, u: LatticeFunction) -> float:
    """``|Gamma_2(u)(0) - RHS|`` for the identity

        Gamma_2(u)(0) = 1/4 sum_{j,l} k(l) k(j) [u(j+l) - 2u(j) + u(0)]**2
                        - |k|_1 Gamma(u)(0) + 1/2 (L u(0))**2.

    Both sides are evaluated independently in floating point.
    """
    if kernel.max_offset is None:
        raise PreconditionError("the identity check needs a finitely supported kernel")
    if not u.is_explicit:
        raise PreconditionError("the identity check needs an explicit function")
    win = _window(kernel, kernel.max_offset)
    S, K = win.offsets, win.weights
    u0 = u(0)
    uS = u(S)
    uJL = u(S[:, None] + S[None, :])
    KK = K[:, None] * K[None, :]
    lhs = 0.25 * np.sum(KK * (uJL - uS[:, None] - uS[None, :] + u0) ** 2)
    L = np.sum(K * (uS - u0))
    G = 0.5 * np.sum(K * (uS - u0) ** 2)
    mass = np.sum(K)
    rhs = 0.25 * np.sum(KK * (uJL - 2.0 * uS[None, :] + u0) ** 2) - mass * G + 0.5 * L * L
    return float(abs(lhs - rhs))


def implied_dimension(kappa: float, d: float, mass: float) -> float:
    """Dimension ``d'`` such that CD(kappa, d) implies CD(0, d').

    ``2 d m / (d kappa + 2 m)`` for finite ``d`` and ``2 m / kappa`` for ``d = inf``.

    >>> implied_dimension(1.0, math.inf, 2.0)
    4.0
    """
    if kappa < 0:
        raise DomainError("kappa must be nonnegative")
    if not d > 0:
        raise DomainError("d must be positive")
    if not mass > 0:
        raise DomainError("mass must be positive")
    if math.isinf(d):
        if kappa == 0:
            raise DomainError("d = inf with kappa = 0 gives no finite dimension")
        return 2.0 * mass / kappa
    return 2.0 * d * mass / (d * kappa + 2.0 * mass)


@dataclass(frozen=True)
class CDRatio:
    """Single-witness quotients ``Gamma_2/(Lu)**2`` and ``Gamma_2/Gamma`` with their ingredients.

    A quotient is None when its denominator enclosure contains zero or is infinite.
    """

    L: Enclosure
    Gamma: Enclosure
    Gamma2: Enclosure
    rho_dim: Enclosure | None
    rho_curv: Enclosure | None

    @property
    def rigorous(self) -> bool:
        return self.L.rigorous and self.Gamma.rigorous and self.Gamma2.rigorous


def cd_quotients(L: Enclosure, G: Enclosure, G2: Enclosure):
    """``(Gamma_2/(Lu)**2, Gamma_2/Gamma)``, each None when its denominator is degenerate."""
    L2 = L.square()
    rho_dim = None if (L2.contains_zero() or math.isinf(L2.lo)) else G2 / L2
    rho_curv = None if (G.contains_zero() or math.isinf(G.lo)) else G2 / G
    return rho_dim, rho_curv


def cd_ratio(kernel: Kernel, u: LatticeFunction, x: int = 0, R: int = DEFAULT_RADIUS) -> CDRatio:
    """Evaluate L, Gamma, Gamma_2 once and form both CD quotients."""
    L = apply_L(kernel, u, x, R)
    G = gamma1(kernel, u, x, R)
    G2 = gamma2(kernel, u, x, R)
    rho_dim, rho_curv = cd_quotients(L, G, G2)
    if rho_dim is None and rho_curv is None:
        raise NumericError(f"both denominators are degenerate: L = {L}, Gamma = {G}")
    return CDRatio(L, G, G2, rho_dim, rho_curv)


def admissible(kernel: Kernel, u: LatticeFunction, order: int = 1) -> bool:
    """Whether ``sum_j k(j) |u(j)|**order`` is certified finite (explicit functions always are)."""
    if u.is_explicit or kernel.max_offset is not None:
        return True
    if order not in (1, 2):
        raise DomainError("order must be 1 or 2")
    t = kernel.tail_moment(1, order * u.growth)
    if not math.isfinite(t.hi):
        return False
    return True


def require_admissible(kernel: Kernel, u: LatticeFunction, order: int = 1):
    if not admissible(kernel, u, order):
        raise AdmissibilityError(
            f"{u.name} grows like |j|^{u.growth} and is not in l_{order},k for this kernel")
