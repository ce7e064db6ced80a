"""Certified intervals for real quantities and the bounds used to build them.

An :class:`Enclosure` is a closed interval ``[lo, hi]`` together with a flag
saying whether the bracket is backed by an analytic argument.  Scalar interval
operations are rounded in the correct direction: the nearest float is compared
with the exact rational result and stepped one ulp outward only when needed.  Closed
form bounds and large vectorised sums carry a relative slack of ``2**-40``, or
the classical ``n*u`` accumulation bound when that is larger.

Besides the interval type this module holds the integral-comparison bounds for
power sums, the envelopes of the two auxiliary functions

    phi(x) = (1 + x)**g - 1 - x**g,      psi(x) = 1 + x**g - (1 - x)**g,

and a piecewise refinement of those envelopes used for tight tail estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import DomainError, NumericError, PreconditionError

SLACK = 2.0 ** -40
UNIT_ROUNDOFF = 2.0 ** -53
ROUNDING_MODE = (
    "scalar interval ops: exact directed rounding via rational comparison; closed forms and vector sums: "
    "relative slack 2^-40 or the n*u accumulation bound, whichever is larger"
)
# ranges with at most this many terms are summed exactly
EXACT_TERMS = 32

INF = math.inf


def _down(x: float) -> float:
    return math.nextafter(x, -INF) if math.isfinite(x) else x


def _up(x: float) -> float:
    return math.nextafter(x, INF) if math.isfinite(x) else x


def _mul(a: float, b: float) -> float:
    # 0 * inf is 0 for interval endpoints
    if a == 0.0 or b == 0.0:
        return 0.0
    return a * b


def _directed(r: float, exact: Fraction, up: bool) -> float:
    """Round ``r`` (a nearest-rounded float of ``exact``) in the requested direction."""
    fr = Fraction(r)
    if up:
        return r if fr >= exact else math.nextafter(r, INF)
    return r if fr <= exact else math.nextafter(r, -INF)


def _add_dir(a: float, b: float, up: bool) -> float:
    r = a + b
    if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(r)):
        return r
    return _directed(r, Fraction(a) + Fraction(b), up)


def _mul_dir(a: float, b: float, up: bool) -> float:
    r = _mul(a, b)
    if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(r)):
        return r
    return _directed(r, Fraction(a) * Fraction(b), up)


def accumulation_bound(n: int) -> float:
    """Relative error bound for a float sum of ``n`` nonnegative terms in any order."""
    nu = (n + 1) * UNIT_ROUNDOFF
    if nu >= 0.5:
        raise NumericError(f"sum of {n} terms is too long for the accumulation bound")
    return max(SLACK, nu / (1.0 - nu))


@dataclass(frozen=True)
class Enclosure:
    """Closed interval ``[lo, hi]`` certifying a real number.

    ``hi`` may be ``+inf`` (and ``lo`` may be ``-inf``).  ``rigorous`` is False
    when any ingredient came from a heuristic estimate; the flag propagates
    through every arithmetic operation.
    """

    lo: float
    hi: float
    rigorous: bool = True

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise NumericError("enclosure endpoint is NaN")
        if lo > hi:
            raise NumericError(f"empty enclosure [{lo!r}, {hi!r}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "rigorous", bool(self.rigorous))

    @classmethod
    def exact(cls, value: float, rigorous: bool = True) -> "Enclosure":
        return cls(value, value, rigorous)

    @classmethod
    def around(cls, value: float, radius: float, rigorous: bool = True) -> "Enclosure":
        """``[value - radius, value + radius]`` rounded outward."""
        radius = abs(radius)
        return cls(_add_dir(value, -radius, False), _add_dir(value, radius, True), rigorous)

    @staticmethod
    def coerce(x: "Enclosure | float") -> "Enclosure":
        return x if isinstance(x, Enclosure) else Enclosure.exact(float(x))

    # --- queries -----------------------------------------------------------
    @property
    def mid(self) -> float:
        if math.isinf(self.lo) or math.isinf(self.hi):
            return self.hi if math.isinf(self.hi) and not math.isinf(self.lo) else self.lo
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def is_finite(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def contains_zero(self) -> bool:
        return self.lo <= 0.0 <= self.hi

    def overlaps(self, other: "Enclosure") -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def disjoint_below(self, other: "Enclosure") -> bool:
        """True if every point of ``self`` is strictly smaller than every point of ``other``."""
        return self.hi < other.lo

    def hull(self, other: "Enclosure") -> "Enclosure":
        return Enclosure(min(self.lo, other.lo), max(self.hi, other.hi),
                         self.rigorous and other.rigorous)

    def heuristic(self) -> "Enclosure":
        return Enclosure(self.lo, self.hi, False)

    def widen(self, radius: float) -> "Enclosure":
        return Enclosure(_add_dir(self.lo, -abs(radius), False), _add_dir(self.hi, abs(radius), True),
                         self.rigorous)

    def widen_rel(self, rel: float = SLACK) -> "Enclosure":
        return Enclosure(_down(self.lo - rel * abs(self.lo)), _up(self.hi + rel * abs(self.hi)),
                         self.rigorous)

    # --- arithmetic --------------------------------------------------------
    def __add__(self, other):
        o = Enclosure.coerce(other)
        lo, hi = _add_dir(self.lo, o.lo, False), _add_dir(self.hi, o.hi, True)
        if math.isnan(lo) or math.isnan(hi):
            raise NumericError("indeterminate sum of infinite enclosures")
        return Enclosure(lo, hi, self.rigorous and o.rigorous)

    __radd__ = __add__

    def __neg__(self):
        return Enclosure(-self.hi, -self.lo, self.rigorous)

    def __sub__(self, other):
        return self + (-Enclosure.coerce(other))

    def __rsub__(self, other):
        return Enclosure.coerce(other) - self

    def __mul__(self, other):
        o = Enclosure.coerce(other)
        pairs = [(a, b) for a in (self.lo, self.hi) for b in (o.lo, o.hi)]
        lo = min(_mul_dir(a, b, False) for a, b in pairs)
        hi = max(_mul_dir(a, b, True) for a, b in pairs)
        return Enclosure(lo, hi, self.rigorous and o.rigorous)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = Enclosure.coerce(other)
        if o.contains_zero():
            raise NumericError(f"division by an enclosure containing zero: {o}")
        pairs = [(a, b) for a in (self.lo, self.hi) for b in (o.lo, o.hi)]
        los, his = [], []
        for a, b in pairs:
            r = a / b
            if math.isfinite(a) and math.isfinite(b) and math.isfinite(r):
                exact = Fraction(a) / Fraction(b)
                los.append(_directed(r, exact, False))
                his.append(_directed(r, exact, True))
            else:
                los.append(r)
                his.append(r)
        return Enclosure(min(los), max(his), self.rigorous and o.rigorous)

    def __rtruediv__(self, other):
        return Enclosure.coerce(other) / self

    def square(self) -> "Enclosure":
        a, b = abs(self.lo), abs(self.hi)
        top = _mul_dir(max(a, b), max(a, b), True)
        if self.contains_zero():
            return Enclosure(0.0, top, self.rigorous)
        low = min(a, b)
        return Enclosure(_mul_dir(low, low, False), top, self.rigorous)

    def __str__(self):
        flag = "" if self.rigorous else "~"
        return f"[{self.lo:.17g}, {self.hi:.17g}]{flag}"


def enclose_fraction(value: Fraction, rigorous: bool = True) -> Enclosure:
    """Tightest float enclosure of an exact rational."""
    f = float(value)
    return Enclosure(_directed(f, value, False), _directed(f, value, True), rigorous)


def enclose_float_sum(terms, abs_error: float = 0.0, rigorous: bool = True) -> Enclosure:
    """Enclose the exact sum of the floats ``terms`` plus a known absolute input error.

    ``math.fsum`` is correctly rounded, so one outward ulp covers the summation
    itself; ``abs_error`` covers errors already present in the terms.
    """
    terms = [float(t) for t in terms]
    s = math.fsum(terms)
    if abs_error == 0.0 and all(math.isfinite(t) for t in terms):
        exact = sum((Fraction(t) for t in terms), Fraction(0))
        return Enclosure(_directed(s, exact, False), _directed(s, exact, True), rigorous)
    return Enclosure(_down(s - abs_error), _up(s + abs_error), rigorous)


# --- power sums -------------------------------------------------------------

def _exact_power_sum(gamma: float, A1: int, A2: int) -> Enclosure:
    if float(gamma).is_integer() and abs(gamma) <= 64:
        g = int(gamma)
        if g >= 0:
            total = Fraction(sum(m ** g for m in range(A1, A2 + 1)))
        else:
            total = sum((Fraction(1, m ** (-g)) for m in range(A1, A2 + 1)), Fraction(0))
        f = float(total)
        if Fraction(f) == total:
            return Enclosure.exact(f)
        return Enclosure(f, _up(f)) if Fraction(f) < total else Enclosure(_down(f), f)
    terms = [float(m) ** gamma for m in range(A1, A2 + 1)]
    # libm pow is faithful: each term is within one ulp, i.e. 2u relative
    err = 2.0 * UNIT_ROUNDOFF * math.fsum(abs(t) for t in terms)
    enc = enclose_float_sum(terms, err)
    return Enclosure(max(enc.lo, 0.0), enc.hi)


def power_sum_bounds(gamma: float, A1: int, A2: float = INF) -> Enclosure:
    """Enclose ``sum_{m=A1}^{A2} m**gamma`` by integral comparison.

    Parameters
    ----------
    gamma : float
        Exponent.
    A1 : int
        First index, ``A1 >= 1``.  When ``1 + gamma <= 0`` the bounds need
        ``A1 >= 2``; violating that raises :class:`PreconditionError`.
    A2 : int or inf
        Last index.  With ``A2 = inf`` the sum converges only for
        ``1 + gamma < 0``; otherwise ``[inf, inf]`` is returned.

    Returns
    -------
    Enclosure
        Ranges with at most ``EXACT_TERMS`` terms are summed exactly.  Larger
        ranges use the minimum of the textbook upper bounds

        * ``(A2+1)**(1+g)/(1+g)`` for ``1+g >= 1``,
        * ``A2**(1+g)/(1+g)`` for ``0 < 1+g < 1``,
        * ``log(A2)`` for ``1+g = 0``,
        * ``(A1-1)**(1+g)/|1+g|`` for ``1+g < 0``,

        and the two-sided integral bracket, which is never looser.
    """
    if A1 < 1 or int(A1) != A1:
        raise DomainError(f"A1 must be a positive integer, got {A1!r}")
    A1 = int(A1)
    infinite = math.isinf(A2)
    if not infinite:
        if int(A2) != A2:
            raise DomainError(f"A2 must be an integer or inf, got {A2!r}")
        A2 = int(A2)
        if A2 < A1:
            raise PreconditionError(f"empty range A1={A1} > A2={A2}")
    p = 1.0 + gamma
    if p <= 0.0 and A1 < 2:
        raise PreconditionError("the decreasing cases (1 + gamma <= 0) need A1 >= 2")
    if not infinite and A2 - A1 + 1 <= EXACT_TERMS:
        return _exact_power_sum(gamma, A1, A2)
    if infinite and p >= 0.0:
        return Enclosure(INF, INF)

    a1 = float(A1)
    if p == 0.0:
        up_tight = math.log(A2 / (a1 - 1.0))
        up_lemma = math.log(A2)
        low = math.log((A2 + 1.0) / a1)
        scale = abs(math.log(A2)) + abs(math.log(a1)) + 1.0
    elif p < 0.0:
        tail2 = 0.0 if infinite else float(A2) ** p
        up_lemma = (a1 - 1.0) ** p / -p
        up_tight = ((a1 - 1.0) ** p - tail2) / -p
        low = (a1 ** p - (0.0 if infinite else (A2 + 1.0) ** p)) / -p
        scale = (a1 - 1.0) ** p / -p
    elif gamma < 0.0:  # 0 < p < 1, decreasing terms
        up_lemma = float(A2) ** p / p
        up_tight = (float(A2) ** p - (a1 - 1.0) ** p) / p
        low = ((A2 + 1.0) ** p - a1 ** p) / p
        scale = (A2 + 1.0) ** p / p
    else:  # gamma >= 0, nondecreasing terms
        up_lemma = (A2 + 1.0) ** p / p
        up_tight = ((A2 + 1.0) ** p - a1 ** p) / p
        low = (float(A2) ** p - (a1 - 1.0) ** p) / p
        scale = (A2 + 1.0) ** p / p
    hi = min(up_lemma, up_tight)
    pad = SLACK * scale
    first = a1 ** gamma * (1.0 - SLACK)
    lo = max(low - pad, first, 0.0)
    return Enclosure(_down(lo), _up(hi + pad))


# --- the auxiliary functions and their envelopes ---------------------------

def _check_gamma(gamma: float):
    if not (0.0 < gamma < 1.0 or 1.0 < gamma < 2.0):
        raise DomainError(f"gamma must lie in (0,1) or (1,2), got {gamma!r}")


def _check_x(x: float):
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0, 1], got {x!r}")


def phi_gamma(x: float, gamma: float) -> float:
    """``(1 + x)**gamma - 1 - x**gamma`` for ``x`` in ``[0, 1]``."""
    _check_x(x)
    _check_gamma(gamma)
    return math.expm1(gamma * math.log1p(x)) - x ** gamma


def psi_gamma(x: float, gamma: float) -> float:
    """``1 + x**gamma - (1 - x)**gamma`` for ``x`` in ``[0, 1]``."""
    _check_x(x)
    _check_gamma(gamma)
    one_minus = 0.0 if x == 1.0 else math.exp(gamma * math.log1p(-x))
    return 1.0 + x ** gamma - one_minus


@dataclass(frozen=True)
class Envelope:
    """Two-sided bound ``lower*base(x) <= f(x) <= upper*base(x)``.

    ``shape`` is ``"linear"`` (base ``x``) or ``"power"`` (base ``x**gamma``).
    """

    shape: str
    lower: float
    upper: float
    gamma: float

    def base(self, x: float) -> float:
        return x if self.shape == "linear" else x ** self.gamma

    def bounds(self, x: float) -> tuple[float, float]:
        b = self.base(x)
        return self.lower * b, self.upper * b


def phi_envelope(gamma: float) -> Envelope:
    """Envelope of ``phi``: linear ``[(g-1)x, 2gx]`` for g in (1,2), power ``[-x^g, -(1-g)x^g]`` for g in (0,1)."""
    _check_gamma(gamma)
    if gamma > 1.0:
        return Envelope("linear", gamma - 1.0, 2.0 * gamma, gamma)
    return Envelope("power", -1.0, -(1.0 - gamma), gamma)


def psi_envelope(gamma: float) -> Envelope:
    """Envelope of ``psi``: linear ``[x, (g+1)x]`` for g in (1,2), power ``[x^g, 3x^g]`` for g in (0,1)."""
    _check_gamma(gamma)
    if gamma > 1.0:
        return Envelope("linear", 1.0, gamma + 1.0, gamma)
    return Envelope("power", 1.0, 3.0, gamma)


# --- piecewise refinement ----------------------------------------------------

def normalizing_power(gamma: float) -> float:
    """Exponent ``s`` with ``phi(x)/x**s`` and ``psi(x)/x**s`` bounded on ``(0, 1]``."""
    return 1.0 if gamma >= 1.0 else gamma


def _secant_plus(x, gamma):
    # ((1+x)^g - 1)/x with the limit g at 0
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, float(gamma))
    nz = x > 0
    out[nz] = np.expm1(gamma * np.log1p(x[nz])) / x[nz]
    return out


def _secant_minus(x, gamma):
    # (1 - (1-x)^g)/x with the limit g at 0
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, float(gamma))
    nz = x > 0
    with np.errstate(divide="ignore"):
        out[nz] = -np.expm1(gamma * np.log1p(-x[nz])) / x[nz]
    return out


def _pad(lo, hi):
    return lo - SLACK * (np.abs(lo) + 1.0), hi + SLACK * (np.abs(hi) + 1.0)


def phi_ratio_bounds(a, b, gamma: float):
    """Bounds of ``phi(x)/x**s`` on each cell ``[a_i, b_i]`` of ``[0, 1]``.

    Uses monotonicity of the secant ``((1+x)**g - 1)/x`` (increasing for
    ``g >= 1``, decreasing for ``g < 1``) together with that of ``x**(g-1)`` or
    ``x**(1-g)``; see :func:`normalizing_power` for ``s``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not 0.0 < gamma < 2.0:
        raise DomainError(f"gamma must lie in (0, 2), got {gamma!r}")
    if gamma >= 1.0:
        lo = _secant_plus(a, gamma) - b ** (gamma - 1.0)
        hi = _secant_plus(b, gamma) - a ** (gamma - 1.0)
    else:
        lo = _secant_plus(b, gamma) * a ** (1.0 - gamma) - 1.0
        hi = _secant_plus(a, gamma) * b ** (1.0 - gamma) - 1.0
    return _pad(lo, hi)


def psi_ratio_bounds(a, b, gamma: float):
    """Bounds of ``psi(x)/x**s`` on each cell ``[a_i, b_i]`` of ``[0, 1]``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not 0.0 < gamma < 2.0:
        raise DomainError(f"gamma must lie in (0, 2), got {gamma!r}")
    if gamma >= 1.0:
        lo = _secant_minus(b, gamma) + a ** (gamma - 1.0)
        hi = _secant_minus(a, gamma) + b ** (gamma - 1.0)
    else:
        lo = _secant_minus(a, gamma) * a ** (1.0 - gamma) + 1.0
        hi = _secant_minus(b, gamma) * b ** (1.0 - gamma) + 1.0
    return _pad(lo, hi)


def square_bounds(lo, hi):
    """Elementwise range of ``t**2`` for ``t`` in ``[lo, hi]``."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    top = np.maximum(lo * lo, hi * hi)
    bottom = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(lo * lo, hi * hi))
    return bottom * (1.0 - SLACK), top * (1.0 + SLACK)


# --- series -------------------------------------------------------------------

def enclose_series(term: Callable[[int], "Enclosure | float"], R: int,
                   tail: Enclosure) -> Enclosure:
    """Enclose ``sum_{m>=1} term(m)`` as the partial sum to ``R`` plus ``tail``.

    ``term`` returns an :class:`Enclosure` (or a float taken as exact) and must
    be nonnegative; ``tail`` must enclose ``sum_{m>R} term(m)``.
    """
    if R < 0:
        raise PreconditionError("cutoff must be nonnegative")
    los, his = [], []
    rigorous = tail.rigorous
    for m in range(1, R + 1):
        t = Enclosure.coerce(term(m))
        if t.lo < 0:
            raise PreconditionError(f"term {m} is negative: {t}")
        los.append(t.lo)
        his.append(t.hi)
        rigorous = rigorous and t.rigorous
    part = Enclosure(_down(math.fsum(los)), _up(math.fsum(his)), rigorous)
    return part + tail
