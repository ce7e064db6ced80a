"""Jump kernels on the integer lattice.

A kernel is a symmetric, nonnegative, summable weight ``k`` on the integers
with ``k(0) = 0``.  Every constructor returns an immutable :class:`Kernel`
carrying certified enclosures of its mass ``sum_j k(j)`` and second moment
``sum_j k(j) j**2`` (both over all of Z), together with a family-specific
tail bound for ``sum_{|j|>R} k(j) |j|**p``.

Families
--------
power           c / |j|**(1+beta)
exp_power       c exp(-delta |j|**alpha) / |j|**gamma
log_corrected   c / (|j|**3 (1 + log|j|)**(1+alpha))
fractional      the lattice fractional Laplacian kernel of order beta in (0, 2)
finite          explicit weights on finitely many offsets
sparse          weights on a strictly increasing offset sequence x_0 < x_1 < ...
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import mpmath
import numpy as np

from .enclosure import (INF, SLACK, UNIT_ROUNDOFF, Enclosure, _down, _up,
                        enclose_float_sum, power_sum_bounds)
from .errors import DomainError, NumericError, PreconditionError

# exact partial sums run this far past the cutoff before an integral bound takes over
_TAIL_HEAD = 4096
_EVAL_REL = 8.0 * UNIT_ROUNDOFF


# --- support descriptors ------------------------------------------------------

@dataclass(frozen=True)
class AllNonzero:
    """Every nonzero integer carries positive weight."""

    kind: str = "AllNonzero"


@dataclass(frozen=True)
class FiniteSet:
    """Finitely many positive offsets (the support is their symmetrization)."""

    offsets: tuple[int, ...]
    kind: str = "FiniteSet"


@dataclass(frozen=True)
class SparseSequence:
    """Strictly increasing positive offsets ``x_l = offset_fn(l)``, ``l = 0, 1, ...``.

    ``growth = (C, b)`` records ``x_l <= C * b**l`` when known and ``ratio = m``
    records ``x_{l+1} = m * x_l`` for multiplicatively closed sequences.
    """

    offset_fn: Callable[[int], int]
    name: str = "custom"
    growth: tuple[float, float] | None = None
    ratio: int | None = None
    kind: str = "SparseSequence"

    def offset(self, l: int) -> int:
        return int(self.offset_fn(l))

    def _bracket(self, x: int) -> int:
        # smallest power of two h with x_h >= x (offsets are >= l + 1)
        h = 1
        while self.offset(h) < x:
            h *= 2
        return h

    def index_of(self, x: int) -> int | None:
        """Index ``l`` with ``x_l = x``, or None."""
        if x < 1:
            return None
        lo, hi = 0, self._bracket(x)
        while lo <= hi:
            mid = (lo + hi) // 2
            v = self.offset(mid)
            if v == x:
                return mid
            if v < x:
                lo = mid + 1
            else:
                hi = mid - 1
        return None

    def first_index_above(self, R: int) -> int:
        """Smallest ``l`` with ``x_l > R``."""
        lo, hi = 0, self._bracket(max(R, 0) + 1)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.offset(mid) > R:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def prefix(self, limit: int) -> list[int]:
        out = []
        l = 0
        while True:
            x = self.offset(l)
            if x > limit:
                return out
            out.append(x)
            l += 1


def _seq_pow2(l):
    return 2 ** l


def _seq_pow3(l):
    return 3 ** l


def _seq_pow3_plus_l(l):
    return 3 ** l + l


def _seq_naturals(l):
    return l + 1


NAMED_SEQUENCES: dict[str, SparseSequence] = {
    "pow2": SparseSequence(_seq_pow2, "pow2", (1.0, 2.0), 2),
    "pow3": SparseSequence(_seq_pow3, "pow3", (1.0, 3.0), 3),
    "pow3_plus_l": SparseSequence(_seq_pow3_plus_l, "pow3_plus_l", (2.0, 3.0), None),
    "naturals": SparseSequence(_seq_naturals, "naturals", (1.0, 2.0), None),
}


# --- kernel --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Kernel:
    """Immutable description of a jump kernel.

    ``positive_values(js)`` evaluates ``k`` on an array of positive integers;
    ``one_sided_tail(R, p)`` encloses ``sum_{j>R} k(j) j**p`` or returns None
    when the family has no registered bound.
    """

    family: str
    params: Mapping[str, object]
    support: object
    monotone_from: int | None
    mass: Enclosure
    second_moment: Enclosure
    positive_values: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    one_sided_tail: Callable[[int, float], Enclosure | None] | None = field(repr=False, default=None)
    rel_error: Callable[[int], float] = field(repr=False, default=lambda j: _EVAL_REL)
    sparse_weight: "SparseWeight | None" = field(repr=False, default=None)

    def eval(self, j):
        """``k(j)`` for an integer or an integer array (symmetric, zero at 0)."""
        arr = np.abs(np.asarray(j, dtype=np.int64))
        out = np.zeros(arr.shape, dtype=float)
        nz = arr != 0
        if np.any(nz):
            out[nz] = self.positive_values(arr[nz])
        return float(out) if out.ndim == 0 else out

    def values(self, R: int) -> np.ndarray:
        """Array ``[k(0), k(1), ..., k(R)]``."""
        out = np.zeros(R + 1)
        if R >= 1:
            out[1:] = self.positive_values(np.arange(1, R + 1, dtype=np.int64))
        return out

    def positive_offsets(self, R: int) -> np.ndarray:
        """Offsets ``1 <= j <= R`` with ``k(j) > 0``, increasing."""
        sup = self.support
        if isinstance(sup, FiniteSet):
            return np.array([j for j in sup.offsets if j <= R], dtype=np.int64)
        if isinstance(sup, SparseSequence):
            return np.array(sup.prefix(R), dtype=np.int64)
        js = np.arange(1, R + 1, dtype=np.int64)
        return js[self.positive_values(js) > 0] if R >= 1 else js

    @property
    def max_offset(self) -> int | None:
        return max(self.support.offsets) if isinstance(self.support, FiniteSet) else None

    def tail_moment(self, R: int, p: float = 0.0) -> Enclosure:
        """Enclose ``sum_{|j|>R} k(j) |j|**p`` (both signs)."""
        if R < 0:
            raise PreconditionError("cutoff must be nonnegative")
        t = self.one_sided_tail(R, p) if self.one_sided_tail is not None else None
        if t is None:
            return Enclosure(0.0, INF, rigorous=False)
        return t * 2.0

    def sup_beyond(self, r: int) -> float:
        """Upper bound for ``sup_{|i|>r} k(i)``."""
        r = max(int(r), 0)
        if isinstance(self.support, FiniteSet):
            vals = [self.eval(j) for j in self.support.offsets if j > r]
            return max(vals) * (1.0 + SLACK) if vals else 0.0
        if isinstance(self.support, SparseSequence) and self.sparse_weight is not None:
            # registered sparse weights decrease along the sequence
            L = self.support.first_index_above(r)
            return self.eval(self.support.offset(L)) * (1.0 + SLACK)
        if self.monotone_from is not None and self.monotone_from <= r + 1:
            return self.eval(r + 1) * (1.0 + SLACK)
        return 0.5 * self.tail_moment(r, 0.0).hi

    def truncate(self, R: int) -> "Kernel":
        """The kernel restricted to ``|j| <= R`` as a finite kernel."""
        js = self.positive_offsets(R)
        vals = self.positive_values(js) if len(js) else np.zeros(0)
        weights = {int(j): float(v) for j, v in zip(js, vals) if v > 0}
        if not weights:
            raise PreconditionError(f"no support point in [1, {R}]")
        return make_finite(weights)

    def describe(self) -> dict:
        sup = self.support
        if isinstance(sup, FiniteSet):
            support = {"kind": sup.kind, "offsets": list(sup.offsets)}
        elif isinstance(sup, SparseSequence):
            support = {"kind": sup.kind, "sequence": sup.name, "prefix": sup.prefix(10 ** 6)[:12]}
        else:
            support = {"kind": "AllNonzero"}
        return {
            "family": self.family,
            "params": dict(self.params),
            "support": support,
            "monotone_from": self.monotone_from,
            "mass": [self.mass.lo, self.mass.hi, self.mass.rigorous],
            "second_moment": [self.second_moment.lo, self.second_moment.hi,
                              self.second_moment.rigorous],
        }


# --- helpers -------------------------------------------------------------------

def _partial_moment(values_fn, j_from: int, j_to: int, p: float, rel: float) -> Enclosure:
    """Enclose ``sum_{j=j_from}^{j_to} k(j) j**p`` from float evaluations with relative error ``rel``."""
    if j_to < j_from:
        return Enclosure.exact(0.0)
    js = np.arange(j_from, j_to + 1, dtype=np.int64)
    terms = values_fn(js) * js.astype(float) ** p
    s = math.fsum(terms)
    err = (rel + 4.0 * UNIT_ROUNDOFF) * s
    return Enclosure(max(_down(s - err), 0.0), _up(s + err))


def _assemble(one_sided, values_fn, head: int, rel: float, p: float) -> Enclosure:
    part = _partial_moment(values_fn, 1, head, p, rel)
    tail = one_sided(head, p)
    if tail is None:
        return Enclosure(part.lo * 2.0, INF, rigorous=False)
    return (part + tail) * 2.0


def _positive(name: str, value) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be positive, got {value!r}")
    return value


def _monotone_scan(values_fn, j0: int, limit: int):
    js = np.arange(j0, limit + 1, dtype=np.int64)
    v = values_fn(js)
    bad = np.nonzero(v[:-1] < v[1:])[0]
    if len(bad):
        raise NumericError(f"kernel is not non-increasing from {j0}: k({js[bad[0]]}) < k({js[bad[0]] + 1})")


# --- power ---------------------------------------------------------------------

def make_power(c: float, beta: float) -> Kernel:
    """``k(j) = c / |j|**(1+beta)``.

    Examples
    --------
    >>> make_power(1, 1).eval(2)
    0.25
    """
    c = _positive("c", c)
    beta = _positive("beta", beta)

    def values(js):
        return c * np.asarray(js, dtype=float) ** (-1.0 - beta)

    def tail(R, p):
        if p >= beta:
            return Enclosure(INF, INF)
        return power_sum_bounds(p - 1.0 - beta, R + 1, INF) * c

    mass = _assemble(tail, values, _TAIL_HEAD, _EVAL_REL, 0.0)
    second = _assemble(tail, values, _TAIL_HEAD, _EVAL_REL, 2.0)
    return Kernel("power", {"c": c, "beta": beta}, AllNonzero(), 1, mass, second, values, tail)


# --- exponential times power ------------------------------------------------------

def _exp_power_tail(c, delta, alpha, q, R):
    """Enclose ``sum_{j>R} c j**q exp(-delta j**alpha)``."""
    # beyond the turning point the summand is non-increasing
    turn = 0.0 if q <= 0 else (q / (delta * alpha)) ** (1.0 / alpha)
    start = R + 1
    stop = max(R + _TAIL_HEAD, int(math.ceil(turn)) + 1)
    js = np.arange(start, stop + 1, dtype=float)
    terms = c * js ** q * np.exp(-delta * js ** alpha)
    s = math.fsum(terms)
    head = Enclosure(max(_down(s * (1 - 1e-13)), 0.0), _up(s * (1 + 1e-13)))
    # integral from `stop` to infinity via the upper incomplete gamma function
    a = (q + 1.0) / alpha
    with mpmath.workdps(30):
        val = mpmath.gammainc(a, delta * mpmath.mpf(stop) ** alpha)
        integral = float(c * val * mpmath.power(delta, -a) / alpha)
    if not math.isfinite(integral) or integral < 0:
        raise NumericError("incomplete gamma evaluation failed")
    return head + Enclosure(0.0, integral * (1 + 1e-12) + 1e-300)


def make_exp_power(c: float, delta: float, alpha: float, gamma: float,
                   scan_limit: int = 100) -> Kernel:
    """``k(j) = c exp(-delta |j|**alpha) / |j|**gamma``.

    For ``gamma < 0`` the kernel first increases; ``monotone_from`` is the
    smallest integer at or past the continuous maximiser
    ``(-gamma/(delta*alpha))**(1/alpha)``, confirmed by scanning up to
    ``max(scan_limit, 2*j0)``.  A failed scan raises :class:`NumericError`.
    """
    c = _positive("c", c)
    delta = _positive("delta", delta)
    alpha = _positive("alpha", alpha)
    gamma = float(gamma)
    if not math.isfinite(gamma):
        raise DomainError("gamma must be finite")

    def values(js):
        x = np.asarray(js, dtype=float)
        return c * np.exp(-delta * x ** alpha) * x ** (-gamma)

    if gamma >= 0:
        j0 = 1
    else:
        xstar = (-gamma / (delta * alpha)) ** (1.0 / alpha)
        j0 = max(1, int(math.ceil(xstar - 1e-9)))
    _monotone_scan(values, j0, max(scan_limit, 2 * j0))

    def tail(R, p):
        return _exp_power_tail(c, delta, alpha, p - gamma, R)

    mass = _assemble(tail, values, 1, _EVAL_REL, 0.0)
    second = _assemble(tail, values, 1, _EVAL_REL, 2.0)
    params = {"c": c, "delta": delta, "alpha": alpha, "gamma": gamma}
    return Kernel("exp_power", params, AllNonzero(), j0, mass, second, values, tail)


# --- log-corrected critical kernel ---------------------------------------------------

def make_log_corrected(c: float, alpha: float) -> Kernel:
    """``k(j) = c / (|j|**3 (1 + log|j|)**(1+alpha))``; finite second moment for every ``alpha > 0``."""
    c = _positive("c", c)
    alpha = _positive("alpha", alpha)

    def values(js):
        x = np.asarray(js, dtype=float)
        return c / (x ** 3 * (1.0 + np.log(x)) ** (1.0 + alpha))

    def tail(R, p):
        if p > 2.0:
            return Enclosure(INF, INF)
        stop = R + _TAIL_HEAD
        head = _partial_moment(values, R + 1, stop, p, _EVAL_REL)
        L = 1.0 + math.log(stop)
        if p == 2.0:
            hi = c * L ** (-alpha) / alpha
        else:
            hi = c * L ** (-1.0 - alpha) * float(stop) ** (p - 2.0) / (2.0 - p)
        return head + Enclosure(0.0, hi * (1 + SLACK))

    mass = _assemble(tail, values, 1, _EVAL_REL, 0.0)
    second = _assemble(tail, values, 1, _EVAL_REL, 2.0)
    return Kernel("log_corrected", {"c": c, "alpha": alpha}, AllNonzero(), 1, mass, second,
                  values, tail)


# --- fractional Laplacian kernel --------------------------------------------------------

def fractional_log_prefactor(beta: float) -> float:
    """``log`` of ``4**(b/2) Gamma((1+b)/2) / (sqrt(pi) |Gamma(-b/2)|)``.

    ``log|Gamma(-b/2)|`` is taken from the reflection formula
    ``Gamma(z) Gamma(1-z) = pi / sin(pi z)`` at ``z = -b/2``.
    """
    log_abs_gamma_neg = (math.log(math.pi) - math.log(abs(math.sin(math.pi * beta / 2.0)))
                         - math.lgamma(1.0 + beta / 2.0))
    return (beta / 2.0) * math.log(4.0) + math.lgamma((1.0 + beta) / 2.0) \
        - 0.5 * math.log(math.pi) - log_abs_gamma_neg


_lgamma = np.frompyfunc(math.lgamma, 1, 1)


def make_fractional(beta: float) -> Kernel:
    """Kernel of the lattice fractional Laplacian of order ``beta`` in ``(0, 2)``.

    ``k(j) = C(beta) Gamma(|j| - beta/2) / Gamma(|j| + 1 + beta/2)`` evaluated in
    log space.  It is comparable to ``|j|**(-1-beta)``; the tail bounds use
    ``log y - 1/y < digamma(y) < log y`` to sandwich the Gamma ratio between
    ``(j + 1 + beta/2)**(-1-beta)`` and ``(j - beta/2)**(-1-beta) e**((1+beta)/(j - beta/2))``.
    """
    beta = float(beta)
    if not 0.0 < beta < 2.0:
        raise DomainError(f"beta must lie in (0, 2), got {beta!r}")
    logc = fractional_log_prefactor(beta)
    a, b = -beta / 2.0, 1.0 + beta / 2.0

    def values(js):
        x = np.asarray(js, dtype=float)
        lg = _lgamma(x + a).astype(float) - _lgamma(x + b).astype(float)
        out = np.exp(logc + lg)
        if not np.all(np.isfinite(out)) or np.any(out <= 0):
            raise NumericError("log-Gamma evaluation of the fractional kernel failed")
        return out

    def rel_error(jmax):
        return 16.0 * UNIT_ROUNDOFF * (2.0 * abs(math.lgamma(jmax + b)) + abs(logc) + 4.0)

    C0 = math.exp(logc)

    def tail(R, p):
        if p >= beta:
            return Enclosure(INF, INF)
        stop = R + _TAIL_HEAD
        head = _partial_moment(values, R + 1, stop, p, rel_error(stop))
        y0 = stop + 1.0 + a
        growth = math.exp((1.0 + beta) / y0)
        shift = (1.0 + (beta / 2.0) / y0) ** p
        hi = C0 * growth * shift * (stop + a) ** (p - beta) / (beta - p)
        return head + Enclosure(0.0, hi * (1.0 + 1e-12))

    mass = _assemble(tail, values, 1, rel_error(_TAIL_HEAD + 1), 0.0)
    second = Enclosure(INF, INF)
    return Kernel("fractional", {"beta": beta}, AllNonzero(), 1, mass, second, values, tail,
                  rel_error)


# --- finite ---------------------------------------------------------------------------

def make_finite(weights: Mapping[int, float]) -> Kernel:
    """Finitely supported kernel with ``k(+-j) = weights[j]``.

    Examples
    --------
    >>> make_finite({1: 1.0}).mass.hi
    2.0
    """
    if not weights:
        raise PreconditionError("finite kernel needs at least one offset")
    w: dict[int, float] = {}
    for j, v in weights.items():
        j = int(j)
        v = float(v)
        if j < 1:
            raise DomainError(f"offsets must be positive integers, got {j}")
        if not math.isfinite(v) or v <= 0:
            raise DomainError(f"weights must be positive, got {v!r} at {j}")
        w[j] = v
    offsets = tuple(sorted(w))
    lookup = np.zeros(offsets[-1] + 1)
    for j, v in w.items():
        lookup[j] = v

    def values(js):
        js = np.asarray(js, dtype=np.int64)
        out = np.zeros(js.shape)
        inside = js < len(lookup)
        out[inside] = lookup[js[inside]]
        return out

    def tail(R, p):
        terms = [w[j] * float(j) ** p for j in offsets if j > R]
        if not terms:
            return Enclosure.exact(0.0)
        if float(p).is_integer():
            # integer powers of integers times the given weights: products are
            # exact unless they overflow 53 bits
            return enclose_float_sum(terms, 2.0 * UNIT_ROUNDOFF * math.fsum(terms)
                                     if max(offsets) ** p >= 2 ** 26 else 0.0)
        s = math.fsum(terms)
        return Enclosure(_down(s * (1 - 2 * UNIT_ROUNDOFF)), _up(s * (1 + 2 * UNIT_ROUNDOFF)))

    mass = tail(0, 0.0) * 2.0
    second = tail(0, 2.0) * 2.0
    return Kernel("finite", {"weights": dict(w)}, FiniteSet(offsets), _finite_monotone(offsets, w),
                  mass, second, values, tail, lambda j: 0.0)


def _finite_monotone(offsets, w) -> int:
    # smallest j0 with k non-increasing on {j0, j0+1, ...}
    j0 = offsets[-1]
    prev = w[j0]
    for j in range(offsets[-1] - 1, 0, -1):
        cur = w.get(j, 0.0)
        if cur < prev:
            break
        prev = cur
        j0 = j
    return j0


# --- sparse ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SparseWeight:
    """Weight on a sparse offset sequence with a registered tail bound.

    kind ``exp``: ``c exp(-delta x_l)``; ``power``: ``c x_l**(-1-beta)``;
    ``geometric``: ``c q**l``.
    """

    kind: str
    c: float = 1.0
    delta: float = 1.0
    beta: float = 1.0
    q: float = 0.5

    def value(self, l: int, x: int) -> float:
        if self.kind == "exp":
            return self.c * math.exp(-self.delta * x)
        if self.kind == "power":
            return self.c * float(x) ** (-1.0 - self.beta)
        if self.kind == "geometric":
            return self.c * self.q ** l
        raise DomainError(f"unknown sparse weight kind {self.kind!r}")

    def tail(self, seq: SparseSequence, L: int, p: float) -> Enclosure | None:
        """Enclose ``sum_{l>=L} w_l x_l**p``."""
        xL = seq.offset(L)
        first = self.value(L, xL) * float(xL) ** p
        if self.kind == "exp":
            # distinct integers >= x_L dominate the sequence
            t = _exp_power_tail(self.c, self.delta, 1.0, p, xL - 1)
            return Enclosure(first * (1 - SLACK), t.hi)
        if self.kind == "power":
            if p >= self.beta:
                return Enclosure(INF, INF)
            if xL < 2:
                return None
            t = power_sum_bounds(p - 1.0 - self.beta, xL, INF) * self.c
            return Enclosure(first * (1 - SLACK), t.hi)
        if self.kind == "geometric":
            if seq.growth is None:
                return None if p > 0 else Enclosure(first * (1 - SLACK),
                                                    self.c * self.q ** L / (1 - self.q) * (1 + SLACK))
            C, base = seq.growth
            r = self.q * base ** p
            if r >= 1.0:
                return Enclosure(first * (1 - SLACK), INF)
            return Enclosure(first * (1 - SLACK), self.c * C ** p * r ** L / (1 - r) * (1 + SLACK))
        return None


def _check_increasing(seq: SparseSequence, count: int = 64):
    prev = 0
    for l in range(count):
        x = seq.offset(l)
        if x <= prev:
            raise PreconditionError(f"offsets must be strictly increasing positive integers (x_{l} = {x})")
        prev = x
        if x > 2 ** 62:
            break


def make_sparse(offsets, weight, tail_bound=None) -> Kernel:
    """Kernel supported on ``+-x_l`` for a strictly increasing sequence ``x_l``.

    Parameters
    ----------
    offsets : str, SparseSequence or callable
        A named sequence (``pow2``, ``pow3``, ``pow3_plus_l``, ``naturals``),
        a :class:`SparseSequence`, or a callable ``l -> x_l``.
    weight : SparseWeight or callable
        Weight indexed by ``l``.  A :class:`SparseWeight` brings its own tail
        bound; a plain callable ``l -> w_l`` needs ``tail_bound``.
    tail_bound : callable, optional
        ``(L, p) -> Enclosure`` of ``sum_{l>=L} w_l x_l**p``.  Without any tail
        bound the mass is reported with ``hi = inf`` and flagged non-rigorous.
    """
    if isinstance(offsets, str):
        if offsets not in NAMED_SEQUENCES:
            raise DomainError(f"unknown sequence {offsets!r}")
        seq = NAMED_SEQUENCES[offsets]
    elif isinstance(offsets, SparseSequence):
        seq = offsets
    elif callable(offsets):
        seq = SparseSequence(offsets)
    else:
        raise DomainError("offsets must be a sequence name, SparseSequence or callable")
    _check_increasing(seq)

    if isinstance(weight, SparseWeight):
        wfun = lambda l: weight.value(l, seq.offset(l))  # noqa: E731
        wtail = tail_bound or (lambda L, p: weight.tail(seq, L, p))
        label = {"kind": weight.kind, "c": weight.c, "delta": weight.delta,
                 "beta": weight.beta, "q": weight.q}
    elif callable(weight):
        wfun = weight
        wtail = tail_bound
        label = {"kind": "custom"}
    else:
        raise DomainError("weight must be a SparseWeight or a callable")

    # later weights may underflow to 0.0 in floating point; only the sign is checked there
    if not wfun(0) > 0:
        raise DomainError(f"weight must be positive on the offsets (w_0 = {wfun(0)!r})")
    for l in range(1, 8):
        if not wfun(l) >= 0:
            raise DomainError(f"weight must be positive on the offsets (w_{l} = {wfun(l)!r})")

    def values(js):
        js = np.asarray(js, dtype=np.int64)
        out = np.zeros(js.shape)
        for i, j in enumerate(js.ravel()):
            l = seq.index_of(int(j))
            if l is not None:
                out.flat[i] = wfun(l)
        return out

    def tail(R, p):
        L = seq.first_index_above(R)
        head_terms = []
        l = L
        while l < L + 48 and seq.offset(l) < 2 ** 62:
            head_terms.append(wfun(l) * float(seq.offset(l)) ** p)
            l += 1
        head = Enclosure(0.0, 0.0)
        if head_terms:
            s = math.fsum(head_terms)
            head = Enclosure(_down(s * (1 - _EVAL_REL)), _up(s * (1 + _EVAL_REL)))
        if wtail is None:
            return None
        rest = wtail(l, p)
        if rest is None:
            return None
        return head + rest

    mass = _assemble(tail, values, 0, _EVAL_REL, 0.0)
    second = _assemble(tail, values, 0, _EVAL_REL, 2.0)
    params = {"sequence": seq.name, "weight": label}
    return Kernel("sparse", params, seq, None, mass, second, values, tail,
                  sparse_weight=weight if isinstance(weight, SparseWeight) else None)


# --- tails and sparse conditions -------------------------------------------------------

def tail_mass(kernel: Kernel, R: int) -> Enclosure:
    """Enclose ``sum_{|j|>R} k(j)``.

    Families without a registered tail bound give ``[0, inf]`` flagged
    non-rigorous.
    """
    if R < 1:
        raise PreconditionError("R must be at least 1")
    return kernel.tail_moment(R, 0.0)


@dataclass(frozen=True)
class RatioCheck:
    """Result of a sparse-support summability check."""

    total: Enclosure
    terms: int
    sup_ratio: float | None = None


def _ratio_check(kernel: Kernel, m: int, power: int, probe: int = 2 ** 60) -> RatioCheck:
    sup = kernel.support
    if isinstance(sup, FiniteSet):
        ratios = [(kernel.eval(m * j) / kernel.eval(j)) ** power for j in sup.offsets]
        s = math.fsum(ratios)
        total = Enclosure(_down(s * (1 - _EVAL_REL)), _up(s * (1 + _EVAL_REL)))
        sup_ratio = max(kernel.eval(m * j) / kernel.eval(j) for j in sup.offsets)
        return RatioCheck(total, len(ratios), sup_ratio)
    if not isinstance(sup, SparseSequence):
        raise PreconditionError("summability checks need a finite or sparse support")
    xs = []
    for x in sup.prefix(probe // m)[:64]:
        if not kernel.eval(x) > 1e-280:
            break
        xs.append(x)
    ratios = [kernel.eval(m * x) / kernel.eval(x) for x in xs]
    s = math.fsum(r ** power for r in ratios)
    head = Enclosure(_down(s * (1 - 4 * _EVAL_REL)), _up(s * (1 + 4 * _EVAL_REL)))
    weight = kernel.sparse_weight
    L = len(xs)
    if weight is not None and weight.kind == "exp":
        # k(m x)/k(x) <= exp(-delta (m-1) x); distinct integers dominate
        rate = weight.delta * (m - 1) * power
        xL = sup.offset(L)
        rest = math.exp(-rate * xL) / -math.expm1(-rate)
        tail = Enclosure(0.0, rest * (1 + SLACK) + 1e-300)
        sup_ratio = max(ratios + [math.exp(-weight.delta * (m - 1) * xL)])
    elif weight is not None and weight.kind in ("power", "geometric") and sup.ratio == m:
        # constant ratio along a multiplicatively closed sequence: the sum diverges
        tail = Enclosure(INF, INF)
        sup_ratio = max(ratios)
    else:
        tail = Enclosure(0.0, INF, rigorous=False)
        sup_ratio = max(ratios)
    return RatioCheck(head + tail, L, sup_ratio)


def check_S2(kernel: Kernel) -> RatioCheck:
    """Enclose ``sum_{l in S+} (k(2l)/k(l))**2``."""
    return _ratio_check(kernel, 2, 2)


def check_S3(kernel: Kernel) -> RatioCheck:
    """Enclose ``sum_{l in S+} k(3l)/k(l)``; ``sup_ratio`` is ``c0 = sup k(3l)/k(l)``."""
    return _ratio_check(kernel, 3, 1)


@dataclass
class ThinSupportReport:
    N_witness: int | None
    violations: list
    gap_condition: bool
    probed: list[int]
    decomposition_counts: dict[int, int]

    @property
    def passed(self) -> bool:
        return self.N_witness is not None


def check_thin_support(kernel: Kernel, probe_limit: int, max_points: int = 2000) -> ThinSupportReport:
    """Brute-force the thin-support conditions over offsets up to ``probe_limit``.

    (i)   ``max(|j|,|l|) > N`` with ``j, l`` in S implies ``j + l`` not in S;
    (ii)  every ``m`` with ``|m| > 2N`` has at most one decomposition ``m = j + l``;
    (iii) every ``m`` with ``|m| <= 2N`` has finitely many decompositions
          (automatic on a finite probe; the counts are reported).

    Decompositions are unordered pairs of signed support points and only sums
    inside the probed window are examined.  For an infinite sequence a witness
    ``N`` is reported only when no violation occurs in the upper three quarters
    of the window, so that violations recurring at every scale are not mistaken
    for a finite ``N``.  Also reports whether ``x_{l+1} >= 3 x_l + 1`` holds on
    the probed prefix.
    """
    sup = kernel.support
    if isinstance(sup, AllNonzero):
        raise PreconditionError("thin-support conditions fail trivially on full support")
    finite = isinstance(sup, FiniteSet)
    pos = [j for j in (sup.offsets if finite else sup.prefix(probe_limit)) if j <= probe_limit]
    if len(pos) > max_points:
        pos = pos[:max_points]
        probe_limit = pos[-1]
    signed = sorted(set(pos) | {-j for j in pos})
    in_s = set(signed)
    gap = all(b >= 3 * a + 1 for a, b in zip(pos, pos[1:]))

    bad_i = []
    decomp: dict[int, list[tuple[int, int]]] = {}
    for idx, j in enumerate(signed):
        for l in signed[idx:]:
            m = j + l
            if m == 0 or abs(m) > probe_limit:
                continue
            if m in in_s:
                bad_i.append((j, l))
            decomp.setdefault(m, []).append((j, l))
    multi = {m: d for m, d in decomp.items() if len(d) > 1}
    need_i = max((max(abs(j), abs(l)) for j, l in bad_i), default=0)
    need_ii = max(((abs(m) + 1) // 2 for m in multi), default=0)
    N = max(need_i, need_ii)
    violations = [("i", p) for p in bad_i[:20]]
    violations += [("ii", m, d) for m, d in sorted(multi.items(), key=lambda t: abs(t[0]))[:20]]
    scales = [max(abs(j), abs(l)) for j, l in bad_i] + [abs(m) for m in multi]
    complete = finite and probe_limit >= 2 * max(pos, default=0)
    if complete:
        admissible = N
    else:
        admissible = None if any(s > probe_limit // 4 for s in scales) else N
    counts = {m: len(d) for m, d in decomp.items() if abs(m) <= 2 * N}
    return ThinSupportReport(admissible, violations, gap, pos, counts)


# --- configuration ----------------------------------------------------------------------

def kernel_from_config(table: Mapping) -> Kernel:
    """Build a kernel from a ``[kernel]`` TOML table."""
    if "family" not in table:
        raise PreconditionError("kernel table needs a 'family' key")
    fam = table["family"]
    try:
        if fam == "power":
            return make_power(table.get("c", 1.0), table["beta"])
        if fam == "exp_power":
            return make_exp_power(table.get("c", 1.0), table["delta"], table["alpha"],
                                  table.get("gamma", 0.0))
        if fam == "log_corrected":
            return make_log_corrected(table.get("c", 1.0), table["alpha"])
        if fam == "fractional":
            return make_fractional(table["beta"])
        if fam == "finite":
            return make_finite({int(k): v for k, v in table["weights"].items()})
        if fam == "sparse":
            kind = table.get("weight", "exp")
            w = SparseWeight(kind, c=float(table.get("c", 1.0)), delta=float(table.get("delta", 1.0)),
                             beta=float(table.get("beta", 1.0)), q=float(table.get("q", 0.5)))
            return make_sparse(table.get("sequence", "pow2"), w)
    except KeyError as exc:
        raise PreconditionError(f"kernel family {fam!r} is missing parameter {exc}") from None
    raise PreconditionError(f"unknown kernel family {fam!r}")
