"""Orness, andness and idempotency measures of aggregation functions.

An internal function sits between min and max of its arguments; the
orness distribution function records where, as a fraction of the range.
Conjunctive functions sit between the domain floor and the minimum (dually
disjunctive ones between the maximum and the ceiling) and the idempotency
distribution function records how close they get to min (resp. max).

Numeric averages go through :mod:`minmaxquad.reduction`; closed forms for
Choquet integrals and the product use exact rationals.

Aggregation functions are batched: ``F(x)`` takes an ``(N, n)`` array and
returns ``(N,)``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from .quadrature import DEFAULT_TOLERANCE, Interval, QuadResult, Tolerance, as_interval, integrate_1d
from .reduction import (
    ClosedKernel,
    GeneralFullIntegrand,
    MaxIntegrand,
    MinIntegrand,
    SymmetricFullIntegrand,
    TensorGrid,
    _bounded,
    integrate_max,
    integrate_min,
    integrate_minmax_full,
    integrate_minmax_general,
    power,
)

MAX_SET_N = 20
DIAGONAL_EPS = 1e-14


class AggregationError(ValueError):
    pass


class DimensionMismatch(AggregationError):
    pass


class DiagonalInput(AggregationError):
    pass


class BoundaryInput(AggregationError):
    pass


class PropertyViolation(AggregationError):
    """A function failed its internal/conjunctive/disjunctive spot check."""


class MonotonicityWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# set functions and the discrete Choquet integral


def _exact(value) -> Fraction:
    """Exact rational for a weight; a float is read by its shortest decimal text."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise AggregationError(f"weight {value!r} is not a number") from None
    if not math.isfinite(f):
        raise AggregationError(f"weight {value!r} is not finite")
    return Fraction(repr(f))


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


def _members(mask: int) -> list[int]:
    return [i for i in range(mask.bit_length()) if mask >> i & 1]


@dataclass(frozen=True)
class SetFunction:
    """Weights ``a(S)`` over nonempty subsets of ``{1..n}``.

    Subsets are bitmasks (bit ``i-1`` set means element ``i``); the empty
    set is never stored and the weights must sum to 1.  Weights are kept as
    exact fractions, floats through their shortest decimal text.
    """

    n: int
    weights: Mapping[int, Fraction]
    monotone_checked: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.n, int) or not 1 <= self.n <= MAX_SET_N:
            raise AggregationError(f"set functions support 1 <= n <= {MAX_SET_N}, got {self.n!r}")
        full = (1 << self.n) - 1
        clean = {}
        for mask, w in dict(self.weights).items():
            mask = int(mask)
            if mask == 0:
                if w != 0:
                    raise AggregationError("the empty set must carry weight 0")
                continue
            if mask & ~full:
                raise AggregationError(f"subset mask {mask:#b} has elements outside 1..{self.n}")
            clean[mask] = _exact(w)
        total = sum(clean.values())
        if abs(total - 1) > Fraction(1, 10**12):
            raise AggregationError(f"weights must sum to 1, got {float(total)!r}")
        object.__setattr__(self, "weights", clean)

    @classmethod
    def from_subsets(cls, n: int, weights: Mapping) -> "SetFunction":
        """Build from ``{(1, 2): 0.5, (3,): 0.5}`` style 1-based subsets."""
        masks = {}
        for subset, w in weights.items():
            mask = 0
            for i in subset:
                if not 1 <= i <= n:
                    raise AggregationError(f"element {i} outside 1..{n}")
                mask |= 1 << (i - 1)
            if mask in masks:
                raise AggregationError(f"subset {tuple(subset)} given twice")
            masks[mask] = w
        return cls(n, masks)

    @classmethod
    def from_capacity(cls, n: int, capacity: Mapping[int, float]) -> "SetFunction":
        """Moebius transform of a capacity ``mu`` (bitmask -> value, ``mu(full) = 1``)."""
        full = (1 << n) - 1
        mu = [Fraction(0)] * (full + 1)
        for mask, val in capacity.items():
            mu[int(mask)] = _exact(val)
        a = list(mu)
        for i in range(n):
            bit = 1 << i
            for mask in range(full + 1):
                if mask & bit:
                    a[mask] = a[mask] - a[mask ^ bit]
        return cls(n, {m: a[m] for m in range(1, full + 1) if a[m] != 0})

    @classmethod
    def minimum(cls, n: int) -> "SetFunction":
        return cls(n, {(1 << n) - 1: Fraction(1)})

    @classmethod
    def arithmetic_mean(cls, n: int) -> "SetFunction":
        return cls(n, {1 << i: Fraction(1, n) for i in range(n)})

    def items(self):
        return sorted(self.weights.items())

    def capacity(self, mask: int):
        return sum(w for s, w in self.weights.items() if s & ~mask == 0)

    def check_monotone(self, samples: int = 2000, seed: int = 0) -> bool:
        """Whether the Choquet integral is nondecreasing in each variable.

        Exact (capacity increments) for ``n <= 4``; directional sampling
        beyond.  A violation warns but does not raise: the closed forms hold
        for any weights summing to one.
        """
        ok = True
        if self.n <= 4:
            full = (1 << self.n) - 1
            for mask in range(full + 1):
                for i in range(self.n):
                    bit = 1 << i
                    if mask & bit:
                        continue
                    gain = sum(w for s, w in self.weights.items()
                               if s & bit and (s & ~bit) & ~mask == 0)
                    if gain < -1e-12:
                        ok = False
        else:
            rng = np.random.default_rng(seed)
            x = rng.random((samples, self.n))
            i = rng.integers(self.n, size=samples)
            step = rng.random(samples) * (1.0 - x[np.arange(samples), i])
            y = x.copy()
            y[np.arange(samples), i] += step
            ok = bool(np.all(self(y) - self(x) >= -1e-12))
        if not ok:
            warnings.warn("set function does not give a nondecreasing Choquet integral",
                          MonotonicityWarning, stacklevel=2)
        return ok

    def checked(self) -> "SetFunction":
        self.check_monotone()
        return replace(self, monotone_checked=True)

    def __call__(self, x):
        return choquet_eval(self, x)

    def to_json(self) -> str:
        weights = [{"subset": [i + 1 for i in _members(m)],
                    "value": _json_value(w)} for m, w in self.items()]
        return json.dumps({"n": self.n, "weights": weights})

    @classmethod
    def from_json(cls, text: str) -> "SetFunction":
        """Load ``{"n": int, "weights": [{"subset": [...], "value": x}, ...]}``.

        Decimal values are read exactly (``0.2`` becomes ``1/5``); a value
        may also be a rational string such as ``"1/3"``.
        """
        try:
            doc = json.loads(text, parse_float=Fraction)
            n = doc["n"]
            entries = doc["weights"]
            weights = {}
            for entry in entries:
                subset = tuple(entry["subset"])
                if len(set(subset)) != len(subset):
                    raise AggregationError(f"subset {list(subset)} repeats an element")
                value = entry["value"]
                weights[subset] = Fraction(value) if isinstance(value, str) else value
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise AggregationError(f"malformed set function document: {exc}") from None
        if () in weights:
            if weights.pop(()) != 0:
                raise AggregationError("the empty set must carry weight 0")
        return cls.from_subsets(n, weights).checked()


def _json_value(w):
    # plain number when its decimal text reads back exactly, else "p/q"
    if isinstance(w, Fraction):
        as_float = float(w)
        return as_float if Fraction(repr(as_float)) == w else str(w)
    return float(w)


def choquet_eval(a: SetFunction, x) -> np.ndarray | float:
    """``sum_S a(S) min_{i in S} x_i`` for one point or a batch of rows."""
    arr = np.asarray(x, dtype=float)
    if arr.shape[-1] != a.n:
        raise DimensionMismatch(f"expected {a.n} coordinates, got {arr.shape[-1]}")
    out = np.zeros(arr.shape[:-1])
    for mask, w in a.items():
        out = out + float(w) * arr[..., _members(mask)].min(axis=-1)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# aggregation functions


@dataclass(frozen=True)
class AggregationFunction:
    """A batched ``F: (N, n) -> (N,)``.

    ``free_integral(lo, hi, fixed)``, when known, integrates ``F`` over the
    coordinates not in ``fixed`` across ``(lo, hi)^m``; ``fixed`` has shape
    ``(N, n - m)``.  It only makes sense for symmetric ``F``.
    """

    n: int
    eval: Callable
    label: str = ""
    symmetric: bool = False
    free_integral: Callable | None = None

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        if arr.shape[-1] != self.n:
            raise DimensionMismatch(f"{self.label or 'function'} takes {self.n} coordinates, got {arr.shape[-1]}")
        flat = arr.reshape(-1, self.n)
        out = np.asarray(self.eval(flat), dtype=float).reshape(arr.shape[:-1])
        return float(out) if out.ndim == 0 else out


class InternalFunction(AggregationFunction):
    pass


class ConjunctiveFunction(AggregationFunction):
    pass


class DisjunctiveFunction(AggregationFunction):
    pass


def _sample_points(n: int, domain: Interval, points: int, seed: int):
    a, b = domain
    rng = np.random.default_rng(seed)
    return a + (b - a) * rng.random((points, n))


def check_internal(F: AggregationFunction, domain=(0.0, 1.0), points: int = 1000, seed: int = 0):
    x = _sample_points(F.n, as_interval(domain), points, seed)
    y = F(x)
    slack = 1e-12 * np.maximum(1.0, np.abs(x).max(axis=1))
    if np.any(y < x.min(axis=1) - slack) or np.any(y > x.max(axis=1) + slack):
        raise PropertyViolation(f"{F.label or 'function'} is not internal")


def check_kind(F: AggregationFunction, kind: str, domain=(0.0, 1.0), points: int = 1000, seed: int = 0):
    domain = as_interval(domain)
    a, b = domain
    x = _sample_points(F.n, domain, points, seed)
    y = F(x)
    slack = 1e-12 * max(1.0, abs(a), abs(b))
    if kind == "conjunctive":
        bad = np.any(y < a - slack) or np.any(y > x.min(axis=1) + slack)
    else:
        bad = np.any(y > b + slack) or np.any(y < x.max(axis=1) - slack)
    if bad:
        raise PropertyViolation(f"{F.label or 'function'} is not {kind} on {tuple(domain)}")


def _kind_of(F, kind):
    if kind is None:
        if isinstance(F, ConjunctiveFunction):
            return "conjunctive"
        if isinstance(F, DisjunctiveFunction):
            return "disjunctive"
        raise AggregationError("say whether the function is 'conjunctive' or 'disjunctive'")
    if kind not in ("conjunctive", "disjunctive"):
        raise AggregationError(f"unknown kind {kind!r}")
    return kind


def arithmetic_mean(n: int) -> InternalFunction:
    def free_integral(lo, hi, fixed):
        m = n - fixed.shape[1]
        return power(hi - lo, m) * (fixed.sum(axis=1) + m * (lo + hi) / 2) / n

    return InternalFunction(n, lambda x: x.mean(axis=1), "arithmetic mean", True, free_integral)


def geometric_mean(n: int) -> InternalFunction:
    e = 1.0 / n

    def free_integral(lo, hi, fixed):
        m = n - fixed.shape[1]
        one = (n / (n + 1)) * (hi ** (1 + e) - lo ** (1 + e))
        return power(one, m) * np.prod(fixed ** e, axis=1)

    return InternalFunction(n, lambda x: np.prod(x ** e, axis=1), "geometric mean", True, free_integral)


def _extreme_free_integral(n: int, largest: bool):
    # E[min(c, Y)] for Y the minimum of m uniforms on (lo, hi) is c when
    # c <= lo, else lo + (hi - lo)/(m + 1) (1 - ((hi - c)/(hi - lo))^(m + 1))
    # with c capped at hi; the maximum is the mirror image
    def free_integral(lo, hi, fixed):
        m = n - fixed.shape[1]
        span = hi - lo
        if fixed.shape[1]:
            raw = fixed.max(axis=1) if largest else fixed.min(axis=1)
        else:
            raw = np.full_like(lo, -np.inf if largest else np.inf)
        c = np.clip(raw, lo, hi)
        gap = (c - lo) if largest else (hi - c)
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(span > 0, gap / span, 0.0)
        shift = span / (m + 1) * (1.0 - power(frac, m + 1))
        if largest:
            mean = np.where(raw >= hi, raw, hi - shift)
        else:
            mean = np.where(raw <= lo, raw, lo + shift)
        return power(span, m) * mean

    return free_integral


def minimum(n: int) -> AggregationFunction:
    return AggregationFunction(n, lambda x: x.min(axis=1), "min", True, _extreme_free_integral(n, False))


def maximum(n: int) -> AggregationFunction:
    return AggregationFunction(n, lambda x: x.max(axis=1), "max", True, _extreme_free_integral(n, True))


def product(n: int) -> ConjunctiveFunction:
    def free_integral(lo, hi, fixed):
        m = n - fixed.shape[1]
        return power((hi * hi - lo * lo) / 2, m) * np.prod(fixed, axis=1)

    return ConjunctiveFunction(n, lambda x: np.prod(x, axis=1), "product", True, free_integral)


def choquet(a: SetFunction) -> InternalFunction:
    return InternalFunction(a.n, lambda x: choquet_eval(a, x), "Choquet integral", False)


BUILTINS = {
    "arithmetic": arithmetic_mean,
    "geometric": geometric_mean,
    "min": minimum,
    "max": maximum,
    "product": product,
}


# ---------------------------------------------------------------------------
# pointwise measures


def odf(F: AggregationFunction, x) -> float | np.ndarray:
    """Orness distribution function ``(F(x) - min x) / (max x - min x)``."""
    arr = np.asarray(x, dtype=float)
    lo, hi = arr.min(axis=-1), arr.max(axis=-1)
    rng = hi - lo
    if np.any(rng < DIAGONAL_EPS):
        raise DiagonalInput("orness is undefined on the diagonal")
    return (F(arr) - lo) / rng


def adf(F: AggregationFunction, x) -> float | np.ndarray:
    """Andness distribution function ``(max x - F(x)) / (max x - min x)``."""
    arr = np.asarray(x, dtype=float)
    lo, hi = arr.min(axis=-1), arr.max(axis=-1)
    rng = hi - lo
    if np.any(rng < DIAGONAL_EPS):
        raise DiagonalInput("andness is undefined on the diagonal")
    return (hi - F(arr)) / rng


def idf(F: AggregationFunction, x, domain=(0.0, 1.0), kind: str | None = None) -> float | np.ndarray:
    """Idempotency distribution function.

    ``(F(x) - a) / (min x - a)`` for conjunctive ``F``,
    ``(b - F(x)) / (b - max x)`` for disjunctive ``F``.
    """
    kind = _kind_of(F, kind)
    a, b = as_interval(domain)
    arr = np.asarray(x, dtype=float)
    if kind == "conjunctive":
        den = arr.min(axis=-1) - a
        num = F(arr) - a
    else:
        den = b - arr.max(axis=-1)
        num = b - F(arr)
    if np.any(den < DIAGONAL_EPS):
        raise BoundaryInput("idempotency is undefined on the domain boundary")
    return num / den


# ---------------------------------------------------------------------------
# averages


def _closed_ok(F, strategy):
    return strategy is None and F.symmetric and F.free_integral is not None


def _default(strategy):
    return TensorGrid() if strategy is None else strategy


def orness_average_numeric(F: AggregationFunction, domain=(0.0, 1.0), tol: Tolerance | None = None,
                           strategy=None) -> QuadResult:
    """Mean of the orness distribution function over ``(a, b)^n``.

    ``strategy=None`` uses ``F.free_integral`` in closed form when ``F`` is
    symmetric and provides one, else a :class:`TensorGrid`.  The andness
    average is one minus this value.
    """
    domain = _bounded(domain)
    n = F.n
    if n < 2:
        raise AggregationError("orness needs n >= 2")
    check_internal(F, domain)
    if _closed_ok(F, strategy):
        def kernel(u, v):
            fixed = np.stack([u, v], axis=1)
            return (F.free_integral(u, v, fixed) - u * power(v - u, n - 2)) / (v - u)

        res = integrate_minmax_full(SymmetricFullIntegrand(None, n), domain, tol, ClosedKernel(kernel))
    elif F.symmetric:
        def ev(free, u, v):
            x = np.concatenate([free, u[:, None], v[:, None]], axis=1)
            return (F.eval(x) - u) / (v - u)

        res = integrate_minmax_full(SymmetricFullIntegrand(ev, n), domain, tol, _default(strategy))
    else:
        f = GeneralFullIntegrand.from_point(lambda x, u, v: (F.eval(x) - u) / (v - u), n)
        res = integrate_minmax_general(f, domain, tol, _default(strategy))
    return res.scaled(1.0 / domain.width ** n)


def andness_average_numeric(F, domain=(0.0, 1.0), tol=None, strategy=None) -> QuadResult:
    res = orness_average_numeric(F, domain, tol, strategy)
    return replace(res, value=1.0 - res.value)


def orness_average_choquet(a: SetFunction) -> Fraction:
    """Exact orness average of the Choquet integral over ``[0, 1]^n``."""
    n = a.n
    if n < 2:
        raise AggregationError("orness needs n >= 2")
    if n == 2:
        return (_exact(a.weights.get(0b01, 0)) + _exact(a.weights.get(0b10, 0))) / 2
    return sum((_exact(w) * Fraction(n - _popcount(m), _popcount(m) + 1) for m, w in a.items()),
               Fraction(0)) / (n - 1)


def _one_minus_power_ratio(x, top: int, bottom: int):
    # (1 - x^top) / (1 - x^bottom) without cancellation near x = 1
    lx = np.log(x)
    return np.expm1(top * lx) / np.expm1(bottom * lx)


def orness_average_geometric(n: int, tol: Tolerance | None = None) -> float:
    """Orness average of the geometric mean over ``[0, 1]^n``.

    Reduces to a single 1-D integral for ``n >= 3``; ``n = 2`` is ``ln 4 - 1``.
    """
    if n < 2:
        raise AggregationError("orness needs n >= 2")
    if n == 2:
        return math.log(4.0) - 1.0

    def integrand(x):
        # x^n (1 - x^(n+1))^(n-2) / (1 - x^n)
        lead = x ** n / -np.expm1(n * np.log(x))
        rest = -np.expm1((n + 1) * np.log(x))
        return lead * rest ** (n - 2)

    res = integrate_1d(integrand, (0.0, 1.0), tol or DEFAULT_TOLERANCE, vectorized=True)
    return n * (n - 1) * (n / (n + 1)) ** (n - 2) * res.value - 1.0 / (n - 2)


def mean_value(F: AggregationFunction, domain=(0.0, 1.0), tol: Tolerance | None = None,
               strategy=None) -> QuadResult:
    """Mean of ``F`` over ``(a, b)^n``, reduced over the minimum coordinate."""
    domain = _bounded(domain)
    n = F.n
    if _closed_ok(F, strategy):
        b = domain.upper

        def kernel(u):
            return F.free_integral(u, np.full_like(u, b), u[:, None])

        res = integrate_min(MinIntegrand(None, n, True), domain, tol, ClosedKernel(kernel))
    elif F.symmetric:
        f = MinIntegrand.from_point(lambda x, u: F.eval(x), n, symmetric=True)
        res = integrate_min(f, domain, tol, _default(strategy))
    else:
        f = MinIntegrand.from_point(lambda x, u: F.eval(x), n)
        res = integrate_min(f, domain, tol, _default(strategy))
    return res.scaled(1.0 / domain.width ** n)


def _extreme_means(n: int, domain: Interval) -> tuple[float, float]:
    a, b = domain
    return a + (b - a) / (n + 1), a + (b - a) * n / (n + 1)


def global_orness(F: AggregationFunction, domain=(0.0, 1.0), tol: Tolerance | None = None,
                  strategy=None) -> QuadResult:
    """``(mean F - mean Min) / (mean Max - mean Min)`` over ``(a, b)^n``."""
    domain = _bounded(domain)
    if F.n < 2:
        raise AggregationError("orness needs n >= 2")
    check_internal(F, domain)
    fbar = mean_value(F, domain, tol, strategy)
    lo, hi = _extreme_means(F.n, domain)
    return replace(fbar.scaled(1.0 / (hi - lo)), value=(fbar.value - lo) / (hi - lo))


def global_andness(F, domain=(0.0, 1.0), tol=None, strategy=None) -> QuadResult:
    res = global_orness(F, domain, tol, strategy)
    return replace(res, value=1.0 - res.value)


def global_orness_choquet(a: SetFunction) -> Fraction:
    """Exact global orness of the Choquet integral over ``[0, 1]^n``.

    Built from the mean ``sum_S a(S) / (|S| + 1)`` of the integral itself.
    """
    n = a.n
    if n < 2:
        raise AggregationError("orness needs n >= 2")
    mean = sum((_exact(w) / (_popcount(m) + 1) for m, w in a.items()), Fraction(0))
    return Fraction(-1, n - 1) + Fraction(n + 1, n - 1) * mean


def global_orness_geometric(n: int) -> float:
    return -1.0 / (n - 1) + (n + 1) / (n - 1) * (n / (n + 1)) ** n


def idempotency_average_numeric(F: AggregationFunction, kind: str | None = None, domain=(0.0, 1.0),
                                tol: Tolerance | None = None, strategy=None) -> QuadResult:
    """Mean of the idempotency distribution function over ``(a, b)^n``.

    Conjunctive functions reduce over the minimum coordinate, disjunctive
    ones over the maximum.
    """
    kind = _kind_of(F, kind)
    domain = _bounded(domain)
    check_kind(F, kind, domain)
    a, b = domain
    n = F.n
    if kind == "conjunctive":
        if _closed_ok(F, strategy):
            def kernel(u):
                inner = F.free_integral(u, np.full_like(u, b), u[:, None])
                return (inner - a * power(b - u, n - 1)) / (u - a)

            res = integrate_min(MinIntegrand(None, n, True), domain, tol, ClosedKernel(kernel))
        else:
            f = MinIntegrand.from_point(lambda x, u: (F.eval(x) - a) / (u - a), n, F.symmetric)
            res = integrate_min(f, domain, tol, _default(strategy))
    else:
        if _closed_ok(F, strategy):
            def kernel(v):
                inner = F.free_integral(np.full_like(v, a), v, v[:, None])
                return (b * power(v - a, n - 1) - inner) / (b - v)

            res = integrate_max(MaxIntegrand(None, n, True), domain, tol, ClosedKernel(kernel))
        else:
            f = MaxIntegrand.from_point(lambda x, v: (b - F.eval(x)) / (b - v), n, F.symmetric)
            res = integrate_max(f, domain, tol, _default(strategy))
    return res.scaled(1.0 / domain.width ** n)


def idempotency_average_product(n: int) -> Fraction:
    """Exact idempotency average of the product over ``[0, 1]^n``: ``2^(n-1) / C(2n-1, n)``."""
    if n < 1:
        raise AggregationError("need n >= 1")
    return Fraction(2 ** (n - 1), math.comb(2 * n - 1, n))


def global_idempotency(F: AggregationFunction, kind: str | None = None, domain=(0.0, 1.0),
                       tol: Tolerance | None = None, strategy=None) -> QuadResult:
    """``(mean F - a) / (mean Min - a)``, resp. ``(b - mean F) / (b - mean Max)``."""
    kind = _kind_of(F, kind)
    domain = _bounded(domain)
    check_kind(F, kind, domain)
    a, b = domain
    fbar = mean_value(F, domain, tol, strategy)
    lo, hi = _extreme_means(F.n, domain)
    if kind == "conjunctive":
        den = lo - a
        return replace(fbar.scaled(1.0 / den), value=(fbar.value - a) / den)
    den = b - hi
    return replace(fbar.scaled(1.0 / den), value=(b - fbar.value) / den)


def global_idempotency_product(n: int) -> Fraction:
    return Fraction(n + 1, 2 ** n)
