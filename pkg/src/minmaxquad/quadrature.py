"""Adaptive 1-D and triangular quadrature.

Everything in the package bottoms out in :func:`integrate_1d`, a globally
adaptive Gauss-Kronrod (10/21 point) integrator.  The rule is open, so an
integrand is never evaluated at an interval endpoint; removable or
integrable endpoint singularities are therefore harmless.

Integrands are assumed piecewise continuous.  Infinite intervals are mapped
onto finite ones by :func:`transform_unbounded` before integration.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

# Gauss-Kronrod 21-point abscissae on [-1, 1]; odd positions (1, 3, ..., 19)
# are the 10-point Gauss nodes.
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(21)
GAUSS_WEIGHTS[1:10:2] = _WG
GAUSS_WEIGHTS[11:20:2] = _WG[::-1]
RULE_SIZE = NODES.size

_EPS = np.finfo(float).eps


class QuadratureError(Exception):
    pass


class NonFiniteEvaluation(QuadratureError, ValueError):
    """The integrand returned NaN or an infinity at a quadrature node."""


class ToleranceNotReached(QuadratureError):
    """Raised in strict mode when the evaluation budget runs out.

    The best available estimate is attached as ``result``.
    """

    def __init__(self, message: str, result: "QuadResult"):
        super().__init__(message)
        self.result = result


class ToleranceWarning(UserWarning):
    pass


class AlreadyBounded(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if not lo < hi:
            raise ValueError(f"need lower < upper, got ({lo}, {hi})")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.lower) or math.isinf(self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def __iter__(self):
        yield self.lower
        yield self.upper


def as_interval(domain) -> Interval:
    if isinstance(domain, Interval):
        return domain
    lo, hi = domain
    return Interval(lo, hi)


@dataclass(frozen=True)
class Tolerance:
    rel: float = 1e-10
    abs: float = 1e-12
    max_evaluations: int = 10**7

    def __post_init__(self):
        if not (self.rel > 0 and self.abs > 0):
            raise ValueError("tolerances must be positive")
        if self.max_evaluations < 1:
            raise ValueError("max_evaluations must be positive")

    def tightened(self, factor: float = 10.0) -> "Tolerance":
        return replace(self, rel=self.rel / factor, abs=self.abs / factor)

    def target(self, value: float) -> float:
        return max(self.abs, self.rel * abs(value))


DEFAULT_TOLERANCE = Tolerance()


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_error: float
    evaluations: int
    converged: bool = True
    stochastic: bool = False

    def scaled(self, factor: float) -> "QuadResult":
        return replace(self, value=self.value * factor,
                       abs_error=self.abs_error * abs(factor))

    def __float__(self) -> float:
        return float(self.value)


def combine(results: Sequence[QuadResult], weights: Sequence[float] | None = None) -> QuadResult:
    """Weighted sum of independent results, summed in the given order."""
    if weights is None:
        weights = [1.0] * len(results)
    stochastic = any(r.stochastic for r in results)
    if stochastic:
        err = math.sqrt(math.fsum((w * r.abs_error) ** 2 for w, r in zip(weights, results)))
    else:
        err = math.fsum(abs(w) * r.abs_error for w, r in zip(weights, results))
    return QuadResult(
        value=math.fsum(w * r.value for w, r in zip(weights, results)),
        abs_error=err,
        evaluations=sum(r.evaluations for r in results),
        converged=all(r.converged for r in results),
        stochastic=stochastic,
    )


class Transform(NamedTuple):
    domain: Interval
    change_of_variables: Callable
    jacobian: Callable


def transform_unbounded(domain, method: str = "rational") -> Transform:
    """Map an interval with an infinite endpoint onto a finite one.

    Returns ``(mapped_domain, phi, dphi)`` with
    ``integral of f over domain == integral of f(phi(t)) * dphi(t)`` over
    the mapped domain.  ``method`` is ``"rational"`` (default) or
    ``"exponential"``, the latter better suited to heavy tails.
    """
    domain = as_interval(domain)
    if not domain.unbounded:
        raise AlreadyBounded(f"{domain} is already finite")
    a, b = domain
    if method == "rational":
        if math.isinf(a) and math.isinf(b):
            return Transform(Interval(-1.0, 1.0),
                             lambda t: t / (1.0 - t * t),
                             lambda t: (1.0 + t * t) / (1.0 - t * t) ** 2)
        if math.isinf(b):
            return Transform(Interval(0.0, 1.0),
                             lambda t: a + t / (1.0 - t),
                             lambda t: 1.0 / (1.0 - t) ** 2)
        return Transform(Interval(0.0, 1.0),
                         lambda t: b - (1.0 - t) / t,
                         lambda t: 1.0 / (t * t))
    if method == "exponential":
        if math.isinf(a) and math.isinf(b):
            return Transform(Interval(0.0, 1.0),
                             lambda t: np.log(t / (1.0 - t)),
                             lambda t: 1.0 / (t * (1.0 - t)))
        if math.isinf(b):
            return Transform(Interval(0.0, 1.0),
                             lambda t: a - np.log1p(-t),
                             lambda t: 1.0 / (1.0 - t))
        return Transform(Interval(0.0, 1.0),
                         lambda t: b + np.log(t),
                         lambda t: 1.0 / t)
    raise ValueError(f"unknown transform method {method!r}")


def _inverse_map(domain: Interval, method: str):
    a, b = domain
    if method == "rational":
        if math.isinf(a) and math.isinf(b):
            # t / (1 - t^2) = x  ->  x t^2 + t - x = 0
            return lambda x: 0.0 if x == 0 else (-1.0 + math.sqrt(1.0 + 4.0 * x * x)) / (2.0 * x)
        if math.isinf(b):
            return lambda x: (x - a) / (1.0 + x - a)
        return lambda x: 1.0 / (1.0 + b - x)
    if math.isinf(a) and math.isinf(b):
        return lambda x: 1.0 / (1.0 + math.exp(-x))
    if math.isinf(b):
        return lambda x: -math.expm1(-(x - a))
    return lambda x: math.exp(x - b)


def map_unbounded(f, domain: Interval, breakpoints=(), method: str = "rational"):
    """Return ``(g, finite_domain, mapped_breakpoints)`` for a vectorized ``f``."""
    mapped, phi, dphi = transform_unbounded(domain, method)
    inv = _inverse_map(domain, method)

    def g(t):
        return f(phi(t)) * dphi(t)

    return g, mapped, [inv(float(p)) for p in breakpoints]


def _vectorize(f):
    def fv(x):
        return np.array([f(float(xi)) for xi in x], dtype=float)
    return fv


class _Panel:
    __slots__ = ("a", "b", "value", "error")

    def __init__(self, a, b, value, error):
        self.a, self.b, self.value, self.error = a, b, value, error

    def __lt__(self, other):
        # max-heap on error; ties broken by position for determinism
        if self.error != other.error:
            return self.error > other.error
        return self.a < other.a


def _panel(fv, a: float, b: float, with_errors: bool) -> _Panel:
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c + h * NODES
    out = fv(x)
    if with_errors:
        vals, errs = out
        errs = np.asarray(errs, dtype=float)
    else:
        vals, errs = out, None
    vals = np.asarray(vals, dtype=float)
    if vals.shape != x.shape:
        vals = np.broadcast_to(vals, x.shape)
    if not np.all(np.isfinite(vals)):
        bad = x[~np.isfinite(vals)][0]
        raise NonFiniteEvaluation(f"integrand not finite at x={bad!r}")
    kron = h * float(KRONROD_WEIGHTS @ vals)
    gauss = h * float(GAUSS_WEIGHTS @ vals)
    err = abs(kron - gauss)
    if errs is not None:
        err += abs(h) * float(KRONROD_WEIGHTS @ np.abs(errs))
    return _Panel(a, b, kron, err)


def adaptive(fv, a: float, b: float, tol: Tolerance, breakpoints=(),
             with_errors: bool = False) -> QuadResult:
    """Core globally adaptive loop over a finite interval.

    ``fv`` maps an array of nodes to an array of values (or to a
    ``(values, errors)`` pair when ``with_errors`` is set, in which case the
    node errors are integrated into each panel's error).
    """
    cuts = sorted({float(p) for p in breakpoints if a < p < b})
    edges = [a, *cuts, b]
    heap = [_panel(fv, lo, hi, with_errors) for lo, hi in zip(edges[:-1], edges[1:])]
    heapq.heapify(heap)
    evaluations = RULE_SIZE * len(heap)
    frozen: list[_Panel] = []
    converged = False
    while True:
        panels = heap + frozen
        value = math.fsum(p.value for p in panels)
        error = math.fsum(p.error for p in panels)
        if error <= tol.target(value):
            converged = True
            break
        if not heap or evaluations + 2 * RULE_SIZE > tol.max_evaluations:
            break
        worst = heapq.heappop(heap)
        mid = 0.5 * (worst.a + worst.b)
        if not (worst.a < mid < worst.b) or (worst.b - worst.a) < 64 * _EPS * max(abs(worst.a), abs(worst.b), 1e-300):
            frozen.append(worst)
            continue
        heapq.heappush(heap, _panel(fv, worst.a, mid, with_errors))
        heapq.heappush(heap, _panel(fv, mid, worst.b, with_errors))
        evaluations += 2 * RULE_SIZE
    # deterministic final sum in positional order
    panels = sorted(heap + frozen, key=lambda p: p.a)
    value = math.fsum(p.value for p in panels)
    error = math.fsum(p.error for p in panels)
    return QuadResult(value, error, evaluations, converged)


def _finish(result: QuadResult, strict: bool, context: str) -> QuadResult:
    if not result.converged:
        msg = (f"{context}: tolerance not reached after {result.evaluations} evaluations "
               f"(estimate {result.value!r}, error {result.abs_error:.3g})")
        if strict:
            raise ToleranceNotReached(msg, result)
        warnings.warn(msg, ToleranceWarning, stacklevel=3)
    return result


def integrate_1d(f, domain, tol: Tolerance | None = None, *, vectorized: bool = False,
                 breakpoints=(), strict: bool = False, method: str = "rational") -> QuadResult:
    """Integrate ``f`` over ``domain``.

    ``f`` is a scalar function unless ``vectorized`` is set, in which case
    it receives a 1-D array of nodes.  Infinite endpoints are handled by
    :func:`transform_unbounded` (``method`` picks the map).  On budget
    exhaustion the best estimate comes back with ``converged=False`` and a
    :class:`ToleranceWarning`; with ``strict=True`` :class:`ToleranceNotReached`
    is raised instead.
    """
    tol = tol or DEFAULT_TOLERANCE
    domain = as_interval(domain)
    fv = f if vectorized else _vectorize(f)
    a, b = domain
    if domain.unbounded:
        fv, mapped, breakpoints = map_unbounded(fv, domain, breakpoints, method)
        a, b = mapped
    result = adaptive(fv, a, b, tol, breakpoints)
    return _finish(result, strict, "integrate_1d")


def integrate_nested(g, outer, inner_bounds, tol: Tolerance | None = None, *,
                     vectorized: bool = False, outer_breakpoints=(), inner_breakpoints=(),
                     strict: bool = False) -> QuadResult:
    """Integrate ``g(u, v)`` over ``{v in outer, lo(v) < u < hi(v)}``.

    ``inner_bounds(v)`` returns ``(lo, hi)``; an empty range (lo >= hi)
    contributes zero.  The inner integral runs at a tenth of the outer
    tolerance and its error estimate is folded into the outer one.
    ``g`` is called as ``g(u_array, v_float)`` when ``vectorized``.
    """
    tol = tol or DEFAULT_TOLERANCE
    inner_tol = tol.tightened(10.0)
    outer = as_interval(outer)
    inner_cuts = tuple(inner_breakpoints)
    failures: list[float] = []
    counts = [0]

    def inner(v: float):
        lo, hi = inner_bounds(v)
        if not lo < hi:
            return 0.0, 0.0
        if vectorized:
            def gu(u):
                return g(u, v)
        else:
            def gu(u):
                return np.array([g(float(ui), v) for ui in u], dtype=float)
        dom = Interval(lo, hi)
        cuts = inner_cuts
        if dom.unbounded:
            gu, mapped, cuts = map_unbounded(gu, dom, cuts)
            lo, hi = mapped
        try:
            res = adaptive(gu, lo, hi, inner_tol, cuts)
        except NonFiniteEvaluation as exc:
            raise NonFiniteEvaluation(f"inner integral at v={v!r}: {exc}") from None
        counts[0] += res.evaluations
        if not res.converged:
            failures.append(v)
        return res.value, res.abs_error

    def outer_fv(vs):
        vals = np.empty(vs.shape)
        errs = np.empty(vs.shape)
        for i, v in enumerate(vs):
            vals[i], errs[i] = inner(float(v))
        return vals, errs

    a, b = outer
    fv = outer_fv
    cuts = outer_breakpoints
    if outer.unbounded:
        mapped, phi, dphi = transform_unbounded(outer)
        cuts = [_inverse_map(outer, "rational")(float(p)) for p in cuts]

        def fv(t):
            vals, errs = outer_fv(phi(t))
            jac = dphi(t)
            return vals * jac, errs * np.abs(jac)

        a, b = mapped
    res = adaptive(fv, a, b, tol, cuts, with_errors=True)
    res = replace(res, evaluations=counts[0], converged=res.converged and not failures)
    if failures and strict:
        raise ToleranceNotReached(
            f"inner integral did not converge at {len(failures)} outer node(s), first v={failures[0]!r}",
            res)
    return _finish(res, strict, "integrate_nested (outer)")


def integrate_triangle(g, domain, tol: Tolerance | None = None, *, vectorized: bool = False,
                       breakpoints=(), strict: bool = False) -> QuadResult:
    """Nested integral ``int_a^b dv int_a^v g(u, v) du`` (outer v, inner u)."""
    domain = as_interval(domain)
    a = domain.lower
    return integrate_nested(g, domain, lambda v: (a, v), tol, vectorized=vectorized,
                            outer_breakpoints=breakpoints, inner_breakpoints=breakpoints,
                            strict=strict)
