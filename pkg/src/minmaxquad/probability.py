"""Expectations and distribution functions of ``g(min X_i, max X_i)``.

The variables are independent with continuous distribution functions.
Everything reduces to a 2-D integral over ``u < v`` weighted by ``dF(u)``
and ``dF(v)``.  A concrete chart is picked per distribution: density
weighted quadrature when a pdf is available (unbounded supports mapped to
a finite interval), else the quantile substitution onto the unit
triangle.

Functionals are batched: ``g(u, v)`` takes arrays (``v`` may be a scalar)
and returns an array.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .quadrature import (
    DEFAULT_TOLERANCE,
    Interval,
    NonFiniteEvaluation,
    QuadResult,
    Tolerance,
    _finish,
    _inverse_map,
    adaptive,
    as_interval,
    integrate_1d,
    integrate_nested,
    transform_unbounded,
)
from .reduction import power

GRID_POINTS = 100
CROSSING_SCAN = 64


class ProbabilityError(ValueError):
    pass


class InvalidDistribution(ProbabilityError):
    pass


class NoIntegrationPath(ProbabilityError):
    pass


class SingularKernel(UserWarning):
    """The functional is unbounded near the edge of the integration domain."""


class ReducedAccuracy(UserWarning):
    """The Heaviside cut was not a single crossing per slice."""


# ---------------------------------------------------------------------------
# distributions


@dataclass(frozen=True)
class Distribution:
    """A continuous distribution on ``support``.

    ``cdf``, ``pdf`` and ``quantile`` are vectorized; ``sampler(rng, size)``
    draws from a numpy Generator.  ``breakpoints`` lists interior points
    where the density is not smooth.
    """

    cdf: Callable
    support: Interval
    pdf: Optional[Callable] = None
    quantile: Optional[Callable] = None
    sampler: Optional[Callable] = None
    label: str = ""
    breakpoints: tuple = ()
    spec: Optional[dict] = field(default=None, compare=False, repr=False)
    validate: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "support", as_interval(self.support))
        if self.validate:
            self.check()

    def _grid(self) -> np.ndarray:
        t = (np.arange(GRID_POINTS) + 0.5) / GRID_POINTS
        if self.support.unbounded:
            mapped, phi, _ = transform_unbounded(self.support)
            lo, hi = mapped
            return phi(lo + (hi - lo) * t)
        a, b = self.support
        return a + (b - a) * t

    def _edges(self):
        if self.support.unbounded:
            mapped, phi, _ = transform_unbounded(self.support)
            lo, hi = mapped
            eps = 1e-12 * (hi - lo)
            return float(phi(lo + eps)), float(phi(hi - eps))
        return self.support.lower, self.support.upper

    def check(self) -> None:
        """Raise :class:`InvalidDistribution` unless the cdf looks like one."""
        x = self._grid()
        F = np.asarray(self.cdf(x), dtype=float)
        if F.shape != x.shape or not np.all(np.isfinite(F)):
            raise InvalidDistribution(f"{self.label or 'distribution'}: cdf must be finite and vectorized")
        if np.any(np.diff(F) < -1e-12):
            raise InvalidDistribution(f"{self.label or 'distribution'}: cdf decreases on the check grid")
        lo, hi = self._edges()
        F_lo, F_hi = (float(v) for v in self.cdf(np.array([lo, hi])))
        if abs(F_lo) > 1e-6 or abs(F_hi - 1.0) > 1e-6:
            raise InvalidDistribution(
                f"{self.label or 'distribution'}: cdf runs from {F_lo!r} to {F_hi!r} over the support, not 0 to 1")
        if self.pdf is not None:
            mass = integrate_1d(self.pdf, self.support, Tolerance(rel=1e-11, abs=1e-12),
                                vectorized=True, breakpoints=self.breakpoints)
            if abs(mass.value - 1.0) > 1e-8:
                raise InvalidDistribution(
                    f"{self.label or 'distribution'}: pdf integrates to {mass.value!r}, not 1")

    def to_json(self) -> str:
        if self.spec is None:
            raise ProbabilityError("only built-in and table distributions serialize")
        return json.dumps(self.spec)


def uniform(a: float = 0.0, b: float = 1.0) -> Distribution:
    a, b = float(a), float(b)
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise InvalidDistribution(f"uniform needs finite a < b, got ({a}, {b})")
    w = b - a

    def cdf(x):
        return np.clip((np.asarray(x, dtype=float) - a) / w, 0.0, 1.0)

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= a) & (x <= b), 1.0 / w, 0.0)

    return Distribution(cdf, Interval(a, b), pdf,
                        quantile=lambda p: a + w * np.asarray(p, dtype=float),
                        sampler=lambda rng, size: rng.uniform(a, b, size),
                        label=f"uniform({a:g},{b:g})",
                        spec={"kind": "uniform", "a": a, "b": b})


def exponential(rate: float = 1.0) -> Distribution:
    lam = float(rate)
    if not (math.isfinite(lam) and lam > 0):
        raise InvalidDistribution(f"exponential rate must be positive, got {rate!r}")

    def cdf(x):
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        return -np.expm1(-lam * x)

    def pdf(x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, lam * np.exp(-lam * np.maximum(x, 0.0)), 0.0)

    return Distribution(cdf, Interval(0.0, math.inf), pdf,
                        quantile=lambda p: -np.log1p(-np.asarray(p, dtype=float)) / lam,
                        sampler=lambda rng, size: rng.exponential(1.0 / lam, size),
                        label=f"exponential({lam:g})",
                        spec={"kind": "exponential", "lambda": lam})


def table(x: Sequence[float], cdf: Sequence[float]) -> Distribution:
    """Distribution from a monotone ``(x, cdf)`` grid, interpolated by PCHIP."""
    from scipy.interpolate import PchipInterpolator

    xs = np.asarray(x, dtype=float)
    Fs = np.asarray(cdf, dtype=float)
    if xs.ndim != 1 or xs.shape != Fs.shape or len(xs) < 2:
        raise InvalidDistribution("table needs two equal-length lists with at least 2 points")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(Fs))):
        raise InvalidDistribution("table entries must be finite")
    if np.any(np.diff(xs) <= 0):
        raise InvalidDistribution("table x values must be strictly increasing")
    if np.any(np.diff(Fs) < 0):
        raise InvalidDistribution("table cdf values must be nondecreasing")
    if abs(Fs[0]) > 1e-12 or abs(Fs[-1] - 1.0) > 1e-12:
        raise InvalidDistribution("table cdf must start at 0 and end at 1")
    interp = PchipInterpolator(xs, Fs, extrapolate=False)
    slope = interp.derivative()
    lo, hi = float(xs[0]), float(xs[-1])

    def F(v):
        v = np.asarray(v, dtype=float)
        return np.clip(np.nan_to_num(interp(np.clip(v, lo, hi))), 0.0, 1.0)

    def pdf(v):
        v = np.asarray(v, dtype=float)
        inside = (v >= lo) & (v <= hi)
        return np.where(inside, np.nan_to_num(slope(np.clip(v, lo, hi))), 0.0)

    def quantile(p):
        # bisection on the monotone interpolant
        p = np.asarray(p, dtype=float)
        left = np.full(p.shape, lo)
        right = np.full(p.shape, hi)
        for _ in range(64):
            mid = 0.5 * (left + right)
            below = F(mid) < p
            left = np.where(below, mid, left)
            right = np.where(below, right, mid)
        return 0.5 * (left + right)

    return Distribution(F, Interval(lo, hi), pdf, quantile,
                        sampler=lambda rng, size: quantile(rng.random(size)),
                        label=f"table[{len(xs)}]",
                        breakpoints=tuple(float(v) for v in xs[1:-1]),
                        spec={"kind": "table", "x": xs.tolist(), "cdf": Fs.tolist()})


def from_spec(doc: dict) -> Distribution:
    """Build from ``{"kind": "uniform"|"exponential"|"table", ...}``."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise InvalidDistribution("distribution JSON needs a 'kind' key")
    kind = doc["kind"]
    extra = set(doc) - {"kind"}
    try:
        if kind == "uniform":
            if not extra <= {"a", "b"}:
                raise InvalidDistribution(f"unexpected uniform keys {sorted(extra - {'a', 'b'})}")
            return uniform(doc.get("a", 0.0), doc.get("b", 1.0))
        if kind == "exponential":
            if not extra <= {"lambda"}:
                raise InvalidDistribution(f"unexpected exponential keys {sorted(extra - {'lambda'})}")
            return exponential(doc.get("lambda", 1.0))
        if kind == "table":
            if extra != {"x", "cdf"}:
                raise InvalidDistribution("table needs exactly the keys 'x' and 'cdf'")
            return table(doc["x"], doc["cdf"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidDistribution):
            raise
        raise InvalidDistribution(f"bad {kind} parameters: {exc}") from None
    raise InvalidDistribution(f"unknown distribution kind {kind!r}")


def load_distribution(text: str) -> Distribution:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidDistribution(f"distribution JSON: {exc}") from None
    return from_spec(doc)


_SHORT = {"uniform": "uniform", "u": "uniform", "exp": "exponential", "exponential": "exponential"}


def parse_distribution(text: str) -> Distribution:
    """Flat ``kind:params`` form, e.g. ``uniform:0,1`` or ``exp:2``."""
    kind, _, params = text.strip().partition(":")
    kind = _SHORT.get(kind.strip().lower())
    if kind is None:
        raise InvalidDistribution(f"unknown distribution {text!r}; use uniform:a,b or exp:rate")
    try:
        values = [float(p) for p in params.split(",")] if params.strip() else []
    except ValueError:
        raise InvalidDistribution(f"non-numeric parameter in {text!r}") from None
    if kind == "uniform":
        if len(values) not in (0, 2):
            raise InvalidDistribution("uniform takes two parameters, a and b")
        return uniform(*values)
    if len(values) > 1:
        raise InvalidDistribution("exp takes one parameter, the rate")
    return exponential(*values)


# ---------------------------------------------------------------------------
# charts: a bounded coordinate t with x(t), dF = w(t) dt and F(x(t))


@dataclass(frozen=True)
class _Chart:
    domain: Interval
    x: Callable
    weight: Callable
    F: Callable
    breakpoints: tuple


def _chart(dist: Distribution) -> _Chart:
    if dist.pdf is not None:
        if not dist.support.unbounded:
            return _Chart(dist.support, lambda t: t, dist.pdf, dist.cdf, dist.breakpoints)
        mapped, phi, dphi = transform_unbounded(dist.support)
        inv = _inverse_map(dist.support, "rational")
        cuts = tuple(float(inv(p)) for p in dist.breakpoints)
        return _Chart(mapped, phi, lambda t: dist.pdf(phi(t)) * dphi(t),
                      lambda t: dist.cdf(phi(t)), cuts)
    if dist.quantile is not None:
        return _Chart(Interval(0.0, 1.0), dist.quantile, np.ones_like, lambda t: np.asarray(t, dtype=float), ())
    raise NoIntegrationPath(f"{dist.label or 'distribution'} has neither pdf nor quantile")


def _check_n(n: int):
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ProbabilityError(f"n must be an integer >= 2, got {n!r}")


def _finite(vals, where: str):
    if not np.all(np.isfinite(vals)):
        raise NonFiniteEvaluation(f"functional returned a non-finite value {where}")
    return vals


def _iid_density(g, chart: _Chart, n: int):
    """Integrand in chart coordinates ``(s, t)``, ``s < t``; ``g=None`` gives the bare density."""
    scale = n * (n - 1)

    def h(s, t):
        s = np.asarray(s, dtype=float)
        u, v = chart.x(s), float(chart.x(t))
        gap = np.maximum(chart.F(t) - chart.F(s), 0.0)
        dens = scale * power(gap, n - 2) * chart.weight(s) * float(chart.weight(t))
        if g is None:
            return dens
        vals = np.broadcast_to(np.asarray(g(u, v), dtype=float), s.shape)
        return _finite(np.where(dens == 0, 0.0, vals * dens), f"near (u, v) = ({float(u.flat[0])!r}, {v!r})")

    return h


def expect_minmax_iid(g, F: Distribution, n: int, tol: Tolerance | None = None, *,
                      strict: bool = False) -> QuadResult:
    """``E[g(min X_i, max X_i)]`` for ``n`` iid draws from ``F``."""
    _check_n(n)
    chart = _chart(F)
    lo = chart.domain.lower
    return integrate_nested(_iid_density(g, chart, n), chart.domain, lambda t: (lo, t), tol,
                            vectorized=True, outer_breakpoints=chart.breakpoints,
                            inner_breakpoints=chart.breakpoints, strict=strict)


def _hetero_pdf(g, dists, tol, strict):
    lower = min(d.support.lower for d in dists)
    upper = max(d.support.upper for d in dists)
    union = Interval(lower, upper)
    cuts = {p for d in dists for p in (d.support.lower, d.support.upper, *d.breakpoints)
            if lower < p < upper}
    if union.unbounded:
        mapped, phi, dphi = transform_unbounded(union)
        inv = _inverse_map(union, "rational")
        cuts = {float(inv(p)) for p in cuts}
    else:
        mapped, phi, dphi = union, (lambda t: np.asarray(t, dtype=float)), np.ones_like
    n = len(dists)
    pairs = [(j, k) for j in range(n) for k in range(n) if j != k]

    def h(s, t):
        s = np.asarray(s, dtype=float)
        u, v = phi(s), float(phi(t))
        jac = dphi(s) * float(dphi(t))
        Fu = [np.asarray(d.cdf(u), dtype=float) for d in dists]
        Fv = [float(d.cdf(v)) for d in dists]
        fu = [np.asarray(d.pdf(u), dtype=float) for d in dists]
        fv = [float(d.pdf(v)) for d in dists]
        weight = np.zeros(s.shape)
        for j, k in pairs:
            term = fu[j] * fv[k]
            for i in range(n):
                if i != j and i != k:
                    term = term * np.maximum(Fv[i] - Fu[i], 0.0)
            weight = weight + term
        weight = weight * jac
        vals = np.broadcast_to(np.asarray(g(u, v), dtype=float), s.shape)
        return _finite(np.where(weight == 0, 0.0, vals * weight), f"near v = {v!r}")

    lo = mapped.lower
    return integrate_nested(h, mapped, lambda t: (lo, t), tol, vectorized=True,
                            outer_breakpoints=sorted(cuts), inner_breakpoints=sorted(cuts),
                            strict=strict)


def _hetero_quantile(g, dists, tol, strict):
    n = len(dists)
    parts = []
    for j, k in itertools.permutations(range(n), 2):
        Qj, Qk, Fj = dists[j].quantile, dists[k].quantile, dists[j].cdf
        others = [dists[i] for i in range(n) if i not in (j, k)]

        def h(p, q, Qj=Qj, Qk=Qk, others=others):
            u, v = Qj(np.asarray(p, dtype=float)), float(Qk(q))
            weight = np.ones(np.shape(p))
            for d in others:
                weight = weight * np.maximum(float(d.cdf(v)) - d.cdf(u), 0.0)
            vals = np.broadcast_to(np.asarray(g(u, v), dtype=float), weight.shape)
            return _finite(np.where(weight == 0, 0.0, vals * weight), f"near v = {v!r}")

        parts.append(integrate_nested(h, (0.0, 1.0), lambda q, Qk=Qk, Fj=Fj: (0.0, float(Fj(Qk(q)))),
                                      tol, vectorized=True, strict=strict))
    return QuadResult(math.fsum(r.value for r in parts), math.fsum(r.abs_error for r in parts),
                      sum(r.evaluations for r in parts), all(r.converged for r in parts))


def expect_minmax_hetero(g, dists: Sequence[Distribution], tol: Tolerance | None = None, *,
                         strict: bool = False) -> QuadResult:
    """``E[g(min X_i, max X_i)]`` for independent ``X_i ~ dists[i]``.

    Uses densities when every distribution has one, else quantiles; the
    quantile path integrates each ordered pair ``(j, k)`` separately.
    """
    dists = list(dists)
    _check_n(len(dists))
    if all(d.pdf is not None for d in dists):
        return _hetero_pdf(g, dists, tol, strict)
    if all(d.quantile is not None for d in dists):
        return _hetero_quantile(g, dists, tol, strict)
    raise NoIntegrationPath("heterogeneous expectation needs a pdf for every variable, or a quantile for every one")


# ---------------------------------------------------------------------------
# distribution function of Y_g


def _roots(fun, lo: float, hi: float, count: int):
    """Sign changes of ``fun`` on a scan of ``[lo, hi]``, refined by bisection."""
    grid = np.linspace(lo, hi, count + 1)
    grid[0] = lo + 1e-9 * (hi - lo)
    grid[-1] = hi - 1e-9 * (hi - lo)
    vals = fun(grid)
    flips = np.nonzero(np.signbit(vals[:-1]) != np.signbit(vals[1:]))[0]
    found = []
    for i in flips:
        a, b = grid[i], grid[i + 1]
        sa = np.signbit(vals[i])
        while True:  # down to adjacent floats
            m = 0.5 * (a + b)
            if not a < m < b:
                break
            if np.signbit(fun(np.array([m]))[0]) == sa:
                a = m
            else:
                b = m
        found.append(0.5 * (a + b))
    return found


def cdf_of_functional(g, F: Distribution, n: int, z: float, tol: Tolerance | None = None, *,
                      strict: bool = False) -> QuadResult:
    """``P[g(min X_i, max X_i) <= z]`` for ``n`` iid draws from ``F``.

    For each outer slice the cut ``g = z`` is located by scanning the inner
    variable and bisecting each sign change to full precision; the inner integral is
    split there.  One crossing per slice covers any ``g`` monotone in the
    minimum; more than one triggers a :class:`ReducedAccuracy` warning.
    """
    _check_n(n)
    tol = tol or DEFAULT_TOLERANCE
    z = float(z)
    chart = _chart(F)
    h = _iid_density(None, chart, n)
    c, d = chart.domain
    inner_tol = tol.tightened(10.0)
    multi = [0]
    counts = [0]

    def excess(s, t):
        u = chart.x(np.asarray(s, dtype=float))
        return np.broadcast_to(np.asarray(g(u, float(chart.x(t))), dtype=float), np.shape(s)) - z

    def inner(t: float):
        if not c < t:
            return 0.0, 0.0
        cuts = _roots(lambda s: excess(s, t), c, t, CROSSING_SCAN)
        if len(cuts) > 1:
            multi[0] += 1
        edges = [c, *[p for p in cuts if c < p < t], t]
        value = error = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            if not a < b:
                continue
            if excess(np.array([0.5 * (a + b)]), t)[0] > 0:
                continue
            res = adaptive(lambda s: h(s, t), a, b, inner_tol, chart.breakpoints)
            counts[0] += res.evaluations
            value += res.value
            error += res.abs_error
        return value, error

    def outer_fv(ts):
        vals = np.empty(ts.shape)
        errs = np.empty(ts.shape)
        for i, t in enumerate(ts):
            vals[i], errs[i] = inner(float(t))
        return vals, errs

    # slices where the cut enters or leaves (diagonal u = v, or lower edge)
    near_lo = c + 1e-9 * (d - c)
    diag = _roots(lambda t: np.array([excess(np.array([ti * (1 - 1e-12)]), ti)[0] for ti in t]), c, d, 256)
    edge = _roots(lambda t: np.array([excess(np.array([near_lo]), ti)[0] for ti in t]), c, d, 256)
    res = adaptive(outer_fv, c, d, tol, (*chart.breakpoints, *diag, *edge), with_errors=True)
    res = QuadResult(min(max(res.value, 0.0), 1.0), res.abs_error, counts[0] + res.evaluations,
                     res.converged)
    if multi[0]:
        warnings.warn(f"g - z changes sign more than once on {multi[0]} slice(s); "
                      "the cut is resolved on a scan and accuracy may be reduced",
                      ReducedAccuracy, stacklevel=2)
    return _finish(res, strict, "cdf_of_functional")


# ---------------------------------------------------------------------------
# worked cases


def _warn_if_unbounded_tail(g, lam: float):
    u0 = np.array([0.0])
    try:
        with np.errstate(all="ignore"):
            near = np.abs(np.asarray(g(u0, 1e3 / lam), dtype=float))
            far = np.abs(np.asarray(g(u0, 1e6 / lam), dtype=float))
    except (ArithmeticError, ValueError):
        return
    if not np.all(np.isfinite(far)) or np.any(far > 10.0 * np.maximum(near, 1.0)):
        warnings.warn("g grows without bound as the maximum goes to infinity; "
                      "the substituted integrand is singular on the diagonal",
                      SingularKernel, stacklevel=3)


def expect_minmax_exponential(g, rate: float, n: int, tol: Tolerance | None = None, *,
                              strict: bool = False) -> QuadResult:
    """``E[g(min, max)]`` for ``n`` iid exponential(``rate``) variables.

    Substitutes ``x = exp(-rate * min)`` and ``y = F(max) - F(min)``, which
    maps the problem onto the triangle ``0 < y < x < 1`` with polynomial
    weight ``y^(n-2)``; no infinite-interval transform is needed.
    """
    _check_n(n)
    lam = float(rate)
    if not (math.isfinite(lam) and lam > 0):
        raise ProbabilityError(f"rate must be positive, got {rate!r}")
    _warn_if_unbounded_tail(g, lam)
    scale = n * (n - 1)

    def h(y, x):
        y = np.asarray(y, dtype=float)
        u = -math.log(x) / lam
        v = u - np.log1p(-y / x) / lam
        vals = np.broadcast_to(np.asarray(g(np.full(y.shape, u), v), dtype=float), y.shape)
        return _finite(scale * power(y, n - 2) * vals, f"at min {u!r}")

    return integrate_nested(h, (0.0, 1.0), lambda x: (0.0, x), tol, vectorized=True, strict=strict)


def relative_range_moment(n: int, r: int) -> Fraction:
    """Raw moment ``E[Y^r]`` of ``Y = (max - min) / max`` for iid uniform(0, 1)."""
    _check_n(n)
    if not isinstance(r, (int, np.integer)) or r < 0:
        raise ProbabilityError(f"r must be a nonnegative integer, got {r!r}")
    return Fraction(n - 1, n + r - 1)


def relative_range_cdf(n: int, z: float) -> float:
    _check_n(n)
    if z <= 0:
        return 0.0
    if z >= 1:
        return 1.0
    return float(z) ** (n - 1)


def relative_range(u, v):
    return (v - u) / v
