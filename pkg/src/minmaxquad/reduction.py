"""Reduce integrals over a cube that depend on min/max of the coordinates.

The cube ``(a, b)^n`` splits into the regions where a fixed coordinate is
the smallest (or largest).  On each region the minimum becomes a single
variable ``u`` (the maximum ``v``), so an ``n``-dimensional integral
becomes an outer 1-D or triangular integral over ``u`` (and ``v``) of an
inner integral over the remaining coordinates, which live in ``(u, b)``,
``(a, v)`` or ``(u, v)``.

Integrand callables are batched: they receive numpy arrays with a leading
batch axis (``free`` has shape ``(N, m)``, ``u`` and ``v`` shape ``(N,)``)
and return an array of shape ``(N,)``.  Coordinate indices ``j``, ``k`` are
0-based.

The inner integral is done by one of three explicit strategies:

* :class:`ClosedKernel` - the caller already knows it in closed form;
* :class:`TensorGrid` - a deterministic product Gauss rule on each ordered
  simplex of the inner box (at most 4 inner dimensions);
* :class:`MonteCarlo` - common-random-number sampling; results are flagged
  ``stochastic``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from .quadrature import (
    DEFAULT_TOLERANCE,
    Interval,
    QuadResult,
    Tolerance,
    ToleranceWarning,
    _finish,
    as_interval,
    integrate_1d,
    integrate_triangle,
)

MAX_N = 64
MAX_GRID_DIM = 4


class ReductionError(ValueError):
    pass


class DomainUnbounded(ReductionError):
    pass


class StrategyUnavailable(ReductionError):
    pass


class SymmetryError(ReductionError):
    """An integrand declared symmetric changed value under a permutation."""


# ---------------------------------------------------------------------------
# integrand and strategy types


@dataclass(frozen=True)
class MinIntegrand:
    """``f(x, min x_i)``.

    With ``symmetric=True`` ``eval(free, u)`` is called; otherwise
    ``eval(j, free, u)`` where ``free`` holds the coordinates other than
    ``j`` in ascending index order.
    """

    eval: Callable
    n: int
    symmetric: bool = False

    @classmethod
    def from_point(cls, fn, n: int, symmetric: bool = False):
        """Build from ``fn(x, u)`` taking the full ``(N, n)`` point."""
        if symmetric:
            def ev(free, u):
                return fn(np.concatenate([free, u[:, None]], axis=1), u)
        else:
            def ev(j, free, u):
                return fn(insert_columns(free, {j: u}), u)
        return cls(ev, n, symmetric)


@dataclass(frozen=True)
class MaxIntegrand(MinIntegrand):
    """``f(x, max x_i)``; same calling convention as :class:`MinIntegrand`."""


@dataclass(frozen=True)
class SymmetricFullIntegrand:
    """``f(x, min, max)`` symmetric in ``x``: called as ``eval(free, u, v)``."""

    eval: Callable
    n: int

    @classmethod
    def from_point(cls, fn, n: int):
        def ev(free, u, v):
            return fn(np.concatenate([free, u[:, None], v[:, None]], axis=1), u, v)
        return cls(ev, n)


@dataclass(frozen=True)
class GeneralFullIntegrand:
    """``f(x, min, max)`` in general: called as ``eval(j, k, free, u, v)``.

    ``j`` is the index carrying the minimum, ``k`` the maximum.
    """

    eval: Callable
    n: int

    @classmethod
    def from_point(cls, fn, n: int):
        def ev(j, k, free, u, v):
            return fn(insert_columns(free, {j: u, k: v}), u, v)
        return cls(ev, n)


@dataclass(frozen=True)
class ClosedKernel:
    """Inner integral supplied in closed form.

    ``kernel`` takes the integrand's arguments minus ``free``: ``(u)`` or
    ``(u, v)`` for symmetric integrands, ``(j, u)`` or ``(j, k, u, v)``
    otherwise.  It returns the integral over the free coordinates of a
    single region.
    """

    kernel: Callable


@dataclass(frozen=True)
class TensorGrid:
    points: int = 10

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("TensorGrid needs at least 2 points per axis")


@dataclass(frozen=True)
class MonteCarlo:
    samples: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.samples < 2:
            raise ValueError("MonteCarlo needs at least 2 samples")


InnerStrategy = Union[ClosedKernel, TensorGrid, MonteCarlo]


# ---------------------------------------------------------------------------
# helpers


def insert_columns(free: np.ndarray, fixed: dict) -> np.ndarray:
    """Rebuild full points from ``free`` columns and ``{index: column}``."""
    free = np.asarray(free, dtype=float)
    rows = free.shape[0]
    n = free.shape[1] + len(fixed)
    out = np.empty((rows, n))
    mask = np.ones(n, dtype=bool)
    for idx, col in fixed.items():
        out[:, idx] = col
        mask[idx] = False
    out[:, mask] = free
    return out


def power(base, exponent: int):
    """``base ** exponent`` for ``base >= 0``, through logs for large exponents."""
    base = np.asarray(base, dtype=float)
    if exponent == 0:
        return np.ones_like(base)
    if exponent <= 8:
        return base ** exponent
    with np.errstate(divide="ignore"):
        return np.exp(exponent * np.log(base))


def _check_n(n: int, least: int):
    if not isinstance(n, (int, np.integer)) or n < least:
        raise ValueError(f"need integer n >= {least}, got {n!r}")
    if n > MAX_N:
        raise ValueError(f"n > {MAX_N} is not supported")


def _bounded(domain) -> Interval:
    domain = as_interval(domain)
    if domain.unbounded:
        raise DomainUnbounded(
            "reduction needs a bounded domain; weight unbounded problems through the probability module")
    return domain


@lru_cache(maxsize=None)
def simplex_rule(m: int, p: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss product rule on ``{0 < y_1 < ... < y_m < 1}``.

    Nodes come back sorted ascending along each row; weights sum to ``1/m!``.
    """
    if m == 0:
        return np.zeros((1, 0)), np.ones(1)
    t, w = np.polynomial.legendre.leggauss(p)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    grids = np.meshgrid(*([t] * m), indexing="ij")
    T = np.stack([g.ravel() for g in grids], axis=1)
    W = np.ones(T.shape[0])
    for i in range(m):
        W = W * w[np.unravel_index(np.arange(T.shape[0]), (p,) * m)[i]]
    Y = np.empty_like(T)
    prev = np.zeros(T.shape[0])
    for i in range(m):
        Y[:, i] = prev + (1.0 - prev) * T[:, i]
        W = W * (1.0 - prev)
        prev = Y[:, i]
    return Y, W


@lru_cache(maxsize=None)
def box_rule(m: int, p: int, symmetric: bool) -> tuple[np.ndarray, np.ndarray]:
    """Rule on the unit box ``(0, 1)^m`` assembled from ordered simplices.

    For a symmetric integrand a single simplex weighted by ``m!`` suffices.
    Splitting along the orderings keeps integrands that kink where two
    coordinates cross (anything built from min/max) smooth on every piece.
    """
    Y, W = simplex_rule(m, p)
    if symmetric or m < 2:
        return Y, W * math.factorial(m)
    perms = list(itertools.permutations(range(m)))
    nodes = np.concatenate([Y[:, list(pm)] for pm in perms], axis=0)
    return nodes, np.tile(W, len(perms))


def _mc_unit(m: int, strategy: MonteCarlo) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(strategy.seed))
    return rng.random((strategy.samples, m))


# ---------------------------------------------------------------------------
# inner integrals
#
# Each builder returns a batched function of the outer variables giving the
# inner integral and, for Monte Carlo, its standard error.


def _inner_integral(call, m: int, lo, hi, strategy, symmetric: bool):
    """Integrate ``call(free)`` over ``(lo, hi)^m`` per batch row.

    ``lo`` and ``hi`` are ``(N,)`` arrays; ``call`` receives ``free`` of
    shape ``(N * G, m)`` plus the row repeat count ``G`` and returns values
    of shape ``(N * G,)``.  Returns ``(value, error)`` arrays: the sampling
    standard error for Monte Carlo, the gap to a coarser rule for a grid.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    N = lo.shape[0]
    span = hi - lo
    if m == 0:
        vals = np.asarray(call(np.zeros((N, 0)), 1), dtype=float)
        return np.broadcast_to(vals, (N,)), np.zeros(N)
    if isinstance(strategy, TensorGrid):
        if m > MAX_GRID_DIM:
            raise StrategyUnavailable(
                f"TensorGrid handles at most {MAX_GRID_DIM} inner dimensions, got {m}")
        Y, W = box_rule(m, strategy.points, symmetric)
        Yc, Wc = box_rule(m, max(2, 2 * strategy.points // 3), symmetric)
        fine = Y.shape[0]
        Y = np.concatenate([Y, Yc], axis=0)
    elif isinstance(strategy, MonteCarlo):
        Y = _mc_unit(m, strategy)
        W = np.full(Y.shape[0], 1.0 / Y.shape[0])
    else:
        raise StrategyUnavailable(f"unsupported inner strategy {strategy!r}")
    G = Y.shape[0]
    free = lo[:, None, None] + span[:, None, None] * Y[None, :, :]
    vals = np.asarray(call(free.reshape(N * G, m), G), dtype=float).reshape(N, G)
    vol = power(span, m)
    if isinstance(strategy, MonteCarlo):
        return vol * (vals @ W), vol * vals.std(axis=1, ddof=1) / math.sqrt(G)
    value = vol * (vals[:, :fine] @ W)
    return value, np.abs(value - vol * (vals[:, fine:] @ Wc))


def _repeat(arr, G):
    return np.repeat(np.asarray(arr, dtype=float), G)


def _min_kernel(f: MinIntegrand, edge: float, strategy, largest: bool):
    """Batched ``u -> sum_j inner_j(u)`` for the min (or max) reduction."""
    n, m = f.n, f.n - 1

    def kernel(u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        lo, hi = (np.full_like(u, edge), u) if largest else (u, np.full_like(u, edge))
        if isinstance(strategy, ClosedKernel):
            if f.symmetric:
                return n * np.asarray(strategy.kernel(u), dtype=float), np.zeros_like(u)
            total = sum(np.asarray(strategy.kernel(j, u), dtype=float) for j in range(n))
            return np.broadcast_to(total, u.shape), np.zeros_like(u)
        if f.symmetric:
            val, se = _inner_integral(lambda free, G: f.eval(free, _repeat(u, G)),
                                      m, lo, hi, strategy, True)
            return n * val, n * se
        val = np.zeros_like(u)
        var = np.zeros_like(u)
        for j in range(n):
            vj, sj = _inner_integral(lambda free, G, j=j: f.eval(j, free, _repeat(u, G)),
                                     m, lo, hi, strategy, False)
            val = val + vj
            var = var + sj
        return val, var

    return kernel


def _pair_kernel(f, strategy, symmetric: bool, pairs=None):
    """Batched ``(u, v) -> sum over (j, k) of the inner integral over (u, v)^(n-2)``."""
    n, m = f.n, f.n - 2
    if pairs is None:
        pairs = [(j, k) for j in range(n) for k in range(n) if j != k]

    def kernel(u, v):
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        u = np.atleast_1d(u).astype(float)
        v = np.atleast_1d(v).astype(float)
        if isinstance(strategy, ClosedKernel):
            if symmetric:
                val = n * (n - 1) * np.asarray(strategy.kernel(u, v), dtype=float)
            else:
                val = sum(np.asarray(strategy.kernel(j, k, u, v), dtype=float) for j, k in pairs)
            return np.broadcast_to(val, u.shape), np.zeros_like(u)
        if symmetric:
            val, se = _inner_integral(
                lambda free, G: f.eval(free, _repeat(u, G), _repeat(v, G)),
                m, u, v, strategy, True)
            return n * (n - 1) * val, n * (n - 1) * se
        val = np.zeros_like(u)
        err = np.zeros_like(u)
        for j, k in pairs:
            vjk, sjk = _inner_integral(
                lambda free, G, j=j, k=k: f.eval(j, k, free, _repeat(u, G), _repeat(v, G)),
                m, u, v, strategy, False)
            val = val + vjk
            err = err + sjk
        return val, err

    return kernel


def _stochastic(strategy) -> bool:
    return isinstance(strategy, MonteCarlo)


def _with_inner_error(result: QuadResult, err_fn, domain: Interval, triangle: bool, strategy,
                      tol: Tolerance) -> QuadResult:
    """Add the integrated per-node inner error to an outer result.

    Monte Carlo errors are statistical and only widen the estimate; a grid
    error above the tolerance target also clears ``converged``.
    """
    # only needs to be good enough to compare against the target; rounding
    # noise from exact grids is not integrable to any tighter tolerance
    loose = Tolerance(rel=0.1, abs=0.1 * tol.target(result.value), max_evaluations=50_000)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ToleranceWarning)
        if triangle:
            extra = integrate_triangle(err_fn, domain, loose, vectorized=True)
        else:
            extra = integrate_1d(err_fn, domain, loose, vectorized=True)
    err = result.abs_error + abs(extra.value) + extra.abs_error
    converged = result.converged
    if isinstance(strategy, TensorGrid) and err > tol.target(result.value):
        converged = False
    out = replace(result, abs_error=err, evaluations=result.evaluations + extra.evaluations,
                  stochastic=_stochastic(strategy), converged=converged)
    if result.converged and not converged:
        _finish(out, False, f"inner grid of {strategy.points} points per axis")
    return out


def _run_1d(kernel, domain, tol, strategy):
    res = integrate_1d(lambda u: kernel(u)[0], domain, tol, vectorized=True)
    if not isinstance(strategy, ClosedKernel):
        res = _with_inner_error(res, lambda u: kernel(u)[1], domain, False, strategy, tol)
    return res


def _run_triangle(kernel, domain, tol, strategy):
    res = integrate_triangle(lambda u, v: kernel(u, v)[0], domain, tol, vectorized=True)
    if not isinstance(strategy, ClosedKernel):
        res = _with_inner_error(res, lambda u, v: kernel(u, v)[1], domain, True, strategy, tol)
    return res


def check_symmetry(f, domain=(0.0, 1.0), points: int = 100, permutations: int = 10,
                   seed: int = 0, atol: float = 1e-12) -> None:
    """Spot-check that a symmetric integrand ignores the order of ``free``.

    Raises :class:`SymmetryError` on a mismatch above ``atol`` (scaled by the
    value's magnitude when that exceeds 1).
    """
    domain = _bounded(domain)
    a, b = domain
    rng = np.random.default_rng(seed)
    full = isinstance(f, SymmetricFullIntegrand)
    m = f.n - 2 if full else f.n - 1
    if m < 2:
        return
    ends = np.sort(rng.uniform(a, b, size=(points, 2)), axis=1)
    u, v = ends[:, 0], ends[:, 1]
    if full:
        lo, hi = u, v
    elif isinstance(f, MaxIntegrand):
        lo, hi = np.full(points, a), v
    else:
        lo, hi = u, np.full(points, b)
    free = lo[:, None] + (hi - lo)[:, None] * rng.random((points, m))

    def call(fr):
        return np.asarray(f.eval(fr, u, v) if full else f.eval(fr, v if isinstance(f, MaxIntegrand) else u),
                          dtype=float)

    ref = call(free)
    for _ in range(permutations):
        got = call(free[:, rng.permutation(m)])
        gap = np.abs(got - ref)
        bound = atol * np.maximum(1.0, np.abs(ref))
        if np.any(gap > bound):
            i = int(np.argmax(gap - bound))
            raise SymmetryError(
                f"integrand declared symmetric differs by {gap[i]:.3g} under a permutation of free coordinates")


# ---------------------------------------------------------------------------
# public reductions


def integrate_minmax_pair(f: Callable, n: int, domain, tol: Tolerance | None = None) -> QuadResult:
    """Integral over ``(a, b)^n`` of ``f(min x_i, max x_i)``.

    Evaluates ``n (n-1) int_a^b dv int_a^v f(u, v) (v-u)^(n-2) du``.
    """
    _check_n(n, 2)
    domain = _bounded(domain)
    tol = tol or DEFAULT_TOLERANCE

    def kernel(u, v):
        return np.asarray(f(u, v), dtype=float) * power(v - u, n - 2)

    res = integrate_triangle(kernel, domain, tol, vectorized=True)
    return res.scaled(n * (n - 1))


def integrate_min(f: MinIntegrand, domain, tol: Tolerance | None = None,
                  strategy: InnerStrategy = TensorGrid()) -> QuadResult:
    """Integral over ``(a, b)^n`` of ``f(x, min x_i)``."""
    _check_n(f.n, 1)
    domain = _bounded(domain)
    if f.symmetric and not isinstance(strategy, ClosedKernel):
        check_symmetry(f, domain)
    kernel = _min_kernel(f, domain.upper, strategy, largest=False)
    return _run_1d(kernel, domain, tol or DEFAULT_TOLERANCE, strategy)


def integrate_max(f: MaxIntegrand, domain, tol: Tolerance | None = None,
                  strategy: InnerStrategy = TensorGrid()) -> QuadResult:
    """Integral over ``(a, b)^n`` of ``f(x, max x_i)``."""
    _check_n(f.n, 1)
    domain = _bounded(domain)
    if f.symmetric and not isinstance(strategy, ClosedKernel):
        check_symmetry(MaxIntegrand(f.eval, f.n, True), domain)
    kernel = _min_kernel(f, domain.lower, strategy, largest=True)
    return _run_1d(kernel, domain, tol or DEFAULT_TOLERANCE, strategy)


def min_polyhedron_terms(f: MinIntegrand, domain, tol: Tolerance | None = None,
                         strategy: InnerStrategy = TensorGrid(), largest: bool = False) -> list[QuadResult]:
    """Per-region integrals: element ``j`` is the integral over the region
    where coordinate ``j`` is the minimum (maximum if ``largest``)."""
    _check_n(f.n, 1)
    domain = _bounded(domain)
    edge = domain.lower if largest else domain.upper
    return [_run_1d(_single_region_kernel(f, j, edge, strategy, largest), domain,
                    tol or DEFAULT_TOLERANCE, strategy)
            for j in range(f.n)]


def _single_region_kernel(f: MinIntegrand, j: int, edge: float, strategy, largest: bool):
    m = f.n - 1

    def call(free, u):
        return f.eval(free, u) if f.symmetric else f.eval(j, free, u)

    def kernel(u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if isinstance(strategy, ClosedKernel):
            k = strategy.kernel(u) if f.symmetric else strategy.kernel(j, u)
            return np.asarray(k, dtype=float) * np.ones_like(u), np.zeros_like(u)
        lo, hi = (np.full_like(u, edge), u) if largest else (u, np.full_like(u, edge))
        return _inner_integral(lambda free, G: call(free, _repeat(u, G)),
                               m, lo, hi, strategy, f.symmetric)

    return kernel


def integrate_minmax_full(f: SymmetricFullIntegrand, domain, tol: Tolerance | None = None,
                          strategy: InnerStrategy = TensorGrid()) -> QuadResult:
    """Integral over ``(a, b)^n`` of a symmetric ``f(x, min, max)``.

    Uses ``n (n-1) int dv int du [inner integral over (u, v)^(n-2)]``.  For
    ``n = 2`` the inner integral is just ``f`` at an empty ``free``.
    """
    _check_n(f.n, 2)
    domain = _bounded(domain)
    if not isinstance(strategy, ClosedKernel):
        check_symmetry(f, domain)
    kernel = _pair_kernel(f, strategy, symmetric=True)
    return _run_triangle(kernel, domain, tol or DEFAULT_TOLERANCE, strategy)


def integrate_minmax_general(f: GeneralFullIntegrand, domain, tol: Tolerance | None = None,
                             strategy: InnerStrategy = TensorGrid()) -> QuadResult:
    """Integral over ``(a, b)^n`` of ``f(x, min, max)`` summed over all
    ordered ``(j, k)`` pairs, ``j != k``, in lexicographic order."""
    _check_n(f.n, 2)
    domain = _bounded(domain)
    kernel = _pair_kernel(f, strategy, symmetric=False)
    return _run_triangle(kernel, domain, tol or DEFAULT_TOLERANCE, strategy)


def pair_term(f: GeneralFullIntegrand, j: int, k: int, domain, tol: Tolerance | None = None,
              strategy: InnerStrategy = TensorGrid()) -> QuadResult:
    """The single ``(j, k)`` term of :func:`integrate_minmax_general`."""
    _check_n(f.n, 2)
    if j == k or not (0 <= j < f.n and 0 <= k < f.n):
        raise ValueError(f"need distinct indices in [0, {f.n}), got ({j}, {k})")
    domain = _bounded(domain)
    kernel = _pair_kernel(f, strategy, symmetric=False, pairs=[(j, k)])
    return _run_triangle(kernel, domain, tol or DEFAULT_TOLERANCE, strategy)


def min_subset_integral(h: Callable, n: int, s: int, domain, tol: Tolerance | None = None) -> QuadResult:
    """Integral over ``(a, b)^n`` of ``h(min_{i in S} x_i)`` with ``|S| = s``.

    Equals ``(b-a)^(n-s) s int_a^b h(u) (b-u)^(s-1) du``.
    """
    _check_n(n, 1)
    if not 1 <= s <= n:
        raise ValueError(f"need 1 <= s <= n, got s={s}, n={n}")
    domain = _bounded(domain)
    a, b = domain

    def integrand(u):
        return np.asarray(h(u), dtype=float) * power(b - u, s - 1)

    res = integrate_1d(integrand, domain, tol or DEFAULT_TOLERANCE, vectorized=True)
    return res.scaled((b - a) ** (n - s) * s)


def sample_variance(x: np.ndarray) -> np.ndarray:
    return np.var(x, axis=-1, ddof=1)


def variance_range_integrand(n: int) -> SymmetricFullIntegrand:
    """``s^2(x) / (max x - min x)`` as a symmetric full integrand."""
    _check_n(n, 2)

    def ev(free, u, v):
        x = np.concatenate([free, u[:, None], v[:, None]], axis=1)
        return sample_variance(x) / (v - u)

    return SymmetricFullIntegrand(ev, n)


def variance_range_average(n: int, domain) -> float:
    """Mean of the variance-to-range ratio over ``[a, b]^n``: ``(n+2)/(12n) (b-a)``."""
    _check_n(n, 2)
    domain = _bounded(domain)
    return (n + 2) / (12 * n) * domain.width
