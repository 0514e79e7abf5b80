"""Integrand corpus shared by the oracle sweep and the CLI tests.

Each cube case pairs a reduced computation with the plain function of the
point ``f(x, min, max)`` that the oracle integrates over the cube.  Each
expectation case pairs a Stieltjes computation with the sampling oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from minmaxquad import aggregation as agg
from minmaxquad import probability as prob
from minmaxquad import reduction as red


@dataclass(frozen=True)
class CubeCase:
    name: str
    n: int
    domain: tuple
    reduced: Callable  # () -> QuadResult
    point: Callable  # (x, lo, hi) -> values
    grid_points: int = 16  # per axis for the tensor oracle


@dataclass(frozen=True)
class ExpectCase:
    name: str
    reduced: Callable
    g: Callable
    dists: tuple


def _full(ev, n, domain, strategy=None):
    return lambda: red.integrate_minmax_full(red.SymmetricFullIntegrand(ev, n), domain,
                                             strategy=strategy or red.TensorGrid())


def _middle(x):
    return np.sort(x, axis=1)[:, 1:-1]


def _orness_case(F, domain=(0.0, 1.0), grid=16, name=None):
    n = F.n
    a, b = domain

    def run():
        return agg.orness_average_numeric(F, domain).scaled((b - a) ** n)

    return CubeCase(name or f"orness kernel of {F.label}, n={n}", n, domain, run,
                    lambda x, lo, hi: (F.eval(x) - lo) / (hi - lo), grid)


def _set_function(n, seed):
    rng = np.random.default_rng(seed)
    full = (1 << n) - 1
    cap = {0: 0.0}
    for m in sorted(range(1, full), key=lambda m: bin(m).count("1")):
        below = max(cap[m & ~(1 << i)] for i in range(n) if m >> i & 1)
        cap[m] = below + (1 - below) * 0.5 * rng.random()
    cap[full] = 1.0
    return agg.SetFunction.from_capacity(n, cap)


def cube_cases() -> list[CubeCase]:
    cases = []
    # pair path
    for n, dom in ((2, (0.0, 1.0)), (3, (-1.0, 3.0)), (5, (0.0, 1.0))):
        cases.append(CubeCase(f"range, n={n} on {dom}", n, dom,
                              lambda n=n, dom=dom: red.integrate_minmax_pair(lambda u, v: v - u, n, dom),
                              lambda x, lo, hi: hi - lo))
    cases.append(CubeCase("exp(u) v^2, n=3", 3, (0.0, 1.0),
                          lambda: red.integrate_minmax_pair(lambda u, v: np.exp(u) * v * v, 3, (0.0, 1.0)),
                          lambda x, lo, hi: np.exp(lo) * hi * hi))
    cases.append(CubeCase("sqrt(v-u), n=4", 4, (0.0, 2.0),
                          lambda: red.integrate_minmax_pair(lambda u, v: np.sqrt(v - u), 4, (0.0, 2.0)),
                          lambda x, lo, hi: np.sqrt(hi - lo), 24))
    cases.append(CubeCase("cos(u) v, n=6", 6, (0.0, 1.0),
                          lambda: red.integrate_minmax_pair(lambda u, v: np.cos(u) * v, 6, (0.0, 1.0)),
                          lambda x, lo, hi: np.cos(lo) * hi))
    cases.append(CubeCase("constant 1, n=5", 5, (0.0, 1.0),
                          lambda: red.integrate_minmax_pair(lambda u, v: np.ones_like(u), 5, (0.0, 1.0)),
                          lambda x, lo, hi: np.ones_like(lo)))
    # symmetric full path
    for n, dom in ((2, (0.0, 1.0)), (3, (0.0, 1.0)), (4, (-1.0, 3.0)), (5, (0.0, 1.0))):
        cases.append(CubeCase(f"variance/range, n={n} on {dom}", n, dom,
                              lambda n=n, dom=dom: red.integrate_minmax_full(red.variance_range_integrand(n), dom),
                              lambda x, lo, hi: red.sample_variance(x) / (hi - lo), 24))
    cases.append(CubeCase("(x1 + x2) (v - u) e^u, n=4", 4, (0.0, 1.0),
                          _full(lambda free, u, v: free.sum(axis=1) * (v - u) * np.exp(u), 4, (0.0, 1.0)),
                          lambda x, lo, hi: _middle(x).sum(axis=1) * (hi - lo) * np.exp(lo)))
    # orness kernels (closed free integral, grid, general non-symmetric)
    cases.append(_orness_case(agg.geometric_mean(2), grid=128))
    cases.append(_orness_case(agg.geometric_mean(3), grid=96))
    cases.append(_orness_case(agg.arithmetic_mean(4), domain=(2.0, 5.0)))
    cases.append(_orness_case(agg.choquet(_set_function(3, 7)), name="orness kernel of a Choquet integral, n=3"))
    cases.append(_orness_case(agg.choquet(_set_function(4, 11)), name="orness kernel of a Choquet integral, n=4"))
    # min / max paths
    cases.append(CubeCase("e^-u prod(1 + x_free) over the min region, n=3", 3, (0.0, 1.0),
                          lambda: red.integrate_min(red.MinIntegrand(
                              lambda free, u: np.exp(-u) * np.prod(1 + free, axis=1), 3, True), (0.0, 1.0)),
                          lambda x, lo, hi: np.exp(-lo) * np.prod(1 + x, axis=1) / (1 + lo)))
    cases.append(CubeCase("v^2 mean(x_free) over the max region, n=4", 4, (0.0, 1.0),
                          lambda: red.integrate_max(red.MaxIntegrand(
                              lambda free, v: v * v * free.mean(axis=1), 4, True), (0.0, 1.0)),
                          lambda x, lo, hi: hi * hi * (x.sum(axis=1) - hi) / 3))
    cases.append(CubeCase("x_1 + 2 x_2 + u, non-symmetric min terms, n=3", 3, (0.0, 1.0),
                          lambda: red.integrate_min(red.MinIntegrand.from_point(
                              lambda x, u: x[:, 0] + 2 * x[:, 1] + u, 3), (0.0, 1.0)),
                          lambda x, lo, hi: x[:, 0] + 2 * x[:, 1] + lo))
    cases.append(CubeCase("product / min (idempotency kernel), n=3", 3, (0.0, 1.0),
                          lambda: red.integrate_min(red.MinIntegrand.from_point(
                              lambda x, u: np.prod(x, axis=1) / u, 3, True), (0.0, 1.0)),
                          lambda x, lo, hi: np.prod(x, axis=1) / lo))
    cases.append(CubeCase("u^2 for the min of the first two of four coordinates", 4, (0.0, 1.0),
                          lambda: red.min_subset_integral(lambda u: u * u, 4, 2, (0.0, 1.0)),
                          lambda x, lo, hi: x[:, :2].min(axis=1) ** 2))
    cases.append(CubeCase("x_1 (v - u) through the general path, n=3", 3, (0.0, 1.0),
                          lambda: red.integrate_minmax_general(red.GeneralFullIntegrand.from_point(
                              lambda x, u, v: x[:, 0] * (v - u), 3), (0.0, 1.0)),
                          lambda x, lo, hi: x[:, 0] * (hi - lo)))
    return cases


def expect_cases() -> list[ExpectCase]:
    U = prob.uniform(0.0, 1.0)
    E1, E2 = prob.exponential(1.0), prob.exponential(2.0)
    T = prob.table([0.0, 1.0, 2.0, 3.0], [0.0, 0.2, 0.7, 1.0])
    cases = [
        ExpectCase("range of 3 uniforms", lambda: prob.expect_minmax_iid(lambda u, v: v - u, U, 3),
                   lambda u, v: v - u, (U,) * 3),
        ExpectCase("max of 3 exponential(2)", lambda: prob.expect_minmax_iid(lambda u, v: v + 0 * u, E2, 3),
                   lambda u, v: v, (E2,) * 3),
        ExpectCase("|X1 - X2|, uniform(0,1) and uniform(0,2)",
                   lambda: prob.expect_minmax_hetero(lambda u, v: v - u, [U, prob.uniform(0, 2)]),
                   lambda u, v: v - u, (U, prob.uniform(0, 2))),
        ExpectCase("min * max, mixed three",
                   lambda: prob.expect_minmax_hetero(lambda u, v: u * v, [U, E1, prob.uniform(0, 2)]),
                   lambda u, v: u * v, (U, E1, prob.uniform(0, 2))),
        ExpectCase("range of 3 draws from a table cdf", lambda: prob.expect_minmax_iid(lambda u, v: v - u, T, 3),
                   lambda u, v: v - u, (T,) * 3),
        ExpectCase("u + v, two exponential(0.5), substitution path",
                   lambda: prob.expect_minmax_exponential(lambda u, v: u + v, 0.5, 2),
                   lambda u, v: u + v, (prob.exponential(0.5),) * 2),
        ExpectCase("relative range squared, 4 uniforms",
                   lambda: prob.expect_minmax_iid(lambda u, v: ((v - u) / v) ** 2, U, 4),
                   lambda u, v: ((v - u) / v) ** 2, (U,) * 4),
    ]
    return cases
