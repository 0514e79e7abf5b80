import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minmaxquad.quadrature import (
    AlreadyBounded,
    Interval,
    NonFiniteEvaluation,
    QuadResult,
    Tolerance,
    ToleranceNotReached,
    ToleranceWarning,
    combine,
    integrate_1d,
    integrate_nested,
    integrate_triangle,
    transform_unbounded,
)


class TestInterval:
    def test_rejects_empty_or_reversed(self):
        with pytest.raises(ValueError):
            Interval(1.0, 1.0)
        with pytest.raises(ValueError):
            Interval(2.0, 1.0)

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            Interval(float("nan"), 1.0)

    def test_unbounded_and_width(self):
        assert Interval(0, math.inf).unbounded
        assert not Interval(-1, 3).unbounded
        assert Interval(-1, 3).width == 4
        a, b = Interval(-1, 3)
        assert (a, b) == (-1, 3)


class TestTolerance:
    def test_defaults(self):
        tol = Tolerance()
        assert tol.rel == 1e-10 and tol.abs == 1e-12

    def test_invalid(self):
        with pytest.raises(ValueError):
            Tolerance(rel=-1.0)
        with pytest.raises(ValueError):
            Tolerance(max_evaluations=0)

    def test_target_is_mixed(self):
        tol = Tolerance(rel=1e-6, abs=1e-3)
        assert tol.target(1.0) == 1e-3
        assert tol.target(1e6) == pytest.approx(1.0)


class TestIntegrate1d:
    def test_linear(self):
        res = integrate_1d(lambda x: x, (0, 1))
        assert res.value == pytest.approx(0.5, abs=1e-15)
        assert res.converged and res.evaluations > 0

    def test_vectorized_matches_scalar(self):
        a = integrate_1d(math.sin, (0, math.pi))
        b = integrate_1d(np.sin, (0, math.pi), vectorized=True)
        assert a.value == pytest.approx(2.0, abs=1e-13)
        assert a.value == b.value

    def test_half_line(self):
        res = integrate_1d(lambda x: math.exp(-x), (0, math.inf))
        assert res.value == pytest.approx(1.0, abs=1e-11)

    def test_left_half_line(self):
        res = integrate_1d(np.exp, (-math.inf, 0), vectorized=True)
        assert res.value == pytest.approx(1.0, abs=1e-11)

    def test_whole_line_gaussian(self):
        res = integrate_1d(lambda x: np.exp(-x * x), (-math.inf, math.inf), vectorized=True)
        assert res.value == pytest.approx(math.sqrt(math.pi), abs=1e-10)

    def test_exponential_map(self):
        res = integrate_1d(lambda x: np.exp(-x), (0, math.inf), vectorized=True, method="exponential")
        assert res.value == pytest.approx(1.0, abs=1e-11)

    def test_breakpoint_kink(self):
        res = integrate_1d(lambda x: np.abs(x - 0.3), (0, 1), vectorized=True, breakpoints=[0.3])
        assert res.value == pytest.approx((0.3 ** 2 + 0.7 ** 2) / 2, abs=1e-15)
        assert res.evaluations == 42

    def test_endpoint_singularity(self):
        res = integrate_1d(lambda x: 1 / np.sqrt(x), (0, 1), vectorized=True)
        assert res.value == pytest.approx(2.0, abs=1e-9)

    def test_nonfinite_raises(self):
        with pytest.raises(NonFiniteEvaluation):
            integrate_1d(lambda x: np.full_like(x, np.nan), (0, 1), vectorized=True)

    def test_budget_exhaustion_warns_and_returns_best(self):
        tol = Tolerance(rel=1e-15, abs=1e-300, max_evaluations=100)
        with pytest.warns(ToleranceWarning):
            res = integrate_1d(lambda x: np.sin(1 / x), (1e-3, 1), tol, vectorized=True)
        assert not res.converged
        assert res.evaluations <= 100
        assert math.isfinite(res.value)

    def test_strict_raises_with_result(self):
        tol = Tolerance(rel=1e-15, abs=1e-300, max_evaluations=100)
        with pytest.raises(ToleranceNotReached) as info:
            integrate_1d(lambda x: np.sin(1 / x), (1e-3, 1), tol, vectorized=True, strict=True)
        assert isinstance(info.value.result, QuadResult)

    def test_deterministic(self):
        f = lambda x: np.exp(np.sin(7 * x))
        r1 = integrate_1d(f, (0, 3), vectorized=True)
        r2 = integrate_1d(f, (0, 3), vectorized=True)
        assert r1 == r2

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=1, max_size=16),
           st.floats(-3, 3), st.floats(0.1, 4))
    def test_polynomials_exact(self, coeffs, a, w):
        b = a + w
        p = np.polynomial.Polynomial(coeffs)
        exact = p.integ()(b) - p.integ()(a)
        res = integrate_1d(p, (a, b), vectorized=True)
        scale = sum(abs(c) for c in coeffs) * max(1.0, abs(a), abs(b)) ** len(coeffs) * w
        assert abs(res.value - exact) <= 1e-12 * scale


class TestTransform:
    def test_already_bounded(self):
        with pytest.raises(AlreadyBounded):
            transform_unbounded((0, 1))

    @pytest.mark.parametrize("domain", [(0, math.inf), (-math.inf, 2), (-math.inf, math.inf)])
    @pytest.mark.parametrize("method", ["rational", "exponential"])
    def test_jacobian_matches_derivative(self, domain, method):
        mapped, phi, dphi = transform_unbounded(domain, method)
        lo, hi = mapped
        t = np.linspace(lo, hi, 13)[3:-3]
        h = 1e-6
        numeric = (phi(t + h) - phi(t - h)) / (2 * h)
        np.testing.assert_allclose(dphi(t), numeric, rtol=1e-6)
        x = phi(t)
        assert np.all(np.diff(x) > 0)
        assert np.all((x > domain[0]) & (x < domain[1]))

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            transform_unbounded((0, math.inf), "bogus")


class Test2d:
    def test_triangle_log4(self):
        # 2 * int_{0<u<v<1} sqrt(u v) - u / (v - u) == ln 4 - 1
        res = integrate_triangle(lambda u, v: 2 * (np.sqrt(u * v) - u) / (v - u), (0, 1), vectorized=True)
        assert res.value == pytest.approx(math.log(4) - 1, abs=1e-11)

    def test_triangle_area(self):
        res = integrate_triangle(lambda u, v: np.ones_like(u), (-1, 3), vectorized=True)
        assert res.value == pytest.approx(8.0, abs=1e-12)

    def test_nested_unbounded_outer(self):
        # int_0^inf e^-v int_0^v du dv = 1
        res = integrate_nested(lambda u, v: np.exp(-v) * np.ones_like(u), (0, math.inf),
                               lambda v: (0.0, v), vectorized=True)
        assert res.value == pytest.approx(1.0, abs=1e-10)

    def test_nested_empty_inner(self):
        res = integrate_nested(lambda u, v: np.ones_like(u), (0, 1), lambda v: (v, v), vectorized=True)
        assert res.value == 0.0

    def test_nested_scalar_callback(self):
        res = integrate_nested(lambda u, v: u * v, (0, 1), lambda v: (0.0, v))
        assert res.value == pytest.approx(1 / 8, abs=1e-14)


def test_combine_weights():
    a = QuadResult(1.0, 1e-10, 21)
    b = QuadResult(2.0, 2e-10, 42, converged=False)
    c = combine([a, b], [2.0, -1.0])
    assert c.value == 0.0
    assert c.abs_error == pytest.approx(4e-10)
    assert c.evaluations == 63 and not c.converged
