import math

import numpy as np
import numpy.testing as npt
import pytest

from periodic_hyperbolic.characteristics import (
    characteristic_derivatives,
    march,
    quadrature_weights,
    trace,
    weights,
)
from periodic_hyperbolic.errors import BadParameters, StepCountExceeded
from periodic_hyperbolic.problem import FixedData, HyperbolicProblem

EXACT_TOL = 1e-12
RK4_TOL = 1e-8
FD_TOL = 1e-6


@pytest.fixture
def constant_problem():
    return HyperbolicProblem.build(a=[2.0], b=[[0.6]], boundary=FixedData(1), m=1)


@pytest.fixture
def oscillating_problem():
    """Scalar speed a = 1 + sin(t)/2; the characteristics satisfy
    xi - x = (omega - t) - (cos(omega) - cos(t))/2."""
    return HyperbolicProblem.build(a=["1 + 0.5*sin(t)"], boundary=FixedData(1), m=1)


@pytest.mark.parametrize("intervals", [2, 3, 4, 5, 8, 9])
def test_simpson_weights_integrate_cubics_exactly(intervals):
    nodes = np.linspace(0.0, 1.0, intervals + 1)
    h = 1.0 / intervals
    w = quadrature_weights(intervals)
    assert h * np.dot(w, nodes**3) == pytest.approx(0.25, abs=EXACT_TOL)
    assert h * np.sum(w) == pytest.approx(1.0, abs=EXACT_TOL)


def test_degenerate_and_trapezoid_weights():
    npt.assert_array_equal(quadrature_weights(0), [0.0])
    npt.assert_array_equal(quadrature_weights(1), [0.5, 0.5])
    npt.assert_array_equal(quadrature_weights(3, "trapezoid"), [0.5, 1.0, 1.0, 0.5])
    with pytest.raises(ValueError):
        quadrature_weights(4, "gauss")


def test_constant_speed_characteristic_is_a_line(constant_problem):
    path = trace(constant_problem, 0, 0.8, 1.0, 0.0, n_char=16)
    npt.assert_allclose(path.omega, 1.0 + (path.xi - 0.8) / 2.0, atol=EXACT_TOL)
    assert path.xi[0] == 0.8 and path.xi[-1] == 0.0
    assert path.xi.size - 1 == math.ceil(0.8 * 16)
    assert list(path.to_frame().columns) == ["xi", "omega"]


def test_zero_length_trace(constant_problem):
    path = trace(constant_problem, 0, 0.3, 2.0, 0.3)
    assert path.terminal == 2.0
    assert weights(constant_problem, 0, 0.3, 0.3, 2.0).c == 1.0


def test_oscillating_speed_satisfies_the_implicit_relation(oscillating_problem):
    for x, t, xi in [(0.0, 0.0, 1.0), (1.0, 2.0, 0.0), (0.3, 5.0, 0.9)]:
        omega = trace(oscillating_problem, 0, x, t, xi).terminal
        relation = (omega - t) - 0.5 * (math.cos(omega) - math.cos(t))
        assert relation == pytest.approx(xi - x, abs=RK4_TOL)


def test_weights_of_constant_coefficients(constant_problem):
    pair = weights(constant_problem, 0, 0.0, 0.8, 1.0)
    assert pair.c == pytest.approx(math.exp(-0.3 * 0.8), rel=1e-12)
    assert pair.d == pytest.approx(pair.c / 2.0, rel=1e-12)


def test_characteristic_derivatives_match_finite_differences(oscillating_problem):
    x, t, xi = 0.7, 1.3, 0.1
    h = 1e-4
    d_dx, d_dt = characteristic_derivatives(oscillating_problem, 0, xi, x, t)

    def terminal(x_, t_):
        return trace(oscillating_problem, 0, x_, t_, xi).terminal

    fd_t = (terminal(x, t + h) - terminal(x, t - h)) / (2 * h)
    fd_x = (terminal(x + h, t) - terminal(x - h, t)) / (2 * h)
    assert d_dt == pytest.approx(fd_t, abs=FD_TOL)
    assert d_dx == pytest.approx(fd_x, abs=FD_TOL)


def test_t_independent_speed_has_unit_time_derivative(constant_problem):
    d_dx, d_dt = characteristic_derivatives(constant_problem, 0, 0.0, 0.5, 0.2)
    assert d_dt == 1.0
    assert d_dx == pytest.approx(-0.5)


def test_march_agrees_with_single_traces(oscillating_problem):
    t = np.array([0.0, 1.0, 4.0])
    omega, exponent = march(oscillating_problem, 0, 0.6, t, 0.0)
    expected = [trace(oscillating_problem, 0, 0.6, s, 0.0).terminal for s in t]
    npt.assert_allclose(omega, expected, atol=EXACT_TOL)
    npt.assert_array_equal(exponent, 0.0)


def test_step_cap(constant_problem):
    with pytest.raises(StepCountExceeded):
        trace(constant_problem, 0, 1.0, 0.0, 0.0, n_char=256, max_steps=10)


@pytest.mark.parametrize("x, xi", [(-0.1, 0.5), (0.5, 1.2)])
def test_trace_stays_inside_the_interval(constant_problem, x, xi):
    with pytest.raises(BadParameters):
        trace(constant_problem, 0, x, 0.0, xi)


class TestCharacteristicInvariants:
    """Composition rules of omega_j and c_j, checked on t-dependent coefficients."""

    @pytest.fixture
    def samples(self, rng):
        points = rng.uniform(0.0, 1.0, size=(8, 3))
        times = rng.uniform(0.0, 2.0 * math.pi, size=8)
        return [(zeta, xi, x, t) for (zeta, xi, x), t in zip(points, times)]

    @pytest.mark.parametrize("j", [0, 1])
    def test_semigroup(self, time_dependent_problem, samples, j):
        for zeta, xi, x, t in samples:
            midway = trace(time_dependent_problem, j, x, t, xi).terminal
            composed = trace(time_dependent_problem, j, xi, midway, zeta).terminal
            direct = trace(time_dependent_problem, j, x, t, zeta).terminal
            assert composed == pytest.approx(direct, abs=RK4_TOL)

    @pytest.mark.parametrize("j", [0, 1])
    def test_reversibility(self, time_dependent_problem, samples, j):
        for _, xi, x, t in samples:
            there = trace(time_dependent_problem, j, x, t, xi).terminal
            back = trace(time_dependent_problem, j, xi, there, x).terminal
            assert back == pytest.approx(t, abs=RK4_TOL)

    @pytest.mark.parametrize("j", [0, 1])
    def test_shift_by_a_period(self, time_dependent_problem, samples, j):
        for _, xi, x, t in samples:
            omega = trace(time_dependent_problem, j, x, t, xi).terminal
            shifted = trace(time_dependent_problem, j, x, t + 2.0 * math.pi, xi).terminal
            assert shifted - omega == pytest.approx(2.0 * math.pi, abs=1e-10)

    @pytest.mark.parametrize("j", [0, 1])
    def test_weight_cocycle(self, time_dependent_problem, samples, j):
        for zeta, xi, x, t in samples:
            midway = trace(time_dependent_problem, j, x, t, xi).terminal
            first = weights(time_dependent_problem, j, xi, x, t).c
            second = weights(time_dependent_problem, j, zeta, xi, midway).c
            direct = weights(time_dependent_problem, j, zeta, x, t).c
            assert first * second == pytest.approx(direct, rel=RK4_TOL)

    @pytest.mark.parametrize("j", [0, 1])
    def test_time_derivative_is_positive(self, time_dependent_problem, samples, j):
        for _, xi, x, t in samples:
            d_dx, d_dt = characteristic_derivatives(time_dependent_problem, j, xi, x, t)
            assert d_dt > 0.0
            # the sign of d omega / dx is opposite to the speed
            assert d_dx * float(time_dependent_problem.a[j](x, t)) < 0.0
