"""Characteristic curves omega_j(xi, x, t) and the weights c_j, d_j along them.

omega_j solves d omega / d xi = 1 / a_j(xi, omega) with omega_j(x, x, t) = t, and

    c_j(xi, x, t) = exp( int_x^xi (b_jj / a_j)(eta, omega_j(eta, x, t)) d eta ),
    d_j(xi, x, t) = c_j(xi, x, t) / a_j(xi, omega_j(xi, x, t)).

Times along a path are never wrapped; coefficient fields reduce modulo 2*pi on
evaluation.
"""

import logging
import math
from typing import Callable, Tuple

import numpy as np

from .dataclass import CharacteristicPath, WeightPair
from .errors import BadParameters, StepCountExceeded
from .problem import HyperbolicProblem

logger = logging.getLogger(__name__)

DEFAULT_N_CHAR = 256
DEFAULT_MAX_STEPS = 1_000_000


def quadrature_weights(intervals: int, rule: str = "simpson") -> np.ndarray:
    """Weights (in units of the step) of a closed rule on intervals + 1 equispaced nodes.

    Simpson needs an even interval count; an odd count is closed with the 3/8 rule
    on the last three intervals. A single interval falls back to the trapezoid.
    """
    weights = np.zeros(intervals + 1)
    if intervals == 0:
        return weights
    if rule == "trapezoid" or intervals == 1:
        weights[:] = 1.0
        weights[0] = weights[-1] = 0.5
        return weights
    if rule != "simpson":
        raise ValueError(f"unknown quadrature rule {rule!r}")
    simpson_intervals = intervals if intervals % 2 == 0 else intervals - 3
    for start in range(0, simpson_intervals, 2):
        weights[start : start + 3] += np.array([1.0, 4.0, 1.0]) / 3.0
    if simpson_intervals != intervals:
        weights[simpson_intervals:] += np.array([3.0, 9.0, 9.0, 3.0]) / 8.0
    return weights


def rk4_step(
    rhs: Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, ...]],
    xi,
    state: Tuple[np.ndarray, ...],
    h: float,
) -> Tuple[np.ndarray, ...]:
    """One classical RK4 step of d state / d xi = rhs(xi, state[0]).

    The right-hand side only depends on the first state component (omega); the
    others are quadratures carried along the path.
    """
    k1 = rhs(xi, state[0])
    k2 = rhs(xi + 0.5 * h, state[0] + 0.5 * h * k1[0])
    k3 = rhs(xi + 0.5 * h, state[0] + 0.5 * h * k2[0])
    k4 = rhs(xi + h, state[0] + h * k3[0])
    return tuple(
        s + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d)
        for s, a, b, c, d in zip(state, k1, k2, k3, k4)
    )


def characteristic_rhs(problem: HyperbolicProblem, j: int):
    """(1/a_j, b_jj/a_j) evaluated at (xi, omega)."""
    speed = problem.a[j]
    diagonal = problem.b[j][j]

    def rhs(xi, omega):
        inverse = 1.0 / speed(xi, omega)
        if diagonal.is_zero:
            return inverse, np.zeros_like(inverse)
        return inverse, diagonal(xi, omega) * inverse

    return rhs


def _step_count(span: float, n_char: int, max_steps: int) -> int:
    steps = int(math.ceil(abs(span) * n_char - 1e-9))
    if steps > max_steps:
        raise StepCountExceeded(
            f"tracing over |xi - x| = {abs(span):.3g} needs {steps} RK4 steps "
            f"(cap {max_steps})"
        )
    return steps


def trace(
    problem: HyperbolicProblem,
    j: int,
    x: float,
    t: float,
    xi_target: float,
    n_char: int = DEFAULT_N_CHAR,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> CharacteristicPath:
    """Trace the j-th characteristic through (x, t) to xi_target with fixed-step RK4.

    The step is 1/n_char, shortened uniformly so that xi_target is hit exactly.
    """
    for name, value in (("x", x), ("xi_target", xi_target)):
        if not 0.0 <= value <= 1.0:
            raise BadParameters(f"{name} = {value} lies outside [0, 1]")
    span = float(xi_target) - float(x)
    steps = _step_count(span, n_char, max_steps)
    xi = np.linspace(float(x), float(xi_target), steps + 1)
    omega = np.empty(steps + 1)
    omega[0] = t
    if steps:
        h = span / steps
        speed = problem.a[j]

        def rhs(eta, w):
            return (1.0 / speed(eta, w),)

        for i in range(steps):
            (omega[i + 1],) = rk4_step(rhs, xi[i], (omega[i],), h)
    return CharacteristicPath(
        j=j, anchor=(float(x), float(t)), xi=xi, omega=omega, h_char=1.0 / n_char
    )


def _path_integral(path: CharacteristicPath, values: np.ndarray) -> float:
    """int_x^xi of sampled values along the path, Simpson on the trace nodes."""
    intervals = path.xi.size - 1
    if intervals == 0:
        return 0.0
    h = (path.xi[-1] - path.xi[0]) / intervals
    return float(h * np.dot(quadrature_weights(intervals), values))


def weights(
    problem: HyperbolicProblem,
    j: int,
    xi: float,
    x: float,
    t: float,
    n_char: int = DEFAULT_N_CHAR,
) -> WeightPair:
    path = trace(problem, j, x, t, xi, n_char=n_char)
    diagonal = problem.b[j][j]
    if diagonal.is_zero:
        exponent = 0.0
    else:
        integrand = diagonal(path.xi, path.omega) / problem.a[j](path.xi, path.omega)
        exponent = _path_integral(path, integrand)
    c = math.exp(exponent)
    return WeightPair(c=c, d=c / float(problem.a[j](xi, path.terminal)))


def characteristic_derivatives(
    problem: HyperbolicProblem,
    j: int,
    xi: float,
    x: float,
    t: float,
    n_char: int = DEFAULT_N_CHAR,
) -> Tuple[float, float]:
    """(d omega_j / dx, d omega_j / dt) at (xi, x, t) from the closed-form identities."""
    speed = problem.a[j]
    path = trace(problem, j, x, t, xi, n_char=n_char)
    if speed.depends_on_t:
        integrand = speed.partial_t(path.xi, path.omega) / speed(path.xi, path.omega) ** 2
        # the path runs from x to xi, the identity integrates from xi to x
        exponent = -_path_integral(path, integrand)
    else:
        exponent = 0.0
    d_dt = math.exp(exponent)
    d_dx = -d_dt / float(speed(x, t))
    return d_dx, d_dt


def march(
    problem: HyperbolicProblem,
    j: int,
    x: float,
    t: np.ndarray,
    xi_target: float,
    n_char: int = DEFAULT_N_CHAR,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> Tuple[np.ndarray, np.ndarray]:
    """Terminal omega_j(xi_target, x, t) and exponent log c_j(xi_target, x, t) for many t.

    The exponent is carried as an extra RK4 component, so both come from one pass.
    """
    t = np.asarray(t, dtype=float)
    span = float(xi_target) - float(x)
    steps = _step_count(span, n_char, max_steps)
    omega = t.copy()
    exponent = np.zeros_like(t)
    if steps:
        h = span / steps
        rhs = characteristic_rhs(problem, j)
        for i in range(steps):
            omega, exponent = rk4_step(rhs, x + i * h, (omega, exponent), h)
    return omega, exponent
