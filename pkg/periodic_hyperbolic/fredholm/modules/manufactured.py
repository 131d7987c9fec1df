"""Manufactured solutions: pick u*, derive f* and (optionally) the boundary source."""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ...dataclass import TWO_PI, GridDims, GridFunction
from ...errors import BoundaryIncompatible, WrongShape
from ...problem import CoefficientField, HyperbolicProblem
from .scenarios import Scenario
from .solver import SolveOptions, solve

logger = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-10
DEFAULT_H_DIFF = 1e-3

ScalarFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _central_difference(func: ScalarFunction, axis: str, h: float) -> ScalarFunction:
    """Fourth-order central difference in x or t."""

    def derivative(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        if axis == "x":
            values = [func(x + s * h, t) for s in (-2, -1, 1, 2)]
        else:
            values = [func(x, t + s * h) for s in (-2, -1, 1, 2)]
        return (values[0] - 8.0 * values[1] + 8.0 * values[2] - values[3]) / (12.0 * h)

    return derivative


@dataclass
class ManufacturedCase:
    problem: HyperbolicProblem
    solution: List[ScalarFunction]
    boundary_defect: float = 0.0
    fitted_boundary: bool = False

    def exact(self, dims: GridDims) -> GridFunction:
        return GridFunction.from_callables(self.solution, dims)

    def forcing(self, dims: GridDims) -> GridFunction:
        return GridFunction.from_callables(self.problem.f, dims)

    def error(self, u: GridFunction) -> float:
        return (u - self.exact(u.dims)).sup_norm()

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "ManufacturedCase":
        return cls(problem=scenario.problem, solution=scenario.exact_solution())


def _trace_of(solution: Sequence[ScalarFunction]):
    def trace(col, side, tau):
        tau = np.asarray(tau, dtype=float)
        return np.broadcast_to(solution[col](np.full_like(tau, float(side)), tau), tau.shape)

    return trace


def boundary_defect(
    problem: HyperbolicProblem, solution: Sequence[ScalarFunction], t: np.ndarray
) -> float:
    """sup_t |u*_j(x_j, t) - (R u*)_j(t)| over all components."""
    trace = _trace_of(solution)
    defect = 0.0
    for j in range(problem.n):
        value = trace(j, problem.x_side(j), t)
        defect = max(defect, float(np.max(np.abs(value - problem.boundary.apply(trace, j, t)))))
    return defect


def manufacture(
    template: HyperbolicProblem,
    solution: Sequence[ScalarFunction],
    derivatives: Optional[Sequence[Tuple[ScalarFunction, ScalarFunction]]] = None,
    fit_boundary: bool = False,
    h_diff: float = DEFAULT_H_DIFF,
    t_samples: int = 256,
) -> ManufacturedCase:
    """Build the problem whose exact solution is u*.

    f*_j = d_t u*_j + a_j d_x u*_j + sum_k b_jk u*_k, with (d_t, d_x) taken from
    ``derivatives`` when given and from fourth-order central differences otherwise.
    If u* violates the boundary conditions, ``fit_boundary`` replaces the boundary
    source by the mismatch; otherwise BoundaryIncompatible is raised.
    """
    n = template.n
    solution = list(solution)
    if len(solution) != n:
        raise WrongShape(f"u* has {len(solution)} components, problem has {n}")
    if derivatives is None:
        derivatives = [
            (_central_difference(u, "t", h_diff), _central_difference(u, "x", h_diff))
            for u in solution
        ]

    def make_forcing(j: int) -> CoefficientField:
        d_dt, d_dx = derivatives[j]

        def forcing(x, t):
            value = d_dt(x, t) + template.a[j](x, t) * d_dx(x, t)
            for k in range(n):
                if not template.b[j][k].is_zero:
                    value = value + template.b[j][k](x, t) * solution[k](x, t)
            return value

        return CoefficientField(forcing)

    t = TWO_PI * np.arange(t_samples) / t_samples
    defect = boundary_defect(template, solution, t)
    boundary = template.boundary
    fitted = False
    if defect > BOUNDARY_TOL:
        if not fit_boundary:
            raise BoundaryIncompatible(
                f"u* violates the boundary conditions of {template.name} by {defect:.3e}",
                defect=defect,
            )
        trace = _trace_of(solution)
        linear_part = boundary

        def make_source(j: int) -> CoefficientField:
            x_j = template.x_side(j)

            def mu(x, t):
                return trace(j, x_j, t) - linear_part.apply(trace, j, t, include_source=False)

            return CoefficientField(mu)

        source = [make_source(j) for j in range(n)]
        boundary = boundary.with_source(source)
        fitted = True
        logger.info(f"boundary source fitted to u* (defect was {defect:.3e})")

    problem = template.replace(
        f=tuple(make_forcing(j) for j in range(n)),
        boundary=boundary,
        name=f"{template.name}_manufactured",
    )
    return ManufacturedCase(
        problem=problem, solution=solution, boundary_defect=defect, fitted_boundary=fitted
    )


@dataclass
class ConvergenceStudy:
    grids: List[GridDims]
    errors: List[float]
    residuals: List[float]
    statuses: List[str] = field(default_factory=list)

    @property
    def orders(self) -> List[float]:
        """Observed orders log2(e_i / e_{i+1}) for successive grid doublings."""
        return [
            math.log(coarse / fine, 2.0)
            for coarse, fine in zip(self.errors[:-1], self.errors[1:])
        ]

    def to_dict(self):
        return {
            "grids": [g.to_dict() for g in self.grids],
            "errors": self.errors,
            "residuals": self.residuals,
            "statuses": self.statuses,
            "orders": self.orders,
        }


def convergence_study(
    case: ManufacturedCase,
    grids: Sequence[GridDims],
    options: Optional[SolveOptions] = None,
    n_char: Optional[Sequence[int]] = None,
) -> ConvergenceStudy:
    """Solve on each grid and measure the nodal error against u*."""
    options = options or SolveOptions()
    study = ConvergenceStudy(grids=list(grids), errors=[], residuals=[])
    for index, dims in enumerate(grids):
        run_options = options
        if n_char is not None:
            run_options = replace(options, operator=replace(options.operator, n_char=n_char[index]))
        outcome = solve(case.problem, case.forcing(dims), run_options)
        study.errors.append(case.error(outcome.solution))
        study.residuals.append(outcome.residual_sup)
        study.statuses.append(outcome.status)
        logger.info(
            f"{case.problem.name} on {dims.n_x}x{dims.n_t}: error {study.errors[-1]:.3e}, "
            f"status {outcome.status}"
        )
    return study
