import numpy as np
import pytest

from periodic_hyperbolic.dataclass import GridDims, GridFunction, SolveStatus
from periodic_hyperbolic.errors import BoundaryIncompatible, WrongShape
from periodic_hyperbolic.fredholm.modules.manufactured import (
    ConvergenceStudy,
    ManufacturedCase,
    boundary_defect,
    convergence_study,
    manufacture,
)
from periodic_hyperbolic.fredholm.modules.scenarios import build
from periodic_hyperbolic.fredholm.modules.solver import SolveOptions, solve
from periodic_hyperbolic.operators import OperatorOptions
from periodic_hyperbolic.problem import FixedData, HyperbolicProblem, ReflectionDelay

FD_TOL = 1e-8
MIN_ORDER = 1.8

REFERENCE_GRIDS = [GridDims(51, 64), GridDims(101, 128), GridDims(201, 256)]


@pytest.fixture
def scalar_template():
    return HyperbolicProblem.build(a=[1.0], b=[[0.5]], boundary=FixedData(1), m=1, name="scalar")


@pytest.fixture
def scalar_solution():
    return [lambda x, t: np.sin(t) * (1.0 + x)]


@pytest.fixture
def mixed_template():
    """Three components, two entering at x = 0, with reflections between the groups."""
    return HyperbolicProblem.build(
        a=[1.0, 0.5, -1.0],
        b=[[0.2, 0.1, 0.0], [0.0, -0.1, 0.15], [0.1, 0.0, 0.3]],
        boundary=ReflectionDelay.from_reflection_matrix(
            [[0.0, 0.0, 0.4], [0.0, 0.0, 0.3], [0.2, 0.25, 0.0]], m=2
        ),
        m=2,
        name="mixed",
    )


@pytest.fixture
def mixed_solution():
    return [
        lambda x, t: np.cos(t) * (1.0 + x),
        lambda x, t: np.sin(t + x),
        lambda x, t: np.cos(t) * x**2,
    ]


def test_compatible_solution_reproduces_the_preset_forcing():
    scenario = build("manufactured")
    case = manufacture(scenario.problem, scenario.exact_solution())
    assert not case.fitted_boundary
    assert case.boundary_defect < 1e-12
    dims = GridDims(11, 16)
    expected = GridFunction.from_callables(scenario.problem.f, dims)
    assert (case.forcing(dims) - expected).sup_norm() < FD_TOL


def test_exact_derivatives_can_be_supplied(scalar_template):
    case = manufacture(
        scalar_template,
        [lambda x, t: np.sin(t) * (1.0 + x)],
        derivatives=[(lambda x, t: np.cos(t) * (1.0 + x), lambda x, t: np.sin(t) + 0.0 * x)],
        fit_boundary=True,
    )
    dims = GridDims(5, 8)
    x, t = dims.x_nodes[:, None], dims.t_nodes[None, :]
    expected = np.cos(t) * (1.0 + x) + np.sin(t) + 0.5 * np.sin(t) * (1.0 + x)
    np.testing.assert_allclose(case.forcing(dims).values[0], expected, atol=1e-14)


def test_incompatible_solution_needs_a_fitted_boundary(scalar_template, scalar_solution):
    with pytest.raises(BoundaryIncompatible) as info:
        manufacture(scalar_template, scalar_solution)
    assert info.value.defect == pytest.approx(1.0, abs=1e-3)


def test_fitted_boundary_source_is_solved_accurately(scalar_template, scalar_solution):
    case = manufacture(scalar_template, scalar_solution, fit_boundary=True)
    assert case.fitted_boundary
    assert case.problem.name == "scalar_manufactured"
    t = np.linspace(0.0, 2.0 * np.pi, 33)
    assert boundary_defect(case.problem, scalar_solution, t) < 1e-12
    options = SolveOptions(operator=OperatorOptions(interpolation="cubic"))
    outcome = solve(case.problem, case.forcing(GridDims(41, 64)), options)
    assert outcome.status == SolveStatus.CONVERGED
    assert case.error(outcome.solution) < 1e-3


def test_component_count_is_checked(mixed_template, scalar_solution):
    with pytest.raises(WrongShape):
        manufacture(mixed_template, scalar_solution)


def test_from_scenario_has_zero_nodal_error():
    case = ManufacturedCase.from_scenario(build("manufactured"))
    dims = GridDims(9, 8)
    assert case.error(case.exact(dims)) == 0.0


def test_observed_orders():
    study = ConvergenceStudy(
        grids=REFERENCE_GRIDS, errors=[4e-2, 1e-2, 2.5e-3], residuals=[0.0, 0.0, 0.0]
    )
    assert study.orders == pytest.approx([2.0, 2.0])
    assert study.to_dict()["orders"] == study.orders


def test_coarse_study_reports_every_grid():
    case = ManufacturedCase.from_scenario(build("manufactured"))
    study = convergence_study(case, [GridDims(11, 16), GridDims(21, 32)], n_char=[16, 32])
    assert study.statuses == [SolveStatus.CONVERGED] * 2
    assert study.errors[1] < study.errors[0]
    assert len(study.residuals) == 2


def _reference_study(case):
    return convergence_study(case, REFERENCE_GRIDS, n_char=[dims.n_t for dims in REFERENCE_GRIDS])


@pytest.mark.slow
def test_scalar_transport_converges_at_second_order():
    case = ManufacturedCase.from_scenario(build("scalar_transport", {"damping": 0.3}))
    study = _reference_study(case)
    assert min(study.orders) >= MIN_ORDER


@pytest.mark.slow
def test_reflection_problem_converges_at_second_order():
    case = ManufacturedCase.from_scenario(build("manufactured"))
    study = _reference_study(case)
    assert min(study.orders) >= MIN_ORDER


@pytest.mark.slow
def test_mixed_problem_converges_at_second_order(mixed_template, mixed_solution):
    case = manufacture(mixed_template, mixed_solution, fit_boundary=True)
    study = _reference_study(case)
    assert all(status == SolveStatus.CONVERGED for status in study.statuses)
    assert min(study.orders) >= MIN_ORDER
