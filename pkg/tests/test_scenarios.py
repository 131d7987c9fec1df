import numpy as np
import numpy.testing as npt
import pytest

from periodic_hyperbolic.dataclass import GridDims, GridFunction
from periodic_hyperbolic.errors import BadParameters, ProblemFormatError
from periodic_hyperbolic.fredholm.modules.nonresonance import CriteriaOptions, check_2x2_sharp, sharp_product
from periodic_hyperbolic.fredholm.modules.scenarios import (
    _expr,
    PRESETS,
    build,
    list_presets,
    sweepable_parameters,
)
from periodic_hyperbolic.fredholm.modules.solver import residual
from periodic_hyperbolic.problem import HyperbolicProblem

KERNEL_TOL = 1e-10


def test_presets_are_listed_in_a_fixed_order():
    ids = [preset["id"] for preset in list_presets()]
    assert ids == [
        "scalar_transport",
        "periodic_resonant",
        "reflection_resonant",
        "reactor_linearized",
        "chemotaxis",
        "laser_hyperbolic",
        "manufactured",
    ]
    by_id = {preset["id"]: preset for preset in list_presets()}
    assert by_id["periodic_resonant"]["has_kernel"]
    assert by_id["manufactured"]["has_exact_solution"]
    assert not by_id["chemotaxis"]["has_kernel"]


def test_unknown_presets_and_parameters_are_rejected():
    with pytest.raises(BadParameters, match="unknown preset"):
        build("wave_equation")
    with pytest.raises(BadParameters, match="no parameters"):
        build("reactor_linearized", {"alpha": 1.0})
    with pytest.raises(BadParameters):
        sweepable_parameters("wave_equation")


@pytest.mark.parametrize(
    "preset_id, params",
    [
        ("scalar_transport", {"speed": -1.0}),
        ("reflection_resonant", {"r0": 0.0}),
        ("reflection_resonant", {"r0": 2.0, "r1": 0.5}),
        ("reactor_linearized", {"beta": 0.0}),
        ("reactor_linearized", {"gamma": -1.0}),
        ("chemotaxis", {"a2_slope": -1.5}),
        ("laser_hyperbolic", {"r1": 1.0}),
    ],
)
def test_out_of_range_parameters(preset_id, params):
    with pytest.raises(BadParameters):
        build(preset_id, params)


def test_sweepable_parameters():
    assert sweepable_parameters("reflection_resonant") == ["r0", "r1", "b"]
    assert sweepable_parameters("periodic_resonant") == []
    assert "h" in sweepable_parameters("reactor_linearized")


def test_integer_parameters_are_read_as_floats():
    scenario = build("laser_hyperbolic", {"kappa": 0})
    assert isinstance(scenario.params["kappa"], float)


class TestReflectionResonant:
    def test_default_coupling_is_the_resonant_value(self):
        scenario = build("reflection_resonant")
        assert scenario.params["b"] == pytest.approx(1.5)
        assert scenario.params["resonant"]
        assert scenario.has_kernel

    def test_detuned_coupling_has_no_closed_form_kernel(self):
        scenario = build("reflection_resonant", {"b": 1.0})
        assert not scenario.params["resonant"]
        with pytest.raises(BadParameters):
            scenario.kernel(1)

    def test_resonant_value_follows_the_reflections(self):
        scenario = build("reflection_resonant", {"r0": 0.25, "r1": 2.0})
        assert scenario.params["b"] == pytest.approx(2.0)

    def test_time_constant_kernel_element_is_exact(self):
        scenario = build("reflection_resonant")
        dims = GridDims(21, 32)
        (element,) = scenario.kernel(0)
        u = GridFunction.from_callables(element, dims)
        assert residual(scenario.problem, u, GridFunction.zeros(2, dims)) < KERNEL_TOL

    def test_each_frequency_has_two_elements(self):
        scenario = build("reflection_resonant")
        assert len(scenario.kernel(0)) == 1
        assert len(scenario.kernel(3)) == 2
        with pytest.raises(BadParameters):
            scenario.kernel(-1)


def test_x_periodic_kernel_element_of_frequency_zero():
    scenario = build("periodic_resonant")
    dims = GridDims(41, 16)
    (element,) = scenario.kernel(0)
    u = GridFunction.from_callables(element, dims)
    assert u.sup_norm() == pytest.approx(1.0)
    assert residual(scenario.problem, u, GridFunction.zeros(2, dims)) < 1e-4


def test_scalar_transport_closed_form_meets_the_boundary_condition():
    scenario = build("scalar_transport", {"damping": 0.5})
    (u,) = scenario.exact_solution()
    t = np.linspace(0.0, 2.0 * np.pi, 9)
    npt.assert_allclose(u(np.zeros_like(t), t), 0.0, atol=1e-15)


def test_presets_without_closed_forms():
    with pytest.raises(BadParameters):
        build("periodic_resonant").exact_solution()
    with pytest.raises(BadParameters):
        build("chemotaxis").kernel(0)


def test_reactor_layout():
    scenario = build("reactor_linearized")
    problem = scenario.problem
    assert (problem.n, problem.m) == (3, 2)
    assert [term.col for term in problem.boundary.terms] == [2]
    assert problem.boundary.has_source


def test_chemotaxis_reflections_balance_the_fluxes():
    scenario = build("chemotaxis")
    p = scenario.problem.boundary.reflection_matrix(np.zeros(1))[0]
    npt.assert_allclose(p, [[0.0, 1.0], [1.5 / 1.25, 0.0]])
    assert scenario.notes


def test_every_preset_builds_with_its_defaults():
    for preset_id in PRESETS:
        scenario = build(preset_id)
        assert scenario.problem.name == preset_id


def test_expressions_bind_only_the_names_they_use():
    field = _expr("beta * x", {"b": 1.0, "beta": 2.0, "t0": 0.5})
    assert field.to_spec()["params"] == {"beta": 2.0}
    with pytest.raises(ProblemFormatError):
        _expr("beta *", {"beta": 2.0})


class TestChemotaxisTurningProfiles:
    OPTIONS = CriteriaOptions(dims=GridDims(11, 16), t_samples=64)

    def test_constant_profile_matches_the_number(self):
        t = self.OPTIONS.sample_times()
        numeric = sharp_product(build("chemotaxis", {"mu1": 0.3}).problem, t)
        profile = sharp_product(build("chemotaxis", {"mu1": "0.3"}).problem, t)
        npt.assert_allclose(profile, numeric, rtol=1e-12)

    def test_periodic_turning_rate_is_non_resonant(self):
        problem = build("chemotaxis", {"mu1": "0.3 + 0.1*sin(t)", "mu2": "0.2*x"}).problem
        assert problem.b[0][0].depends_on_t
        verdict = check_2x2_sharp(problem, self.OPTIONS)
        assert verdict.holds
        assert verdict.details["phi_max"] < 1.0
        assert verdict.details["phi_max"] > verdict.details["phi_min"]
        reloaded = HyperbolicProblem.from_dict(problem.to_dict())
        assert reloaded.to_dict() == problem.to_dict()

    @pytest.mark.parametrize(
        "params, error",
        [
            ({"a1_0": "1 + x"}, BadParameters),
            ({"mu1": True}, BadParameters),
            ({"mu2": "0.2 +"}, ProblemFormatError),
            ({"mu2": "0.2*y"}, ProblemFormatError),
        ],
    )
    def test_rejected_profiles(self, params, error):
        with pytest.raises(error):
            build("chemotaxis", params)
