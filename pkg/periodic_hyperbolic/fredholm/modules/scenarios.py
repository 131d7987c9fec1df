"""Built-in problem presets.

Every preset is built from numbers and closed-form expressions only, so it can be
written to and read back from a problem file.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ...errors import BadParameters
from ...interface import BoundaryTerm
from ...problem import (
    CoefficientField,
    FixedData,
    HyperbolicProblem,
    PeriodicInX,
    ReflectionDelay,
    TwoByTwoReflection,
)

logger = logging.getLogger(__name__)

Solution = List[Callable[[np.ndarray, np.ndarray], np.ndarray]]


def _expr(text: str, params: Dict[str, float]) -> CoefficientField:
    """Expression field that binds only the float parameters it names."""
    try:
        names = set(compile(text, "<expr>", "eval").co_names)
    except SyntaxError:
        # reported by CoefficientField.expression
        names = set()
    used = {k: v for k, v in params.items() if k in names and isinstance(v, float)}
    return CoefficientField.expression(text, used)


@dataclass
class ScenarioPreset:
    preset_id: str
    description: str
    defaults: Dict[str, Any]
    builder: Callable[[Dict[str, Any]], HyperbolicProblem]
    expected_properties: Tuple[str, ...] = ()
    kernel_builder: Optional[Callable[[Dict[str, Any], int], List[Solution]]] = None
    exact_builder: Optional[Callable[[Dict[str, Any]], Solution]] = None
    # parameters that also accept an expression in x and t
    profile_parameters: Tuple[str, ...] = ()

    def resolve(self, params: Optional[Dict[str, Any]]) -> Dict[str, Any]:
        params = dict(params or {})
        unknown = sorted(set(params) - set(self.defaults))
        if unknown:
            raise BadParameters(
                f"preset {self.preset_id} has no parameters {unknown}; "
                f"known: {sorted(self.defaults)}"
            )
        resolved = dict(self.defaults)
        for key, value in params.items():
            if isinstance(value, (int, float)) and not isinstance(value, bool):
                value = float(value)
            elif isinstance(value, str) and key not in self.profile_parameters:
                raise BadParameters(f"parameter {key} of preset {self.preset_id} needs a number, got {value!r}")
            resolved[key] = value
        return resolved

    def to_dict(self):
        return {
            "id": self.preset_id,
            "description": self.description,
            "parameters": self.defaults,
            "expected_properties": list(self.expected_properties),
            "has_kernel": self.kernel_builder is not None,
            "has_exact_solution": self.exact_builder is not None,
            "profile_parameters": list(self.profile_parameters),
        }


@dataclass
class Scenario:
    preset: ScenarioPreset
    params: Dict[str, Any]
    problem: HyperbolicProblem
    notes: List[str] = field(default_factory=list)

    @property
    def has_kernel(self) -> bool:
        return self.preset.kernel_builder is not None and self.params.get("resonant", True)

    def kernel(self, l: int) -> List[Solution]:
        """Closed-form kernel elements with time frequency l (each a list of n callables)."""
        if not self.has_kernel:
            raise BadParameters(f"{self.preset.preset_id} with {self.params} has no closed-form kernel")
        if l < 0:
            raise BadParameters(f"kernel index l must be >= 0, got {l}")
        return self.preset.kernel_builder(self.params, l)

    def exact_solution(self) -> Solution:
        if self.preset.exact_builder is None:
            raise BadParameters(f"{self.preset.preset_id} has no closed-form solution")
        return self.preset.exact_builder(self.params)


def _time_profiles(l: int) -> List[Callable[[np.ndarray], np.ndarray]]:
    """sin(l tau) and cos(l tau); only the constant profile for l = 0."""
    if l == 0:
        return [lambda tau: np.ones_like(tau)]
    return [lambda tau, l=l: np.sin(l * tau), lambda tau, l=l: np.cos(l * tau)]


# scalar transport


def _scalar_transport(params) -> HyperbolicProblem:
    if not params["speed"] > 0:
        raise BadParameters("scalar_transport needs a positive speed")
    return HyperbolicProblem.build(
        a=[params["speed"]],
        b=[[params["damping"]]],
        f=[_expr("amplitude*cos(t)", params)],
        boundary=FixedData(1),
        m=1,
        name="scalar_transport",
    )


def _scalar_transport_exact(params) -> Solution:
    speed, damping, amplitude = params["speed"], params["damping"], params["amplitude"]
    rate = complex(damping / speed, 1.0 / speed)

    def u(x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        value = np.exp(1j * t) * (1.0 - np.exp(-rate * x)) / rate
        return amplitude * np.real(value) / speed

    return [u]


# x-periodic coupling with coinciding speeds


def _periodic_resonant(params) -> HyperbolicProblem:
    speed = 1.0 / (2.0 * math.pi)
    return HyperbolicProblem.build(
        a=[speed, speed],
        b=[[0.0, -1.0], [1.0, 0.0]],
        boundary=PeriodicInX(n=2, m=2),
        m=2,
        name="periodic_resonant",
    )


def _periodic_resonant_kernel(params, l: int) -> List[Solution]:
    two_pi = 2.0 * math.pi
    elements = []
    for profile in _time_profiles(l):
        elements.append(
            [
                lambda x, t, g=profile: np.sin(two_pi * x) * g(t - two_pi * x),
                lambda x, t, g=profile: np.cos(two_pi * x) * g(t - two_pi * x),
            ]
        )
    return elements


# reflections with coinciding speeds


def _resonant_coupling(r0: float, r1: float) -> float:
    return (1.0 - r0 * r1) / r0


def _reflection_resonant(params) -> HyperbolicProblem:
    r0, r1 = params["r0"], params["r1"]
    if r0 == 0.0 or r0 * r1 == 1.0:
        raise BadParameters("reflection_resonant needs r0 != 0 and r0*r1 != 1")
    if params["b"] is None:
        params["b"] = _resonant_coupling(r0, r1)
    params["resonant"] = bool(np.isclose(params["b"], _resonant_coupling(r0, r1), rtol=0, atol=1e-14))
    return HyperbolicProblem.build(
        a=[1.0, 1.0],
        b=[[0.0, 0.0], [params["b"], 0.0]],
        boundary=TwoByTwoReflection(r0, r1),
        m=1,
        name="reflection_resonant",
    )


def _reflection_resonant_kernel(params, l: int) -> List[Solution]:
    b = params["b"]
    offset = 1.0 / (1.0 - params["r0"] * params["r1"])
    return [
        [
            lambda x, t, g=profile: g(t - x),
            lambda x, t, g=profile: b * (offset - x) * g(t - x),
        ]
        for profile in _time_profiles(l)
    ]


# linearized catalytic reactor, components ordered (u, w, v)


def _reactor_linearized(params) -> HyperbolicProblem:
    for name in ("beta", "K", "Q"):
        if not params[name] > 0:
            raise BadParameters(f"reactor_linearized needs {name} > 0")
    if params["gamma"] < 0:
        raise BadParameters("reactor_linearized needs gamma >= 0")
    beta, gamma = params["beta"], params["gamma"]
    zero = 0.0
    return HyperbolicProblem.build(
        a=[1.0 / beta, -1.0, -1.0],
        b=[
            [_expr("(gamma - K*Q*exp(u0)*(1 - x))/beta", params), zero, -gamma / beta],
            [zero, zero, zero],
            [-gamma, zero, gamma],
        ],
        f=[
            _expr("K*Q*exp(u0)*(1 - u0)*(1 - x)/beta", params),
            _expr("K*(1 - x)", params),
            zero,
        ],
        boundary=ReflectionDelay(
            n=3,
            m=2,
            terms=[BoundaryTerm(row=0, col=2, side=0, weight=CoefficientField.constant(1.0))],
            source=[zero, zero, _expr("h*cos(t)", params)],
        ),
        m=2,
        name="reactor_linearized",
    )


def reactor_weight(params: Dict[str, float], x) -> np.ndarray:
    """c_u(0, x, t) = exp(-gamma x + K Q e^{u0} (x - x^2/2)) of the reactor preset."""
    x = np.asarray(x, dtype=float)
    return np.exp(
        -params["gamma"] * x + params["K"] * params["Q"] * math.exp(params["u0"]) * (x - x**2 / 2.0)
    )


# correlated random walk, conservative form expanded


def _chemotaxis(params) -> HyperbolicProblem:
    a1_left, a1_right = params["a1_0"], params["a1_0"] + params["a1_slope"]
    a2_left, a2_right = params["a2_0"], params["a2_0"] + params["a2_slope"]
    if min(a1_left, a1_right, a2_left, a2_right) <= 0:
        raise BadParameters("chemotaxis speeds a1, a2 must stay positive on [0, 1]")
    mu1, mu2 = params["mu1"], params["mu2"]
    for name, rate in (("mu1", mu1), ("mu2", mu2)):
        if not isinstance(rate, (float, str)):
            raise BadParameters(f"turning rate {name} must be a number or an expression in x, t; got {rate!r}")
    if isinstance(mu1, float) and isinstance(mu2, float):
        b = [
            [params["a1_slope"] + mu1, -mu2],
            [-mu1, mu2 - params["a2_slope"]],
        ]
    else:
        b = [
            [_expr(f"a1_slope + ({mu1})", params), _expr(f"-({mu2})", params)],
            [_expr(f"-({mu1})", params), _expr(f"({mu2}) - a2_slope", params)],
        ]
    return HyperbolicProblem.build(
        a=[_expr("a1_0 + a1_slope*x", params), _expr("-(a2_0 + a2_slope*x)", params)],
        b=b,
        boundary=TwoByTwoReflection(a2_left / a1_left, a1_right / a2_right),
        m=1,
        name="chemotaxis",
    )


# hyperbolic part of the traveling wave laser model


def _laser_hyperbolic(params) -> HyperbolicProblem:
    r0, r1 = params["r0"], params["r1"]
    if not (0 < r0 < 1 and 0 < r1 < 1):
        raise BadParameters("laser reflection coefficients must satisfy 0 < r0, r1 < 1")
    kappa = params["kappa"]
    return HyperbolicProblem.build(
        a=[1.0, -1.0],
        b=[[-params["g1"], kappa], [kappa, -params["g2"]]],
        boundary=TwoByTwoReflection(r0, r1, source=[_expr("alpha*sin(t)", params), 0.0]),
        m=1,
        b_tilde=[[None, -kappa / 2.0], [kappa / 2.0, None]],
        name="laser_hyperbolic",
    )


# manufactured 2x2 reflection case with a known C^1 solution

_MANUFACTURED_U1 = "(p0*cos(t) + x*sin(t))"
_MANUFACTURED_U2 = "(cos(t) + x*((p0*p1 - 1)*cos(t) + p1*sin(t)))"


def _manufactured(params) -> HyperbolicProblem:
    forcing = [
        "-p0*sin(t) + x*cos(t) + sin(t) + b12*" + _MANUFACTURED_U2,
        "-sin(t) + x*(p1*cos(t) - (p0*p1 - 1)*sin(t)) - ((p0*p1 - 1)*cos(t) + p1*sin(t)) + b21*"
        + _MANUFACTURED_U1,
    ]
    return HyperbolicProblem.build(
        a=[1.0, -1.0],
        b=[[0.0, params["b12"]], [params["b21"], 0.0]],
        f=[_expr(text, params) for text in forcing],
        boundary=TwoByTwoReflection(params["p0"], params["p1"]),
        m=1,
        name="manufactured",
    )


def _manufactured_exact(params) -> Solution:
    return [_expr(_MANUFACTURED_U1, params), _expr(_MANUFACTURED_U2, params)]


PRESETS: Dict[str, ScenarioPreset] = {
    preset.preset_id: preset
    for preset in (
        ScenarioPreset(
            "scalar_transport",
            "u_t + a u_x + b u = A cos t, u(0, t) = 0",
            {"speed": 1.0, "damping": 0.0, "amplitude": 1.0},
            _scalar_transport,
            ("non-resonant", "C = 0"),
            exact_builder=_scalar_transport_exact,
        ),
        ScenarioPreset(
            "periodic_resonant",
            "2x2, equal speeds 1/(2 pi), b12 = -1, b21 = 1, periodic in x",
            {},
            _periodic_resonant,
            ("resonant", "factorization violated", "||C^l|| = 1"),
            kernel_builder=_periodic_resonant_kernel,
        ),
        ScenarioPreset(
            "reflection_resonant",
            "2x2, equal speeds 1, b21 = b, u1(0) = r0 u2(0), u2(1) = r1 u1(1)",
            {"r0": 0.5, "r1": 0.5, "b": None},
            _reflection_resonant,
            ("resonant for b = (1 - r0 r1)/r0", "factorization violated", "||C|| < 1"),
            kernel_builder=_reflection_resonant_kernel,
        ),
        ScenarioPreset(
            "reactor_linearized",
            "catalytic reactor (u, w, v) linearized at constant u0, u(0) = v(0), w(0) = 0, v(1) = h cos t",
            {"beta": 1.0, "gamma": 0.5, "K": 1.0, "Q": 0.5, "u0": 0.0, "h": 0.5},
            _reactor_linearized,
            ("nilpotent C", "C^2 = 0", "non-resonant"),
        ),
        ScenarioPreset(
            "chemotaxis",
            "correlated random walk, a1 u+ = a2 u- at x = 0, 1; turning rates mu1, mu2 may be profiles in x, t",
            {
                "a1_0": 1.0,
                "a1_slope": 0.5,
                "a2_0": 1.0,
                "a2_slope": 0.25,
                "mu1": 0.3,
                "mu2": 0.2,
            },
            _chemotaxis,
            ("Phi = exp(-int mu1/a1 + mu2/a2)", "resonant for mu1 = mu2 = 0"),
            profile_parameters=("mu1", "mu2"),
        ),
        ScenarioPreset(
            "laser_hyperbolic",
            "traveling wave laser, u1(0) = r0 u2(0) + alpha sin t, u2(1) = r1 u1(1)",
            {"r0": 0.5, "r1": 0.5, "g1": 0.0, "g2": 0.0, "kappa": 0.0, "alpha": 0.0},
            _laser_hyperbolic,
            ("non-resonant",),
        ),
        ScenarioPreset(
            "manufactured",
            "2x2 reflection problem with a known smooth solution",
            {"p0": 0.5, "p1": 0.5, "b12": 0.3, "b21": -0.2},
            _manufactured,
            ("non-resonant", "exact solution"),
            exact_builder=_manufactured_exact,
        ),
    )
}


def list_presets() -> List[Dict[str, Any]]:
    return [preset.to_dict() for preset in PRESETS.values()]


def build(preset_id: str, params: Optional[Dict[str, Any]] = None) -> Scenario:
    """Construct a preset problem; the returned Scenario also carries kernels and exact solutions."""
    if preset_id not in PRESETS:
        raise BadParameters(f"unknown preset {preset_id!r}; available: {sorted(PRESETS)}")
    preset = PRESETS[preset_id]
    resolved = preset.resolve(params)
    problem = preset.builder(resolved)
    notes = []
    if preset_id == "chemotaxis":
        notes.append("boundary uses a+ = a1, a- = a2")
    logger.debug(f"built preset {preset_id} with {resolved}")
    return Scenario(preset=preset, params=resolved, problem=problem, notes=notes)


def sweepable_parameters(preset_id: str) -> Sequence[str]:
    if preset_id not in PRESETS:
        raise BadParameters(f"unknown preset {preset_id!r}")
    return [
        name
        for name, value in PRESETS[preset_id].defaults.items()
        if value is None or isinstance(value, float)
    ]
