"""Verifiable non-resonance criteria for the boundary part I - C.

All criteria look at the linear part of the boundary operator only; an additive
boundary source does not affect bijectivity.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ...characteristics import DEFAULT_N_CHAR, march
from ...dataclass import (
    TWO_PI,
    CriterionVerdict,
    GridDims,
    GridFunction,
    Overall,
    ResonanceReport,
)
from ...errors import BadParameters, QSingular, UnsupportedBoundary, WrongShape
from ...interface import ResonanceCriterion
from ...operators import OperatorOptions, discretize, interpolate_periodic
from ...problem import HyperbolicProblem, TwoByTwoReflection, ValidationGridSpec, check_factorization

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CriteriaOptions:
    ell_max: int = 3
    t_samples: int = 512
    tol_sharp: float = 1e-6
    eps_det_rel: float = 1e-12
    # grid on which |C|^l 1 and the weight maxima are evaluated
    dims: GridDims = GridDims(41, 64)
    operator: OperatorOptions = OperatorOptions()
    max_workers: int = 1

    def sample_times(self) -> np.ndarray:
        return TWO_PI * np.arange(self.t_samples) / self.t_samples

    def grid_info(self, with_dims: bool = True):
        info = {"t_samples": self.t_samples, "n_char": self.operator.n_char}
        if with_dims:
            info.update(self.dims.to_dict())
        return info


def _require_pointwise(problem: HyperbolicProblem):
    if not problem.boundary.has_pointwise_terms:
        raise UnsupportedBoundary(
            f"{problem.boundary.kind} boundary has no pointwise weights"
        )


def estimate_C_power_norm(
    problem: HyperbolicProblem,
    ell: int,
    dims: Optional[GridDims] = None,
    options: Optional[OperatorOptions] = None,
) -> float:
    """||C^ell|| in the sup-norm: sup of |C|^ell applied to the all-ones function.

    Exact for the discrete operator; a lower bound of the continuous norm that
    converges under t-grid refinement.
    """
    if ell < 1:
        raise BadParameters(f"ell must be >= 1, got {ell}")
    _require_pointwise(problem)
    if not problem.boundary.terms:
        return 0.0
    dims = dims or CriteriaOptions().dims
    discretization = discretize(problem, dims, options)
    v = GridFunction.ones(problem.n, dims)
    for _ in range(ell):
        v = discretization.apply_abs_C(v)
    return v.sup_norm()


def _weight_maximum(problem: HyperbolicProblem, options: CriteriaOptions) -> float:
    """max_{j,x,t} c_j(x_j, x, t) over the criteria grid."""
    discretization = discretize(problem, options.dims, options.operator)
    return max(
        float(np.max(discretization.bundle(j).terminal_weight)) for j in range(problem.n)
    )


def _footprint(problem: HyperbolicProblem, options: CriteriaOptions) -> np.ndarray:
    """Sample times plus every time at which R is read by the discrete C."""
    discretization = discretize(problem, options.dims, options.operator)
    times = [options.sample_times()]
    times.extend(discretization.bundle(j).terminal_times().ravel() for j in range(problem.n))
    return np.concatenate(times)


def boundary_norm(problem: HyperbolicProblem, options: Optional[CriteriaOptions] = None) -> float:
    """||R|| = sup_t max_j sum over the terms of row j of |w(t)|."""
    options = options or CriteriaOptions()
    _require_pointwise(problem)
    return problem.boundary.norm(_footprint(problem, options))


def check_sufficient_l1(
    problem: HyperbolicProblem, options: Optional[CriteriaOptions] = None
) -> CriterionVerdict:
    options = options or CriteriaOptions()
    norm_r = boundary_norm(problem, options)
    weight_max = _weight_maximum(problem, options)
    value = norm_r * weight_max
    return CriterionVerdict.from_margin(
        "SUFF_L1",
        1.0 - value,
        grid=options.grid_info(),
        details={"value": value, "boundary_norm": norm_r, "weight_max": weight_max},
    )


def check_sufficient_l2(
    problem: HyperbolicProblem, options: Optional[CriteriaOptions] = None
) -> CriterionVerdict:
    """||RC|| times the weight maximum, ||RC|| read off |C|1 at the boundary."""
    options = options or CriteriaOptions()
    _require_pointwise(problem)
    boundary = problem.boundary
    weight_max = _weight_maximum(problem, options)
    if not boundary.terms:
        norm_rc = 0.0
    else:
        discretization = discretize(problem, options.dims, options.operator)
        abs_c_one = discretization.apply_abs_C(GridFunction.ones(problem.n, options.dims))
        s = _footprint(problem, options)
        rows = np.zeros((problem.n, s.size))
        for term in boundary.terms:
            trace = abs_c_one.boundary_trace(term.col, term.side)
            rows[term.row] += np.abs(term.weight_at(s)) * interpolate_periodic(
                trace, s - term.delay
            )
        norm_rc = float(np.max(rows))
    value = norm_rc * weight_max
    return CriterionVerdict.from_margin(
        "SUFF_L2",
        1.0 - value,
        grid=options.grid_info(),
        details={"value": value, "rc_norm": norm_rc, "weight_max": weight_max},
    )


def _require_two_by_two(problem: HyperbolicProblem):
    if problem.n != 2 or problem.m != 1 or not isinstance(problem.boundary, TwoByTwoReflection):
        raise WrongShape(
            "the sharp criterion needs n=2, m=1 and a two_by_two_reflection boundary, "
            f"got n={problem.n}, m={problem.m}, {problem.boundary.kind}"
        )


def sharp_product(
    problem: HyperbolicProblem,
    t: np.ndarray,
    n_char: int = DEFAULT_N_CHAR,
) -> np.ndarray:
    """Phi(t): weight and reflection product picked up by one round trip 1 -> 0 -> 1."""
    _require_two_by_two(problem)
    t = np.asarray(t, dtype=float)
    tau_1, exponent_1 = march(problem, 0, 1.0, t, 0.0, n_char=n_char)
    tau_2, exponent_2 = march(problem, 1, 0.0, tau_1, 1.0, n_char=n_char)
    boundary = problem.boundary
    reflection = np.abs(
        boundary.p0(np.zeros_like(tau_1), tau_1) * boundary.p1(np.ones_like(tau_2), tau_2)
    )
    return np.exp(exponent_1 + exponent_2) * reflection


def check_2x2_sharp(
    problem: HyperbolicProblem, options: Optional[CriteriaOptions] = None
) -> CriterionVerdict:
    """min_t |Phi(t) - 1| > tol_sharp on the samples.

    Phi is continuous and periodic, so a sign change of Phi - 1 between neighbouring
    samples (the last one wrapping to the first) means Phi = 1 somewhere in between;
    the distance is then 0.
    """
    options = options or CriteriaOptions()
    phi = sharp_product(problem, options.sample_times(), n_char=options.operator.n_char)
    offset = phi - 1.0
    sampled_distance = float(np.min(np.abs(offset)))
    crossing = bool(np.any(offset * np.roll(offset, -1) < 0.0))
    distance = 0.0 if crossing else sampled_distance
    return CriterionVerdict.from_margin(
        "TWO_BY_TWO_SHARP",
        distance - options.tol_sharp,
        grid=options.grid_info(with_dims=False),
        details={
            "phi_min": float(np.min(phi)),
            "phi_max": float(np.max(phi)),
            "distance": distance,
            "sampled_distance": sampled_distance,
            "crossing": crossing,
            "tol_sharp": options.tol_sharp,
        },
    )


def _outgoing(problem: HyperbolicProblem, j: int, t: np.ndarray, n_char: int, forward: bool):
    """omega and c along component j between the two ends of [0, 1].

    forward: from 1 - x_j to x_j (the S_j direction); otherwise from x_j to 1 - x_j.
    """
    x_j = float(problem.x_side(j))
    start, end = (1.0 - x_j, x_j) if forward else (x_j, 1.0 - x_j)
    omega, exponent = march(problem, j, start, t, end, n_char=n_char)
    return omega, np.exp(exponent)


def check_Sj(
    problem: HyperbolicProblem, options: Optional[CriteriaOptions] = None
) -> CriterionVerdict:
    """S_j(t) = c_j(x_j, 1 - x_j, t) sum_k |p_jk(omega_j(x_j, 1 - x_j, t))| < 1."""
    options = options or CriteriaOptions()
    t = options.sample_times()
    boundary = problem.boundary
    boundary.reflection_matrix(t[:1])
    maxima = []
    for j in range(problem.n):
        omega, weight = _outgoing(problem, j, t, options.operator.n_char, forward=True)
        p = boundary.reflection_matrix(omega)
        maxima.append(float(np.max(weight * np.sum(np.abs(p[:, j, :]), axis=-1))))
    worst = max(maxima)
    return CriterionVerdict.from_margin(
        "SJ_MAX",
        1.0 - worst,
        grid=options.grid_info(with_dims=False),
        details={"s_max": worst, "s_max_per_component": maxima},
    )


def q_matrix(
    problem: HyperbolicProblem, t: np.ndarray, n_char: int = DEFAULT_N_CHAR
) -> np.ndarray:
    """Q(t)_jk = p_jk(t) / c_j(1 - x_j, x_j, t), shape (len(t), n, n)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    p = problem.boundary.reflection_matrix(t)
    weights = np.empty((t.size, problem.n))
    for j in range(problem.n):
        _, weights[:, j] = _outgoing(problem, j, t, n_char, forward=False)
    return p / weights[:, :, None]


def check_Q_inverse(
    problem: HyperbolicProblem, options: Optional[CriteriaOptions] = None
) -> CriterionVerdict:
    options = options or CriteriaOptions()
    t = options.sample_times()
    q = q_matrix(problem, t, n_char=options.operator.n_char)
    scale = np.max(np.sum(np.abs(q), axis=-1), axis=-1)
    det = np.linalg.det(q)
    singular = np.abs(det) <= options.eps_det_rel * scale ** problem.n
    if np.any(singular):
        t_bad = float(t[np.argmax(singular)])
        raise QSingular(f"Q(t) is singular at t = {t_bad:.6f}", t=t_bad)
    inverse_norm = np.max(np.sum(np.abs(np.linalg.inv(q)), axis=-1), axis=-1)
    worst = float(np.max(inverse_norm))
    return CriterionVerdict.from_margin(
        "Q_INVERSE",
        1.0 - worst,
        grid=options.grid_info(with_dims=False),
        details={"q_inverse_norm": worst},
    )


class CNormCriterion(ResonanceCriterion):
    def __init__(self, ell: int, options: CriteriaOptions):
        self.ell = ell
        self.options = options
        self.criterion_id = f"CL_NORM({ell})"

    def evaluate(self, problem: HyperbolicProblem) -> CriterionVerdict:
        norm = estimate_C_power_norm(problem, self.ell, self.options.dims, self.options.operator)
        return CriterionVerdict.from_margin(
            self.criterion_id,
            1.0 - norm,
            grid=self.options.grid_info(),
            details={"ell": self.ell, "norm": norm},
        )


class FunctionCriterion(ResonanceCriterion):
    """Adapter turning a check_* function into a ResonanceCriterion."""

    def __init__(self, criterion_id: str, check, options: CriteriaOptions):
        self.criterion_id = criterion_id
        self.check = check
        self.options = options

    def evaluate(self, problem: HyperbolicProblem) -> CriterionVerdict:
        return self.check(problem, self.options)


def default_criteria(options: CriteriaOptions) -> List[ResonanceCriterion]:
    criteria: List[ResonanceCriterion] = [
        CNormCriterion(ell, options) for ell in range(1, options.ell_max + 1)
    ]
    criteria.extend(
        FunctionCriterion(criterion_id, check, options)
        for criterion_id, check in (
            ("SUFF_L1", check_sufficient_l1),
            ("SUFF_L2", check_sufficient_l2),
            ("TWO_BY_TWO_SHARP", check_2x2_sharp),
            ("SJ_MAX", check_Sj),
            ("Q_INVERSE", check_Q_inverse),
        )
    )
    return criteria


def _evaluate_safely(criterion: ResonanceCriterion, problem: HyperbolicProblem) -> CriterionVerdict:
    try:
        return criterion.evaluate(problem)
    except (WrongShape, UnsupportedBoundary, QSingular) as err:
        logger.info(f"{criterion.criterion_id} not applicable to {problem.name}: {err}")
        return CriterionVerdict.inapplicable(criterion.criterion_id, notes=str(err))


def overall_verdict(verdicts: List[CriterionVerdict]) -> str:
    for verdict in verdicts:
        if verdict.criterion == "TWO_BY_TWO_SHARP" and verdict.applicable and not verdict.holds:
            return Overall.RESONANT_2X2
    if any(verdict.holds for verdict in verdicts):
        return Overall.NON_RESONANT
    return Overall.INCONCLUSIVE


def full_report(
    problem: HyperbolicProblem,
    options: Optional[CriteriaOptions] = None,
    validation_grid: ValidationGridSpec = ValidationGridSpec(),
) -> ResonanceReport:
    """Evaluate every criterion (fixed order) and the factorization condition."""
    options = options or CriteriaOptions()
    criteria = default_criteria(options)
    if options.max_workers > 1:
        with ThreadPoolExecutor(max_workers=options.max_workers) as executor:
            verdicts = list(executor.map(lambda c: _evaluate_safely(c, problem), criteria))
    else:
        verdicts = [_evaluate_safely(criterion, problem) for criterion in criteria]

    factorization = None
    violated = False
    if problem.n >= 2:
        report = check_factorization(problem, validation_grid, strict=False)
        factorization = report.to_dict()
        violated = not report.passed
    overall = overall_verdict(verdicts)
    logger.info(f"{problem.name}: overall verdict {overall} (factorization violated: {violated})")
    return ResonanceReport(
        verdicts=verdicts,
        overall=overall,
        factorization_violated=violated,
        factorization=factorization,
    )
