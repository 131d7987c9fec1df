"""Solvers for u = Cu + Bu + Ff and the kernel diagnostics of I - C - B."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Type

import numpy as np
import scipy.linalg
from tqdm import tqdm

from ...dataclass import GridDims, GridFunction, KernelEstimate, SolveOutcome, SolveStatus
from ...errors import BadParameters, DenseCapExceeded, NoConvergence, UnsupportedBoundary
from ...interface import ProblemSolver
from ...operators import (
    DEFAULT_DENSE_CAP,
    DiscretizedProblem,
    OperatorOptions,
    discretize,
    record_usage,
    solve_I_minus_C,
)
from ...problem import HyperbolicProblem
from .callback import BaseCallbackHandler
from .nonresonance import estimate_C_power_norm

logger = logging.getLogger(__name__)

STRATEGIES = ("auto", "fixed_point", "neumann_outer", "dense_direct")
TAIL_LENGTH = 10


@dataclass(frozen=True)
class SolveOptions:
    strategy: str = "auto"
    tol_residual: float = 1e-8
    max_iters: int = 500
    dense_cap: int = DEFAULT_DENSE_CAP
    divergence_factor: float = 1e6
    sigma_cut_rel: float = 1e-6
    certificate_max_ell: int = 3
    operator: OperatorOptions = field(default_factory=OperatorOptions)
    show_progress: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise BadParameters(f"unknown strategy {self.strategy!r}, expected one of {STRATEGIES}")
        if not self.tol_residual > 0:
            raise BadParameters("tol_residual must be positive")
        if self.max_iters < 1:
            raise BadParameters("max_iters must be >= 1")


def _residual_field(
    discretization: DiscretizedProblem, u: GridFunction, forcing_image: GridFunction
) -> GridFunction:
    return u - discretization.apply_C(u) - discretization.apply_B(u) - forcing_image


def residual(
    problem: HyperbolicProblem,
    u: GridFunction,
    f: GridFunction,
    options: Optional[OperatorOptions] = None,
) -> float:
    """||u - Cu - Bu - Ff||_inf over the grid nodes."""
    discretization = discretize(problem, u.dims, options)
    return _residual_field(discretization, u, discretization.apply_F(f)).sup_norm()


def _iterations(options: SolveOptions, description: str):
    iterations = range(1, options.max_iters + 1)
    if options.show_progress:
        return tqdm(iterations, desc=description)
    return iterations


class FixedPointSolver(ProblemSolver):
    """u <- Cu + Bu + Ff, started from u = 0."""

    strategy = "fixed_point"

    def solve(self, discretization: DiscretizedProblem, forcing: GridFunction) -> SolveOutcome:
        options = self.options
        forcing_image = discretization.apply_F(forcing)
        u = GridFunction.zeros(discretization.problem.n, discretization.dims)
        scale = None
        history = []
        iteration = 0
        for iteration in _iterations(options, self.strategy):
            image = discretization.apply_C(u) + discretization.apply_B(u) + forcing_image
            res = (u - image).sup_norm()
            history.append(res)
            if self.callback_handler is not None:
                self.callback_handler.on_iteration_end(iteration=iteration, residual=res)
            if res <= options.tol_residual:
                return SolveOutcome(SolveStatus.CONVERGED, u, res, iteration, self.strategy, history=history)
            if scale is None:
                scale = max(image.sup_norm(), np.finfo(float).tiny)
            elif image.sup_norm() > options.divergence_factor * scale:
                logger.warning(f"fixed-point iterates grew beyond {options.divergence_factor:.0e}x")
                return SolveOutcome(SolveStatus.DIVERGED, image, res, iteration, self.strategy, history=history)
            u = image
        return SolveOutcome(SolveStatus.DIVERGED, u, history[-1], iteration, self.strategy, history=history)


class NeumannOuterSolver(ProblemSolver):
    """u <- (I - C)^{-1}(Bu + Ff), the inverse applied by the Neumann series."""

    strategy = "neumann_outer"

    def solve(self, discretization: DiscretizedProblem, forcing: GridFunction) -> SolveOutcome:
        options = self.options
        problem = discretization.problem
        forcing_image = discretization.apply_F(forcing)
        u = GridFunction.zeros(problem.n, discretization.dims)
        scale = None
        history = []
        res = np.inf
        iteration = 0
        for iteration in _iterations(options, self.strategy):
            rhs = discretization.apply_B(u) + forcing_image
            try:
                u = solve_I_minus_C(problem, rhs, options.operator)
            except NoConvergence as err:
                logger.warning(f"inner Neumann series failed: {err}")
                return SolveOutcome(SolveStatus.DIVERGED, u, err.residual, iteration, self.strategy, history=history)
            res = _residual_field(discretization, u, forcing_image).sup_norm()
            history.append(res)
            if self.callback_handler is not None:
                self.callback_handler.on_iteration_end(iteration=iteration, residual=res)
            if res <= options.tol_residual:
                return SolveOutcome(SolveStatus.CONVERGED, u, res, iteration, self.strategy, history=history)
            if scale is None:
                scale = max(u.sup_norm(), np.finfo(float).tiny)
            elif u.sup_norm() > options.divergence_factor * scale:
                return SolveOutcome(SolveStatus.DIVERGED, u, res, iteration, self.strategy, history=history)
        return SolveOutcome(SolveStatus.DIVERGED, u, res, iteration, self.strategy, history=history)


def _normalize(vector: np.ndarray) -> np.ndarray:
    """Scale to sup-norm 1 with the entry of largest modulus positive."""
    peak = vector[np.argmax(np.abs(vector))]
    if peak == 0:
        return vector
    return vector / peak


def _svd(matrix: np.ndarray):
    record_usage("svd")
    return scipy.linalg.svd(matrix)


def _kernel_estimate(
    left: np.ndarray,
    sigma: np.ndarray,
    right_h: np.ndarray,
    sigma_cut: float,
    n: int,
    dims: GridDims,
) -> KernelEstimate:
    below = np.flatnonzero(sigma < sigma_cut)
    tail = sigma[-min(TAIL_LENGTH, sigma.size):]
    return KernelEstimate(
        singular_values_tail=[float(s) for s in tail],
        sigma_max=float(sigma[0]),
        sigma_cut=float(sigma_cut),
        estimated_dim=int(below.size),
        kernel_vectors=[
            GridFunction.from_flat(_normalize(right_h[i]), n, dims) for i in below
        ],
        cokernel_vectors=[
            GridFunction.from_flat(_normalize(left[:, i]), n, dims) for i in below
        ],
    )


class DenseDirectSolver(ProblemSolver):
    """SVD of the assembled I - C - B, solved by the (cut) pseudo-inverse."""

    strategy = "dense_direct"

    def solve(self, discretization: DiscretizedProblem, forcing: GridFunction) -> SolveOutcome:
        options = self.options
        problem, dims = discretization.problem, discretization.dims
        matrix = discretization.assemble_dense(dense_cap=options.dense_cap)
        zero = GridFunction.zeros(problem.n, dims)
        rhs = discretization.apply_F(forcing) + discretization.apply_C(zero)
        left, sigma, right_h = _svd(matrix)
        sigma_cut = options.sigma_cut_rel * sigma[0]
        estimate = _kernel_estimate(left, sigma, right_h, sigma_cut, problem.n, dims)
        keep = sigma >= sigma_cut
        coefficients = (left[:, keep].T @ rhs.flat()) / sigma[keep]
        u = GridFunction.from_flat(right_h[keep].T @ coefficients, problem.n, dims)
        res = residual(problem, u, forcing, options.operator)
        if estimate.estimated_dim > 0:
            logger.warning(
                f"{problem.name}: {estimate.estimated_dim} singular values below {sigma_cut:.3e}"
            )
            status = SolveStatus.SINGULAR
        elif res <= options.tol_residual:
            status = SolveStatus.CONVERGED
        else:
            status = SolveStatus.DIVERGED
        return SolveOutcome(status, u, res, 1, self.strategy, kernel_estimate=estimate, history=[res])


SOLVERS: Dict[str, Type[ProblemSolver]] = {
    solver.strategy: solver for solver in (FixedPointSolver, NeumannOuterSolver, DenseDirectSolver)
}


def has_contraction_certificate(problem: HyperbolicProblem, dims: GridDims, options: SolveOptions) -> bool:
    """True if ||C^l|| < 1 for some l <= certificate_max_ell."""
    try:
        for ell in range(1, options.certificate_max_ell + 1):
            if estimate_C_power_norm(problem, ell, dims, options.operator) < 1.0:
                logger.info(f"{problem.name}: ||C^{ell}|| < 1, Neumann inversion certified")
                return True
    except UnsupportedBoundary:
        return False
    return False


def solve(
    problem: HyperbolicProblem,
    f: Optional[GridFunction] = None,
    options: Optional[SolveOptions] = None,
    dims: Optional[GridDims] = None,
    callback_handler: Optional[BaseCallbackHandler] = None,
) -> SolveOutcome:
    """Solve the periodic problem with forcing f (sampled problem.f when omitted).

    strategy "auto" uses neumann_outer under a ||C^l|| < 1 certificate, otherwise
    dense_direct below the dense cap and fixed_point above it; a failed
    neumann_outer falls back to dense_direct when the cap allows.
    """
    options = options or SolveOptions()
    if f is None:
        if dims is None:
            raise BadParameters("either a forcing grid function or grid dims are required")
        f = GridFunction.from_callables(problem.f, dims)
    discretization = discretize(problem, f.dims, options.operator)
    callback_handler = callback_handler or BaseCallbackHandler()

    strategy = options.strategy
    fits_dense = f.dims.size(problem.n) <= options.dense_cap
    if strategy == "auto":
        if has_contraction_certificate(problem, f.dims, options):
            strategy = "neumann_outer"
        else:
            strategy = "dense_direct" if fits_dense else "fixed_point"
    if strategy == "dense_direct" and not fits_dense:
        raise DenseCapExceeded(
            f"{f.dims.size(problem.n)} unknowns exceed the dense cap of {options.dense_cap}"
        )

    callback_handler.on_solve_start(strategy=strategy)
    outcome = SOLVERS[strategy](options, callback_handler).solve(discretization, f)
    if (
        options.strategy == "auto"
        and strategy == "neumann_outer"
        and outcome.status == SolveStatus.DIVERGED
        and fits_dense
    ):
        logger.info("neumann_outer did not converge, falling back to dense_direct")
        outcome = DenseDirectSolver(options, callback_handler).solve(discretization, f)
    logger.info(
        f"{problem.name}: {outcome.strategy} -> {outcome.status} after {outcome.iterations} "
        f"iterations, residual {outcome.residual_sup:.3e}"
    )
    callback_handler.on_solve_end(outcome=outcome)
    return outcome


def kernel_analysis(
    problem: HyperbolicProblem,
    dims: GridDims,
    sigma_cut: Optional[float] = None,
    options: Optional[OperatorOptions] = None,
    dense_cap: int = DEFAULT_DENSE_CAP,
    sigma_cut_rel: float = 1e-6,
    include_coupling: bool = True,
) -> KernelEstimate:
    """SVD of the assembled I - C - B (or I - C): tail, kernel and cokernel vectors.

    sigma_cut defaults to sigma_cut_rel times the largest singular value.
    """
    discretization = discretize(problem, dims, options)
    matrix = discretization.assemble_dense(dense_cap=dense_cap, include_coupling=include_coupling)
    left, sigma, right_h = _svd(matrix)
    if sigma_cut is None:
        sigma_cut = sigma_cut_rel * sigma[0]
    estimate = _kernel_estimate(left, sigma, right_h, sigma_cut, problem.n, dims)
    logger.info(
        f"{problem.name}: sigma_max {estimate.sigma_max:.3e}, sigma_min {estimate.sigma_min:.3e}, "
        f"estimated kernel dimension {estimate.estimated_dim}"
    )
    return estimate
