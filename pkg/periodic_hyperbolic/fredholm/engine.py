import dataclasses
import logging
import os
from dataclasses import dataclass, field
from typing import Optional

from .modules.callback import BaseCallbackHandler
from .modules.nonresonance import CriteriaOptions, full_report
from .modules.solver import SolveOptions, kernel_analysis, solve
from ..dataclass import GridDims, GridFunction, KernelEstimate, ResonanceReport, SolveOutcome, ValidationReport
from ..errors import DenseCapExceeded, ProblemFormatError
from ..interface import Engine
from ..logging_wrapper import LoggingWrapper
from ..operators import OperatorOptions, collect_and_reset_usage, peek_usage
from ..problem import HyperbolicProblem, ValidationGridSpec, validate
from ..result_manager import ResultManager
from ..utils import makeStringRed

logger = logging.getLogger(__name__)

THREADS_ENV = "PERIODIC_HYPERBOLIC_THREADS"


def default_thread_count() -> int:
    """Worker count from PERIODIC_HYPERBOLIC_THREADS, 1 when unset or invalid."""
    value = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(value))
    except ValueError:
        if value:
            logger.warning(f"ignoring {THREADS_ENV}={value!r}, expected a positive integer")
        return 1


@dataclass
class PeriodicBVPRunnerArguments:
    """Arguments for controlling the periodic BVP pipeline."""

    output_dir: str = field(
        metadata={"help": "Output directory for the results."},
    )
    n_x: int = field(
        default=101,
        metadata={"help": "Number of x-grid nodes of the solve grid (including both ends)."},
    )
    n_t: int = field(
        default=128,
        metadata={"help": "Number of t-grid nodes of the solve grid on [0, 2 pi)."},
    )
    kernel_n_x: int = field(
        default=41,
        metadata={"help": "x-grid nodes of the dense kernel analysis grid."},
    )
    kernel_n_t: int = field(
        default=48,
        metadata={"help": "t-grid nodes of the dense kernel analysis grid."},
    )
    strategy: str = field(
        default="auto",
        metadata={"help": "Solve strategy: auto, fixed_point, neumann_outer or dense_direct."},
    )
    tol_residual: float = field(
        default=1e-8,
        metadata={"help": "Stop when the nodal sup-norm residual drops below this value."},
    )
    max_iters: int = field(
        default=500,
        metadata={"help": "Maximum number of outer iterations of the iterative strategies."},
    )
    dense_cap: int = field(
        default=20000,
        metadata={"help": "Largest nodal dimension n * N_x * N_t assembled densely."},
    )
    sigma_cut_rel: float = field(
        default=1e-6,
        metadata={"help": "Singular values below sigma_cut_rel * sigma_max count as kernel."},
    )
    n_char: int = field(
        default=256,
        metadata={"help": "RK4 steps per unit length along characteristics (even)."},
    )
    interpolation: str = field(
        default="linear",
        metadata={"help": "Periodic t-interpolation of grid functions: linear or cubic."},
    )
    quadrature: str = field(
        default="simpson",
        metadata={"help": "Quadrature of the B and F integrals: simpson or trapezoid."},
    )
    ell_max: int = field(
        default=3,
        metadata={"help": "Largest power l tested by the ||C^l|| < 1 criterion."},
    )
    t_samples: int = field(
        default=512,
        metadata={"help": "Number of t samples used by the pointwise criteria."},
    )
    tol_sharp: float = field(
        default=1e-6,
        metadata={"help": "Margin required by the sharp 2x2 criterion |Phi(t) - 1| > tol."},
    )
    max_thread_num: int = field(
        default_factory=default_thread_count,
        metadata={
            "help": "Maximum number of threads to use. Defaults to $PERIODIC_HYPERBOLIC_THREADS or 1."
        },
    )
    show_progress: bool = field(
        default=False,
        metadata={"help": "Show tqdm progress bars for iterations."},
    )

    @property
    def dims(self) -> GridDims:
        return GridDims(self.n_x, self.n_t)

    @property
    def kernel_dims(self) -> GridDims:
        return GridDims(self.kernel_n_x, self.kernel_n_t)

    def operator_options(self) -> OperatorOptions:
        return OperatorOptions(
            n_char=self.n_char,
            interpolation=self.interpolation,
            quadrature=self.quadrature,
            max_workers=self.max_thread_num,
        )

    def solve_options(self) -> SolveOptions:
        return SolveOptions(
            strategy=self.strategy,
            tol_residual=self.tol_residual,
            max_iters=self.max_iters,
            dense_cap=self.dense_cap,
            sigma_cut_rel=self.sigma_cut_rel,
            certificate_max_ell=self.ell_max,
            operator=self.operator_options(),
            show_progress=self.show_progress,
        )

    def criteria_options(self) -> CriteriaOptions:
        return CriteriaOptions(
            ell_max=self.ell_max,
            t_samples=self.t_samples,
            tol_sharp=self.tol_sharp,
            operator=self.operator_options(),
            max_workers=self.max_thread_num,
        )


class PeriodicBVPRunner(Engine):
    """Validation, resonance check, solve and kernel analysis of one problem."""

    def __init__(self, args: PeriodicBVPRunnerArguments, validation_grid: ValidationGridSpec = ValidationGridSpec()):
        super().__init__()
        self.args = args
        self.validation_grid = validation_grid
        self.result_manager = ResultManager(base_dir=args.output_dir)
        self.logging_wrapper = LoggingWrapper(usage_source=peek_usage)
        self.problem: Optional[HyperbolicProblem] = None
        self.run_name: Optional[str] = None
        self.validation_report: Optional[ValidationReport] = None
        self.apply_decorators()

    def collect_and_reset_operator_usage(self):
        return collect_and_reset_usage()

    @property
    def artifact_dir(self) -> str:
        return self.result_manager.get_run_dir(self.run_name)

    def run_validation(self, callback_handler: BaseCallbackHandler = None) -> ValidationReport:
        with self.logging_wrapper.log_pipeline_stage("validation"):
            report = validate(self.problem, self.validation_grid)
        self.result_manager.save_result(self.run_name, "validation", report.to_dict())
        if not report.passed:
            failed = [check.name for check in report.checks if not check.passed]
            logger.warning(f"{self.problem.name}: validation failed for {failed}")
        if callback_handler is not None:
            callback_handler.on_validation_end(report=report)
        self.validation_report = report
        return report

    def run_resonance_check(self, callback_handler: BaseCallbackHandler = None) -> ResonanceReport:
        if callback_handler is not None:
            callback_handler.on_resonance_check_start()
        with self.logging_wrapper.log_pipeline_stage("resonance_check"):
            report = full_report(self.problem, self.args.criteria_options(), self.validation_grid)
        self.result_manager.save_result(self.run_name, "resonance", report.to_dict())
        if callback_handler is not None:
            callback_handler.on_resonance_check_end(report=report)
        return report

    def run_solve(
        self,
        forcing: Optional[GridFunction] = None,
        callback_handler: BaseCallbackHandler = None,
    ) -> SolveOutcome:
        assert self.validation_report is None or self.validation_report.get("speed_sign").passed, makeStringRed(
            f"{self.problem.name}: some speed a_j vanishes or changes sign, the characteristics are undefined."
        )
        with self.logging_wrapper.log_pipeline_stage("solve"):
            with self.logging_wrapper.log_event("sample_forcing"):
                if forcing is None:
                    forcing = GridFunction.from_callables(self.problem.f, self.args.dims)
            with self.logging_wrapper.log_event(self.args.strategy):
                outcome = solve(
                    self.problem,
                    forcing,
                    self.args.solve_options(),
                    callback_handler=callback_handler,
                )
        self.result_manager.save_grid_function(self.run_name, "solution", outcome.solution)
        report = outcome.to_dict()
        report["grid"] = forcing.dims.to_dict()
        self.result_manager.save_result(self.run_name, "solve_report", report)
        return outcome

    def run_kernel_analysis(self, callback_handler: BaseCallbackHandler = None) -> Optional[KernelEstimate]:
        with self.logging_wrapper.log_pipeline_stage("kernel_analysis"):
            try:
                estimate = kernel_analysis(
                    self.problem,
                    self.args.kernel_dims,
                    options=self.args.operator_options(),
                    dense_cap=self.args.dense_cap,
                    sigma_cut_rel=self.args.sigma_cut_rel,
                )
            except DenseCapExceeded as err:
                logger.error(f"kernel analysis skipped: {err}")
                return None
        report = estimate.to_dict()
        report["grid"] = self.args.kernel_dims.to_dict()
        self.result_manager.save_result(self.run_name, "kernel", report)
        if callback_handler is not None:
            callback_handler.on_kernel_analysis_end(estimate=estimate)
        return estimate

    def post_run(self):
        """
        Post-run operations, including:
        1. Dumping the run configuration (arguments and, when serializable, the problem).
        2. Dumping the stage timing log.
        """
        config_log = {"arguments": dataclasses.asdict(self.args)}
        try:
            config_log["problem"] = self.problem.to_dict()
        except ProblemFormatError:
            config_log["problem"] = {"name": self.problem.name, "n": self.problem.n, "m": self.problem.m}
        self.result_manager.save_result(self.run_name, "run_config", config_log)
        # timings are not deterministic, keep them out of the rounded reports
        self.result_manager.deterministic = False
        try:
            self.result_manager.save_result(
                self.run_name, "run_log", self.logging_wrapper.dump_logging_and_reset()
            )
        finally:
            self.result_manager.deterministic = True

    def run(
        self,
        problem: HyperbolicProblem,
        forcing: Optional[GridFunction] = None,
        do_validation: bool = True,
        do_resonance_check: bool = True,
        do_solve: bool = True,
        do_kernel_analysis: bool = False,
        callback_handler: BaseCallbackHandler = BaseCallbackHandler(),
    ):
        """
        Run the periodic BVP pipeline.

        Args:
            problem: The problem instance.
            forcing: Sampled forcing; problem.f is sampled on the solve grid when omitted.
            do_validation: If True, check the standing assumptions and write validation.json.
            do_resonance_check: If True, evaluate the non-resonance criteria and write resonance.json.
            do_solve: If True, solve and write solution.csv and solve_report.json.
            do_kernel_analysis: If True, run the dense SVD analysis and write kernel.json.
            callback_handler: A callback handler to handle the intermediate results.
        """
        assert do_validation or do_resonance_check or do_solve or do_kernel_analysis, makeStringRed(
            "No action is specified. Please set at least one of --do-validation, --do-resonance-check, "
            "--do-solve, --do-kernel-analysis"
        )
        self.problem = problem
        self.run_name = problem.name
        self.validation_report = None
        os.makedirs(self.artifact_dir, exist_ok=True)

        results = {}
        if do_validation:
            results["validation"] = self.run_validation(callback_handler=callback_handler)
        if do_resonance_check:
            results["resonance"] = self.run_resonance_check(callback_handler=callback_handler)
        if do_solve:
            results["solve"] = self.run_solve(forcing=forcing, callback_handler=callback_handler)
        if do_kernel_analysis:
            results["kernel"] = self.run_kernel_analysis(callback_handler=callback_handler)
        return results
