"""Command-line front end: periodic-hyperbolic <subcommand> [options].

Exit status is 0 on success, 2 when a diagnosis was made correctly but the
problem is not uniquely solvable (Diverged, Singular, Resonant2x2), 1 on errors.
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .characteristics import DEFAULT_N_CHAR, trace, weights
from .dataclass import GridDims, GridFunction, Overall, SolveStatus
from .errors import BadParameters, PeriodicHyperbolicError
from .fredholm.engine import PeriodicBVPRunner, PeriodicBVPRunnerArguments, default_thread_count
from .fredholm.modules import scenarios
from .fredholm.modules.nonresonance import CriteriaOptions, full_report
from .fredholm.modules.solver import STRATEGIES, SolveOptions, kernel_analysis, solve
from .operators import DEFAULT_DENSE_CAP, OperatorOptions
from .problem import HyperbolicProblem
from .utils import FileIOHelper, makeStringRed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DIAGNOSED = 2

LOG_FORMAT = "%(name)s : %(levelname)-8s : %(message)s"


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with status 1; status 2 is reserved for diagnosed resonance."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, makeStringRed(f"{self.prog}: error: {message}") + "\n")


def _parse_assignments(items: Optional[Sequence[str]]) -> Dict[str, Any]:
    params = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise BadParameters(f"expected NAME=VALUE, got {item!r}")
        try:
            params[name.strip()] = float(value)
        except ValueError:
            # profile expression; the preset decides whether it takes one
            params[name.strip()] = value.strip()
    return params


def _parse_range(text: str) -> Tuple[float, float]:
    try:
        start, stop = (float(part) for part in text.split(","))
    except ValueError as err:
        raise BadParameters(f"expected START,STOP, got {text!r}") from err
    return start, stop


def _load_problem(args) -> Tuple[HyperbolicProblem, Optional[scenarios.Scenario]]:
    if args.problem is not None:
        if args.set:
            raise BadParameters("--set only applies to presets")
        return HyperbolicProblem.load(args.problem), None
    scenario = scenarios.build(args.preset, _parse_assignments(args.set))
    for note in scenario.notes:
        logger.info(f"{args.preset}: {note}")
    return scenario.problem, scenario


def _operator_options(args) -> OperatorOptions:
    return OperatorOptions(
        n_char=args.n_char,
        interpolation=args.interpolation,
        max_workers=args.threads,
    )


def _write_report(report: Any, path: str):
    FileIOHelper.dump_json(report, FileIOHelper.ensure_parent(path), deterministic=True)
    logger.info(f"report written to {path}")


def _print_table(rows: List[Dict[str, Any]], title: str):
    print(f"***** {title} *****")
    if rows:
        print(pd.DataFrame(rows).to_string(index=False))


def cmd_solve(args) -> int:
    problem, scenario = _load_problem(args)
    options = SolveOptions(
        strategy=args.strategy,
        tol_residual=args.tol,
        max_iters=args.max_iters,
        dense_cap=args.dense_cap,
        operator=_operator_options(args),
        show_progress=args.progress,
    )
    if args.forcing is not None:
        forcing = GridFunction.from_csv(args.forcing)
    else:
        forcing = GridFunction.from_callables(problem.f, args.grid)
    outcome = solve(problem, forcing, options)
    report = outcome.to_dict()
    report["grid"] = forcing.dims.to_dict()
    if scenario is not None and scenario.preset.exact_builder is not None:
        exact = GridFunction.from_callables(scenario.exact_solution(), forcing.dims)
        report["max_error"] = (outcome.solution - exact).sup_norm()
    if args.out is not None:
        outcome.solution.to_csv(FileIOHelper.ensure_parent(args.out))
    _write_report(report, args.report)
    _print_table(
        [
            {
                "problem": problem.name,
                "strategy": outcome.strategy,
                "status": outcome.status,
                "iterations": outcome.iterations,
                "residual": f"{outcome.residual_sup:.3e}",
            }
        ],
        "Solve",
    )
    return EXIT_OK if outcome.status == SolveStatus.CONVERGED else EXIT_DIAGNOSED


def _criteria_options(args) -> CriteriaOptions:
    return CriteriaOptions(
        ell_max=args.ell,
        t_samples=args.t_samples,
        dims=args.grid,
        operator=_operator_options(args),
        max_workers=args.threads,
    )


def _resonance_entries(report) -> List[Dict[str, Any]]:
    """One {criterion, holds, margin, details} entry per criterion, then the factorization."""
    entries = [verdict.to_dict() for verdict in report.verdicts]
    if report.factorization is not None:
        entries.append(
            {
                "criterion": "FACTORIZATION",
                "holds": not report.factorization_violated,
                "margin": report.factorization["tol_factor"] - report.factorization["defect"],
                "applicable": True,
                "details": report.factorization,
            }
        )
    return entries


def cmd_check(args) -> int:
    problem, _ = _load_problem(args)
    report = full_report(problem, _criteria_options(args))
    _write_report(_resonance_entries(report), args.report)
    _print_table(
        [
            {
                "criterion": verdict.criterion,
                "applicable": verdict.applicable,
                "holds": verdict.holds,
                "margin": "-" if verdict.margin is None else f"{verdict.margin:.4e}",
            }
            for verdict in report.verdicts
        ],
        f"Non-resonance criteria for {problem.name}",
    )
    print(f"overall: {report.overall}")
    if report.factorization_violated:
        print(makeStringRed("factorization condition b_jk = b~_jk (a_k - a_j) is violated"))
    return EXIT_DIAGNOSED if report.overall == Overall.RESONANT_2X2 else EXIT_OK


def cmd_kernel(args) -> int:
    problem, _ = _load_problem(args)
    estimate = kernel_analysis(
        problem,
        args.grid,
        sigma_cut=args.sigma_cut,
        options=_operator_options(args),
        dense_cap=args.dense_cap,
        sigma_cut_rel=args.sigma_cut_rel,
        include_coupling=not args.boundary_only,
    )
    report = estimate.to_dict()
    report["grid"] = args.grid.to_dict()
    report["operator"] = "I - C" if args.boundary_only else "I - C - B"
    if args.vectors_dir is not None:
        os.makedirs(args.vectors_dir, exist_ok=True)
        for index, vector in enumerate(estimate.kernel_vectors):
            vector.to_csv(os.path.join(args.vectors_dir, f"kernel_{index}.csv"))
        for index, vector in enumerate(estimate.cokernel_vectors):
            vector.to_csv(os.path.join(args.vectors_dir, f"cokernel_{index}.csv"))
    _write_report(report, args.report)
    _print_table(
        [{"index": i, "sigma": f"{s:.6e}"} for i, s in enumerate(estimate.singular_values_tail)],
        f"Smallest singular values of {report['operator']} ({problem.name})",
    )
    print(f"sigma_max {estimate.sigma_max:.6e}, cut {estimate.sigma_cut:.3e}, estimated kernel dimension {estimate.estimated_dim}")
    return EXIT_DIAGNOSED if estimate.estimated_dim > 0 else EXIT_OK


def cmd_scenario(args) -> int:
    if args.list:
        presets = scenarios.list_presets()
        if args.report is not None:
            _write_report(presets, args.report)
        _print_table(
            [
                {"id": p["id"], "parameters": ", ".join(sorted(p["parameters"])), "description": p["description"]}
                for p in presets
            ],
            "Presets",
        )
        return EXIT_OK
    if args.preset_id is None:
        raise BadParameters("give a preset id or --list")
    scenario = scenarios.build(args.preset_id, _parse_assignments(args.set))
    if args.out is None:
        raise BadParameters("--out is required to write a problem file")
    scenario.problem.save(FileIOHelper.ensure_parent(args.out))
    print(f"wrote {scenario.problem.name} ({scenario.preset.preset_id}, {scenario.params}) to {args.out}")
    return EXIT_OK


def cmd_trace(args) -> int:
    problem, _ = _load_problem(args)
    if not 0 <= args.component < problem.n:
        raise BadParameters(f"component must lie in [0, {problem.n - 1}]")
    target = float(problem.x_side(args.component)) if args.to is None else args.to
    path = trace(problem, args.component, args.x, args.t, target, n_char=args.n_char)
    path.to_frame().to_csv(FileIOHelper.ensure_parent(args.out), index=False, float_format="%.17g")
    weight = weights(problem, args.component, target, args.x, args.t, n_char=args.n_char)
    print(
        f"component {args.component}: ({args.x}, {args.t}) -> xi={target}, omega={path.terminal:.12g}, "
        f"c={weight.c:.12g}, d={weight.d:.12g}, {path.xi.size - 1} RK4 steps"
    )
    return EXIT_OK


def _sweep_point(args, fixed: Dict[str, float], value: float, criteria: CriteriaOptions) -> Dict[str, Any]:
    scenario = scenarios.build(args.preset, {**fixed, args.param: value})
    report = full_report(scenario.problem, criteria)
    point = {
        "value": value,
        "overall": report.overall,
        "factorization_violated": report.factorization_violated,
        "margins": {verdict.criterion: verdict.margin for verdict in report.verdicts},
    }
    if not args.no_kernel:
        estimate = kernel_analysis(
            scenario.problem,
            args.grid,
            options=criteria.operator,
            dense_cap=args.dense_cap,
            include_coupling=not args.boundary_only,
        )
        point["sigma_min"] = estimate.sigma_min
        point["sigma_max"] = estimate.sigma_max
        point["sigma_ratio"] = estimate.sigma_min / estimate.sigma_max
    return point


def cmd_sweep(args) -> int:
    if args.param not in scenarios.sweepable_parameters(args.preset):
        raise BadParameters(
            f"{args.param!r} is not a scalar parameter of {args.preset}; "
            f"choose from {list(scenarios.sweepable_parameters(args.preset))}"
        )
    if args.steps < 1:
        raise BadParameters("--steps must be >= 1")
    fixed = _parse_assignments(args.set)
    start, stop = _parse_range(args.range)
    values = [float(v) for v in np.linspace(start, stop, args.steps)]
    # the points run in parallel, each one single-threaded
    criteria = CriteriaOptions(
        ell_max=args.ell,
        t_samples=args.t_samples,
        dims=args.grid,
        operator=OperatorOptions(n_char=args.n_char, interpolation=args.interpolation),
    )
    points: List[Optional[Dict[str, Any]]] = [None] * len(values)
    with ThreadPoolExecutor(max_workers=args.threads) as executor:
        futures = {
            executor.submit(_sweep_point, args, fixed, value, criteria): index
            for index, value in enumerate(values)
        }
        for future in tqdm(futures, desc=f"sweep {args.param}", disable=not args.progress):
            points[futures[future]] = future.result()

    report = {
        "preset": args.preset,
        "parameter": args.param,
        "fixed": fixed,
        "grid": args.grid.to_dict(),
        "operator": "I - C" if args.boundary_only else "I - C - B",
        "points": points,
    }
    _write_report(report, args.report)
    rows = []
    for point in points:
        row = {args.param: f"{point['value']:.6g}", "overall": point["overall"]}
        if "sigma_ratio" in point:
            row["sigma_min/sigma_max"] = f"{point['sigma_ratio']:.3e}"
        rows.append(row)
    _print_table(rows, f"Sweep of {args.param} for {args.preset}")
    return EXIT_OK


def cmd_run(args) -> int:
    problem, _ = _load_problem(args)
    runner_args = PeriodicBVPRunnerArguments(
        output_dir=args.output_dir,
        n_x=args.grid.n_x,
        n_t=args.grid.n_t,
        kernel_n_x=args.kernel_grid.n_x,
        kernel_n_t=args.kernel_grid.n_t,
        strategy=args.strategy,
        tol_residual=args.tol,
        max_iters=args.max_iters,
        dense_cap=args.dense_cap,
        n_char=args.n_char,
        interpolation=args.interpolation,
        ell_max=args.ell,
        t_samples=args.t_samples,
        max_thread_num=args.threads,
        show_progress=args.progress,
    )
    runner = PeriodicBVPRunner(runner_args)
    results = runner.run(
        problem,
        do_resonance_check=not args.skip_check,
        do_kernel_analysis=args.kernel,
    )
    runner.post_run()
    runner.summary()
    print(f"artifacts in {runner.artifact_dir}")
    diagnosed = results["solve"].status != SolveStatus.CONVERGED
    if "resonance" in results:
        diagnosed = diagnosed or results["resonance"].overall == Overall.RESONANT_2X2
    return EXIT_DIAGNOSED if diagnosed else EXIT_OK


def _add_problem_source(parser: argparse.ArgumentParser):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--problem", help="Problem file (JSON).")
    source.add_argument("--preset", choices=sorted(scenarios.PRESETS), help="Built-in preset id.")
    parser.add_argument(
        "--set", action="append", metavar="NAME=VALUE", help="Override a preset parameter (repeatable)."
    )


def _add_operator_options(parser: argparse.ArgumentParser):
    parser.add_argument("--n-char", type=int, default=DEFAULT_N_CHAR, help="RK4 steps per unit length.")
    parser.add_argument("--interpolation", choices=("linear", "cubic"), default="linear")
    parser.add_argument(
        "--threads",
        type=int,
        default=default_thread_count(),
        help="Worker threads (default: $PERIODIC_HYPERBOLIC_THREADS or 1).",
    )


def _grid(text: str) -> GridDims:
    try:
        return GridDims.parse(text)
    except (ValueError, PeriodicHyperbolicError) as err:
        raise argparse.ArgumentTypeError(str(err)) from err


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="periodic-hyperbolic",
        description="Time-periodic boundary value problems for 1-D first-order hyperbolic systems.",
    )
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level.")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    p = subparsers.add_parser("solve", help="Solve u = Cu + Bu + Ff on a grid.")
    _add_problem_source(p)
    _add_operator_options(p)
    p.add_argument("--grid", type=_grid, default=GridDims(101, 128), help="NX,NT")
    p.add_argument("--strategy", choices=STRATEGIES, default="auto")
    p.add_argument("--tol", type=float, default=1e-8, help="Residual tolerance.")
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--dense-cap", type=int, default=DEFAULT_DENSE_CAP)
    p.add_argument("--forcing", help="Sampled forcing CSV (default: the problem's forcing).")
    p.add_argument("--out", help="Solution CSV (a .json shape sidecar is written next to it).")
    p.add_argument("--report", default="solve_report.json")
    p.add_argument("--progress", action="store_true", help="Show a progress bar.")
    p.set_defaults(handler=cmd_solve)

    p = subparsers.add_parser("check", help="Evaluate the non-resonance criteria.")
    _add_problem_source(p)
    _add_operator_options(p)
    p.add_argument("--ell", type=int, default=3, help="Largest l of the ||C^l|| < 1 criterion.")
    p.add_argument("--t-samples", type=int, default=512)
    p.add_argument("--grid", type=_grid, default=GridDims(41, 64), help="NX,NT of the |C|^l 1 grid.")
    p.add_argument("--report", default="resonance.json")
    p.set_defaults(handler=cmd_check)

    p = subparsers.add_parser("kernel", help="SVD kernel analysis of the assembled operator.")
    _add_problem_source(p)
    _add_operator_options(p)
    p.add_argument("--grid", type=_grid, default=GridDims(41, 48), help="NX,NT")
    p.add_argument("--sigma-cut", type=float, help="Absolute singular value cut.")
    p.add_argument("--sigma-cut-rel", type=float, default=1e-6)
    p.add_argument("--dense-cap", type=int, default=DEFAULT_DENSE_CAP)
    p.add_argument("--boundary-only", action="store_true", help="Analyse I - C instead of I - C - B.")
    p.add_argument("--vectors-dir", help="Write kernel and cokernel vectors as CSV here.")
    p.add_argument("--report", default="kernel.json")
    p.set_defaults(handler=cmd_kernel)

    p = subparsers.add_parser("scenario", help="List presets or write a preset problem file.")
    p.add_argument("preset_id", nargs="?", help="Preset id.")
    p.add_argument("--list", action="store_true", help="List the presets.")
    p.add_argument("--set", action="append", metavar="NAME=VALUE")
    p.add_argument("--out", help="Problem file to write.")
    p.add_argument("--report", help="With --list, also write the preset table as JSON.")
    p.set_defaults(handler=cmd_scenario)

    p = subparsers.add_parser("trace", help="Dump one characteristic as CSV (xi, omega).")
    _add_problem_source(p)
    p.add_argument("--component", type=int, default=0, help="0-based component j.")
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--to", type=float, help="Target xi (default: the boundary end x_j).")
    p.add_argument("--n-char", type=int, default=DEFAULT_N_CHAR)
    p.add_argument("--out", default="trace.csv")
    p.set_defaults(handler=cmd_trace)

    p = subparsers.add_parser("sweep", help="Sweep one scalar preset parameter.")
    p.add_argument("--preset", choices=sorted(scenarios.PRESETS), required=True)
    p.add_argument("--param", required=True, help="Parameter to sweep.")
    p.add_argument("--range", required=True, help="START,STOP")
    p.add_argument("--steps", type=int, default=21)
    p.add_argument("--set", action="append", metavar="NAME=VALUE", help="Fixed parameters.")
    p.add_argument("--grid", type=_grid, default=GridDims(21, 32), help="NX,NT of the dense analysis.")
    p.add_argument("--ell", type=int, default=2)
    p.add_argument("--t-samples", type=int, default=256)
    p.add_argument("--dense-cap", type=int, default=DEFAULT_DENSE_CAP)
    p.add_argument("--boundary-only", action="store_true", help="Singular values of I - C only.")
    p.add_argument("--no-kernel", action="store_true", help="Criteria only, skip the SVD.")
    p.add_argument("--n-char", type=int, default=64)
    p.add_argument("--interpolation", choices=("linear", "cubic"), default="linear")
    p.add_argument("--threads", type=int, default=default_thread_count())
    p.add_argument("--progress", action="store_true")
    p.add_argument("--report", default="sweep.json")
    p.set_defaults(handler=cmd_sweep)

    p = subparsers.add_parser("run", help="Full pipeline into an output directory.")
    _add_problem_source(p)
    _add_operator_options(p)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--grid", type=_grid, default=GridDims(101, 128))
    p.add_argument("--kernel-grid", type=_grid, default=GridDims(41, 48))
    p.add_argument("--strategy", choices=STRATEGIES, default="auto")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--dense-cap", type=int, default=DEFAULT_DENSE_CAP)
    p.add_argument("--ell", type=int, default=3)
    p.add_argument("--t-samples", type=int, default=512)
    p.add_argument("--skip-check", action="store_true", help="Skip the non-resonance criteria.")
    p.add_argument("--kernel", action="store_true", help="Also run the dense kernel analysis.")
    p.add_argument("--progress", action="store_true")
    p.set_defaults(handler=cmd_run)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        return args.handler(args)
    except (PeriodicHyperbolicError, OSError, ValueError, AssertionError) as err:
        print(makeStringRed(f"error: {err}"), file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
