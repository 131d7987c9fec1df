import math

import numpy as np
import numpy.testing as npt
import pytest

from periodic_hyperbolic.dataclass import GridFunction, SolveStatus
from periodic_hyperbolic.errors import ProblemFormatError
from periodic_hyperbolic.fredholm.engine import (
    THREADS_ENV,
    PeriodicBVPRunner,
    PeriodicBVPRunnerArguments,
    default_thread_count,
)
from periodic_hyperbolic.fredholm.modules.callback import BaseCallbackHandler
from periodic_hyperbolic.fredholm.modules.scenarios import build
from periodic_hyperbolic.logging_wrapper import LoggingWrapper
from periodic_hyperbolic.problem import FixedData, HyperbolicProblem
from periodic_hyperbolic.result_manager import ResultManager
from periodic_hyperbolic.utils import round_floats


class StageRecorder(BaseCallbackHandler):
    def __init__(self):
        self.events = []

    def on_validation_end(self, report, **kwargs):
        self.events.append("validation")

    def on_resonance_check_end(self, report, **kwargs):
        self.events.append("resonance")

    def on_solve_end(self, outcome, **kwargs):
        self.events.append("solve")

    def on_kernel_analysis_end(self, estimate, **kwargs):
        self.events.append("kernel")


@pytest.fixture
def runner_args(tmp_path):
    return PeriodicBVPRunnerArguments(
        output_dir=str(tmp_path / "results"),
        n_x=11,
        n_t=16,
        kernel_n_x=7,
        kernel_n_t=8,
        t_samples=64,
        max_thread_num=1,
    )


class TestRunnerArguments:
    def test_options_follow_the_arguments(self, runner_args):
        solve_options = runner_args.solve_options()
        assert solve_options.operator.n_char == 256
        assert solve_options.certificate_max_ell == 3
        assert runner_args.criteria_options().t_samples == 64
        assert runner_args.dims.n_t == 16
        assert runner_args.kernel_dims.n_x == 7

    def test_thread_count_from_the_environment(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert default_thread_count() == 3
        monkeypatch.setenv(THREADS_ENV, "many")
        assert default_thread_count() == 1
        monkeypatch.delenv(THREADS_ENV)
        assert default_thread_count() == 1


class TestRunner:
    def test_full_pipeline(self, runner_args, capsys):
        runner = PeriodicBVPRunner(runner_args)
        recorder = StageRecorder()
        results = runner.run(
            build("manufactured").problem, do_kernel_analysis=True, callback_handler=recorder
        )
        assert recorder.events == ["validation", "resonance", "solve", "kernel"]
        assert results["solve"].status == SolveStatus.CONVERGED
        assert results["validation"].passed
        assert set(runner.time) == {
            "run_validation",
            "run_resonance_check",
            "run_solve",
            "run_kernel_analysis",
        }
        assert runner.operator_usage["run_solve"]["C"] > 0
        assert runner.operator_usage["run_kernel_analysis"]["svd"] == 1

        runner.post_run()
        manager = runner.result_manager
        assert manager.list_runs() == ["manufactured"]
        run_log = manager.get_result("manufactured", "run_log")
        assert set(run_log) == {"validation", "resonance_check", "solve", "kernel_analysis"}
        assert run_log["solve"]["event_count"] == 2
        config = manager.get_result("manufactured", "run_config")
        assert config["arguments"]["n_x"] == 11
        assert config["problem"]["name"] == "manufactured"
        solution = manager.get_grid_function("manufactured", "solution")
        npt.assert_array_equal(solution.values, results["solve"].solution.values)

        runner.summary()
        out = capsys.readouterr().out
        assert "run_solve" in out and "svd: 1" in out

    def test_solve_only_with_given_forcing(self, runner_args):
        runner = PeriodicBVPRunner(runner_args)
        problem = build("laser_hyperbolic").problem
        forcing = GridFunction(np.zeros((2, 9, 8)))
        results = runner.run(problem, forcing=forcing, do_validation=False, do_resonance_check=False)
        assert list(results) == ["solve"]
        assert results["solve"].solution.sup_norm() == 0.0
        report = runner.result_manager.get_result("laser_hyperbolic", "solve_report")
        assert report["grid"] == {"n_x": 9, "n_t": 8}

    def test_vanishing_speed_stops_the_solve(self, runner_args):
        runner = PeriodicBVPRunner(runner_args)
        problem = HyperbolicProblem.build(a=["x - 0.5"], boundary=FixedData(1), m=1, name="degenerate")
        with pytest.raises(AssertionError):
            runner.run(problem, do_resonance_check=False)
        assert runner.result_manager.get_result("degenerate", "validation")["passed"] is False

    def test_no_action_is_rejected(self, runner_args):
        runner = PeriodicBVPRunner(runner_args)
        with pytest.raises(AssertionError):
            runner.run(
                build("manufactured").problem,
                do_validation=False,
                do_resonance_check=False,
                do_solve=False,
            )

    def test_kernel_analysis_above_the_dense_cap_is_skipped(self, runner_args):
        runner_args.dense_cap = 10
        runner = PeriodicBVPRunner(runner_args)
        results = runner.run(
            build("scalar_transport").problem,
            do_validation=False,
            do_resonance_check=False,
            do_solve=False,
            do_kernel_analysis=True,
        )
        assert results["kernel"] is None
        assert runner.result_manager.get_result("scalar_transport", "kernel") is None

    def test_callable_problem_config_falls_back_to_a_summary(self, runner_args):
        runner = PeriodicBVPRunner(runner_args)
        problem = HyperbolicProblem.build(
            a=[lambda x, t: 1.0 + 0.0 * x], boundary=FixedData(1), m=1, name="callable"
        )
        runner.run(problem, do_resonance_check=False)
        runner.post_run()
        config = runner.result_manager.get_result("callable", "run_config")
        assert config["problem"] == {"name": "callable", "n": 1, "m": 1}


class TestLoggingWrapper:
    def test_nested_events_and_usage(self):
        counts = {"C": 4}
        wrapper = LoggingWrapper(usage_source=lambda: dict(counts))
        with wrapper.log_pipeline_stage("solve"):
            with wrapper.log_event("outer"):
                with wrapper.log_event("inner"):
                    pass
        dump = wrapper.dump_logging_and_reset()
        assert dump["solve"]["operator_usage"] == {"C": 4}
        assert dump["solve"]["event_count"] == 2
        assert "outer" in dump["solve"]["time_usage"]
        assert wrapper.dump_logging_and_reset() == {}

    def test_events_need_a_stage(self):
        wrapper = LoggingWrapper()
        with pytest.raises(RuntimeError):
            with wrapper.log_event("orphan"):
                pass

    def test_errors_close_the_stage(self):
        wrapper = LoggingWrapper()
        with pytest.raises(ValueError):
            with wrapper.log_pipeline_stage("failing"):
                raise ValueError("boom")
        assert not wrapper.pipeline_stage_active
        assert "total_wall_time" in wrapper.dump_logging_and_reset()["failing"]


class TestResultManager:
    def test_json_and_text_results(self, tmp_path):
        manager = ResultManager(base_dir=str(tmp_path))
        manager.save_result("a run", "kernel", {"sigma": np.float64(1.0 / 3.0)})
        manager.save_result("a run", "notes", "plain text")
        assert manager.get_result("a run", "kernel") == {"sigma": 0.333333333333}
        assert manager.get_result("a run", "notes") == "plain text"
        assert manager.get_result("a run", "missing") is None
        assert manager.list_runs() == ["a_run"]
        assert manager.delete_run_results("a run")
        assert not manager.delete_run_results("a run")

    def test_malformed_result(self, tmp_path):
        manager = ResultManager(base_dir=str(tmp_path))
        path = manager.result_path("r", "broken.json")
        with open(path, "w") as f:
            f.write("{")
        with pytest.raises(ProblemFormatError, match=r"broken\.json:1:"):
            manager.get_result("r", "broken")

    def test_missing_grid_function(self, tmp_path):
        assert ResultManager(base_dir=str(tmp_path)).get_grid_function("r", "solution") is None


def test_report_values_are_rounded_and_plain():
    rounded = round_floats({"a": np.array([1.0 / 3.0, 2.0]), "b": (np.int64(3), np.bool_(True)), "c": math.nan})
    assert rounded == {"a": [0.333333333333, 2.0], "b": [3, True], "c": "nan"}
