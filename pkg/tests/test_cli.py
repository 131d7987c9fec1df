import json
import os

import numpy as np
import pandas as pd
import pytest

from periodic_hyperbolic.cli import EXIT_DIAGNOSED, EXIT_ERROR, EXIT_OK, main
from periodic_hyperbolic.dataclass import GridFunction
from periodic_hyperbolic.problem import HyperbolicProblem

QUICK_CHECK = ["--grid", "11,16", "--t-samples", "64"]


def load(path):
    with open(path) as f:
        return json.load(f)


class TestScenario:
    def test_list(self, tmp_path, capsys):
        report = tmp_path / "presets.json"
        assert main(["scenario", "--list", "--report", str(report)]) == EXIT_OK
        presets = load(report)
        assert len(presets) == 7
        assert "reflection_resonant" in capsys.readouterr().out

    def test_write_problem_file(self, tmp_path):
        out = tmp_path / "problems" / "detuned.json"
        code = main(["scenario", "reflection_resonant", "--set", "b=1.0", "--out", str(out)])
        assert code == EXIT_OK
        problem = HyperbolicProblem.load(str(out))
        assert problem.name == "reflection_resonant"
        assert problem.n == 2

    def test_missing_output_is_an_error(self):
        assert main(["scenario", "chemotaxis"]) == EXIT_ERROR


class TestCheck:
    def test_coinciding_speeds_report_the_factorization_entry(self, tmp_path, capsys):
        report = tmp_path / "resonance.json"
        code = main(["check", "--preset", "reflection_resonant", "--report", str(report)] + QUICK_CHECK)
        assert code == EXIT_OK
        entries = load(report)
        assert [entry["criterion"] for entry in entries][-1] == "FACTORIZATION"
        assert len(entries) == 9
        assert entries[-1]["holds"] is False
        assert entries[-1]["details"]["defect"] == pytest.approx(1.5)
        assert "overall: NonResonant" in capsys.readouterr().out

    def test_resonant_chemotaxis_exits_with_the_diagnosis_code(self, tmp_path):
        code = main(
            [
                "check",
                "--preset",
                "chemotaxis",
                "--set",
                "mu1=0",
                "--set",
                "mu2=0",
                "--report",
                str(tmp_path / "r.json"),
            ]
            + QUICK_CHECK
        )
        assert code == EXIT_DIAGNOSED

    def test_problem_file_input(self, tmp_path):
        problem_file = tmp_path / "laser.json"
        assert main(["scenario", "laser_hyperbolic", "--out", str(problem_file)]) == EXIT_OK
        report = tmp_path / "r.json"
        code = main(["check", "--problem", str(problem_file), "--report", str(report)] + QUICK_CHECK)
        assert code == EXIT_OK
        entries = {entry["criterion"]: entry for entry in load(report)}
        assert entries["TWO_BY_TWO_SHARP"]["holds"]

    def test_set_is_rejected_for_problem_files(self, tmp_path):
        problem_file = tmp_path / "laser.json"
        main(["scenario", "laser_hyperbolic", "--out", str(problem_file)])
        code = main(["check", "--problem", str(problem_file), "--set", "r0=0.1"] + QUICK_CHECK)
        assert code == EXIT_ERROR


class TestKernel:
    def test_resonant_reflection_has_a_kernel(self, tmp_path):
        report = tmp_path / "kernel.json"
        vectors = tmp_path / "vectors"
        code = main(
            [
                "kernel",
                "--preset",
                "reflection_resonant",
                "--grid",
                "11,16",
                "--report",
                str(report),
                "--vectors-dir",
                str(vectors),
            ]
        )
        assert code == EXIT_DIAGNOSED
        data = load(report)
        assert data["estimated_dim"] >= 1
        assert data["operator"] == "I - C - B"
        vector = GridFunction.from_csv(str(vectors / "kernel_0.csv"))
        assert vector.sup_norm() == pytest.approx(1.0)
        assert (vectors / "cokernel_0.csv").exists()

    def test_detuned_reflection_has_none(self, tmp_path):
        code = main(
            [
                "kernel",
                "--preset",
                "reflection_resonant",
                "--set",
                "b=1.0",
                "--grid",
                "11,16",
                "--report",
                str(tmp_path / "kernel.json"),
            ]
        )
        assert code == EXIT_OK

    def test_boundary_only(self, tmp_path):
        report = tmp_path / "kernel.json"
        code = main(
            ["kernel", "--preset", "reflection_resonant", "--grid", "11,16", "--boundary-only", "--report", str(report)]
        )
        assert code == EXIT_OK
        assert load(report)["operator"] == "I - C"


class TestSolve:
    def test_scalar_transport(self, tmp_path):
        report = tmp_path / "solve.json"
        out = tmp_path / "u.csv"
        code = main(
            ["solve", "--preset", "scalar_transport", "--grid", "41,64", "--out", str(out), "--report", str(report)]
        )
        assert code == EXIT_OK
        data = load(report)
        assert data["status"] == "Converged"
        assert data["grid"] == {"n_x": 41, "n_t": 64}
        assert data["max_error"] < 1e-2
        assert GridFunction.from_csv(str(out)).values.shape == (1, 41, 64)

    def test_forcing_file(self, tmp_path):
        forcing = tmp_path / "f.csv"
        GridFunction(np.ones((2, 11, 16))).to_csv(str(forcing))
        report = tmp_path / "solve.json"
        code = main(
            ["solve", "--preset", "laser_hyperbolic", "--forcing", str(forcing), "--report", str(report)]
        )
        assert code == EXIT_OK
        assert load(report)["grid"] == {"n_x": 11, "n_t": 16}

    def test_resonant_problem_is_diagnosed(self, tmp_path):
        code = main(
            [
                "solve",
                "--preset",
                "reflection_resonant",
                "--grid",
                "11,16",
                "--strategy",
                "dense_direct",
                "--report",
                str(tmp_path / "solve.json"),
            ]
        )
        assert code == EXIT_DIAGNOSED

    @pytest.mark.parametrize("assignment", ["beta=0", "beta", "beta=fast"])
    def test_bad_parameters(self, tmp_path, assignment):
        code = main(
            ["solve", "--preset", "reactor_linearized", "--set", assignment, "--report", str(tmp_path / "r.json")]
        )
        assert code == EXIT_ERROR


@pytest.mark.parametrize(
    "argv",
    [
        ["solve"],
        ["solve", "--preset", "manufactured", "--grid", "4;5"],
        ["check", "--preset", "no_such_preset"],
        ["solve", "--preset", "manufactured", "--threads", "0"],
    ],
)
def test_usage_errors_exit_with_status_one(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == EXIT_ERROR


def test_trace_writes_the_characteristic(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    code = main(
        ["trace", "--preset", "manufactured", "--component", "1", "--x", "0.25", "--t", "1.0", "--out", str(out)]
    )
    assert code == EXIT_OK
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["xi", "omega"]
    assert frame["xi"].iloc[-1] == 1.0
    assert frame["omega"].iloc[-1] == pytest.approx(0.25, abs=1e-12)
    assert "RK4 steps" in capsys.readouterr().out
    assert main(["trace", "--preset", "manufactured", "--component", "2", "--x", "0", "--t", "0"]) == EXIT_ERROR


@pytest.mark.parametrize("position", [["--x", "1.5"], ["--x", "0.5", "--to", "-0.1"]])
def test_trace_outside_the_interval_is_an_error(tmp_path, position):
    out = tmp_path / "trace.csv"
    args = ["trace", "--preset", "manufactured", "--component", "0", "--t", "0", "--out", str(out)]
    assert main(args + position) == EXIT_ERROR
    assert not out.exists()


def test_turning_rate_profile_from_the_command_line(tmp_path):
    out = tmp_path / "chemotaxis.json"
    code = main(["scenario", "chemotaxis", "--set", "mu1=0.3 + 0.1*sin(t)", "--out", str(out)])
    assert code == EXIT_OK
    assert HyperbolicProblem.load(str(out)).b[0][0].depends_on_t
    assert main(["scenario", "chemotaxis", "--set", "a1_0=fast", "--out", str(out)]) == EXIT_ERROR


class TestSweep:
    def test_resonant_coupling_has_the_smallest_singular_value(self, tmp_path):
        report = tmp_path / "sweep.json"
        code = main(
            [
                "sweep",
                "--preset",
                "reflection_resonant",
                "--param",
                "b",
                "--range",
                "0,3",
                "--steps",
                "7",
                "--grid",
                "9,8",
                "--t-samples",
                "32",
                "--threads",
                "2",
                "--report",
                str(report),
            ]
        )
        assert code == EXIT_OK
        data = load(report)
        values = [point["value"] for point in data["points"]]
        ratios = [point["sigma_ratio"] for point in data["points"]]
        assert values == pytest.approx([0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0])
        assert int(np.argmin(ratios)) == 3
        assert all(point["factorization_violated"] for point in data["points"][1:])

    def test_criteria_only(self, tmp_path):
        report = tmp_path / "sweep.json"
        code = main(
            [
                "sweep",
                "--preset",
                "manufactured",
                "--param",
                "p0",
                "--range",
                "0.5,1.5",
                "--steps",
                "3",
                "--grid",
                "9,8",
                "--t-samples",
                "32",
                "--no-kernel",
                "--report",
                str(report),
            ]
        )
        assert code == EXIT_OK
        points = load(report)["points"]
        assert "sigma_ratio" not in points[0]
        assert [point["overall"] for point in points] == ["NonResonant"] * 3

    def test_unknown_parameter(self, tmp_path):
        code = main(
            ["sweep", "--preset", "chemotaxis", "--param", "mu3", "--range", "0,1", "--report", str(tmp_path / "s.json")]
        )
        assert code == EXIT_ERROR


def test_run_writes_every_artifact(tmp_path, capsys):
    output_dir = tmp_path / "runs"
    code = main(
        [
            "run",
            "--preset",
            "manufactured",
            "--output-dir",
            str(output_dir),
            "--grid",
            "11,16",
            "--kernel-grid",
            "7,8",
            "--t-samples",
            "64",
            "--kernel",
        ]
    )
    assert code == EXIT_OK
    run_dir = output_dir / "manufactured"
    for name in (
        "validation.json",
        "resonance.json",
        "solution.csv",
        "solution.json",
        "solve_report.json",
        "kernel.json",
        "run_config.json",
        "run_log.json",
    ):
        assert os.path.exists(run_dir / name), name
    assert "***** Execution time *****" in capsys.readouterr().out
