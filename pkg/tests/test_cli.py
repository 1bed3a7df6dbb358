import csv
import json
from pathlib import Path

import pytest
from typer.testing import CliRunner

from udog_pulses.cli import EXIT_USAGE, app
from udog_pulses.config import THREADS_ENV
from udog_pulses.pulses import load_sequence

runner = CliRunner()


@pytest.fixture(autouse=True)
def _clean_environment(monkeypatch):
    monkeypatch.delenv(THREADS_ENV, raising=False)


def _header(path: Path) -> list:
    with path.open("r", encoding="utf-8", newline="") as handle:
        return next(csv.reader(handle))


def _synth(tmp_path: Path, level: int) -> Path:
    path = tmp_path / f"s-level{level}.json"
    result = runner.invoke(app, ["synth", "--gate", "S", "--level", str(level), "--output", str(path)])
    assert result.exit_code == 0, result.output
    return path


def test_synth_level1(tmp_path):
    sequence = load_sequence(_synth(tmp_path, 1))
    assert len(sequence.segments) == 2
    assert sequence.scheme == "ngqc-level1"


def test_synth_level3_solves_xi(tmp_path):
    sequence = load_sequence(_synth(tmp_path, 3))
    assert len(sequence.segments) == 4
    assert [segment.area for segment in sequence.segments] == pytest.approx([3.141592653589793] * 4)


def test_synth_with_explicit_xi_uses_output_dir(tmp_path):
    result = runner.invoke(
        app,
        ["synth", "--gate", "H", "--level", "3", "--xi", "0.4,-1.2", "--shape", "sin2", "--output-dir", str(tmp_path)],
    )
    assert result.exit_code == 0, result.output
    sequence = load_sequence(tmp_path / "h-level3.json")
    assert sequence.segments[0].shape.tag.value == "sine-squared"


def test_solve_writes_the_solution(tmp_path):
    path = tmp_path / "solve.json"
    result = runner.invoke(app, ["solve", "--gate", "S", "--output", str(path)])
    assert result.exit_code == 0, result.output
    document = json.loads(path.read_text(encoding="utf-8"))
    assert {"level", "xi", "residual_norm", "converged", "distances"} <= set(document)
    assert document["xi"] == pytest.approx([1.5, 1.0], abs=1e-8)
    assert document["distances"]["detuning"] < 1e-7


def test_synth_dynamical_reference(tmp_path):
    result = runner.invoke(app, ["synth", "--gate", "S", "--scheme", "dynamical", "--output-dir", str(tmp_path)])
    assert result.exit_code == 0, result.output
    sequence = load_sequence(tmp_path / "s-dynamical.json")
    assert sequence.scheme == "dynamical-euler"
    assert [segment.area for segment in sequence.segments] == pytest.approx([1.5707963267948966] * 3)

    output = tmp_path / "report.json"
    result = runner.invoke(app, ["report", str(tmp_path / "s-dynamical.json"), "--output", str(output)])
    assert result.exit_code == 0, result.output
    row = json.loads(output.read_text(encoding="utf-8"))["schemes"][0]
    assert row["scheme"] == "dynamical-euler"


def test_solve_and_sweep_do_not_depend_on_threads(tmp_path, monkeypatch):
    outputs = {}
    for threads in ("1", "4"):
        monkeypatch.setenv(THREADS_ENV, threads)
        folder = tmp_path / f"threads-{threads}"
        result = runner.invoke(app, ["solve", "--gate", "S", "--output", str(folder / "solve.json")])
        assert result.exit_code == 0, result.output
        sequence = folder / "s-level3.json"
        result = runner.invoke(app, ["synth", "--gate", "S", "--level", "3", "--output", str(sequence)])
        assert result.exit_code == 0, result.output
        result = runner.invoke(app, ["sweep", str(sequence), "--points", "12", "--output", str(folder / "sweep.csv")])
        assert result.exit_code == 0, result.output
        outputs[threads] = [(folder / name).read_bytes() for name in ("solve.json", "s-level3.json", "sweep.csv")]
    assert outputs["1"] == outputs["4"]


def test_curve_command(tmp_path):
    sequence = _synth(tmp_path, 1)
    output = tmp_path / "curve.csv"
    result = runner.invoke(app, ["curve", str(sequence), "--channel", "detuning", "--output", str(output)])
    assert result.exit_code == 0, result.output
    assert _header(output) == ["t", "x", "y", "z"]
    assert output.with_suffix(".json").exists()


def test_curve_path_method(tmp_path):
    sequence = _synth(tmp_path, 1)
    output = tmp_path / "curve-path.csv"
    result = runner.invoke(app, ["curve", str(sequence), "--method", "path", "--channel", "rabi", "-o", str(output)])
    assert result.exit_code == 0, result.output
    assert _header(output) == ["t", "x", "y", "z"]


def test_sweep_and_fit_commands(tmp_path):
    sequence = _synth(tmp_path, 1)
    output = tmp_path / "sweep.csv"
    result = runner.invoke(app, ["sweep", str(sequence), "--points", "12", "--output", str(output)])
    assert result.exit_code == 0, result.output
    assert _header(output) == ["beta", "infidelity"]
    fit_document = json.loads((tmp_path / "s-level1-detuning-fit.json").read_text(encoding="utf-8"))
    assert fit_document["slope"] == pytest.approx(2.0, abs=0.05)

    refit = tmp_path / "refit.json"
    result = runner.invoke(app, ["fit", str(output), "--output", str(refit)])
    assert result.exit_code == 0, result.output
    assert json.loads(refit.read_text(encoding="utf-8"))["slope"] == pytest.approx(fit_document["slope"], abs=1e-9)


def test_filter_command(tmp_path):
    sequence = _synth(tmp_path, 1)
    output = tmp_path / "filter.csv"
    result = runner.invoke(app, ["filter", str(sequence), "--points", "21", "--output", str(output)])
    assert result.exit_code == 0, result.output
    assert _header(output) == ["omega", "F"]


def test_report_assert_on_s_gate(tmp_path):
    level1 = _synth(tmp_path, 1)
    level3 = _synth(tmp_path, 3)
    output = tmp_path / "report.json"
    result = runner.invoke(app, ["report", str(level1), str(level3), "--assert", "--output", str(output)])
    assert result.exit_code == 0, result.output
    document = json.loads(output.read_text(encoding="utf-8"))
    assert [row["scheme"] for row in document["schemes"]] == ["ngqc-level1", "udog-level3"]
    assert document["checks"]
    assert all(line.startswith("[OK]") for line in document["checks"])


def test_report_assert_without_s_gate_fails(tmp_path):
    result = runner.invoke(app, ["synth", "--gate", "H", "--level", "1", "--output", str(tmp_path / "h.json")])
    assert result.exit_code == 0, result.output
    result = runner.invoke(app, ["report", str(tmp_path / "h.json"), "--assert", "--output-dir", str(tmp_path)])
    assert result.exit_code == 4


def test_missing_sequence_is_a_usage_error(tmp_path):
    result = runner.invoke(app, ["curve", str(tmp_path / "missing.json")])
    assert result.exit_code == EXIT_USAGE


@pytest.mark.parametrize(
    "arguments",
    [
        ["synth", "--gate", "Q"],
        ["synth", "--gate", "S", "--target", "0,0,0"],
        ["synth", "--gate", "S", "--level", "2"],
        ["synth", "--target", "1,2"],
        ["synth", "--gate", "S", "--shape", "gauss"],
        ["synth", "--gate", "S", "--scheme", "adiabatic"],
        ["synth", "--gate", "H", "--scheme", "dynamical"],
    ],
)
def test_bad_parameters(arguments, tmp_path):
    result = runner.invoke(app, arguments + ["--output-dir", str(tmp_path)])
    assert result.exit_code == EXIT_USAGE
