"""Tests for the command-line front end and its exit codes."""

import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from src.main import EXIT_ACCEPTANCE, EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, cli


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("geometry:\n  grid_size: 256\nruntime:\n  threads: 1\n")
    return str(path)


def _write(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def _read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == EXIT_OK
    assert "sympb version" in result.output


def test_domain_circle(runner, config, tmp_path):
    out = tmp_path / "curve.csv"
    result = runner.invoke(cli, ["--config", config, "domain", "--out", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    rows = _read_csv(out)
    assert len(rows) == 256
    assert set(rows[0]) == {"t", "x", "y", "rho", "k"}
    assert all(abs(float(row["k"]) - 1.0) < 1e-9 for row in rows)


def test_domain_ellipse_report(runner, config, tmp_path):
    spec = _write(tmp_path, "ellipse.json", {"a": 2.0, "b": 0.5})
    out = tmp_path / "domain.json"
    result = runner.invoke(cli, ["--config", config, "domain", "--spec", spec, "--format", "json", "--out", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    report = json.loads(out.read_text())
    assert report["affine_perimeter"] == pytest.approx(2.0 * np.pi)
    assert report["deviation"] < 1e-8
    assert report["conic"] == "ellipse"


@pytest.mark.parametrize(
    "payload",
    [
        {"a": 1.0, "b": 1.0, "perturbation": [{"j": 2, "delta": -2.0}]},
        {"a": 0.0, "b": 1.0},
    ],
)
def test_domain_invalid_spec(runner, config, tmp_path, payload):
    spec = _write(tmp_path, "bad.json", payload)
    result = runner.invoke(cli, ["--config", config, "domain", "--spec", spec])
    assert result.exit_code == EXIT_INVALID


def test_missing_spec_file(runner, config, tmp_path):
    result = runner.invoke(cli, ["--config", config, "domain", "--spec", str(tmp_path / "nope.json")])
    assert result.exit_code == EXIT_INVALID


def test_orbit_rows(runner, config, tmp_path):
    out = tmp_path / "orbits.csv"
    result = runner.invoke(cli, ["--config", config, "orbit", "--q-min", "3", "--q-max", "5", "--out", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    rows = _read_csv(out)
    assert len(rows) == 3 + 4 + 5
    assert list(rows[0]) == ["q", "j", "t", "x", "y", "eps"]


def test_q_range_rejected(runner, config):
    result = runner.invoke(cli, ["--config", config, "orbit", "--q-min", "9", "--q-max", "4"])
    assert result.exit_code == EXIT_INVALID


def test_spectrum_fit_range_rejected(runner, config):
    result = runner.invoke(cli, ["--config", config, "spectrum", "--q-min", "10", "--q-max", "20"])
    assert result.exit_code == EXIT_INVALID


def test_spectrum_and_fit(runner, config, tmp_path):
    out = tmp_path / "spectrum.csv"
    fit_out = tmp_path / "fit.json"
    result = runner.invoke(cli, [
        "--config", config, "spectrum", "--q-min", "3", "--q-max", "128",
        "--fit-from", "16", "--out", str(out), "--fit-out", str(fit_out),
    ])
    assert result.exit_code == EXIT_OK, result.output
    rows = _read_csv(out)
    assert len(rows) == 126
    q = np.array([int(row["q"]) for row in rows])
    actions = np.array([float(row["A_q"]) for row in rows])
    np.testing.assert_allclose(actions, q * np.sin(2.0 * np.pi / q), atol=1e-9)
    fit = json.loads(fit_out.read_text())
    assert fit["c0"] == pytest.approx(2.0 * np.pi, rel=1e-6)
    assert fit["kappa"] == -2.0


def test_spectrum_without_fit(runner, config, tmp_path):
    out = tmp_path / "spectrum.json"
    result = runner.invoke(cli, [
        "--config", config, "spectrum", "--q-min", "3", "--q-max", "6", "--no-fit",
        "--format", "json", "--out", str(out),
    ])
    assert result.exit_code == EXIT_OK, result.output
    report = json.loads(out.read_text())
    assert [row["q"] for row in report["rows"]] == [3, 4, 5, 6]
    assert "fit" not in report


def test_xray_matches_ellipse_closed_form(runner, config, tmp_path):
    out = tmp_path / "xray.csv"
    result = runner.invoke(cli, [
        "--config", config, "xray", "--mode", "0=1", "--mode", "3=0.5",
        "--q-min", "3", "--q-max", "8", "--out", str(out),
    ])
    assert result.exit_code == EXIT_OK, result.output
    for row in _read_csv(out):
        assert float(row["xray"]) == pytest.approx(float(row["ellipse"]), abs=1e-9)


def test_xray_bad_mode(runner, config):
    result = runner.invoke(cli, ["--config", config, "xray", "--mode", "three"])
    assert result.exit_code == EXIT_INVALID


def test_ellipse_operator(runner, config, tmp_path):
    out = tmp_path / "operator.json"
    matrix = tmp_path / "matrix.csv"
    result = runner.invoke(cli, [
        "--config", config, "operator", "--ellipse", "--modes", "16", "--rows", "16",
        "--q0", "4", "--gamma", "3.5", "--out", str(out), "--matrix-out", str(matrix),
    ])
    assert result.exit_code == EXIT_OK, result.output
    report = json.loads(out.read_text())
    assert report["kernel_dim"] == 0
    assert report["assembled_kernel_dim"] == 0
    assert report["q0"] == 4
    assert len(_read_csv(matrix)) == 17


@pytest.mark.parametrize("command", [["operator", "--ellipse"], ["verify"]])
def test_gamma_outside_range(runner, config, command):
    result = runner.invoke(cli, ["--config", config, *command, "--gamma", "5"])
    assert result.exit_code == EXIT_INVALID


def test_deform_squeeze(runner, config, tmp_path):
    family = _write(tmp_path, "family.json", {
        "base": {"a": 1.0, "b": 1.0, "grid_size": 256},
        "path": {"affine": [[1.0, 0.0], [0.0, -1.0]]},
        "normalization": "raw",
    })
    out = tmp_path / "deform.json"
    result = runner.invoke(cli, ["--config", config, "deform", "--family", family, "--q-max", "8", "--out", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    report = json.loads(out.read_text())
    assert report["isospectral_consistent"] is True
    assert report["n"][2] == pytest.approx(1.0, abs=1e-7)


def test_verify_subset_passes(runner, config, tmp_path):
    out = tmp_path / "verify.json"
    result = runner.invoke(cli, ["--config", config, "verify", "--only", "10", "--out", str(out)])
    assert result.exit_code == EXIT_OK, result.output
    report = json.loads(out.read_text())
    assert report["passed"] is True
    assert [c["id"] for c in report["criteria"]] == [10]


def test_verify_coarse_grid_fails(runner, config, tmp_path):
    out = tmp_path / "verify.json"
    result = runner.invoke(cli, ["--config", config, "verify", "--grid", "64", "--only", "5", "--out", str(out)])
    assert result.exit_code == EXIT_ACCEPTANCE
    report = json.loads(out.read_text())
    assert report["passed"] is False


BUMPY = {"a": 1.0, "b": 1.0, "perturbation": [{"j": 4, "delta": 0.01}]}


def test_solver_failure_exits_numerical(runner, tmp_path):
    config = tmp_path / "starved.yaml"
    config.write_text(
        "geometry:\n  grid_size: 256\nsolver:\n  max_newton: 0\n  max_fallback: 0\nruntime:\n  threads: 1\n"
    )
    spec = _write(tmp_path, "bumpy.json", BUMPY)
    result = runner.invoke(cli, ["--config", str(config), "orbit", "--spec", spec, "--q-min", "5", "--q-max", "6"])
    assert result.exit_code == EXIT_NUMERICAL


def test_output_independent_of_threads(runner, config, tmp_path):
    spec = _write(tmp_path, "bumpy.json", BUMPY)
    outputs = []
    for threads in ("1", "4"):
        out = tmp_path / f"spectrum_{threads}.csv"
        result = runner.invoke(cli, [
            "--config", config, "--threads", threads, "spectrum", "--spec", spec,
            "--q-min", "3", "--q-max", "24", "--no-fit", "--out", str(out),
        ])
        assert result.exit_code == EXIT_OK, result.output
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_orbit_trace_export(runner, config, tmp_path):
    spec = _write(tmp_path, "bumpy.json", BUMPY)
    out = tmp_path / "trace.csv"
    result = runner.invoke(cli, [
        "--config", config, "orbit", "--spec", spec, "--trace", "20",
        "--start", "4.0", "--gap", "0.05", "--out", str(out),
    ])
    assert result.exit_code == EXIT_OK, result.output
    rows = _read_csv(out)
    assert list(rows[0]) == ["step", "t", "x", "y", "eps"]
    assert len(rows) == 21
    assert float(rows[0]["t"]) == pytest.approx(4.0)
    assert all(float(row["eps"]) > 0.0 for row in rows)


def test_trace_outside_phase_space(runner, config):
    result = runner.invoke(cli, ["--config", config, "orbit", "--trace", "3", "--gap", "5.0"])
    assert result.exit_code == EXIT_INVALID
