import json
import math

import pytest

from imcflab.cli import main


def _run(tmp_path, *args):
    return main([*args, "-o", str(tmp_path)])


def test_report_sphere(tmp_path, capsys):
    code = _run(tmp_path, "report", "--set", "initial.preset=sphere", "--set", "initial.s=1", "--set", "grid.lmax=16")
    assert code == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["area"] == pytest.approx(4 * math.pi * math.sinh(1) ** 2, rel=1e-12)
    assert (tmp_path / "H.csv").exists()
    assert (tmp_path / "radius_coeffs.json").exists()


def test_flow_writes_trace(tmp_path):
    code = _run(tmp_path, "flow", "--set", "grid.lmax=12", "--set", "flow.t_final=0.3")
    assert code == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["area_law_error"] < 1e-4
    assert summary["mtilde_nondecreasing"]
    assert (tmp_path / "trace.csv").exists()
    assert any((tmp_path / "snapshots").iterdir())


def test_flow_breakdown_exit_code(tmp_path):
    code = _run(
        tmp_path, "flow", "--set", "grid.lmax=16", "--set", "initial.preset=coefficients",
        "--set", "initial.s=0.3", "--set", "initial.coefficients=[[6, 0, 0.6]]",
    )
    assert code == 3


def test_config_error_exit_code(tmp_path, capsys):
    assert _run(tmp_path, "flow", "--set", "grid.lmax=abc") == 2
    assert "grid.lmax" in capsys.readouterr().err


def test_full_mode_needs_n3(tmp_path):
    assert _run(tmp_path, "verify", "--set", "grid.n=4") == 2


def test_print_config(tmp_path, capsys):
    assert _run(tmp_path, "report", "--print-config") == 0
    assert "grid:" in capsys.readouterr().out


def test_certify_negative_control_exit_code(tmp_path):
    code = _run(
        tmp_path, "certify", "--set", "grid.lmax=12", "--set", "certify.profile.kind=span",
        "--set", "certify.profile.a=[0, 0, 0.3]",
    )
    assert code == 1
    doc = json.loads((tmp_path / "certification.json").read_text())
    assert doc["failed_condition"] == "2_initial_value"


def test_ball_model_roundtrip(tmp_path):
    assert _run(tmp_path, "ball-model", "--set", "ball_model.values=[0.5, 1.0, 4.0]") == 0
    doc = json.loads((tmp_path / "ball_model.json").read_text())
    assert doc["roundtrip_error"] < 1e-12


def test_ball_model_domain_error(tmp_path):
    assert _run(tmp_path, "ball-model", "--set", "ball_model.direction=inverse", "--set", "ball_model.values=[2.5]") == 2


def test_verify_sphere_battery(tmp_path):
    code = _run(tmp_path, "verify", "--set", "verify.battery=sphere", "--set", "grid.lmax=12", "--set", "verify.t_final=0.2")
    assert code == 0
    doc = json.loads((tmp_path / "verify.json").read_text())
    assert all(c["passed"] for c in doc["checks"].values())


def test_verify_polar_default_battery(tmp_path):
    code = _run(
        tmp_path, "verify", "--set", "grid.n=4", "--set", "grid.mode=polar", "--set", "grid.nodes=96",
        "--set", "verify.t_final=0.4", "--set", "verify.checks=[hev, aring, refinement]",
    )
    assert code == 0
