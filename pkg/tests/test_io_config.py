import numpy as np
import pytest

from imcflab import io
from imcflab.config import DEFAULTS, dump_config, load_config
from imcflab.errors import ConfigError
from imcflab.flow import FlowControls, run
from imcflab.geometry import GraphSurface
from imcflab.sphere import SphereField, SphereGrid


@pytest.mark.parametrize("fmt", ["csv", "bin"])
@pytest.mark.parametrize("grid", [SphereGrid.full(8), SphereGrid.polar(4, 32)], ids=["full", "polar"])
def test_field_roundtrip(tmp_path, fmt, grid):
    f = SphereField.legendre(grid, 2) * 0.3 + 1.0
    path = tmp_path / f"f.{fmt}"
    io.write_field(path, f, fmt, name="f")
    back = io.read_field(path)
    assert back.grid.shape == grid.shape
    assert np.array_equal(back.values, f.values)


def test_coeffs_roundtrip(tmp_path):
    g = SphereGrid.full(8)
    c = (2.0 + SphereField.cartesian(g, 1) * 0.1).coeffs()
    io.write_coeffs(tmp_path / "c.json", g, c)
    g2, c2 = io.read_coeffs(tmp_path / "c.json")
    assert g2.lmax == 8
    assert np.allclose(c2, c, atol=0)


def test_trace_csv_roundtrip(tmp_path):
    g = SphereGrid.full(8)
    tr = run(GraphSurface.sphere(g, 1.0), 0.3, FlowControls(cadence=0.1))
    io.write_trace_csv(tmp_path / "t.csv", tr)
    cols = io.read_trace_csv(tmp_path / "t.csv")
    assert np.array_equal(cols["t"], tr.times)
    assert np.array_equal(cols["area"], tr.column("area"))


def test_fmt_is_lossless():
    x = 0.1 + 0.2
    assert float(io.fmt(x)) == x


def test_defaults_validate():
    cfg = load_config()
    assert cfg["grid"]["n"] == DEFAULTS["grid"]["n"]


def test_yaml_file_and_override(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("grid:\n  lmax: 16\nflow:\n  t_final: 0.5\n")
    cfg = load_config(p, ["flow.cadence=0.05", "initial.a=[0.1, 0.0]"])
    assert cfg["grid"]["lmax"] == 16
    assert cfg["flow"]["cadence"] == 0.05
    assert cfg["initial"]["a"] == [0.1, 0.0]


def test_dump_reloads(tmp_path):
    cfg = load_config(overrides=["grid.n=4", "grid.mode=polar"])
    p = tmp_path / "d.yaml"
    p.write_text(dump_config(cfg))
    assert load_config(p) == cfg


@pytest.mark.parametrize(
    "overrides, path",
    [
        (["grid.lmax=-3"], "grid.lmax"),
        (["grid.n=4"], "grid.mode"),
        (["flow.cadence=0"], "flow.cadence"),
        (["grid.bogus=1"], "grid.bogus"),
        (["initial.preset=torus"], "initial.preset"),
        (["thresholds.round_below=0.5"], "thresholds.round_below"),
        (["flow.c_stab=yes"], "flow.c_stab"),
    ],
)
def test_invalid_fields_name_their_path(overrides, path):
    with pytest.raises(ConfigError) as info:
        load_config(overrides=overrides)
    assert info.value.path == path


def test_unknown_file_key(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("flow:\n  speed: 3\n")
    with pytest.raises(ConfigError) as info:
        load_config(p)
    assert info.value.path == "flow.speed"


def test_malformed_yaml(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("grid: [1, 2\n")
    with pytest.raises(ConfigError):
        load_config(p)
