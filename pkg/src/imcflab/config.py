"""Run configuration: YAML file + ``--set path=value`` overrides, validated up front."""

from __future__ import annotations

import copy
import math
from pathlib import Path

import yaml

from .errors import ConfigError

PRESETS = ("sphere", "p2", "conformal_p2", "span", "coefficients")
PROFILE_KINDS = ("p2", "span", "zero")
VERIFY_CHECKS = ("gauss", "closed_formula", "mono", "hev", "aring", "aring_integral", "refinement")

DEFAULTS = {
    "grid": {
        "n": 3,
        "mode": "full",
        "lmax": 32,
        "nodes": 256,
    },
    "initial": {
        "preset": "p2",
        "s": 3.0,
        "eps": 0.15,
        "a0": 1.0,
        "a": [],
        "coefficients": [],
    },
    "flow": {
        "t_final": 2.0,
        "cadence": 0.1,
        "dt_max": 0.05,
        "c_stab": 0.5,
        "tail_tol": 1e-6,
        "max_rejections": 30,
        "snapshot_every": 0,
    },
    "certify": {
        "profile": {"kind": "p2", "eps": 0.1, "a0": 1.0, "a": []},
        "s0": None,
        "candidates": [4.0, 6.0, 8.0, 10.0, 12.0],
        "t_final": None,
        "probe_time": 3.0,
        "force": False,
    },
    "thresholds": {
        "round_below": 1e-4,
        "nonround_above": 1e-2,
        "residual": 0.05,
        "exact": 1e-8,
        "profile_tol": 1e-3,
        "min_order": 1.0,
    },
    "verify": {
        "battery": "default",
        "checks": list(VERIFY_CHECKS),
        "t_final": 1.0,
    },
    "ball_model": {
        "direction": "forward",
        "values": [1.0986122886681098],
        "limit": False,
    },
    "output": {
        "dir": "imcflab-out",
        "field_format": "csv",
    },
}


def _num(path, v, *, positive=False, nonneg=False, integer=False, lo=None, hi=None, optional=False):
    if v is None and optional:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if integer and (not float(v).is_integer()):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if not math.isfinite(float(v)):
        raise ConfigError(path, "must be finite")
    if positive and not v > 0:
        raise ConfigError(path, f"must be > 0, got {v!r}")
    if nonneg and v < 0:
        raise ConfigError(path, f"must be >= 0, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(path, f"must be >= {lo}, got {v!r}")
    if hi is not None and v > hi:
        raise ConfigError(path, f"must be <= {hi}, got {v!r}")
    return int(v) if integer else float(v)


def _choice(path, v, options):
    if v not in options:
        raise ConfigError(path, f"must be one of {', '.join(map(str, options))}; got {v!r}")
    return v


def _numlist(path, v):
    if not isinstance(v, list):
        raise ConfigError(path, "expected a list")
    return [_num(f"{path}[{i}]", x) for i, x in enumerate(v)]


def _merge(base, user, path=""):
    if not isinstance(user, dict):
        raise ConfigError(path or "<root>", "expected a mapping")
    out = copy.deepcopy(base)
    for key, val in user.items():
        p = f"{path}.{key}" if path else str(key)
        if key not in base:
            raise ConfigError(p, "unknown field")
        if isinstance(base[key], dict):
            out[key] = _merge(base[key], val, p)
        else:
            out[key] = val
    return out


def set_path(cfg, dotted, value):
    """Apply one override; ``value`` is parsed as a YAML scalar/list."""
    keys = dotted.split(".")
    node = cfg
    for i, k in enumerate(keys[:-1]):
        if not isinstance(node, dict) or k not in node:
            raise ConfigError(".".join(keys[: i + 1]), "unknown field")
        node = node[k]
    if not isinstance(node, dict) or keys[-1] not in node:
        raise ConfigError(dotted, "unknown field")
    try:
        node[keys[-1]] = yaml.safe_load(value) if isinstance(value, str) else value
    except yaml.YAMLError as exc:
        raise ConfigError(dotted, f"cannot parse value: {exc}") from None


def validate(cfg):
    """Check every field, returning the normalised config; raises ConfigError."""
    g = cfg["grid"]
    g["n"] = _num("grid.n", g["n"], integer=True, lo=3, hi=12)
    g["mode"] = _choice("grid.mode", g["mode"], ("full", "polar"))
    g["lmax"] = _num("grid.lmax", g["lmax"], integer=True, lo=4, hi=256)
    g["nodes"] = _num("grid.nodes", g["nodes"], integer=True, lo=16, hi=4096)
    if g["mode"] == "full" and g["n"] != 3:
        raise ConfigError("grid.mode", f"full-2D mode needs n = 3 (got n = {g['n']}); use mode: polar")

    ini = cfg["initial"]
    ini["preset"] = _choice("initial.preset", ini["preset"], PRESETS)
    ini["s"] = _num("initial.s", ini["s"], positive=True)
    ini["eps"] = _num("initial.eps", ini["eps"])
    ini["a0"] = _num("initial.a0", ini["a0"])
    ini["a"] = _numlist("initial.a", ini["a"])
    if not isinstance(ini["coefficients"], list):
        raise ConfigError("initial.coefficients", "expected a list of [l, m, value]")
    for i, item in enumerate(ini["coefficients"]):
        if not (isinstance(item, list) and len(item) == 3):
            raise ConfigError(f"initial.coefficients[{i}]", "expected [l, m, value]")
        _num(f"initial.coefficients[{i}][0]", item[0], integer=True, nonneg=True)
        _num(f"initial.coefficients[{i}][1]", item[1], integer=True)
        _num(f"initial.coefficients[{i}][2]", item[2])
    if ini["preset"] == "coefficients" and not ini["coefficients"]:
        raise ConfigError("initial.coefficients", "preset 'coefficients' needs a non-empty list")
    if ini["preset"] == "span" and g["mode"] == "polar" and any(ini["a"][: g["n"] - 1]):
        raise ConfigError("initial.a", "polar mode only supports X^n (last entry)")

    fl = cfg["flow"]
    fl["t_final"] = _num("flow.t_final", fl["t_final"], positive=True)
    fl["cadence"] = _num("flow.cadence", fl["cadence"], positive=True)
    fl["dt_max"] = _num("flow.dt_max", fl["dt_max"], positive=True)
    fl["c_stab"] = _num("flow.c_stab", fl["c_stab"], positive=True, hi=1.0)
    fl["tail_tol"] = _num("flow.tail_tol", fl["tail_tol"], positive=True)
    fl["max_rejections"] = _num("flow.max_rejections", fl["max_rejections"], integer=True, nonneg=True)
    fl["snapshot_every"] = _num("flow.snapshot_every", fl["snapshot_every"], integer=True, nonneg=True)

    ce = cfg["certify"]
    prof = ce["profile"]
    if not isinstance(prof, dict):
        raise ConfigError("certify.profile", "expected a mapping")
    prof["kind"] = _choice("certify.profile.kind", prof["kind"], PROFILE_KINDS)
    prof["eps"] = _num("certify.profile.eps", prof["eps"])
    prof["a0"] = _num("certify.profile.a0", prof["a0"])
    prof["a"] = _numlist("certify.profile.a", prof["a"])
    ce["s0"] = _num("certify.s0", ce["s0"], positive=True, optional=True)
    ce["candidates"] = _numlist("certify.candidates", ce["candidates"])
    if not ce["candidates"]:
        raise ConfigError("certify.candidates", "must not be empty")
    ce["t_final"] = _num("certify.t_final", ce["t_final"], positive=True, optional=True)
    ce["probe_time"] = _num("certify.probe_time", ce["probe_time"], lo=2.0)
    if not isinstance(ce["force"], bool):
        raise ConfigError("certify.force", "expected true or false")

    th = cfg["thresholds"]
    for k in th:
        th[k] = _num(f"thresholds.{k}", th[k], positive=True)
    if not th["round_below"] < th["nonround_above"]:
        raise ConfigError("thresholds.round_below", "must be below thresholds.nonround_above")

    ve = cfg["verify"]
    ve["battery"] = _choice("verify.battery", ve["battery"], ("default", "sphere"))
    if not isinstance(ve["checks"], list) or not ve["checks"]:
        raise ConfigError("verify.checks", "expected a non-empty list")
    for i, c in enumerate(ve["checks"]):
        _choice(f"verify.checks[{i}]", c, VERIFY_CHECKS)
    ve["t_final"] = _num("verify.t_final", ve["t_final"], positive=True)

    bm = cfg["ball_model"]
    bm["direction"] = _choice("ball_model.direction", bm["direction"], ("forward", "inverse"))
    bm["values"] = _numlist("ball_model.values", bm["values"])
    if not isinstance(bm["limit"], bool):
        raise ConfigError("ball_model.limit", "expected true or false")

    out = cfg["output"]
    if not isinstance(out["dir"], str) or not out["dir"]:
        raise ConfigError("output.dir", "expected a non-empty path")
    out["field_format"] = _choice("output.field_format", out["field_format"], ("csv", "bin"))
    return cfg


def load_config(path=None, overrides=()):
    """Defaults <- YAML file <- overrides, then validated."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
        try:
            user = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError("<file>", f"malformed YAML: {exc}") from None
        if user is not None:
            cfg = _merge(cfg, user)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like path=value")
        key, value = item.split("=", 1)
        set_path(cfg, key.strip(), value)
    return validate(cfg)


def dump_config(cfg):
    return yaml.safe_dump(cfg, sort_keys=False, default_flow_style=None)
