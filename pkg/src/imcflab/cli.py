"""Command-line front end: ``imcflab {report,flow,certify,verify,ball-model}``.

Exit codes: 0 success, 1 certification or check failure, 2 configuration
error, 3 numerical breakdown of the flow.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import counterexample as cx
from . import flow as flowmod
from . import io
from .config import dump_config, load_config
from .errors import CertificationFailure, ConfigError, DomainError, FlowBreakdown, InputError, NotConverged, StepRejected
from .geometry import GraphSurface, gauss_identity_check, geometry_report
from .roundness import Thresholds, ball_model_inverse, ball_model_limit, ball_model_radius
from .sphere import SphereField, SphereGrid

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BREAKDOWN = 0, 1, 2, 3
OUTPUT_ROOT_ENV = "IMCFLAB_OUTPUT_ROOT"


# -- helpers ----------------------------------------------------------------------
def make_grid(cfg):
    g = cfg["grid"]
    if g["mode"] == "full":
        return SphereGrid.full(g["lmax"])
    return SphereGrid.polar(g["n"], g["nodes"])


def _p2(grid):
    return SphereField.from_function(grid, lambda th, ph: 1.5 * np.cos(th) ** 2 - 0.5)


def make_initial(cfg, grid):
    """Initial graph from the ``initial`` block.

    ``p2`` adds ``eps P_2`` to ``s``; ``conformal_p2`` and ``span`` use
    ``s + fbar`` with ``e^{-fbar}`` given; ``coefficients`` adds the listed
    harmonic coefficients ``[l, m, value]`` to ``s``.
    """
    ini = cfg["initial"]
    s = ini["s"]
    preset = ini["preset"]
    try:
        if preset == "sphere":
            return GraphSurface.sphere(grid, s)
        if preset == "p2":
            return GraphSurface.from_field(SphereField.constant(grid, s) + ini["eps"] * _p2(grid))
        if preset == "conformal_p2":
            return cx.construct_initial(cx.ProfileSpec("p2", eps=ini["eps"]), s, grid)
        if preset == "span":
            return cx.construct_initial(cx.ProfileSpec("span", a0=ini["a0"], a=tuple(ini["a"])), s, grid)
        coeffs = grid.coeffs_from_list(ini["coefficients"])
        return GraphSurface.from_field(SphereField.constant(grid, s) + SphereField.from_coeffs(grid, coeffs))
    except (DomainError, InputError) as exc:
        raise ConfigError("initial", str(exc)) from None


def flow_controls(cfg, **over):
    fl = cfg["flow"]
    kw = dict(
        dt_max=fl["dt_max"],
        cadence=fl["cadence"],
        c_stab=fl["c_stab"],
        tail_tol=fl["tail_tol"],
        max_rejections=fl["max_rejections"],
    )
    kw.update(over)
    return flowmod.FlowControls(**kw)


def output_dir(cfg):
    base = Path(cfg["output"]["dir"])
    if not base.is_absolute():
        base = Path(os.environ.get(OUTPUT_ROOT_ENV) or Path.cwd()) / base
    base.mkdir(parents=True, exist_ok=True)
    return base


def profile_spec(cfg):
    p = cfg["certify"]["profile"]
    return cx.ProfileSpec(p["kind"], eps=p["eps"], a0=p["a0"], a=tuple(p["a"]))


def pipeline_settings(cfg):
    ce, fl, th = cfg["certify"], cfg["flow"], cfg["thresholds"]
    return cx.PipelineSettings(
        probe_time=ce["probe_time"],
        t_final=ce["t_final"],
        cadence=fl["cadence"],
        dt_max=fl["dt_max"],
        c_stab=fl["c_stab"],
        profile_tol=th["profile_tol"],
        thresholds=Thresholds(th["round_below"], th["nonround_above"]),
    )


def say(msg):
    print(msg, flush=True)


# -- subcommands --------------------------------------------------------------------
def cmd_report(cfg):
    grid = make_grid(cfg)
    surface = make_initial(cfg, grid)
    rep = geometry_report(surface)
    out = output_dir(cfg)
    doc = rep.to_dict()
    doc["grid"] = grid.header(nodes=False)
    if grid.n == 3:
        doc["gauss_identity_error"] = gauss_identity_check(surface)
    io.write_json(out / "report.json", doc)
    ff = cfg["output"]["field_format"]
    io.write_field(out / f"radius.{ff}", surface.radius, ff, name="radius")
    io.write_field(out / f"H.{ff}", rep.H, ff, name="H")
    io.write_field(out / f"Aring2.{ff}", rep.Aring2, ff, name="Aring2")
    io.write_coeffs(out / "radius_coeffs.json", grid, surface.coeffs)
    say(f"area={rep.area!r} mtilde={rep.modified!r} Q={rep.q!r} minH={rep.minH!r} mean_convex={rep.mean_convex}")
    say(f"wrote {out / 'report.json'}")
    return EXIT_OK


def _write_snapshots(out, trace, every, ff):
    snap = out / "snapshots"
    snap.mkdir(exist_ok=True)
    n = trace.n
    last = len(trace) - 1
    idx = sorted({0, last} | (set(range(0, last + 1, every)) if every else set()))
    for k in idx:
        s = trace.samples[k]
        io.write_coeffs(snap / f"radius_{k:05d}.json", trace.grid, s.coeffs)
        prof = SphereField(trace.grid, trace.grid.synthesize(s.coeffs) - s.t / (n - 1))
        io.write_field(snap / f"profile_{k:05d}.{ff}", prof, ff, name=f"profile t={s.t!r}")


def _flow_summary(trace):
    t = trace.times
    area = trace.column("area")
    return {
        "status": trace.status,
        "message": trace.message,
        "steps": trace.steps,
        "rejections": trace.rejections,
        "t_final": float(t[-1]),
        "area_ratio": float(area[-1] / area[0]),
        "area_law_error": float(np.max(np.abs(area / area[0] / np.exp(t - t[0]) - 1.0))),
        "mtilde_nondecreasing": bool(np.all(np.diff(trace.column("mtilde")) >= 0)),
        "grid": trace.grid.header(nodes=False),
    }


def cmd_flow(cfg):
    grid = make_grid(cfg)
    surface = make_initial(cfg, grid)
    out = output_dir(cfg)
    ff = cfg["output"]["field_format"]
    try:
        trace = flowmod.run(surface, cfg["flow"]["t_final"], flow_controls(cfg))
    except FlowBreakdown as exc:
        if exc.trace is not None and len(exc.trace) > 0:
            io.write_trace_csv(out / "trace.csv", exc.trace)
            summary = _flow_summary(exc.trace)
        else:
            summary = {"status": "breakdown"}
        summary["message"] = str(exc)
        summary["node"] = exc.node
        io.write_json(out / "summary.json", summary)
        print(f"flow breakdown: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN
    except StepRejected as exc:
        print(f"flow stopped: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN
    io.write_trace_csv(out / "trace.csv", trace)
    _write_snapshots(out, trace, cfg["flow"]["snapshot_every"], ff)
    summary = _flow_summary(trace)
    io.write_json(out / "summary.json", summary)
    say(f"t={summary['t_final']!r} area ratio={summary['area_ratio']!r} steps={trace.steps}")
    say(f"wrote {out / 'trace.csv'}")
    return EXIT_OK


def _certify_summary(report):
    name = "mtilde" if report.n == 3 else "Q"
    lines = [
        f"n={report.n} profile={report.profile} c0={report.c0!r} s0={report.s0!r}",
        f"{name}(initial)={report.initial_value!r} {name}(final)={report.final_value!r} limit bound={report.limit_bound!r}",
    ]
    if report.roundness:
        lines.append(f"rho_proj={report.roundness['rho_proj']!r} verdict={report.roundness['verdict']}")
    for cname, c in report.conditions.items():
        lines.append(f"  [{'PASS' if c['passed'] else 'FAIL'}] {cname}: {c['value']!r}")
    lines.append("CERTIFIED" if report.passed else f"NOT CERTIFIED ({report.message})")
    return "\n".join(lines)


def cmd_certify(cfg):
    grid = make_grid(cfg)
    spec = profile_spec(cfg)
    settings = pipeline_settings(cfg)
    ce = cfg["certify"]
    try:
        spec.fbar(grid)
    except (DomainError, InputError) as exc:
        raise ConfigError("certify.profile", str(exc)) from None
    out = output_dir(cfg)
    s0 = ce["s0"]
    if s0 is None and not ce["force"]:
        try:
            s0 = cx.search_s0(spec, grid, tuple(ce["candidates"]), settings).s0
        except CertificationFailure as exc:
            report = exc.report
            io.write_json(out / "certification.json", report.to_dict())
            say(_certify_summary(report))
            return EXIT_FAIL
    elif s0 is None:
        s0 = ce["candidates"][0]
    try:
        report = cx.run_and_certify(spec, s0, grid, settings, force=ce["force"])
    except DomainError as exc:
        raise ConfigError("certify.s0", str(exc)) from None
    io.write_json(out / "certification.json", report.to_dict())
    say(_certify_summary(report))
    if report.passed:
        return EXIT_OK
    return EXIT_BREAKDOWN if report.failed_condition == "flow" else EXIT_FAIL


def _verify_default(cfg, grid, surface, checks, th):
    results = {}
    n = grid.n

    def add(name, value, threshold, note=""):
        ok = bool(np.isfinite(value) and value < threshold)
        results[name] = {"value": float(value), "threshold": threshold, "passed": ok, "note": note}

    rep = geometry_report(surface)
    if n == 3 and "gauss" in checks:
        add("gauss", gauss_identity_check(surface), th["exact"])
    if n == 3 and "closed_formula" in checks:
        add("closed_formula", rep.closed_formula_error, th["exact"])
    flow_checks = [c for c in ("mono", "hev", "aring", "aring_integral", "refinement") if c in checks]
    if not flow_checks:
        return results
    tf = cfg["verify"]["t_final"]
    c = cfg["flow"]["cadence"]
    trace = flowmod.run(surface, tf, flow_controls(cfg, dt_max=min(cfg["flow"]["dt_max"], c / 2)))
    names = {"mono": "mono" if n == 3 else "qdrift", "hev": "hev", "aring": "aring"}
    base = {}
    for key in ("mono", "hev", "aring"):
        if key in flow_checks or "refinement" in flow_checks:
            base[key] = float(np.nanmax(flowmod.residual_series(trace, names[key])))
        if key in flow_checks:
            add(key, base[key], th["residual"], "max relative residual over interior samples")
    if "aring_integral" in flow_checks and n == 3:
        add(
            "aring_integral",
            max(flowmod.aring_integral_consistency(trace, k) for k in range(len(trace))),
            th["residual"],
        )
    if "refinement" in flow_checks:
        fine_grid = grid.refined(2)
        fine_surface = GraphSurface(fine_grid, grid.prolong(surface.coeffs, fine_grid))
        fine = flowmod.run(fine_surface, tf, flow_controls(cfg, cadence=c / 2, dt_max=min(cfg["flow"]["dt_max"], c / 4)))
        for key, b in base.items():
            f = float(np.nanmax(flowmod.residual_series(fine, names[key])))
            order = math.log2(b / f) if f > 0 and b > 0 else float("inf")
            results[f"refinement_{key}"] = {
                "value": order,
                "threshold": th["min_order"],
                "passed": bool(order >= th["min_order"]),
                "note": f"coarse {b:.3e} -> fine {f:.3e}",
            }
    return results


def _verify_sphere(cfg, grid, checks, th):
    r0 = cfg["initial"]["s"]
    surface = GraphSurface.sphere(grid, r0)
    n = grid.n
    results = {}

    def add(name, value, note=""):
        results[name] = {"value": float(value), "threshold": th["exact"], "passed": bool(value < th["exact"]), "note": note}

    rep = geometry_report(surface)
    add("H_exact", float(np.abs(rep.H.values - (n - 1) / math.tanh(r0)).max()))
    add("Aring2_zero", float(np.abs(rep.Aring2.values).max()))
    if n == 3 and "gauss" in checks:
        add("gauss", gauss_identity_check(surface))
    c = 1e-4
    trace = flowmod.run(surface, 20 * c, flowmod.FlowControls(cadence=c, dt_max=c))
    if "mono" in checks:
        key = "mono" if n == 3 else "qdrift"
        add("mono", float(np.nanmax(flowmod.residual_series(trace, key, relative=False))), "absolute")
    if "hev" in checks:
        add("hev", float(np.nanmax(flowmod.residual_series(trace, "hev", relative=False))), "absolute, cadence 1e-4")
        worst = 0.0
        for s in trace.samples:
            r = float(grid.synthesize(s.coeffs).mean())
            exact = -1.0 / (math.sinh(r) * math.cosh(r))
            worst = max(worst, float(np.abs(s.fields["H_rhs"] - exact).max()))
        add("hev_ode", worst, "H evolution law vs exact ODE derivative")
    if "aring" in checks:
        add("aring", float(np.nanmax(flowmod.residual_series(trace, "aring", relative=False))), "absolute")
    return results


def cmd_verify(cfg):
    grid = make_grid(cfg)
    th = cfg["thresholds"]
    checks = cfg["verify"]["checks"]
    out = output_dir(cfg)
    if cfg["verify"]["battery"] == "sphere":
        results = _verify_sphere(cfg, grid, checks, th)
    else:
        results = _verify_default(cfg, grid, make_initial(cfg, grid), checks, th)
    io.write_json(out / "verify.json", {"battery": cfg["verify"]["battery"], "grid": grid.header(nodes=False), "checks": results})
    for name, r in results.items():
        say(f"[{'PASS' if r['passed'] else 'FAIL'}] {name}: {r['value']!r} (threshold {r['threshold']!r})")
    return EXIT_OK if all(r["passed"] for r in results.values()) else EXIT_FAIL


def cmd_ball_model(cfg):
    bm = cfg["ball_model"]
    vals = np.array(bm["values"], dtype=float)
    try:
        if bm["direction"] == "forward":
            mapped = np.atleast_1d(ball_model_radius(vals))
            back = np.atleast_1d(ball_model_inverse(mapped))
        else:
            mapped = np.atleast_1d(ball_model_inverse(vals))
            back = np.atleast_1d(ball_model_radius(mapped))
    except DomainError as exc:
        raise ConfigError("ball_model.values", str(exc)) from None
    doc = {
        "direction": bm["direction"],
        "input": vals.tolist(),
        "output": mapped.tolist(),
        "roundtrip_error": float(np.max(np.abs(back - vals))) if len(vals) else 0.0,
    }
    if bm["limit"]:
        if cfg["grid"]["n"] != 3:
            raise ConfigError("ball_model.limit", "the ball-model limit needs n = 3")
        grid = make_grid(cfg)
        surface = make_initial(cfg, grid)
        try:
            trace = flowmod.run(surface, cfg["flow"]["t_final"], flow_controls(cfg))
        except FlowBreakdown as exc:
            print(f"flow breakdown: {exc}", file=sys.stderr)
            return EXIT_BREAKDOWN
        try:
            lim = ball_model_limit(trace, cfg["thresholds"]["profile_tol"])
        except NotConverged as exc:
            print(f"profile not converged: {exc}", file=sys.stderr)
            return EXIT_FAIL
        doc["limit_gap"] = lim.gap
        doc["limit_gap_history"] = list(lim.history)
        doc["limit_gap_monotone"] = lim.monotone
    out = output_dir(cfg)
    io.write_json(out / "ball_model.json", doc)
    for a, b in zip(vals.tolist(), mapped.tolist()):
        say(f"{a!r} -> {b!r}")
    if "limit_gap" in doc:
        say(f"sup |(u-2)e^(t/2) + 4e^(-f)| = {doc['limit_gap']!r}")
    return EXIT_OK


COMMANDS = {
    "report": cmd_report,
    "flow": cmd_flow,
    "certify": cmd_certify,
    "verify": cmd_verify,
    "ball-model": cmd_ball_model,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="imcflab", description="Inverse mean curvature flow of graphs in hyperbolic space.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("-c", "--config", help="YAML configuration file")
        p.add_argument("--set", action="append", default=[], metavar="PATH=VALUE", help="override a config field")
        p.add_argument("-o", "--output", help="output directory (overrides output.dir)")
        p.add_argument("--print-config", action="store_true", help="print the effective configuration and exit")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.output:
            cfg["output"]["dir"] = args.output
        if args.print_config:
            sys.stdout.write(dump_config(cfg))
            return EXIT_OK
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FlowBreakdown as exc:
        print(f"flow breakdown: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN


if __name__ == "__main__":
    sys.exit(main())
