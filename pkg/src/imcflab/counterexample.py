"""Certification pipeline for flows with a non-round asymptotic profile.

Start from ``rt = s + fbar`` with ``e^{-fbar}`` outside span{1, X^i}.  For
large s the monotone quantity (``mtilde`` for n = 3, ``Q`` for n >= 4) is
close to the limit functional ``c0`` of ``fbar``.  If its total drift along
the flow is below ``c0/4`` the limit keeps the sign, and the limit profile
cannot be round.

The drift bound is certified empirically.  The drift rate is measured on
the flow, an exponential is fitted to it, and the unmeasured tail is
bounded by twice the fitted prefactor.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import flow as flowmod
from .errors import CertificationFailure, DomainError, FlowBreakdown, InputError, InsufficientData, NotConverged
from .geometry import GraphSurface, geometry_report
from .roundness import NON_ROUND, Thresholds, ball_model_limit, limit_functional, limit_functional_n, roundness_report, roundness_scale
from .sphere import SphereField, SphereGrid

METHOD_NOTE = (
    "empirical certification: the drift of the monotone quantity is measured, "
    "fitted by an exponential and its tail bounded with a x2 safety factor on the prefactor"
)
C0_FLOOR = 1e-8
TAIL_SAFETY = 2.0


def _legendre2(x):
    return 1.5 * x * x - 0.5


@dataclass(frozen=True)
class ProfileSpec:
    """Description of ``fbar`` through ``w = e^{-fbar}``.

    kind ``"p2"``: ``w = 1 + eps P_2(cos theta)``; ``"span"``:
    ``w = a0 + sum_i a_i X^i``; ``"zero"``: ``fbar = 0``.
    """

    kind: str = "p2"
    eps: float = 0.1
    a0: float = 1.0
    a: tuple = ()

    def __post_init__(self):
        if self.kind not in ("p2", "span", "zero"):
            raise InputError(f"unknown profile kind {self.kind!r}")

    def w(self, grid):
        if self.kind == "zero":
            return SphereField.constant(grid, 1.0)
        if self.kind == "p2":
            return SphereField.from_function(grid, lambda th, ph: 1.0 + self.eps * _legendre2(np.cos(th)))
        vals = np.full(grid.shape, float(self.a0))
        for i, ai in enumerate(self.a, start=1):
            if ai == 0:
                continue
            X = grid.cartesian(i)
            if X is None:
                raise InputError(f"X^{i} is not available on a polar-symmetric grid")
            vals = vals + ai * X
        return SphereField(grid, vals)

    def fbar(self, grid):
        w = self.w(grid)
        if not np.all(w.values > 0):
            raise DomainError("e^{-fbar} must be positive")
        return w.map(lambda x: -np.log(x))

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "p2":
            d["eps"] = self.eps
        elif self.kind == "span":
            d["a0"] = self.a0
            d["a"] = list(self.a)
        return d


def construct_initial(spec, s, grid):
    """The graph ``rt = s + fbar`` over ``grid``."""
    if not s > 0:
        raise DomainError("s must be positive")
    fbar = spec.fbar(grid)
    if s + fbar.values.min() <= 0:
        raise DomainError(f"s + min fbar = {s + fbar.values.min():.3g} <= 0")
    return GraphSurface.from_field(fbar + s)


def limit_constant(spec, grid):
    """``c0``: L(fbar) on S^2, the Q-limit functional for n >= 4."""
    fbar = spec.fbar(grid)
    if grid.n == 3:
        return limit_functional(fbar), roundness_scale(fbar)
    return limit_functional_n(fbar), roundness_scale(fbar)


def monotone_name(n):
    return "mtilde" if n == 3 else "Q"


def _rate_column(trace):
    return trace.column("mtilde_rate") if trace.n == 3 else trace.column("Q_rate")


# -- drift fits ---------------------------------------------------------------------
@dataclass(frozen=True)
class DriftFit:
    slope: float
    prefactor: float
    t_start: float
    t_end: float
    npoints: int
    measured: float
    tail_estimate: float
    tail_bound: float
    expected_slope: float

    @property
    def uncertainty(self):
        return self.tail_bound - self.tail_estimate

    def to_dict(self):
        d = asdict(self)
        d["uncertainty"] = self.uncertainty
        return d


def fit_drift(trace, t_start=None):
    """Fit ``|rate| ~ A e^{kt}`` and bound the drift beyond the last sample."""
    n = trace.n
    t = trace.times
    rate = np.abs(_rate_column(trace))
    expected = -1.0 if n == 3 else -2.0 / (n - 1)
    if t_start is None:
        t_start = t[0] + 0.3 * (t[-1] - t[0])
    fit = flowmod.fit_exponential(t, rate, t_start)
    values = trace.column(monotone_name(n))
    measured = float(values[-1] - values[0])
    if not np.isfinite(fit.slope):
        if np.all(rate[t >= t_start] == 0):
            return DriftFit(0.0, 0.0, t_start, t[-1], 0, measured, 0.0, 0.0, expected)
        raise InsufficientData("not enough positive drift-rate samples to fit")
    if fit.slope >= 0:
        tail = float("inf")
    else:
        tail = fit.prefactor * math.exp(fit.slope * t[-1]) / (-fit.slope)
    return DriftFit(
        fit.slope, fit.prefactor, fit.t_start, fit.t_end, fit.npoints, measured, tail, TAIL_SAFETY * tail, expected
    )


# -- reports ----------------------------------------------------------------------------
@dataclass
class Check:
    passed: bool
    value: float | None = None
    threshold: float | None = None
    detail: str = ""

    def to_dict(self):
        return asdict(self)


@dataclass
class CertificationReport:
    n: int
    profile: dict
    grid: dict
    c0: float
    s0: float | None = None
    conditions: dict = field(default_factory=dict)
    initial_value: float | None = None
    final_value: float | None = None
    t_final: float | None = None
    drift: dict | None = None
    limit_bound: float | None = None
    roundness: dict | None = None
    pinching: dict | None = None
    ball_model_gap: float | None = None
    revalidation_error: float | None = None
    passed: bool = False
    failed_condition: str | None = None
    message: str = ""
    method: str = METHOD_NOTE

    def record(self, name, check):
        self.conditions[name] = check.to_dict()
        if not check.passed and self.failed_condition is None:
            self.failed_condition = name
            self.message = f"condition {name} failed: {check.detail}"
        return check.passed

    def finish(self):
        self.passed = self.failed_condition is None and all(c["passed"] for c in self.conditions.values())
        return self

    def require(self):
        if not self.passed:
            raise CertificationFailure(self.message or "certification failed", self.failed_condition, self)
        return self

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, indent=2, **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


@dataclass(frozen=True)
class PipelineSettings:
    probe_time: float = 3.0
    t_final: float | None = None
    cadence: float = 0.1
    dt_max: float = 0.05
    c_stab: float = 0.5
    profile_tol: float = 1e-3
    slope_band: float = 0.3
    curvature_band: tuple = (-1.3, -0.7)
    gradient_band: tuple = (-3.3, -2.7)
    tail_fraction: float = 0.1
    thresholds: Thresholds = field(default_factory=Thresholds)

    def controls(self):
        return flowmod.FlowControls(dt_max=self.dt_max, cadence=self.cadence, c_stab=self.c_stab)

    def final_time(self, n):
        if self.t_final is not None:
            return self.t_final
        return 10.0 if n == 3 else 12.0


def _new_report(spec, grid):
    c0, scale = limit_constant(spec, grid)
    return CertificationReport(n=grid.n, profile=spec.to_dict(), grid=grid.header(nodes=False), c0=c0), scale


def _slope_check(report, fit, settings, label):
    lo = fit.expected_slope * (1 + settings.slope_band)
    hi = fit.expected_slope * (1 - settings.slope_band)
    ok = lo < fit.slope < hi or fit.prefactor == 0.0
    return report.record(label, Check(ok, fit.slope, None, f"fitted slope {fit.slope:.3f} outside ({lo:.3f}, {hi:.3f})"))


def certify_s0(spec, s0, grid, settings=None):
    """Pre-flow checks (1)-(3) for the candidate ``s0``."""
    settings = settings or PipelineSettings()
    report, scale = _new_report(spec, grid)
    report.s0 = float(s0)
    n = grid.n
    c0 = report.c0
    surface = construct_initial(spec, s0, grid)
    rep = geometry_report(surface)
    report.initial_value = rep.modified if n == 3 else rep.q

    report.record("1_mean_convex", Check(rep.mean_convex, rep.minH, 0.0, f"min H = {rep.minH:.3g} <= 0"))

    nontrivial = c0 > C0_FLOOR * scale
    if n == 3:
        ok2 = nontrivial and rep.modified < -c0 / 2
        detail = f"mtilde = {rep.modified:.6g} is not < -c0/2 = {-c0 / 2:.6g}"
    else:
        ok2 = nontrivial and rep.q > c0 / 2
        detail = f"Q = {rep.q:.6g} is not > c0/2 = {c0 / 2:.6g}"
    if not nontrivial:
        detail = f"c0 = {c0:.3g} vanishes: e^(-fbar) lies in span(1, X^i)"
    report.record("2_initial_value", Check(bool(ok2), report.initial_value, c0 / 2, detail))
    if report.failed_condition:
        return report.finish()

    try:
        probe = flowmod.run(surface, settings.probe_time, settings.controls())
    except FlowBreakdown as exc:
        report.record("3_drift", Check(False, None, c0 / 4, f"probe flow broke down: {exc}"))
        return report.finish()
    fit = fit_drift(probe)
    report.drift = fit.to_dict()
    _slope_check(report, fit, settings, "3_drift_slope")
    total = abs(fit.measured) + fit.tail_bound
    report.record("3_drift", Check(total < c0 / 4, total, c0 / 4, f"drift bound {total:.3g} >= c0/4 = {c0 / 4:.3g}"))
    return report.finish()


def search_s0(spec, grid, candidates=(4.0, 6.0, 8.0, 10.0, 12.0), settings=None):
    """First candidate passing :func:`certify_s0`; the last failure is raised otherwise."""
    last = None
    for s0 in candidates:
        report = certify_s0(spec, s0, grid, settings)
        if report.passed:
            return report
        last = report
        if report.failed_condition == "2_initial_value" and report.c0 <= C0_FLOOR * limit_constant(spec, grid)[1]:
            break
    raise CertificationFailure(last.message, last.failed_condition, last)


def revalidate(trace, names=("mtilde", "Q")):
    """Largest relative mismatch between stored scalars and a fresh recomputation."""
    worst = 0.0
    for k in (0, len(trace) - 1):
        s = trace.samples[k]
        rep = geometry_report(trace.surface(k)).to_dict()
        for name in names:
            stored = getattr(s, name)
            fresh = rep[name]
            err = abs(stored - fresh) / max(abs(stored), 1e-300)
            worst = max(worst, err)
    return worst


def run_and_certify(spec, s0, grid, settings=None, force=False, keep_trace=False):
    """Flow from ``s0 + fbar`` and certify a non-round limit.

    ``force`` skips the pre-flow certificate (used for negative controls);
    the report then still names the first failed condition.
    """
    settings = settings or PipelineSettings()
    n = grid.n
    pre = certify_s0(spec, s0, grid, settings) if not force else None
    if pre is not None and not pre.passed:
        return (pre, None) if keep_trace else pre
    report, scale = _new_report(spec, grid)
    report.s0 = float(s0)
    if pre is not None:
        report.conditions.update(pre.conditions)
    c0 = report.c0
    t_final = settings.final_time(n)
    report.t_final = t_final
    surface = construct_initial(spec, s0, grid)
    try:
        trace = flowmod.run(surface, t_final, settings.controls())
    except FlowBreakdown as exc:
        report.record("flow", Check(False, exc.t, None, str(exc)))
        report.finish()
        return (report, exc.trace) if keep_trace else report
    name = monotone_name(n)
    values = trace.column(name)
    report.initial_value = float(values[0])
    report.final_value = float(values[-1])

    if c0 <= C0_FLOOR * scale:
        report.record(
            "2_initial_value", Check(False, report.initial_value, c0 / 2, f"c0 = {c0:.3g} vanishes: not a counterexample")
        )

    if n == 3:
        steps = np.diff(values)
        report.record(
            "monotone",
            Check(bool(np.all(steps >= -1e-9 * max(c0, 1e-300))), float(steps.min()), 0.0, "mtilde decreased along the run"),
        )

    try:
        fit = fit_drift(trace)
    except InsufficientData as exc:
        report.record("drift_fit", Check(False, None, None, str(exc)))
        fit = None
    if fit is not None:
        report.drift = fit.to_dict()
        _slope_check(report, fit, settings, "drift_slope")
        if n == 3:
            bound = report.final_value + fit.tail_bound
            ok = bound < -c0 / 4
            detail = f"mtilde(T) + tail = {bound:.6g} is not < -c0/4 = {-c0 / 4:.6g}"
        else:
            bound = report.final_value - fit.tail_bound
            ok = bound > c0 / 4
            detail = f"Q(T) - tail = {bound:.6g} is not > c0/4 = {c0 / 4:.6g}"
        report.limit_bound = bound
        report.record("limit_sign", Check(bool(ok and c0 > C0_FLOOR * scale), bound, c0 / 4, detail))
        limit = settings.tail_fraction * abs(c0) / 4
        report.record(
            "tail_uncertainty",
            Check(fit.uncertainty < limit, fit.uncertainty, limit, f"tail uncertainty {fit.uncertainty:.3g} >= {limit:.3g}"),
        )

    try:
        pin = flowmod.pinching_diagnostics(trace)
        report.pinching = pin.to_dict()
        if n == 3:
            cb, gb = settings.curvature_band, settings.gradient_band
        else:
            cb = tuple(pin.expected_curvature * (1 + b) for b in (settings.slope_band, -settings.slope_band))
            gb = tuple(pin.expected_gradient * (1 + b) for b in (settings.slope_band, -settings.slope_band))
        for label, fitp, band in (("pinch_curvature", pin.curvature, cb), ("pinch_gradient", pin.gradient, gb)):
            ok = band[0] < fitp.slope < band[1]
            if c0 <= C0_FLOOR * scale and not np.isfinite(fitp.slope):
                ok = True
            report.record(label, Check(bool(ok), fitp.slope, None, f"slope {fitp.slope:.3f} outside {band}"))
    except InsufficientData as exc:
        report.record("pinching", Check(False, None, None, str(exc)))

    try:
        prof = flowmod.extract_profile(trace, settings.profile_tol)
        rr = roundness_report(prof.f, settings.thresholds)
        d = rr.to_dict()
        d["cauchy"] = prof.cauchy
        d["cauchy_monotone"] = prof.monotone
        report.roundness = d
        report.record("non_round", Check(rr.verdict == NON_ROUND, rr.rho_proj, settings.thresholds.nonround_above, f"verdict {rr.verdict}"))
        if n == 3:
            report.ball_model_gap = ball_model_limit(trace, settings.profile_tol).gap
    except NotConverged as exc:
        report.record("profile", Check(False, exc.diagnostic, settings.profile_tol, str(exc)))

    report.revalidation_error = revalidate(trace)
    report.record(
        "revalidation", Check(report.revalidation_error < 1e-10, report.revalidation_error, 1e-10, "stored and recomputed values differ")
    )
    report.finish()
    return (report, trace) if keep_trace else report


def highdim_construct_and_certify(n, spec, s0, settings=None, nodes=256, force=False, keep_trace=False):
    """Polar-symmetric version of :func:`run_and_certify` for n >= 4."""
    if n < 4:
        raise InputError("highdim pipeline needs n >= 4")
    grid = SphereGrid.polar(n, nodes)
    return run_and_certify(spec, s0, grid, settings, force=force, keep_trace=keep_trace)
