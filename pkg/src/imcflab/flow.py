"""Inverse mean curvature flow of radial graphs.

A star-shaped graph moving with outward normal speed 1/H has radial speed
v/H at fixed direction theta, so the flow reduces to the scalar parabolic
equation ``d rt/dt = v/H``.  It is integrated with classical RK4 on the
harmonic coefficients of ``rt``; every stage re-projects onto degree
``lmax``, which doubles as de-aliasing.

Evolution laws for H and |A0|^2 are stated for the normal
parametrisation.  Trace samples are taken at fixed theta, so the residual
monitors subtract the tangential advection ``(v/H) <grad rt, grad F>_g``
from the finite-difference time derivative before comparing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels
from .errors import FlowBreakdown, InsufficientData, NotConverged, StepRejected
from .geometry import GraphSurface, geometry_report
from .sphere import SphereField

log = logging.getLogger(__name__)

RK4_REAL_STABILITY = 2.785


@dataclass
class FlowControls:
    """Time-stepping and sampling controls.

    ``cadence`` is the spacing of trace samples; ``dt_max`` caps the step
    and the step is further limited by the parabolic stability bound
    scaled by ``c_stab``.
    """

    dt_max: float = 0.05
    cadence: float = 0.1
    c_stab: float = 0.5
    tail_tol: float = 1e-6
    tail_growth: float = 1.5
    max_rejections: int = 30
    keep_fields: bool = True


@dataclass
class FlowState:
    t: float
    surface: GraphSurface

    @cached_property
    def report(self):
        return geometry_report(self.surface)

    @classmethod
    def start(cls, surface, t=0.0):
        return cls(float(t), surface)


def _speed_coeffs(grid, coeffs, t=None):
    jet = grid.jet(coeffs, order=2)
    speed, Hm = kernels.imcf_speed(jet.u, jet.du, jet.d2u, grid.n)
    H = Hm + (grid.n - 1)
    bad = int(np.argmin(H))
    if not H[bad] > 0:
        theta, phi = grid.node_coords(bad)
        raise FlowBreakdown(
            f"mean convexity lost: H = {H[bad]:.3g} at theta={theta:.4f}, phi={phi}",
            node=bad,
            t=t,
        )
    return grid.analyze(speed.reshape(grid.shape))


def tail_energy(grid, coeffs):
    """Energy in the top quarter of resolved degrees."""
    e = grid.degree_energy(coeffs)
    cut = (3 * grid.lmax) // 4
    return float(e[cut + 1 :].sum()), float(e.sum())


def stability_dt(surface, c_stab=0.5):
    """Explicit-RK4 step bound for the linearised diffusion of the graph flow.

    The leading part of ``d(v/H)`` is ``tr(sigma_tilde D^2 dr)/(H sinh rt)^2``,
    so the stiffest resolved mode decays at ``L(L+n-2) max 1/(H sinh rt)^2``.
    """
    G = surface.geometry
    kappa = float(np.max(1.0 / (G.H * G.sh) ** 2))
    L = surface.grid.lmax
    lam = kappa * L * (L + surface.n - 2)
    return c_stab * RK4_REAL_STABILITY / lam


def step(state, dt, controls=None):
    """Advance one RK4 step of size ``dt``."""
    controls = controls or FlowControls()
    surface = state.surface
    grid = surface.grid
    c0 = surface.coeffs
    t = state.t
    k1 = _speed_coeffs(grid, c0, t)
    k2 = _speed_coeffs(grid, c0 + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = _speed_coeffs(grid, c0 + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = _speed_coeffs(grid, c0 + dt * k3, t + dt)
    c1 = c0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(c1)):
        raise StepRejected("non-finite coefficients after step", dt=dt)
    tail_new, total = tail_energy(grid, c1)
    tail_old, _ = tail_energy(grid, c0)
    if tail_new > controls.tail_tol * total and tail_new > controls.tail_growth * tail_old:
        raise StepRejected(
            f"spectral tail {tail_new / total:.2e} of total energy is growing; reduce dt", dt=dt
        )
    new = GraphSurface(grid, c1)
    return FlowState(t + dt, new)


@dataclass
class FlowSample:
    """Scalar diagnostics and (optionally) node fields at one trace time."""

    t: float
    area: float
    mH: float | None
    mtilde: float
    Q: float
    minH: float
    maxH: float
    mtilde_rate: float
    Q_rate: float
    int_aring2: float
    int_gradH2_H2: float
    int_aring2_rhs: float
    sup_pinch_H: float
    sup_grad_A2: float
    coeffs: np.ndarray
    fields: dict | None = None


def sample_state(state, keep_fields=True):
    G = state.surface.geometry
    rep = state.report
    n = G.n
    if n == 3:
        sup_pinch = float(np.abs(G.H2m4).max())
    else:
        sup_pinch = float(np.max(G.Hm**2 + G.Aring2))
    fields = None
    if keep_fields:
        grid = G.grid
        aring_jet = grid.jet(grid.analyze(G.Aring2), order=1)
        fields = {
            "Hm": G.Hm.copy(),
            "Aring2": G.Aring2.copy(),
            "H_rhs": G.H_rhs,
            "Aring2_rhs": G.Aring2_rhs,
            "adv_H": G.advection(G.H_jet.du),
            "adv_Aring2": G.advection(aring_jet.du),
        }
    return FlowSample(
        t=state.t,
        area=rep.area,
        mH=rep.hawking,
        mtilde=rep.modified,
        Q=rep.q,
        minH=rep.minH,
        maxH=rep.maxH,
        mtilde_rate=G.mtilde_rate,
        Q_rate=G.Q_rate,
        int_aring2=rep.aring_int,
        int_gradH2_H2=G.integrate(G.gradH2 / G.H**2),
        int_aring2_rhs=G.integrate(G.Aring2_rhs),
        sup_pinch_H=sup_pinch,
        sup_grad_A2=float(G.grad_A2.max()),
        coeffs=state.surface.coeffs.copy(),
        fields=fields,
    )


@dataclass
class FlowTrace:
    grid: object
    controls: FlowControls
    samples: list = field(default_factory=list)
    status: str = "running"
    message: str = ""
    steps: int = 0
    rejections: int = 0

    @property
    def n(self):
        return self.grid.n

    def __len__(self):
        return len(self.samples)

    @property
    def times(self):
        return np.array([s.t for s in self.samples])

    def column(self, name):
        return np.array([getattr(s, name) for s in self.samples], dtype=float)

    @property
    def initial_area(self):
        return self.samples[0].area

    def surface(self, k):
        return GraphSurface(self.grid, self.samples[k].coeffs)

    def pinch_columns(self):
        """Scaled pinching quantities (|S_0|^a sup X) for every sample."""
        n = self.n
        A0 = self.initial_area
        if n == 3:
            e1, e2 = 1.0, 3.0
        else:
            e1, e2 = 4.0 / (n - 1), 6.0 / (n - 1)
        p1 = A0**e1 * self.column("sup_pinch_H")
        p2 = A0**e2 * self.column("sup_grad_A2")
        return p1, p2


def run(initial, t_final, controls=None, t0=0.0, progress=None):
    """Integrate the flow from ``initial`` to ``t_final``.

    Raises :class:`FlowBreakdown` (with ``.trace`` holding the samples
    collected so far) if mean convexity is lost.
    """
    controls = controls or FlowControls()
    if controls.cadence <= 0:
        raise ValueError("cadence must be positive")
    state = FlowState.start(initial, t0)
    if not state.report.mean_convex:
        H = state.report.H.values.reshape(-1)
        bad = int(np.argmin(H))
        theta, phi = initial.grid.node_coords(bad)
        raise FlowBreakdown(
            f"initial surface is not mean-convex: H = {H[bad]:.3g} at theta={theta:.4f}, phi={phi}", node=bad, t=t0
        )
    trace = FlowTrace(initial.grid, controls)
    trace.samples.append(sample_state(state, controls.keep_fields))
    nsamp = int(math.floor((t_final - t0) / controls.cadence + 1e-9))
    targets = [t0 + k * controls.cadence for k in range(1, nsamp + 1)]
    if not targets or t_final - targets[-1] > 1e-9 * max(1.0, t_final):
        targets.append(t_final)
    dt_scale = 1.0
    for target in targets:
        while target - state.t > 1e-12 * max(1.0, target):
            dt = min(controls.dt_max, stability_dt(state.surface, controls.c_stab)) * dt_scale
            dt = min(dt, target - state.t)
            if target - state.t - dt < 1e-9 * dt:
                dt = target - state.t
            try:
                new = step(state, dt, controls)
            except StepRejected as exc:
                trace.rejections += 1
                if trace.rejections > controls.max_rejections:
                    trace.status = "rejected"
                    trace.message = str(exc)
                    raise
                dt_scale *= 0.5
                log.debug("step rejected at t=%.4f: %s", state.t, exc)
                continue
            except FlowBreakdown as exc:
                trace.status = "breakdown"
                trace.message = str(exc)
                exc.trace = trace
                raise
            state = new
            trace.steps += 1
            if not state.report.mean_convex:
                trace.status = "breakdown"
                trace.message = f"mean convexity lost at t={state.t:.4f}"
                raise FlowBreakdown(trace.message, t=state.t, trace=trace)
        state = FlowState(target, state.surface)
        trace.samples.append(sample_state(state, controls.keep_fields))
        if progress is not None:
            progress(trace)
    trace.status = "completed"
    return trace


# -- residual monitors ------------------------------------------------------
def _ddt(trace, k, values):
    """Second-order centred derivative on possibly uneven samples."""
    if not 0 < k < len(trace) - 1:
        raise InsufficientData(f"sample {k} has no neighbours on both sides")
    t = trace.times
    h1 = t[k] - t[k - 1]
    h2 = t[k + 1] - t[k]
    a = -h2 / (h1 * (h1 + h2))
    b = (h2 - h1) / (h1 * h2)
    c = h1 / (h2 * (h1 + h2))
    return a * values(k - 1) + b * values(k) + c * values(k + 1)


def _fields(trace, k):
    f = trace.samples[k].fields
    if f is None:
        raise InsufficientData("trace was recorded without node fields")
    return f


ROUNDOFF_SCALE = 1e-20


def _relative(abs_err, scale):
    """Relative error, or the absolute one when both sides are round-off."""
    if scale > ROUNDOFF_SCALE:
        return abs_err / scale
    return abs_err


def monotonicity_residual(trace, k, relative=False):
    """|d mtilde/dt - |Sigma| int |grad H|^2/H^2| at sample k."""
    d = _ddt(trace, k, lambda j: trace.samples[j].mtilde)
    rate = trace.samples[k].mtilde_rate
    err = abs(d - rate)
    return _relative(err, abs(rate)) if relative else err


def q_drift_residual(trace, k, relative=False):
    """|dQ/dt (finite difference) - dQ/dt (evolution law)| at sample k."""
    d = _ddt(trace, k, lambda j: trace.samples[j].Q)
    rate = trace.samples[k].Q_rate
    err = abs(d - rate)
    return _relative(err, abs(rate)) if relative else err


def h_evolution_residual(trace, k, relative=False):
    """Sup-norm mismatch in the evolution law of H at sample k."""
    lhs = _ddt(trace, k, lambda j: _fields(trace, j)["Hm"]) - _fields(trace, k)["adv_H"]
    rhs = _fields(trace, k)["H_rhs"]
    err = float(np.abs(lhs - rhs).max())
    return _relative(err, float(np.abs(rhs).max())) if relative else err


def aring_evolution_residual(trace, k, relative=False):
    """Sup-norm mismatch in the evolution law of |A0|^2 at sample k."""
    lhs = _ddt(trace, k, lambda j: _fields(trace, j)["Aring2"]) - _fields(trace, k)["adv_Aring2"]
    rhs = _fields(trace, k)["Aring2_rhs"]
    err = float(np.abs(lhs - rhs).max())
    return _relative(err, float(np.abs(rhs).max())) if relative else err


def aring_integral_consistency(trace, k):
    """Relative gap between int(evolution law + |A0|^2) and -int|A0|^2 - int|grad H|^2/H^2.

    The two agree exactly for n = 3 after integrating by parts with the
    Codazzi equation.
    """
    s = trace.samples[k]
    lhs = s.int_aring2_rhs + s.int_aring2
    rhs = -s.int_aring2 - s.int_gradH2_H2
    return abs(lhs - rhs) / max(abs(rhs), 1e-300)


def residual_series(trace, name, relative=True):
    """Residual at every interior sample (NaN at the endpoints)."""
    func = {
        "mono": monotonicity_residual,
        "hev": h_evolution_residual,
        "aring": aring_evolution_residual,
        "qdrift": q_drift_residual,
    }[name]
    out = np.full(len(trace), np.nan)
    for k in range(1, len(trace) - 1):
        if name == "hev" or name == "aring":
            if trace.samples[k].fields is None:
                continue
        out[k] = func(trace, k, relative=relative)
    return out


# -- decay fits ---------------------------------------------------------------
@dataclass(frozen=True)
class DecayFit:
    slope: float
    prefactor: float
    npoints: int
    t_start: float
    t_end: float

    def to_dict(self):
        return {
            "slope": self.slope,
            "prefactor": self.prefactor,
            "npoints": self.npoints,
            "t_start": self.t_start,
            "t_end": self.t_end,
        }


def fit_exponential(t, y, t_start=None, min_points=5):
    """Least-squares fit of ``log y = log A + slope * t`` over ``t >= t_start``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = np.isfinite(y) & (y > 0)
    if t_start is not None:
        mask &= t >= t_start - 1e-12
    if mask.sum() < min_points:
        return DecayFit(float("nan"), float("nan"), int(mask.sum()), float("nan"), float("nan"))
    slope, intercept = np.polyfit(t[mask], np.log(y[mask]), 1)
    return DecayFit(float(slope), float(math.exp(intercept)), int(mask.sum()), float(t[mask][0]), float(t[mask][-1]))


@dataclass(frozen=True)
class PinchingReport:
    curvature: DecayFit
    gradient: DecayFit
    expected_curvature: float
    expected_gradient: float

    def to_dict(self):
        return {
            "curvature": self.curvature.to_dict(),
            "gradient": self.gradient.to_dict(),
            "expected_curvature_slope": self.expected_curvature,
            "expected_gradient_slope": self.expected_gradient,
        }


def pinching_diagnostics(trace, t_start=None):
    """Fitted exponential decay of the scaled pinching quantities.

    For n = 3 these are |S_0| sup|H^2-4| and |S_0|^3 sup|grad A|^2, for
    general n |S_0|^{4/(n-1)} sup(|H-(n-1)|^2+|A0|^2) and
    |S_0|^{6/(n-1)} sup|grad A|^2.  By default the first quarter of the
    trace is skipped as transient.
    """
    t = trace.times
    if len(t) < 5 or t[-1] - t[0] < 2.0:
        raise InsufficientData("pinching fits need >= 5 samples over a time span >= 2")
    if t_start is None:
        t_start = t[0] + 0.25 * (t[-1] - t[0])
    p1, p2 = trace.pinch_columns()
    n = trace.n
    e1, e2 = (-1.0, -3.0) if n == 3 else (-4.0 / (n - 1), -6.0 / (n - 1))
    return PinchingReport(fit_exponential(t, p1, t_start), fit_exponential(t, p2, t_start), e1, e2)


# -- asymptotic profile ----------------------------------------------------------
@dataclass(frozen=True, eq=False)
class Profile:
    f: SphereField
    t: float
    cauchy: float
    history: tuple
    monotone: bool


def extract_profile(trace, tol=1e-3):
    """Limit profile ``f = rt(., T) - T/(n-1)`` with a Cauchy diagnostic."""
    if len(trace) < 2:
        raise InsufficientData("need at least two snapshots")
    n = trace.n
    grid = trace.grid

    def prof(k):
        s = trace.samples[k]
        return grid.synthesize(s.coeffs) - s.t / (n - 1)

    last = len(trace) - 1
    diffs = []
    for k in range(max(1, last - 4), last + 1):
        diffs.append(float(np.abs(prof(k) - prof(k - 1)).max()))
    cauchy = diffs[-1]
    monotone = all(b <= a * (1 + 1e-6) + 1e-15 for a, b in zip(diffs, diffs[1:]))
    if cauchy > tol:
        raise NotConverged(
            f"profile not converged: last snapshot difference {cauchy:.3e} > {tol:.1e}",
            diagnostic=cauchy,
        )
    return Profile(SphereField(grid, prof(last)), trace.samples[last].t, cauchy, tuple(diffs), monotone)
