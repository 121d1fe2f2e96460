import math

import numpy as np
import pytest

from imcflab import flow
from imcflab.errors import FlowBreakdown, InsufficientData, NotConverged
from imcflab.geometry import GraphSurface
from imcflab.sphere import SphereField, SphereGrid


@pytest.fixture(scope="module")
def p2_trace():
    g = SphereGrid.full(16)
    f = 3.0 + 0.15 * SphereField.legendre(g, 2)
    return flow.run(GraphSurface.from_field(f), 1.0, flow.FlowControls(cadence=0.1))


def test_sphere_radius_follows_exact_solution(grid16):
    tr = flow.run(GraphSurface.sphere(grid16, 1.0), 1.0, flow.FlowControls(cadence=0.25))
    for s in tr.samples:
        exact = math.asinh(math.sinh(1.0) * math.exp(s.t / 2))
        r = grid16.synthesize(s.coeffs)
        assert np.max(np.abs(r - exact)) < 1e-8


def test_samples_land_on_cadence(p2_trace):
    assert np.allclose(p2_trace.times, np.round(np.arange(11) * 0.1, 12), atol=1e-12)
    assert p2_trace.status == "completed"


def test_mtilde_non_decreasing(p2_trace):
    assert np.all(np.diff(p2_trace.column("mtilde")) >= 0)


def test_area_law(p2_trace):
    a = p2_trace.column("area")
    assert np.max(np.abs(a / a[0] / np.exp(p2_trace.times) - 1)) < 1e-5


@pytest.mark.parametrize("name", ["mono", "hev", "aring"])
def test_residuals_small(p2_trace, name):
    res = flow.residual_series(p2_trace, name)
    assert np.nanmax(res) < 0.05


def test_aring_integral_consistency(p2_trace):
    for k in range(1, len(p2_trace) - 1):
        assert flow.aring_integral_consistency(p2_trace, k) < 1e-10


def test_fit_exponential_recovers_rate():
    t = np.linspace(0, 5, 30)
    fit = flow.fit_exponential(t, 2.5 * np.exp(-1.7 * t))
    assert fit.slope == pytest.approx(-1.7, rel=1e-10)
    assert fit.prefactor == pytest.approx(2.5, rel=1e-10)


def test_fit_exponential_too_few_points_is_nan():
    fit = flow.fit_exponential(np.arange(3.0), np.ones(3))
    assert math.isnan(fit.slope)
    assert fit.npoints == 3


def test_pinching_needs_long_run(p2_trace):
    with pytest.raises(InsufficientData):
        flow.pinching_diagnostics(p2_trace)


def test_profile_not_converged_early(p2_trace):
    with pytest.raises(NotConverged) as info:
        flow.extract_profile(p2_trace, tol=1e-6)
    assert info.value.diagnostic > 1e-6


def test_non_mean_convex_start_breaks_down(grid16):
    f = 0.3 + 0.25 * SphereField.legendre(grid16, 6)
    with pytest.raises(FlowBreakdown) as info:
        flow.run(GraphSurface.from_field(f), 0.5)
    assert info.value.node is not None


def test_stability_dt_shrinks_with_resolution():
    dts = []
    for L in (8, 16, 32):
        g = SphereGrid.full(L)
        dts.append(flow.stability_dt(GraphSurface.sphere(g, 1.0)))
    assert dts[0] > dts[1] > dts[2]


def test_polar_flow_q_drift_residual():
    g = SphereGrid.polar(4, 128)
    f = 3.0 + 0.15 * SphereField.legendre(g, 2)
    tr = flow.run(GraphSurface.from_field(f), 0.6, flow.FlowControls(cadence=0.1))
    assert np.nanmax(flow.residual_series(tr, "qdrift")) < 0.05
