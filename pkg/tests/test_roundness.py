import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imcflab import roundness as rd
from imcflab.errors import DomainError, InputError
from imcflab.sphere import SphereField, SphereGrid

G = SphereGrid.full(16)
# the curvature channel differentiates log(w); strongly tilted w needs L = 32
G32 = SphereGrid.full(32)
P4 = SphereGrid.polar(4, 128)


def _span_profile(grid, a0, a):
    w = SphereField.constant(grid, a0)
    for i, ai in enumerate(a, start=1):
        w = w + ai * SphereField.cartesian(grid, i)
    return w.map(lambda x: -np.log(x))


@given(
    a0=st.floats(1.0, 3.0),
    a=st.tuples(*(st.floats(-0.5, 0.5) for _ in range(3))),
)
@settings(max_examples=15, deadline=None)
def test_span_profiles_are_round(a0, a):
    f = _span_profile(G32, a0, a)
    rho, kvar = rd.roundness_residual(f)
    assert rho < 1e-10
    assert kvar < 1e-6
    assert rd.limit_functional(f) < 1e-10


def test_p2_profile_is_not_round():
    f = (1.0 + 0.1 * SphereField.legendre(G, 2)).map(lambda x: -np.log(x))
    rep = rd.roundness_report(f)
    assert rep.verdict == rd.NON_ROUND
    assert rep.functional > 1e-3
    assert rep.K_variation > 1e-3


def test_limit_functional_p2_oracle():
    # w = 1 + eps P2: traceless Hessian of P2 has |.|^2 = (9/2) sin^4 theta.
    eps = 0.1
    f = (1.0 + eps * SphereField.legendre(G, 2)).map(lambda x: -np.log(x))
    x, wts = np.polynomial.legendre.leggauss(200)
    w = 1 + eps * (1.5 * x * x - 0.5)
    first = 2 * math.pi * np.sum(wts / w**2)
    second = 2 * math.pi * np.sum(wts * eps**2 * 4.5 * (1 - x * x) ** 2)
    assert rd.limit_functional(f) == pytest.approx(first * second, rel=1e-10)


@given(c=st.floats(-2.0, 2.0))
@settings(max_examples=15, deadline=None)
def test_rho_proj_invariant_under_constant_shift(c):
    f = (1.0 + 0.2 * SphereField.legendre(G, 2)).map(lambda x: -np.log(x))
    _, base = rd.projection_residual(f)
    _, shifted = rd.projection_residual(f + c)
    assert shifted == pytest.approx(base, rel=1e-12)


@given(angle=st.floats(0.0, 2 * math.pi))
@settings(max_examples=10, deadline=None)
def test_limit_functional_rotation_invariant(angle):
    def w(th, ph):
        x = np.sin(th) * np.cos(ph)
        y = np.sin(th) * np.sin(ph)
        z = np.cos(th)
        xr = math.cos(angle) * x + math.sin(angle) * z
        return 1.0 + 0.1 * (1.5 * xr * xr - 0.5) + 0.05 * y

    f = SphereField.from_function(G, lambda th, ph: -np.log(w(th, ph)))
    ref = SphereField.from_function(G, lambda th, ph: -np.log(1.0 + 0.1 * (1.5 * np.cos(th) ** 2 - 0.5) + 0.05 * np.sin(th) * np.sin(ph)))
    assert rd.limit_functional(f) == pytest.approx(rd.limit_functional(ref), rel=1e-8)


def test_limit_functional_n_reduces_to_n3():
    f = (1.0 + 0.1 * SphereField.legendre(G, 2)).map(lambda x: -np.log(x))
    assert rd.limit_functional_n(f) == pytest.approx(rd.limit_functional(f), rel=1e-12)


def test_polar_limit_functional_positive_for_p2():
    f = (1.0 + 0.1 * SphereField.legendre(P4, 2)).map(lambda x: -np.log(x))
    assert rd.limit_functional_n(f) > 1e-3
    g = (1.0 + 0.1 * SphereField.cartesian(P4, 4)).map(lambda x: -np.log(x))
    assert rd.limit_functional_n(g) < 1e-12


def test_curvature_channel_needs_s2():
    with pytest.raises(InputError):
        rd.conformal_curvature(SphereField.constant(P4, 0.0))


def test_constant_conformal_factor_curvature():
    K = rd.conformal_curvature(SphereField.constant(G, 0.5))
    assert np.allclose(K.values, math.exp(-1.0))


def test_thresholds_classify():
    th = rd.Thresholds()
    assert th.classify(1e-6) == rd.ROUND
    assert th.classify(1e-3) == rd.INDETERMINATE
    assert th.classify(0.1) == rd.NON_ROUND
    with pytest.raises(InputError):
        rd.Thresholds(1e-2, 1e-4)


def test_normalize_profile_volume():
    f = (1.0 + 0.1 * SphereField.legendre(P4, 2)).map(lambda x: -np.log(x)) + 3.0
    g = rd.normalize_profile(f)
    assert P4.integrate(np.exp(3 * g.values)) == pytest.approx(2 * math.pi**2, rel=1e-12)


@given(r=st.floats(1e-3, 8.0))
def test_ball_model_roundtrip_from_r(r):
    assert abs(rd.ball_model_inverse(rd.ball_model_radius(r)) - r) < 1e-12


@given(rho=st.floats(1e-6, 2.0, exclude_max=True))
def test_ball_model_roundtrip_from_rho(rho):
    assert abs(rd.ball_model_radius(rd.ball_model_inverse(rho)) - rho) < 1e-12


def test_ball_model_matches_formula():
    r = np.linspace(0.1, 5, 7)
    assert np.allclose(rd.ball_model_radius(r), 2 - 4 / (np.exp(r) + 1), rtol=1e-14)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_ball_model_domain(bad):
    with pytest.raises(DomainError):
        rd.ball_model_radius(bad)


@pytest.mark.parametrize("bad", [0.0, 2.0, 2.5])
def test_ball_model_inverse_domain(bad):
    with pytest.raises(DomainError):
        rd.ball_model_inverse(bad)
