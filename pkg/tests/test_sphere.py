import math

import numpy as np
import pytest

from imcflab.sphere import (
    SphereField,
    SphereGrid,
    l2_norm,
    project_first_eigenspace,
    sphere_area,
    traceless_hess,
)


def test_sphere_area_values():
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi**2)


@pytest.mark.parametrize("make", [lambda: SphereGrid.full(12), lambda: SphereGrid.polar(4, 64), lambda: SphereGrid.polar(5, 64)])
def test_integrate_constant_gives_area(make):
    g = make()
    assert g.integrate(np.ones(g.shape)) == pytest.approx(sphere_area(g.n), rel=1e-13)


def test_roundtrip_band_limited(grid16):
    rng = np.random.default_rng(0)
    vals = grid16.synthesize(grid16.analyze(rng.normal(size=grid16.shape)))
    again = grid16.synthesize(grid16.analyze(vals))
    assert np.max(np.abs(vals - again)) < 1e-12


@pytest.mark.parametrize("l", [1, 2, 5])
def test_legendre_is_laplace_eigenfunction(grid16, l):
    u = SphereField.legendre(grid16, l)
    lap = grid16.synthesize(grid16.laplacian_coeffs(u.coeffs()))
    assert np.max(np.abs(lap + l * (l + 1) * u.values)) < 1e-10


def test_polar_eigenvalue(polar4):
    X = SphereField.cartesian(polar4, 4)
    lap = polar4.synthesize(polar4.laplacian_coeffs(X.coeffs()))
    assert np.max(np.abs(lap + 3 * X.values)) < 1e-9


@pytest.mark.parametrize("i", [1, 2, 3])
def test_first_eigenfunctions_have_zero_traceless_hessian(grid16, i):
    X = SphereField.cartesian(grid16, i)
    assert np.max(np.abs(traceless_hess(X).values)) < 1e-10


def test_p2_has_nonzero_traceless_hessian(grid16):
    P = SphereField.legendre(grid16, 2)
    assert np.max(np.abs(traceless_hess(P).values)) > 0.1


def test_polar_mode_lacks_horizontal_coordinates(polar4):
    assert polar4.cartesian(1) is None
    assert polar4.cartesian(4) is not None


def test_projection_recovers_span(grid16):
    w = 2.0 + 0.3 * SphereField.cartesian(grid16, 1) - 0.2 * SphereField.cartesian(grid16, 3)
    coeffs, resid = project_first_eigenspace(w)
    assert l2_norm(resid) < 1e-12
    assert coeffs[0] == pytest.approx(2.0)


def _poly(grid):
    x, y, z = (SphereField.cartesian(grid, i) for i in (1, 2, 3))
    return z * z * z + x * y - 0.5 * x


def test_prolong_preserves_values(grid16):
    fine = grid16.refined(2)
    c = grid16.prolong(_poly(grid16).coeffs(), fine)
    expect = _poly(fine)
    assert np.max(np.abs(fine.synthesize(c) - expect.values)) < 1e-12


def test_coefficient_list_roundtrip(grid16):
    f = SphereField.from_function(grid16, lambda th, ph: np.exp(np.sin(th) * np.cos(ph)))
    c = f.coeffs()
    back = grid16.coeffs_from_list(grid16.coeffs_to_list(c))
    assert np.allclose(back, c, atol=1e-15)


def test_refined_grid_doubles_band_limit(grid16):
    assert grid16.refined(2).lmax == 32
