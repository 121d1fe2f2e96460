import math

import numpy as np
import pytest

from imcflab.geometry import GraphSurface, gauss_identity_check, geometry_report
from imcflab.sphere import SphereField, SphereGrid


@pytest.mark.parametrize("r0", [0.5, 1.0, 3.0])
def test_geodesic_sphere_quantities(grid32, r0):
    rep = geometry_report(GraphSurface.sphere(grid32, r0))
    assert np.max(np.abs(rep.H.values - 2 / math.tanh(r0))) < 1e-10
    assert rep.area == pytest.approx(4 * math.pi * math.sinh(r0) ** 2, rel=1e-12)
    assert abs(rep.modified) < 1e-10
    assert rep.mean_convex


def test_polar_sphere_n5():
    g = SphereGrid.polar(5, 64)
    rep = geometry_report(GraphSurface.sphere(g, 1.3))
    assert np.max(np.abs(rep.H.values - 4 / math.tanh(1.3))) < 1e-10
    assert abs(rep.q) < 1e-12


def test_perturbed_surface_has_negative_modified_mass(grid16):
    f = 3.0 + 0.1 * SphereField.legendre(grid16, 2)
    rep = geometry_report(GraphSurface.from_field(f))
    assert rep.modified < 0
    assert rep.q > 0
    assert rep.mean_convex


def test_closed_formula_matches_direct(grid16):
    f = 2.0 + 0.1 * SphereField.legendre(grid16, 2) + 0.05 * SphereField.cartesian(grid16, 1)
    rep = geometry_report(GraphSurface.from_field(f))
    assert rep.closed_formula_error < 1e-10


def test_gauss_identity(grid16):
    f = 2.0 + 0.1 * SphereField.legendre(grid16, 3)
    assert gauss_identity_check(GraphSurface.from_field(f)) < 1e-9


def test_to_dict_keys(grid16):
    d = geometry_report(GraphSurface.sphere(grid16, 1.0)).to_dict()
    for key in ("n", "area", "mH", "mtilde", "Q"):
        assert key in d
