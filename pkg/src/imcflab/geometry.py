"""Extrinsic geometry of star-shaped radial graphs in H^n.

The ambient metric is ``dr^2 + sinh(r)^2 sigma``.  A graph ``r = rt(theta)``
is described through ``phi = log tanh(rt/2)``, whose sigma-gradient is
``D rt / sinh(rt)``.  All tensors are expressed in the sigma-orthonormal
frame of :mod:`imcflab.sphere`; mixed tensors ``T^i_j`` are stored as
``T[..., i, j]``.

Quantities that tend to a constant at large radius (``H``, ``h_ij`` versus
``g_ij``) are evaluated through their deviations so the small parts keep
full relative precision even when ``sinh(rt)^2 ~ 1e10``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, InputError
from .sphere import SphereField, SphereGrid, SphereTensor


def _log_tanh_half(r):
    er = np.exp(-r)
    return np.log1p(-er) - np.log1p(er)


def phi_from_r(r):
    """phi = -int_r^inf dx / sinh x = log tanh(r/2)."""
    vals = r.values if isinstance(r, SphereField) else np.asarray(r, dtype=float)
    if np.any(vals <= 0):
        raise DomainError("phi diverges: radial function must be positive")
    out = _log_tanh_half(vals)
    if isinstance(r, SphereField):
        return SphereField(r.grid, out)
    return out


class GraphSurface:
    """Hypersurface ``{(rt(theta), theta)}`` in H^n, n = grid.n.

    The radial function is held by its harmonic coefficients, so it is
    band-limited on ``grid`` by construction.
    """

    def __init__(self, grid, coeffs):
        if not isinstance(grid, SphereGrid):
            raise InputError("grid must be a SphereGrid")
        coeffs = np.asarray(coeffs)
        if coeffs.shape != grid.coeff_shape():
            raise InputError(f"coefficient shape {coeffs.shape} != {grid.coeff_shape()}")
        if not np.all(np.isfinite(coeffs)):
            raise InputError("radial coefficients must be finite")
        self.grid = grid
        self.coeffs = coeffs
        rmin = float(self.radius.values.min())
        if rmin <= 0:
            raise DomainError(f"surface is not star-shaped: min r = {rmin:.3g} <= 0")

    @classmethod
    def from_field(cls, radius):
        return cls(radius.grid, radius.coeffs())

    @classmethod
    def sphere(cls, grid, r0):
        """Geodesic sphere of radius r0 (only the degree-0 coefficient set)."""
        coeffs = grid.zero_coeffs()
        coeffs[(0,) * coeffs.ndim] = r0 * math.sqrt(grid.area)
        return cls(grid, coeffs)

    @property
    def n(self):
        return self.grid.n

    @cached_property
    def radius(self):
        return SphereField(self.grid, self.grid.synthesize(self.coeffs))

    def jet(self, order=2):
        if order <= 2:
            return self._jet2
        return self._jet3

    @cached_property
    def _jet2(self):
        return self.grid.jet(self.coeffs, order=2)

    @cached_property
    def _jet3(self):
        return self.grid.jet(self.coeffs, order=3)

    @cached_property
    def geometry(self):
        return SurfaceGeometry(self)


class SurfaceGeometry:
    """Pointwise and integral geometry of a :class:`GraphSurface`.

    Everything is computed lazily and cached; the object is immutable from
    the caller's point of view.
    """

    def __init__(self, surface):
        self.surface = surface
        self.grid = surface.grid
        self.n = surface.n
        self.dim = surface.n - 1
        jet = surface.jet(2)
        self.r = jet.u
        self.p = jet.du
        self.R = jet.d2u
        r = self.r
        self.sh = np.sinh(r)
        self.ch = np.cosh(r)
        self.ct = 1.0 / np.tanh(r)
        self.ct_m1 = 2.0 / np.expm1(2.0 * r)  # coth r - 1
        self.q = np.sum(self.p**2, axis=-1) / self.sh**2  # |D phi|^2
        self.v = np.sqrt(1.0 + self.q)
        self.w = 1.0 / self.v
        self.w_m1 = -self.q / (self.v * (1.0 + self.v))  # 1/v - 1
        self.eye = np.eye(self.dim)

    # -- first-order quantities -----------------------------------------
    @cached_property
    def dphi(self):
        return self.p / self.sh[..., None]

    @cached_property
    def hess_phi(self):
        """phi_ij = (D^2 rt - coth(rt) D rt D rt) / sinh(rt)."""
        B = self.R - self.ct[..., None, None] * np.einsum("...i,...j->...ij", self.p, self.p)
        return B / self.sh[..., None, None]

    @cached_property
    def sigma_tilde(self):
        """sigma^{ik} - phi^i phi^k / v^2, inverse of sigma + D phi D phi."""
        f = self.dphi
        return self.eye - np.einsum("...i,...k->...ik", f, f) / (self.v**2)[..., None, None]

    @cached_property
    def S(self):
        return np.einsum("...ik,...kj->...ij", self.sigma_tilde, self.hess_phi)

    @cached_property
    def trS(self):
        return np.trace(self.S, axis1=-2, axis2=-1)

    @cached_property
    def metric(self):
        """g_ij = sinh^2 sigma_ij + D_i rt D_j rt."""
        return (self.sh**2)[..., None, None] * self.eye + np.einsum("...i,...j->...ij", self.p, self.p)

    @cached_property
    def metric_inv(self):
        return self.sigma_tilde / (self.sh**2)[..., None, None]

    @cached_property
    def density(self):
        """sqrt(det g) relative to sqrt(det sigma)."""
        return self.sh ** (self.n - 1) * self.v

    @cached_property
    def area(self):
        return self.grid.integrate(self.density)

    def integrate(self, values):
        """Integral over the surface against its induced area form."""
        return self.grid.integrate(values * self.density)

    # -- curvature -------------------------------------------------------
    @cached_property
    def shape(self):
        """Mixed second fundamental form h^i_j."""
        a = (self.ct * self.w)[..., None, None] * self.eye
        return a - self.S * (self.w / self.sh)[..., None, None]

    @cached_property
    def H(self):
        return (self.n - 1) * self.ct * self.w - self.trS * self.w / self.sh

    @cached_property
    def Hm(self):
        """H - (n-1), free of cancellation at large radius."""
        return (self.n - 1) * (self.ct_m1 * self.w + self.w_m1) - self.trS * self.w / self.sh

    @cached_property
    def traceless(self):
        """Mixed traceless second fundamental form."""
        S0 = self.S - (self.trS / (self.n - 1))[..., None, None] * self.eye
        return -S0 * (self.w / self.sh)[..., None, None]

    @cached_property
    def A2(self):
        return np.einsum("...ij,...ji->...", self.shape, self.shape)

    @cached_property
    def Aring2(self):
        m = self.traceless
        return np.einsum("...ij,...ji->...", m, m)

    @cached_property
    def Aring2_direct(self):
        """|A|^2 - H^2/(n-1); only accurate while the surface is not huge."""
        return self.A2 - self.H**2 / (self.n - 1)

    @cached_property
    def Aring2_closed(self):
        """Closed formula for n = 3 written with sigma-tilde and phi_ij."""
        SS = np.einsum("...ij,...ji->...", self.S, self.S)
        return (SS - 0.5 * self.trS**2) * (self.w / self.sh) ** 2

    @cached_property
    def h_lower(self):
        """h_ij = (sinh cosh sigma + 2 coth D rt D rt - D^2 rt) / v."""
        pp = np.einsum("...i,...j->...ij", self.p, self.p)
        out = (self.sh * self.ch)[..., None, None] * self.eye + 2.0 * self.ct[..., None, None] * pp - self.R
        return out * self.w[..., None, None]

    # -- induced connection ----------------------------------------------
    @cached_property
    def christoffel_diff(self):
        """C^k_ij = Gamma(g)^k_ij - Gamma(sigma)^k_ij as C[..., k, i, j]."""
        p, I = self.p, self.eye
        shch = (self.sh * self.ch)[..., None, None, None]
        low = shch * (
            np.einsum("...i,jl->...lij", p, I)
            + np.einsum("...j,il->...lij", p, I)
            - np.einsum("...l,ij->...lij", p, I)
        ) + np.einsum("...ij,...l->...lij", self.R, p)
        return np.einsum("...kl,...lij->...kij", self.metric_inv, low)

    def grad_norm2(self, dF):
        """|grad F|^2_g from sigma-frame derivatives dF."""
        pd = np.einsum("...i,...i->...", self.dphi, dF)
        return (np.sum(dF**2, axis=-1) - pd**2 / self.v**2) / self.sh**2

    def hess_g(self, dF, d2F):
        """Induced-metric Hessian of a scalar from its sigma jet."""
        return d2F - np.einsum("...lki,...l->...ki", self.christoffel_diff, dF)

    def laplace_g(self, dF, d2F):
        return np.einsum("...ij,...ij->...", self.metric_inv, self.hess_g(dF, d2F))

    def advection(self, dF):
        """Rate of change of F at fixed theta due to tangential motion.

        The graph parametrisation moves points with radial speed v/H; its
        tangential part contributes ``(v/H) g^{ij} D_i rt D_j F``, which
        equals ``<D rt, D F> / (H v sinh^2 rt)``.
        """
        return np.einsum("...i,...i->...", self.p, dF) * self.w / (self.H * self.sh**2)

    # -- derivatives of H ------------------------------------------------
    @cached_property
    def H_jet(self):
        """Spectral jet of H (through H - (n-1))."""
        return self.grid.jet(self.grid.analyze(self.Hm), order=2)

    @cached_property
    def gradH2(self):
        return self.grad_norm2(self.H_jet.du)

    @cached_property
    def lapH(self):
        return self.laplace_g(self.H_jet.du, self.H_jet.d2u)

    # -- third-order quantities ------------------------------------------
    @cached_property
    def grad_A(self):
        """nabla_k h_ij as [..., k, i, j], evaluated on P = h - g."""
        jet = self.surface.jet(3)
        p, R, R3 = jet.du, jet.d2u, jet.d3u
        sh, ch, ct, w = self.sh, self.ch, self.ct, self.w
        I = self.eye
        er = np.exp(-self.r)
        a = sh * (er + ch * self.w_m1)
        b = 2.0 * ct * w - 1.0
        pp = np.einsum("...i,...j->...ij", p, p)
        P = a[..., None, None] * I + b[..., None, None] * pp - w[..., None, None] * R
        Dq = 2.0 * np.einsum("...ki,...i->...k", R, p) / (sh**2)[..., None] - 2.0 * (self.q * ct)[..., None] * p
        Dw = -0.5 * (w**3)[..., None] * Dq
        da_dr = (ch**2 + sh**2) * self.w_m1 + np.exp(-2.0 * self.r)
        Da = da_dr[..., None] * p + (sh * ch)[..., None] * Dw
        Db = (-2.0 * w / sh**2)[..., None] * p + 2.0 * ct[..., None] * Dw
        Dpp = np.einsum("...ki,...j->...kij", R, p) + np.einsum("...i,...kj->...kij", p, R)
        DP = (
            np.einsum("...k,ij->...kij", Da, I)
            + np.einsum("...k,...ij->...kij", Db, pp)
            + b[..., None, None, None] * Dpp
            - np.einsum("...k,...ij->...kij", Dw, R)
            - w[..., None, None, None] * R3
        )
        C = self.christoffel_diff
        return DP - np.einsum("...lki,...lj->...kij", C, P) - np.einsum("...lkj,...il->...kij", C, P)

    @cached_property
    def grad_A2(self):
        G, T = self.metric_inv, self.grad_A
        return np.einsum("...ia,...jb,...kc,...kij,...cab->...", G, G, G, T, T)

    # -- evolution right-hand sides --------------------------------------
    @cached_property
    def H_rhs(self):
        """Normal-parametrisation dH/dt along the flow with speed 1/H.

        ``Delta H / H^2 - 2|grad H|^2/H^3 - |A|^2/H + (n-1)/H``, with the
        last two terms combined without cancellation.
        """
        n1 = self.n - 1
        H = self.H
        curv = -self.Hm * (self.Hm + 2.0 * n1) / n1 - self.Aring2  # (n-1) - |A|^2
        return self.lapH / H**2 - 2.0 * self.gradH2 / H**3 + curv / H

    @cached_property
    def aring_split_terms(self):
        """(2 grad^j(grad_i H / H^2) m^i_j, tr(m^3)) for the traceless m."""
        H = self.H
        dH, d2H = self.H_jet.du, self.H_jet.d2u
        X = self.hess_g(dH, d2H) / (H**2)[..., None, None] - 2.0 * np.einsum(
            "...k,...i->...ki", dH, dH
        ) / (H**3)[..., None, None]
        m = self.traceless
        div = 2.0 * np.einsum("...jk,...ki,...ij->...", self.metric_inv, X, m)
        cube = np.einsum("...ki,...ij,...jk->...", m, m, m)
        return div, cube

    @cached_property
    def Aring2_rhs(self):
        """Normal-parametrisation d|A0|^2/dt from the traceless evolution law."""
        div, cube = self.aring_split_terms
        return div - 4.0 / (self.n - 1) * self.Aring2 - 2.0 * cube / self.H

    @cached_property
    def Q(self):
        return self.area ** (-(self.n - 5) / (self.n - 1)) * self.integrate(self.Aring2)

    @cached_property
    def Q_rate(self):
        """dQ/dt along the flow from the traceless evolution law."""
        div, cube = self.aring_split_terms
        return self.area ** (-(self.n - 5) / (self.n - 1)) * self.integrate(div - 2.0 * cube / self.H)

    @cached_property
    def mtilde_rate(self):
        """|Sigma| int |grad H|^2 / H^2 d mu."""
        return self.area * self.integrate(self.gradH2 / self.H**2)

    @cached_property
    def H2m4(self):
        """H^2 - 4 (n = 3) computed as (H-2)(H+2)."""
        return self.Hm * (self.Hm + 2.0 * (self.n - 1))


def induced_metric(surface):
    """Return ``(g, g_inv, v, area_density)`` in the sigma-orthonormal frame."""
    G = surface.geometry
    return G.metric, G.metric_inv, SphereField(G.grid, G.v), SphereField(G.grid, G.density)


def shape_operator(surface):
    G = surface.geometry
    return SphereTensor(G.grid, 2, G.shape)


@dataclass(frozen=True, eq=False)
class GeometryReport:
    n: int
    v: SphereField
    H: SphereField
    Hm: SphereField
    shape: SphereTensor
    A2: SphereField
    Aring2: SphereField
    gradH2_g: SphereField
    area: float
    hawking: float | None
    modified: float
    q: float
    minH: float
    maxH: float
    mean_convex: bool
    aring_int: float
    mtilde_rate: float
    closed_formula_error: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = {
            "n": self.n,
            "area": self.area,
            "mH": self.hawking,
            "mtilde": self.modified,
            "Q": self.q,
            "minH": self.minH,
            "maxH": self.maxH,
            "mean_convex": self.mean_convex,
            "int_aring2": self.aring_int,
            "mtilde_rate": self.mtilde_rate,
            "max_aring2": float(self.Aring2.values.max()),
            "closed_formula_error": self.closed_formula_error,
        }
        d.update(self.extra)
        return d


def geometry_report(surface):
    """All pointwise and integral quantities of a graph surface."""
    G = surface.geometry
    grid = G.grid
    n = G.n
    area = G.area
    aring_int = G.integrate(G.Aring2)
    hawking = None
    closed_err = None
    if n == 3:
        hawking = math.sqrt(area / (16 * math.pi)) * (1.0 - G.integrate(G.H2m4) / (16 * math.pi))
        scale = max(float(np.abs(G.Aring2).max()), 1e-300)
        closed_err = float(np.abs(G.Aring2_closed - G.Aring2_direct).max() / scale)
    mean_convex = bool(G.H.min() > 0)
    rate = G.mtilde_rate if mean_convex else float("nan")
    return GeometryReport(
        n=n,
        v=SphereField(grid, G.v),
        H=SphereField(grid, G.H),
        Hm=SphereField(grid, G.Hm),
        shape=SphereTensor(grid, 2, G.shape),
        A2=SphereField(grid, G.A2),
        Aring2=SphereField(grid, G.Aring2),
        gradH2_g=SphereField(grid, G.gradH2),
        area=area,
        hawking=hawking,
        modified=-area * aring_int,
        q=G.Q,
        minH=float(G.H.min()),
        maxH=float(G.H.max()),
        mean_convex=mean_convex,
        aring_int=aring_int,
        mtilde_rate=rate,
        closed_formula_error=closed_err,
    )


def gauss_identity_check(surface):
    """|1 - (1/16 pi) int (H^2-4) + (1/8 pi) int |A0|^2| for n = 3."""
    if surface.n != 3:
        raise InputError("the Gauss-Bonnet identity check needs n = 3")
    G = surface.geometry
    lhs = 1.0 - G.integrate(G.H2m4) / (16 * math.pi)
    rhs = -G.integrate(G.Aring2) / (8 * math.pi)
    return abs(lhs - rhs)
