"""Spectral calculus on the round unit sphere S^{n-1}.

Two grid modes are supported:

``full``
    S^2 only.  Gauss-Legendre colatitudes times uniform longitudes; fields
    are expanded in fully normalised spherical harmonics.
``polar``
    Any S^{n-1}, fields depending on the colatitude alone.  Gauss-Jacobi
    nodes for the weight sin^{n-2}(theta) and orthonormal zonal
    (Gegenbauer) harmonics.

Tensor components are always returned in the sigma-orthonormal frame
``e_1 = d/dtheta`` and ``e_2..e_{n-1}`` tangent to the colatitude spheres
(``e_2 = (1/sin theta) d/dphi`` on S^2).  Third covariant derivatives use
the convention ``D3[..., k, i, j] = (D_k D^2 u)_{ij}``.

Derivatives come from exact derivatives of the basis functions.  Grid
nodes never sit on a pole, so no quantity is ever evaluated there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import InputError

FULL = "full"
POLAR = "polar"


def sphere_area(n):
    """Area of the unit sphere S^{n-1} in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


class Jet(NamedTuple):
    """Value and covariant derivatives of a scalar at the grid nodes."""

    u: np.ndarray
    du: np.ndarray
    d2u: np.ndarray | None = None
    d3u: np.ndarray | None = None


def _legendre_table(lmax, x, s):
    """Fully normalised associated Legendre functions.

    Returns ``P[..., l, m]`` with ``int_{-1}^{1} P_l^m(x)^2 dx = 1/(2 pi)``.
    ``s`` is the *signed* sine so the output is the analytic continuation
    in theta (a trigonometric polynomial of degree l).
    """
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    P = np.zeros(x.shape + (lmax + 1, lmax + 1))
    pmm = np.full_like(x, 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(lmax + 1):
        if m > 0:
            pmm = math.sqrt((2 * m + 1) / (2.0 * m)) * s * pmm
        P[..., m, m] = pmm
        if m + 1 <= lmax:
            P[..., m + 1, m] = math.sqrt(2 * m + 3) * x * pmm
        for l in range(m + 2, lmax + 1):
            a = math.sqrt((4.0 * l * l - 1) / (l * l - m * m))
            a_prev = math.sqrt((4.0 * (l - 1) ** 2 - 1) / ((l - 1) ** 2 - m * m))
            P[..., l, m] = a * (x * P[..., l - 1, m] - P[..., l - 2, m] / a_prev)
    return P


def _legendre_theta_derivatives(lmax, theta, order=3):
    """d^a/dtheta^a of P_l^m(cos theta) at ``theta`` for a = 0..order.

    Each P_l^m(cos theta) is a trigonometric polynomial of degree l with
    only frequencies of the parity of l; it is sampled on a periodic grid,
    transformed exactly, and differentiated term by term.
    """
    M = 2 * lmax + 4
    tk = 2.0 * np.pi * np.arange(M) / M
    vals = _legendre_table(lmax, np.cos(tk), np.sin(tk))
    c = np.fft.fft(vals, axis=0) / M
    k = np.rint(np.fft.fftfreq(M) * M).astype(int)
    l = np.arange(lmax + 1)
    keep = (np.abs(k)[:, None] <= l[None, :]) & ((k[:, None] - l[None, :]) % 2 == 0)
    c = c * keep[:, :, None]
    E = np.exp(1j * np.outer(theta, k))
    out = np.empty((order + 1, len(theta), lmax + 1, lmax + 1))
    for a in range(order + 1):
        Ea = E * (1j * k) ** a
        out[a] = np.real(np.einsum("jk,klm->jlm", Ea, c))
    mask = np.tril(np.ones((lmax + 1, lmax + 1), dtype=bool))
    out *= mask
    return out


def _zonal_table(n, x, lmax, order=3):
    """Orthonormal zonal harmonics of S^{n-1} and their x-derivatives.

    ``tab[k, j, l]`` is the k-th derivative in x = cos(theta) of the degree-l
    zonal harmonic, normalised to unit L^2(sigma) norm.  Built from the
    three-term recurrence of the orthonormal Gegenbauer family and its
    differentiated forms, which stay accurate at high degree.
    """
    lam = (n - 2) / 2.0
    l = np.arange(1, lmax + 2, dtype=float)
    b = np.sqrt(l * (l + 2 * lam - 1) / (4.0 * (l + lam) * (l + lam - 1)))
    b = np.concatenate([[0.0], b])  # b[l] couples degrees l and l-1
    tab = np.zeros((order + 1, len(x), lmax + 1))
    tab[0, :, 0] = 1.0 / math.sqrt(sphere_area(n))
    for k in range(order + 1):
        for deg in range(lmax):
            prev = tab[k, :, deg - 1] if deg > 0 else 0.0
            lower = k * tab[k - 1, :, deg] if k > 0 else 0.0
            tab[k, :, deg + 1] = (x * tab[k, :, deg] + lower - b[deg] * prev) / b[deg + 1]
    return tab


def _christoffel_weights(n, x):
    """Gauss weights (for d mu_sigma) as Christoffel numbers of the nodes."""
    Z = _zonal_table(n, x, len(x) - 1, order=0)[0]
    return 1.0 / np.sum(Z**2, axis=1)


class SphereGrid:
    """Quadrature grid and spectral transforms on S^{n-1}.

    Parameters
    ----------
    n : int
        Ambient dimension of H^n; the sphere is S^{n-1}.
    lmax : int
        Band limit (maximum harmonic degree kept).
    mode : {"full", "polar"}
    nlat : int, optional
        Number of colatitude nodes.  Defaults to ``3*lmax//2 + 1`` (full)
        or 256 (polar).
    nlon : int, optional
        Number of longitude nodes (full mode).  Defaults to ``2*nlat``.
    """

    def __init__(self, n=3, lmax=32, mode=FULL, nlat=None, nlon=None):
        if mode not in (FULL, POLAR):
            raise InputError(f"unknown grid mode {mode!r}")
        n = int(n)
        lmax = int(lmax)
        if n < 3:
            raise InputError("dimension n must be >= 3")
        if mode == FULL and n != 3:
            raise InputError("full-2D mode requires n = 3; use polar mode for n >= 4")
        if lmax < 2:
            raise InputError("lmax must be >= 2")
        if nlat is None:
            nlat = 3 * lmax // 2 + 1 if mode == FULL else 256
        nlat = int(nlat)
        if nlat < lmax + 1:
            raise InputError(f"nlat={nlat} must be >= lmax+1={lmax + 1}")
        self.n = n
        self.lmax = lmax
        self.mode = mode
        self.nlat = nlat
        if mode == FULL:
            nlon = 2 * nlat if nlon is None else int(nlon)
            if nlon < 2 * lmax + 2:
                raise InputError(f"nlon={nlon} must be >= 2*lmax+2={2 * lmax + 2}")
            self.nlon = nlon
            x, w = roots_legendre(nlat)
        else:
            if nlon is not None:
                raise InputError("polar mode has no longitude nodes")
            self.nlon = None
            alpha = (n - 3) / 2.0
            x, w = roots_jacobi(nlat, alpha, alpha)
        order = np.argsort(-x)  # north to south, theta increasing
        self.x = x[order]
        # sphere-measure weight per colatitude ring, consistent with the basis
        self._wring = _christoffel_weights(n, self.x)
        self._w1d = self._wring / (2.0 * np.pi) if mode == FULL else self._wring
        self.theta = np.arccos(self.x)
        self.sin = np.sqrt((1.0 - self.x) * (1.0 + self.x))

    # -- geometry of the grid -------------------------------------------
    @classmethod
    def full(cls, lmax=32, *, nlat=None, nlon=None):
        return cls(3, lmax, FULL, nlat, nlon)

    @classmethod
    def polar(cls, n, nodes=256, *, lmax=None):
        if lmax is None:
            lmax = 2 * int(nodes) // 3
        return cls(n, lmax, POLAR, nodes)

    def refined(self, factor=2):
        """Same kind of grid with the band limit multiplied by ``factor``."""
        if self.mode == FULL:
            return SphereGrid.full(self.lmax * factor)
        return SphereGrid.polar(self.n, self.nlat * factor, lmax=self.lmax * factor)

    @property
    def dim(self):
        """Dimension of the sphere (number of frame indices)."""
        return self.n - 1

    @property
    def shape(self):
        if self.mode == FULL:
            return (self.nlat, self.nlon)
        return (self.nlat,)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @cached_property
    def phi(self):
        if self.mode != FULL:
            return None
        return 2.0 * np.pi * np.arange(self.nlon) / self.nlon

    @cached_property
    def weights(self):
        """Quadrature weights for integration against d mu_sigma."""
        if self.mode == FULL:
            return np.outer(self._w1d, np.full(self.nlon, 2.0 * np.pi / self.nlon))
        return self._wring

    @property
    def area(self):
        return sphere_area(self.n)

    def node_coords(self, flat_index):
        """(theta, phi) of a flat node index (phi is None in polar mode)."""
        if self.mode == FULL:
            j, k = np.unravel_index(int(flat_index), self.shape)
            return float(self.theta[j]), float(self.phi[k])
        return float(self.theta[int(flat_index)]), None

    def broadcast_theta(self, a):
        """Broadcast a colatitude-indexed array to the field shape."""
        a = np.asarray(a)
        if self.mode == FULL:
            return np.broadcast_to(a[:, None], self.shape)
        return a

    def cartesian(self, i):
        """Restriction X^i (i = 1..n) of a Cartesian coordinate to the sphere.

        In polar mode only X^n = cos(theta) is a symmetric field; the others
        are returned as None.
        """
        if not 1 <= i <= self.n:
            raise InputError(f"coordinate index {i} out of range 1..{self.n}")
        if i == self.n:
            return self.broadcast_theta(self.x).copy()
        if self.mode == POLAR:
            return None
        s = self.sin[:, None]
        return s * (np.cos(self.phi) if i == 1 else np.sin(self.phi))[None, :]

    def coeff_shape(self):
        if self.mode == FULL:
            return (self.lmax + 1, self.lmax + 1)
        return (self.lmax + 1,)

    def zero_coeffs(self):
        if self.mode == FULL:
            return np.zeros(self.coeff_shape(), dtype=complex)
        return np.zeros(self.coeff_shape())

    # -- basis tables ----------------------------------------------------
    @cached_property
    def _ptab(self):
        tab = _legendre_theta_derivatives(self.lmax, self.theta)
        tab[0] = _legendre_table(self.lmax, self.x, self.sin)
        return tab

    @cached_property
    def _ztab(self):
        return _zonal_table(self.n, self.x, self.lmax, order=3)

    # -- transforms ------------------------------------------------------
    def _check_values(self, values):
        values = np.asarray(values, dtype=float)
        if values.shape != self.shape:
            raise InputError(f"field shape {values.shape} does not match grid {self.shape}")
        if not np.all(np.isfinite(values)):
            raise InputError("field has non-finite values")
        return values

    def analyze(self, values):
        """Grid values -> harmonic coefficients truncated at ``lmax``."""
        values = self._check_values(values)
        if self.mode == FULL:
            F = np.fft.rfft(values, axis=1)[:, : self.lmax + 1] / self.nlon
            return 2.0 * np.pi * np.einsum("j,jm,jlm->lm", self._w1d, F, self._ptab[0])
        return np.einsum("j,j,jl->l", self.weights, values, self._ztab[0])

    def synthesize(self, coeffs):
        return self._partial(coeffs, 0, 0)

    def _partial(self, coeffs, a, b):
        """d^a/dtheta^a d^b/dphi^b of a full-mode expansion (a=b=0 polar)."""
        if self.mode == POLAR:
            return self._ztab[0] @ coeffs
        m = np.arange(self.lmax + 1)
        C = coeffs * (1j * m[None, :]) ** b if b else coeffs
        G = np.einsum("jlm,lm->jm", self._ptab[a], C)
        full = np.zeros((self.nlat, self.nlon // 2 + 1), dtype=complex)
        full[:, : self.lmax + 1] = G * self.nlon
        return np.fft.irfft(full, n=self.nlon, axis=1)

    def jet(self, coeffs, order=2):
        """Value and sigma-covariant derivatives up to ``order`` (1..3)."""
        if not 1 <= order <= 3:
            raise InputError("jet order must be 1, 2 or 3")
        if self.mode == FULL:
            return self._jet_full(coeffs, order)
        return self._jet_polar(coeffs, order)

    def _jet_full(self, C, order):
        s = self.sin[:, None]
        c = self.x[:, None]
        P = {}
        needed = [(a, b) for a in range(order + 1) for b in range(order + 1 - a)]
        for a, b in needed:
            P[a, b] = self._partial(C, a, b)
        u = P[0, 0]
        du = np.stack([P[1, 0], P[0, 1] / s], axis=-1)
        if order == 1:
            return Jet(u, du)
        # coordinate Hessian with round-metric Christoffel symbols
        Htt = P[2, 0]
        Htp = P[1, 1] - (c / s) * P[0, 1]
        Hpp = P[0, 2] + s * c * P[1, 0]
        scale = [np.ones_like(s), s]
        d2u = np.empty(self.shape + (2, 2))
        d2u[..., 0, 0] = Htt
        d2u[..., 0, 1] = d2u[..., 1, 0] = Htp / s
        d2u[..., 1, 1] = Hpp / (s * s)
        if order == 2:
            return Jet(u, du, d2u)
        Hc = np.empty(self.shape + (2, 2))
        Hc[..., 0, 0], Hc[..., 0, 1], Hc[..., 1, 0], Hc[..., 1, 1] = Htt, Htp, Htp, Hpp
        dH = np.empty(self.shape + (2, 2, 2))  # dH[c, a, b] = d_c H_ab
        dH[..., 0, 0, 0] = P[3, 0]
        dH[..., 1, 0, 0] = P[2, 1]
        dH[..., 0, 0, 1] = dH[..., 0, 1, 0] = P[2, 1] - (c / s) * P[1, 1] + P[0, 1] / (s * s)
        dH[..., 1, 0, 1] = dH[..., 1, 1, 0] = P[1, 2] - (c / s) * P[0, 2]
        dH[..., 0, 1, 1] = P[1, 2] + (c * c - s * s) * P[1, 0] + s * c * P[2, 0]
        dH[..., 1, 1, 1] = P[0, 3] + s * c * P[1, 1]
        G = np.zeros(self.shape + (2, 2, 2))  # G[d, c, a] = Gamma^d_{ca}
        G[..., 0, 1, 1] = -s * c
        G[..., 1, 0, 1] = G[..., 1, 1, 0] = c / s
        T = (
            dH
            - np.einsum("...dca,...db->...cab", G, Hc)
            - np.einsum("...dcb,...ad->...cab", G, Hc)
        )
        for k in range(2):
            for i in range(2):
                for j in range(2):
                    T[..., k, i, j] /= scale[k] * scale[i] * scale[j]
        return Jet(u, du, d2u, T)

    def _jet_polar(self, a, order):
        d = self.dim
        s, c = self.sin, self.x
        Z = self._ztab
        u = Z[0] @ a
        p = Z[1] @ a
        du = np.zeros(self.shape + (d,))
        du[:, 0] = -s * p
        if order == 1:
            return Jet(u, du)
        p1 = Z[2] @ a
        alpha = s * s * p1  # u'' - cot(theta) u'
        psi = -c * p  # cot(theta) u'
        eye = np.eye(d)
        e1 = eye[0]
        d2u = psi[:, None, None] * eye + alpha[:, None, None] * np.outer(e1, e1)
        if order == 2:
            return Jet(u, du, d2u)
        p2 = Z[3] @ a
        dalpha = 2.0 * s * c * p1 - s**3 * p2
        dpsi = s * (p + c * p1)
        alpha_cot = s * c * p1
        Pt = eye - np.outer(e1, e1)
        e111 = np.einsum("k,i,j->kij", e1, e1, e1)
        mixed = np.einsum("ki,j->kij", Pt, e1) + np.einsum("i,kj->kij", e1, Pt)
        kdelta = np.einsum("k,ij->kij", e1, eye)
        d3u = (
            dalpha[:, None, None, None] * e111
            + alpha_cot[:, None, None, None] * mixed
            + dpsi[:, None, None, None] * kdelta
        )
        return Jet(u, du, d2u, d3u)

    def laplacian_coeffs(self, coeffs):
        """Apply Delta_sigma in coefficient space."""
        l = np.arange(self.lmax + 1)
        eig = -l * (l + self.n - 2.0)
        if self.mode == FULL:
            return coeffs * eig[:, None]
        return coeffs * eig

    def prolong(self, coeffs, target):
        """Zero-pad coefficients onto a grid of the same kind with a higher band limit."""
        if target.mode != self.mode or target.n != self.n or target.lmax < self.lmax:
            raise InputError("prolong needs a same-kind target with a larger band limit")
        out = target.zero_coeffs()
        L = self.lmax + 1
        if self.mode == FULL:
            out[:L, :L] = coeffs
        else:
            out[:L] = coeffs
        return out

    def degree_energy(self, coeffs):
        """L^2 energy per harmonic degree."""
        if self.mode == FULL:
            e = np.abs(coeffs) ** 2
            return e[:, 0] + 2.0 * e[:, 1:].sum(axis=1)
        return coeffs**2

    def integrate(self, values):
        return float(np.sum(self.weights * values))

    # -- coefficient I/O -------------------------------------------------
    def coeffs_to_list(self, coeffs):
        """Real orthonormal coefficients as ``[[l, m, value], ...]``.

        Full mode uses real spherical harmonics ordered by (l, m) with
        m = -l..l (m < 0 for sine terms); polar mode has m = 0 only.
        """
        out = []
        for l in range(self.lmax + 1):
            if self.mode == POLAR:
                out.append([l, 0, float(coeffs[l])])
                continue
            for m in range(-l, l + 1):
                if m == 0:
                    val = coeffs[l, 0].real
                elif m > 0:
                    val = math.sqrt(2.0) * coeffs[l, m].real
                else:
                    val = -math.sqrt(2.0) * coeffs[l, -m].imag
                out.append([l, m, float(val)])
        return out

    def coeffs_from_list(self, items):
        C = self.zero_coeffs()
        for item in items:
            l, m, val = int(item[0]), int(item[1]), float(item[2])
            if not 0 <= l <= self.lmax or abs(m) > l:
                raise InputError(f"coefficient index (l={l}, m={m}) out of range")
            if self.mode == POLAR:
                if m != 0:
                    raise InputError("polar mode accepts m = 0 only")
                C[l] += val
            elif m == 0:
                C[l, 0] += val
            elif m > 0:
                C[l, m] += val / math.sqrt(2.0)
            else:
                C[l, -m] += -1j * val / math.sqrt(2.0)
        return C

    def header(self, nodes=True):
        """JSON-ready description of the grid (node coordinates optional)."""
        h = {
            "n": self.n,
            "lmax": self.lmax,
            "mode": self.mode,
            "nlat": self.nlat,
            "layout": "row-major latitude-then-longitude",
        }
        if self.mode == FULL:
            h["nlon"] = self.nlon
        if nodes:
            h["theta"] = self.theta.tolist()
            if self.mode == FULL:
                h["phi"] = self.phi.tolist()
        return h

    def __repr__(self):
        extra = f", nlon={self.nlon}" if self.mode == FULL else ""
        return f"SphereGrid(n={self.n}, lmax={self.lmax}, mode={self.mode!r}, nlat={self.nlat}{extra})"


@dataclass(frozen=True, eq=False)
class SphereField:
    """Scalar field sampled at the nodes of a :class:`SphereGrid`."""

    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", self.grid._check_values(self.values))

    @classmethod
    def from_coeffs(cls, grid, coeffs):
        return cls(grid, grid.synthesize(coeffs))

    @classmethod
    def constant(cls, grid, value):
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid, func):
        """Sample ``func(theta, phi)`` (phi is None in polar mode)."""
        if grid.mode == FULL:
            T, P = np.meshgrid(grid.theta, grid.phi, indexing="ij")
            return cls(grid, func(T, P))
        return cls(grid, func(grid.theta, None))

    @classmethod
    def cartesian(cls, grid, i):
        vals = grid.cartesian(i)
        if vals is None:
            raise InputError(f"X^{i} is not polar-symmetric")
        return cls(grid, vals)

    @classmethod
    def legendre(cls, grid, l):
        """P_l(X^n), the Legendre polynomial of the polar coordinate."""
        from scipy.special import eval_legendre

        return cls(grid, grid.broadcast_theta(eval_legendre(l, grid.x)).copy())

    def coeffs(self):
        return self.grid.analyze(self.values)

    def __add__(self, other):
        o = other.values if isinstance(other, SphereField) else other
        return SphereField(self.grid, self.values + o)

    __radd__ = __add__

    def __mul__(self, other):
        o = other.values if isinstance(other, SphereField) else other
        return SphereField(self.grid, self.values * o)

    __rmul__ = __mul__

    def __sub__(self, other):
        o = other.values if isinstance(other, SphereField) else other
        return SphereField(self.grid, self.values - o)

    def __neg__(self):
        return SphereField(self.grid, -self.values)

    def map(self, func):
        return SphereField(self.grid, func(self.values))


@dataclass(frozen=True, eq=False)
class SphereTensor:
    """Rank-1 or rank-2 tensor field, components in the orthonormal frame."""

    grid: SphereGrid
    rank: int
    values: np.ndarray

    def norm2(self):
        """Pointwise squared norm with respect to sigma."""
        axes = tuple(range(-self.rank, 0))
        return np.sum(self.values**2, axis=axes)

    def trace(self):
        if self.rank != 2:
            raise InputError("trace needs a rank-2 tensor")
        return np.trace(self.values, axis1=-2, axis2=-1)

    def asymmetry(self):
        """Max node-wise |T - T^t| relative to the max tensor norm."""
        if self.rank != 2:
            raise InputError("asymmetry needs a rank-2 tensor")
        diff = np.abs(self.values - np.swapaxes(self.values, -1, -2)).max()
        scale = np.sqrt(self.norm2()).max()
        return float(diff / scale) if scale > 0 else float(diff)


def _field(u):
    if not isinstance(u, SphereField):
        raise InputError("expected a SphereField")
    return u


def grad_sigma(u):
    """D_i u of a field."""
    u = _field(u)
    jet = u.grid.jet(u.coeffs(), order=1)
    return SphereTensor(u.grid, 1, jet.du)


def hess_sigma(u):
    """Covariant Hessian D_j D_i u with respect to the round metric."""
    u = _field(u)
    jet = u.grid.jet(u.coeffs(), order=2)
    return SphereTensor(u.grid, 2, jet.d2u)


def traceless_part(d2u, dim):
    """Remove the sigma-trace from rank-2 frame components."""
    tr = np.trace(d2u, axis1=-2, axis2=-1)
    return d2u - (tr / dim)[..., None, None] * np.eye(dim)


def traceless_hess(u):
    """D^2 u - (Delta_sigma u / (n-1)) sigma."""
    h = hess_sigma(u)
    return SphereTensor(u.grid, 2, traceless_part(h.values, u.grid.dim))


def laplacian(u):
    u = _field(u)
    g = u.grid
    return SphereField(g, g.synthesize(g.laplacian_coeffs(u.coeffs())))


def integrate(u):
    """Integral against d mu_sigma by the grid quadrature."""
    u = _field(u)
    return u.grid.integrate(u.values)


def l2_norm(u):
    return math.sqrt(integrate(u * u))


def project_first_eigenspace(w):
    """L^2 projection onto span{1, X^1, ..., X^n}.

    Returns ``(coefficients, residual)`` with ``coefficients[0] = a_0`` and
    ``coefficients[i] = a_i`` for X^i.  In polar mode only a_0 and a_n can
    be non-zero.
    """
    w = _field(w)
    g = w.grid
    area = g.area
    coeffs = np.zeros(g.n + 1)
    coeffs[0] = integrate(w) / area
    proj = np.full(g.shape, coeffs[0])
    for i in range(1, g.n + 1):
        X = g.cartesian(i)
        if X is None:
            continue
        coeffs[i] = g.integrate(w.values * X) / (area / g.n)
        proj = proj + coeffs[i] * X
    return coeffs, SphereField(g, w.values - proj)
