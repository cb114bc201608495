"""Construction of constant-angle spacelike surfaces.

A surface of constant complex angle psi with the E1-plane is determined by
metric coefficients mu, nu on a parameter domain solving

    d_y mu = -c1 nu,    d_x nu = c2 mu,

together with the explicit adapted frame (T1, T2, N1, N2) of the Gauss map
parametrised by z = x + i y; the immersion is F = int mu T1 dx + nu T2 dy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import ndimage

from .algebra import ComplexQuaternion, embed, hat, mdot, project, qinv, qmul, spin_matrix
from .errors import (
    AngleDegenerate,
    BadSpecParameters,
    ClosureFailure,
    NonMonotoneCurve,
    PotentialsInconsistent,
)
from .grid import ImmersionGrid, grid_axis
from .planes import (
    E1_PLANE,
    NULL_BRANCH_TOL,
    AngleLike,
    ComplexAngle,
    OrientedPlane,
    as_angle,
    normal_frame,
)

MASK_THRESHOLD = 1e-6


# --------------------------------------------------------------------------
# Angle constants, horizontal lift and adapted frame
# --------------------------------------------------------------------------

def angle_constants(psi: AngleLike) -> tuple[float, float]:
    """(c1, c2) of the metric system; equals (-2 Re cot psi, 2 Im cot psi)."""
    return as_angle(psi).constants


def _require_regular(psi: ComplexAngle) -> complex:
    s = psi.sin
    if abs(s) < NULL_BRANCH_TOL:
        raise AngleDegenerate("psi is 0 mod pi; the adapted frame is singular")
    return s


def lift_array(psi: AngleLike, z, A: complex = 0.0) -> np.ndarray:
    """Horizontal lift g_a(z) = a g(z), a = cos A + sin A I, as an array (..., 4)."""
    psi = as_angle(psi)
    _require_regular(psi)
    w = psi.value
    z = np.asarray(z, dtype=complex)
    t = np.tan(w / 2)
    ct = 1.0 / t
    c, s = np.cos(w / 2), np.sin(w / 2)
    g = np.stack(
        [
            -c * np.sin(z * t),
            c * np.cos(z * t),
            s * np.cos(z * ct),
            -s * np.sin(z * ct),
        ],
        axis=-1,
    )
    if A != 0:
        a = np.array([np.cos(A), np.sin(A), 0, 0], dtype=complex)
        g = qmul(a, g)
    return g


def lift_beta(psi: AngleLike, z, A: complex = 0.0):
    """beta_a(z) = -2 z cot psi + 2 A."""
    w = as_angle(psi).value
    return -2.0 * np.asarray(z, dtype=complex) / np.tan(w) + 2.0 * A


def horizontal_lift(psi: AngleLike, A: complex, z: complex) -> tuple[ComplexQuaternion, complex]:
    g = lift_array(psi, complex(z), A)
    return ComplexQuaternion.from_array(g), complex(lift_beta(psi, z, A))


@dataclass(frozen=True)
class HorizontalLift:
    """Lift of the Gauss map with gauge A; g'(z) g(z)^-1 = cos beta J + sin beta K."""

    psi: ComplexAngle
    A: complex = 0.0

    def g(self, z) -> np.ndarray:
        return lift_array(self.psi, z, self.A)

    def beta(self, z):
        return lift_beta(self.psi, z, self.A)

    def gauss_map(self, z) -> np.ndarray:
        """g^-1 I g."""
        g = self.g(z)
        I = np.zeros_like(g)
        I[..., 1] = 1
        return qmul(qmul(qinv(g), I), g)

    def frames(self, z) -> tuple[np.ndarray, np.ndarray]:
        """Tangent frame from the representation formula (T1, T2) for this gauge."""
        g = self.g(z)
        u = np.real(self.beta(z))
        X1 = np.zeros(g.shape, dtype=complex)
        X2 = np.zeros(g.shape, dtype=complex)
        X1[..., 2], X1[..., 3] = np.sin(u), -np.cos(u)
        X2[..., 2], X2[..., 3] = np.cos(u), np.sin(u)
        gi = qinv(g)
        gh = hat(g)
        T1 = project(qmul(qmul(gi, X1), gh), tol=1e-8)
        T2 = project(qmul(qmul(gi, X2), gh), tol=1e-8)
        return T1, T2


@dataclass(frozen=True)
class AdaptedFrame:
    """Adapted frame at one or many parameter points (arrays (..., 4))."""

    T1: np.ndarray
    T2: np.ndarray
    N1: np.ndarray
    N2: np.ndarray

    def as_dict(self) -> dict:
        return {"T1": self.T1, "T2": self.T2, "N1": self.N1, "N2": self.N2}


def adapted_frame(psi: AngleLike, z) -> AdaptedFrame:
    """Explicit adapted frame with phi = 2 z / sin psi (broadcasts over z)."""
    psi = as_angle(psi)
    s = _require_regular(psi)
    p1, p2 = psi.psi1, psi.psi2
    phi = 2.0 * np.asarray(z, dtype=complex) / s
    f1, f2 = phi.real, phi.imag
    sf1, cf1 = np.sin(f1), np.cos(f1)
    shf2, chf2 = np.sinh(f2), np.cosh(f2)
    sp1, cp1 = math.sin(p1), math.cos(p1)
    shp2, chp2 = math.sinh(p2), math.cosh(p2)
    T1 = np.stack([-shp2 * chf2, -shp2 * shf2, chp2 * sf1, chp2 * cf1], axis=-1)
    T2 = np.stack([sp1 * shf2, sp1 * chf2, -cp1 * cf1, cp1 * sf1], axis=-1)
    N1 = np.stack([cp1 * shf2, cp1 * chf2, sp1 * cf1, -sp1 * sf1], axis=-1)
    N2 = np.stack([chp2 * chf2, chp2 * shf2, -shp2 * sf1, -shp2 * cf1], axis=-1)
    return AdaptedFrame(T1, T2, N1, N2)


# --------------------------------------------------------------------------
# Metric fields
# --------------------------------------------------------------------------

def _cumtrapz(values: np.ndarray, coords: np.ndarray, axis: int = 0) -> np.ndarray:
    """Cumulative trapezoid starting at 0 along ``axis``."""
    v = np.moveaxis(np.asarray(values), axis, 0)
    d = np.diff(coords).reshape((-1,) + (1,) * (v.ndim - 1))
    inc = 0.5 * d * (v[1:] + v[:-1])
    out = np.concatenate([np.zeros_like(v[:1]), np.cumsum(inc, axis=0)], axis=0)
    return np.moveaxis(out, 0, axis)


def _is_uniform(a: np.ndarray) -> bool:
    d = np.diff(a)
    return bool(np.allclose(d, d[0], rtol=1e-9, atol=1e-12))


def metric_mask(mu: np.ndarray, nu: np.ndarray, threshold: float = MASK_THRESHOLD) -> np.ndarray:
    """Nodes with |mu nu| >= threshold * max |mu nu|."""
    prod = np.abs(mu * nu)
    top = float(np.max(prod)) if prod.size else 0.0
    return prod >= threshold * top if top > 0 else np.zeros(prod.shape, dtype=bool)


def default_base_node(mask: np.ndarray) -> tuple[int, int]:
    """(0, 0) when retained, otherwise the retained node closest to the grid centre."""
    if mask[0, 0]:
        return (0, 0)
    idx = np.argwhere(mask)
    if idx.size == 0:
        raise ValueError("no retained node")
    centre = (np.array(mask.shape) - 1) / 2.0
    k = int(np.argmin(np.sum((idx - centre) ** 2, axis=1)))
    return int(idx[k, 0]), int(idx[k, 1])


def retained_component(mu, nu, base_node, threshold: float = MASK_THRESHOLD) -> np.ndarray:
    """Connected set of unmasked nodes around ``base_node`` on which mu nu keeps its sign.

    A sign change of mu nu between neighbouring nodes means the metric
    vanishes in between, so such neighbours are never joined.
    """
    keep = metric_mask(mu, nu, threshold)
    sign = np.sign(mu * nu)
    if not keep[base_node]:
        return np.zeros(keep.shape, dtype=bool)
    labels, _ = ndimage.label(keep & (sign == sign[base_node]))
    return labels == labels[base_node]


@dataclass
class MetricField:
    """Metric coefficients mu, nu sampled on the tensor grid x (nx) by y (ny)."""

    x: np.ndarray
    y: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    psi: ComplexAngle
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        self.nu = np.asarray(self.nu, dtype=float)
        self.psi = as_angle(self.psi)
        if self.mu.shape != (self.x.size, self.y.size) or self.nu.shape != self.mu.shape:
            raise ValueError("mu and nu must have shape (len(x), len(y))")
        if self.mask is None:
            self.mask = metric_mask(self.mu, self.nu)

    @property
    def is_uniform(self) -> bool:
        return _is_uniform(self.x) and _is_uniform(self.y)

    @property
    def hx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def hy(self) -> float:
        return float(self.y[1] - self.y[0])

    @property
    def x0(self) -> float:
        return float(self.x[0])

    @property
    def y0(self) -> float:
        return float(self.y[0])

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def constants(self) -> tuple[float, float]:
        return angle_constants(self.psi)

    def beta(self) -> np.ndarray:
        X, Y = self.mesh()
        return lift_beta(self.psi, X + 1j * Y)

    def h0_h1(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean-curvature components in the parallel normal frame (gauge A = 0)."""
        v = self.beta().imag
        ch, sh = np.cosh(v), np.sinh(v)
        with np.errstate(divide="ignore", invalid="ignore"):
            return ch / self.nu - sh / self.mu, ch / self.mu - sh / self.nu

    def alphas(self) -> tuple[np.ndarray, np.ndarray]:
        """Dual vector fields alpha_1, alpha_2 as arrays (nx, ny, 2)."""
        u = self.beta().real
        with np.errstate(divide="ignore", invalid="ignore"):
            a1 = np.stack([np.sin(u) / self.mu, np.cos(u) / self.nu], axis=-1)
            a2 = np.stack([-np.cos(u) / self.mu, np.sin(u) / self.nu], axis=-1)
        return a1, a2

    def system_residual(self) -> tuple[float, float]:
        """Max interior |d_y mu + c1 nu| and |d_x nu - c2 mu| by central differences."""
        c1, c2 = self.constants if self.psi.sin != 0 else (0.0, 0.0)
        dmu = np.gradient(self.mu, self.y, axis=1)[1:-1, 1:-1]
        dnu = np.gradient(self.nu, self.x, axis=0)[1:-1, 1:-1]
        m = self.mask[1:-1, 1:-1]
        r1 = np.abs(dmu + c1 * self.nu[1:-1, 1:-1])[m]
        r2 = np.abs(dnu - c2 * self.mu[1:-1, 1:-1])[m]
        return float(np.max(r1, initial=0.0)), float(np.max(r2, initial=0.0))


def _sample_edge(data, coords: np.ndarray) -> np.ndarray:
    if callable(data):
        return np.asarray(np.broadcast_to(data(coords), coords.shape), dtype=float)
    arr = np.asarray(data, dtype=float)
    if arr.shape != coords.shape:
        raise ValueError(f"edge data has shape {arr.shape}, expected {coords.shape}")
    return arr


def solve_goursat(psi: AngleLike, f, g, domain, h: float, hy: Optional[float] = None) -> MetricField:
    """Solve d_y mu = -c1 nu, d_x nu = c2 mu from mu on the bottom edge and nu on the left edge.

    Rows are marched in y with a Heun step; within a row nu is the cumulative
    trapezoid of c2 mu from its left-edge value.
    """
    psi = as_angle(psi)
    hy = h if hy is None else hy
    (xa, xb), (ya, yb) = domain
    xs = grid_axis(xa, xb, h)
    ys = grid_axis(ya, yb, hy)
    mu0 = _sample_edge(f, xs)
    nu0 = _sample_edge(g, ys)
    try:
        c1, c2 = psi.constants
    except AngleDegenerate:
        if abs(psi.sin) < NULL_BRANCH_TOL:
            raise
        c1, c2 = 0.0, 0.0
    nx, ny = xs.size, ys.size
    mu = np.empty((nx, ny))
    nu = np.empty((nx, ny))
    mu[:, 0] = mu0

    def row_nu(mu_row, nu_left):
        return nu_left + c2 * _cumtrapz(mu_row, xs)

    for j in range(ny - 1):
        dy = ys[j + 1] - ys[j]
        nu[:, j] = row_nu(mu[:, j], nu0[j])
        mu_star = mu[:, j] - dy * c1 * nu[:, j]
        nu_star = row_nu(mu_star, nu0[j + 1])
        mu[:, j + 1] = mu[:, j] - 0.5 * dy * c1 * (nu[:, j] + nu_star)
    nu[:, -1] = row_nu(mu[:, -1], nu0[-1])
    return MetricField(xs, ys, mu, nu, psi)


@dataclass
class CauchyData:
    """Values f and normal derivatives g of zeta along a monotone polyline.

    The normal is the tangent rotated by +90 degrees, n = (-t_y, t_x).
    f and g are interpolated linearly between vertices, so vertices should be
    no farther apart than the marching step for second-order accuracy.
    """

    curve: np.ndarray
    f: np.ndarray
    g: np.ndarray
    which: str = "mu"

    def __post_init__(self):
        self.curve = np.asarray(self.curve, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        if self.curve.ndim != 2 or self.curve.shape[1] != 2 or self.curve.shape[0] < 3:
            raise ValueError("curve must be an (n >= 3, 2) array of points")
        if self.f.shape != (self.curve.shape[0],) or self.g.shape != self.f.shape:
            raise ValueError("f and g must have one value per curve point")
        if self.which not in ("mu", "nu"):
            raise ValueError("which must be 'mu' or 'nu'")
        dx = np.diff(self.curve[:, 0])
        dy = np.diff(self.curve[:, 1])
        for d in (dx, dy):
            if not (np.all(d > 0) or np.all(d < 0)):
                raise NonMonotoneCurve("curve must be strictly monotone in both coordinates")


def _resample(data: CauchyData, h: float):
    pts, f, g = data.curve, data.f, data.g
    xs, ys, fs, gs = [pts[0, 0]], [pts[0, 1]], [f[0]], [g[0]]
    for k in range(len(pts) - 1):
        span = np.max(np.abs(pts[k + 1] - pts[k]))
        m = max(1, int(math.ceil(span / h - 1e-9)))
        t = np.arange(1, m + 1) / m
        xs.extend(pts[k, 0] + t * (pts[k + 1, 0] - pts[k, 0]))
        ys.extend(pts[k, 1] + t * (pts[k + 1, 1] - pts[k, 1]))
        fs.extend(f[k] + t * (f[k + 1] - f[k]))
        gs.extend(g[k] + t * (g[k + 1] - g[k]))
    return np.array(xs), np.array(ys), np.array(fs), np.array(gs)


def _march_staircase(X, Y, zeta, p, q, kappa):
    """Fill the grid X x Y from diagonal data for zeta_xy = -kappa zeta.

    Node (i, j) depends on (i-1, j), (i, j+1) below the diagonal and on
    (i, j-1), (i+1, j) above it; each off-diagonal is one Heun sweep.
    """
    n = X.size
    Z = np.full((n, n), np.nan)
    P = np.full((n, n), np.nan)
    Q = np.full((n, n), np.nan)
    idx = np.arange(n)
    Z[idx, idx], P[idx, idx], Q[idx, idx] = zeta, p, q
    for d in range(1, n):
        # below the diagonal: i = j + d
        j = np.arange(n - d)
        i = j + d
        dx = X[i] - X[i - 1]
        dy = Y[j + 1] - Y[j]
        zL, pL, qL = Z[i - 1, j], P[i - 1, j], Q[i - 1, j]
        zU, pU = Z[i, j + 1], P[i, j + 1]
        z_star = zL + dx * pL
        p_star = pU + kappa * dy * 0.5 * (zU + z_star)
        z_new = zL + 0.5 * dx * (pL + p_star)
        Z[i, j] = z_new
        P[i, j] = pU + kappa * dy * 0.5 * (zU + z_new)
        Q[i, j] = qL - kappa * dx * 0.5 * (zL + z_new)
        # above the diagonal: j = i + d
        i = np.arange(n - d)
        j = i + d
        dy = Y[j] - Y[j - 1]
        dx = X[i + 1] - X[i]
        zB, pB, qB = Z[i, j - 1], P[i, j - 1], Q[i, j - 1]
        zR, qR = Z[i + 1, j], Q[i + 1, j]
        z_star = zB + dy * qB
        q_star = qR + kappa * dx * 0.5 * (zR + z_star)
        z_new = zB + 0.5 * dy * (qB + q_star)
        Z[i, j] = z_new
        Q[i, j] = qR + kappa * dx * 0.5 * (zR + z_new)
        P[i, j] = pB - kappa * dy * 0.5 * (zB + z_new)
    return Z, P, Q


def solve_cauchy_curve(psi: AngleLike, data: CauchyData, h: float) -> MetricField:
    """Solve the Klein-Gordon equation zeta_xy = -c1 c2 zeta from data on a monotone curve.

    The grid is the tensor product of the x and y coordinates of the resampled
    curve vertices (the determinacy rectangle). The partner coefficient is
    nu = -d_y mu / c1 (which='mu') or mu = d_x nu / c2 (which='nu').
    """
    psi = as_angle(psi)
    c1, c2 = psi.constants
    if data.which == "mu" and abs(c1) < 1e-12:
        raise AngleDegenerate("recovering nu from mu needs c1 != 0")
    if data.which == "nu" and abs(c2) < 1e-12:
        raise AngleDegenerate("recovering mu from nu needs c2 != 0")
    xs, ys, fs, gs = _resample(data, h)
    if xs[-1] < xs[0]:
        xs, ys, fs, gs = xs[::-1], ys[::-1], fs[::-1], -gs[::-1]
    s = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(xs), np.diff(ys)))])
    tx = np.gradient(xs, s, edge_order=2)
    ty = np.gradient(ys, s, edge_order=2)
    nt = np.hypot(tx, ty)
    tx, ty = tx / nt, ty / nt
    fs_s = np.gradient(fs, s, edge_order=2)
    p = fs_s * tx - gs * ty
    q = fs_s * ty + gs * tx
    kappa = c1 * c2
    flipped = ys[-1] < ys[0]
    if flipped:
        Z, P, Q = _march_staircase(xs, -ys, fs, p, -q, -kappa)
        Z, P, Q = Z[:, ::-1], P[:, ::-1], -Q[:, ::-1]
        ys = ys[::-1]
    else:
        Z, P, Q = _march_staircase(xs, ys, fs, p, q, kappa)
    if data.which == "mu":
        mu, nu = Z, -Q / c1
    else:
        nu, mu = Z, P / c2
    return MetricField(xs, ys, mu, nu, psi)


def kg_residual(metric: MetricField) -> float:
    """Max interior |d2_xy zeta + c1 c2 zeta| over zeta in {mu, nu} (retained nodes)."""
    try:
        c1, c2 = metric.constants
    except AngleDegenerate:
        c1 = c2 = 0.0
    x, y = metric.x, metric.y
    dx = (x[2:] - x[:-2])[:, None]
    dy = (y[2:] - y[:-2])[None, :]
    m = metric.mask[1:-1, 1:-1]
    worst = 0.0
    for z in (metric.mu, metric.nu):
        dxy = (z[2:, 2:] - z[2:, :-2] - z[:-2, 2:] + z[:-2, :-2]) / (dx * dy)
        r = np.abs(dxy + c1 * c2 * z[1:-1, 1:-1])[m]
        worst = max(worst, float(np.max(r, initial=0.0)))
    return worst


# --------------------------------------------------------------------------
# Integration of the immersion
# --------------------------------------------------------------------------

def _lorentz_to_plane(p0: OrientedPlane) -> np.ndarray:
    """Proper orthochronous Lorentz matrix sending (e2, e3) to the basis of p0."""
    n_time, n_space = p0.normal_basis()
    return np.stack([n_time, n_space, p0.u1, p0.u2], axis=1)


@dataclass
class ClosureReport:
    max_loop: float
    max_density: float
    threshold: float


def loop_closure(grid_mu, grid_nu, T1, T2, hx, hy, mask=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell loop integrals of mu T1 dx + nu T2 dy (trapezoid edges), Euclidean norms."""
    A = grid_mu[..., None] * T1
    B = grid_nu[..., None] * T2
    bottom = 0.5 * hx * (A[:-1, :-1] + A[1:, :-1])
    top = 0.5 * hx * (A[:-1, 1:] + A[1:, 1:])
    left = 0.5 * hy * (B[:-1, :-1] + B[:-1, 1:])
    right = 0.5 * hy * (B[1:, :-1] + B[1:, 1:])
    loop = np.linalg.norm(bottom + right - top - left, axis=-1)
    cell_ok = np.ones(loop.shape, dtype=bool)
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        cell_ok = m[:-1, :-1] & m[1:, :-1] & m[:-1, 1:] & m[1:, 1:]
    return loop, cell_ok


def integrate_immersion(
    metric: MetricField,
    base=None,
    base_node: Optional[tuple[int, int]] = None,
    reference: Optional[OrientedPlane] = None,
    check: bool = True,
) -> ImmersionGrid:
    """Integrate F = int mu T1 dx + nu T2 dy by trapezoid quadrature, rows then columns.

    The retained region is the sign-consistent component of the unmasked
    nodes containing ``base_node`` (default: (0, 0) when retained, otherwise
    the retained node nearest the centre). The loop integral of every unit
    cell of that region is audited; ``ClosureFailure`` is
    raised when the largest loop divided by the cell area exceeds
    100 h^2 max(|mu|, |nu|), which separates the O(h^2) defect of a valid
    discrete metric from the O(1) curl of an invalid one.
    """
    if not metric.is_uniform:
        raise ValueError("integrate_immersion needs a uniform grid")
    psi = metric.psi
    X, Y = metric.mesh()
    fr = adapted_frame(psi, X + 1j * Y)
    mu, nu = metric.mu, metric.nu
    hx, hy = metric.hx, metric.hy
    x, y = metric.x, metric.y
    if base_node is None:
        base_node = default_base_node(metric.mask)
    if not metric.mask[base_node]:
        raise ValueError(f"base node {base_node} is masked (mu nu ~ 0)")
    region = retained_component(mu, nu, base_node)
    A = mu[..., None] * fr.T1
    B = nu[..., None] * fr.T2
    F = np.empty(A.shape)
    F[:, 0] = _cumtrapz(A[:, 0], x, axis=0)
    F[:] = F[:, :1] + _cumtrapz(B, y, axis=1)

    loop, cell_ok = loop_closure(mu, nu, fr.T1, fr.T2, hx, hy, region)
    m = region
    scale = float(max(np.max(np.abs(mu[m]), initial=0.0), np.max(np.abs(nu[m]), initial=0.0)))
    h = max(hx, hy)
    density = loop / (hx * hy)
    max_loop = float(np.max(loop[cell_ok], initial=0.0))
    max_density = float(np.max(density[cell_ok], initial=0.0))
    threshold = 100.0 * h * h * scale
    if check and max_density > threshold:
        raise ClosureFailure(
            f"loop integral per unit area {max_density:.3g} exceeds {threshold:.3g}; "
            "the metric does not satisfy the compatibility system"
        )

    frames = fr.as_dict()
    if reference is not None and reference is not E1_PLANE:
        L = _lorentz_to_plane(reference)
        F = F @ L.T
        frames = {k: v @ L.T for k, v in frames.items()}
    if base is not None:
        F = F - F[base_node] + np.asarray(base, dtype=float)
    grid = ImmersionGrid(
        metric.x0, metric.y0, hx, hy, F, frames=frames, mu=mu.copy(), nu=nu.copy(),
        mask=region, psi=psi.value, family="synthesized",
    )
    grid.meta["closure"] = ClosureReport(max_loop, max_density, threshold)
    grid.meta["base_node"] = tuple(base_node)
    return grid


# --------------------------------------------------------------------------
# Closed-form families
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Lightcone:
    a: float
    b: float


@dataclass(frozen=True)
class Hypersphere:
    psi: complex
    r1: float
    r2: float
    center: tuple = (0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Product:
    gamma1: str = "circle"
    gamma2: str = "hyperbola"
    r1: float = 1.0
    r2: float = 1.0


@dataclass(frozen=True)
class TrigExample:
    psi: complex


@dataclass(frozen=True)
class PolyTrigExample:
    psi: complex


@dataclass(frozen=True)
class DegenerateHyperplane:
    s: Callable = field(default=lambda x, y: x * y)
    label: str = "x*y"


FamilySpec = Union[Lightcone, Hypersphere, Product, TrigExample, PolyTrigExample, DegenerateHyperplane]


def _plane_curve(kind: str, r: float, t: np.ndarray, timelike_plane: bool):
    """Unit-speed plane curve and its unit tangent as (2-vectors) arrays."""
    if r <= 0:
        raise BadSpecParameters("curve radius must be positive")
    if kind == "line":
        pos = np.stack([np.full_like(t, r if timelike_plane else 0.0), t], axis=-1)
        tan = np.stack([np.zeros_like(t), np.ones_like(t)], axis=-1)
        return pos, tan
    if kind == "circle" and not timelike_plane:
        pos = r * np.stack([np.cos(t / r), np.sin(t / r)], axis=-1)
        tan = np.stack([-np.sin(t / r), np.cos(t / r)], axis=-1)
        return pos, tan
    if kind == "hyperbola" and timelike_plane:
        pos = r * np.stack([np.cosh(t / r), np.sinh(t / r)], axis=-1)
        tan = np.stack([np.sinh(t / r), np.cosh(t / r)], axis=-1)
        return pos, tan
    raise BadSpecParameters(f"unsupported curve {kind!r} for this factor")


def _potentials_immersion(psi: ComplexAngle, f, fy, g, gy, fr: AdaptedFrame) -> np.ndarray:
    c1, c2 = psi.constants
    return (
        f[..., None] * fr.T1
        + (fy / c2)[..., None] * fr.T2
        + g[..., None] * fr.N1
        + (gy / c1)[..., None] * fr.N2
    )


def polytrig_fields(psi: AngleLike, X, Y) -> dict:
    """Metric, potentials and their y-derivatives for the polynomial-trigonometric example.

    With a = c1 y - c2 x, B = c1 y + c2 x, k = 2 + c1^2 - c2^2, m = c1^2 + c2^2:
    f = c2 (k a (cos B + sin B) + m (cos B - sin B)),
    g = k a (cos B - sin B) - m (cos B + sin B),
    which solve the potential system for mu = k^2 a (sin B - cos B) and
    nu = k^2 ((1 - a) cos B - (1 + a) sin B).
    """
    psi = as_angle(psi)
    c1, c2 = psi.constants
    a = c1 * Y - c2 * X
    B = c1 * Y + c2 * X
    k = 2 + c1 ** 2 - c2 ** 2
    m = c1 ** 2 + c2 ** 2
    cB, sB = np.cos(B), np.sin(B)
    f = c2 * (k * a * (cB + sB) + m * (cB - sB))
    g = k * a * (cB - sB) - m * (cB + sB)
    # d/dy with da/dy = dB/dy = c1
    fy = c2 * (k * c1 * (cB + sB) + k * a * c1 * (cB - sB) + m * c1 * (-sB - cB))
    gy = k * c1 * (cB - sB) + k * a * c1 * (-sB - cB) + m * c1 * (sB - cB)
    mu = k * k * a * (sB - cB)
    nu = k * k * ((1 - a) * cB - (1 + a) * sB)
    return {"f": f, "g": g, "fy": fy, "gy": gy, "mu": mu, "nu": nu, "k": k}


def make_family(spec: FamilySpec, domain=((-1.0, 1.0), (-1.0, 1.0)), h: float = 0.01) -> ImmersionGrid:
    """Sample a closed-form constant-angle surface on a uniform grid."""
    (xa, xb), (ya, yb) = domain
    xs = grid_axis(xa, xb, h)
    ys = grid_axis(ya, yb, h)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    frames = None
    mu = nu = None
    psi_val = None

    if isinstance(spec, Lightcone):
        a, b = spec.a, spec.b
        e = np.exp(a * X - b * Y)[..., None]
        base = np.stack([np.cosh(X), np.sinh(X), np.cos(Y), np.sin(Y)], axis=-1)
        F = e * base
        dx = np.stack([np.sinh(X), np.cosh(X), 0 * X, 0 * X], axis=-1)
        dy = np.stack([0 * X, 0 * X, -np.sin(Y), np.cos(Y)], axis=-1)
        T1 = a * base + dx
        T2 = -b * base + dy
        N2, N1 = normal_frame(T1, T2)
        frames = {"T1": T1, "T2": T2, "N1": N1, "N2": N2}
        mu = nu = e[..., 0]
        psi_val = ComplexAngle.from_cos(complex(a, b)).value
        tag = f"lightcone:a={a!r},b={b!r}"
    elif isinstance(spec, Hypersphere):
        psi = as_angle(spec.psi)
        if spec.r1 * spec.r2 == 0:
            raise BadSpecParameters("r1 r2 = 0 is the lightcone branch; use a lightcone family")
        c1, c2 = psi.constants
        s = c1 * Y - c2 * X
        mu = spec.r1 * np.exp(s) + spec.r2 * np.exp(-s)
        nu = -(spec.r1 * np.exp(s) - spec.r2 * np.exp(-s))
        fr = adapted_frame(psi, X + 1j * Y)
        F = 0.5 * (-mu[..., None] * fr.N1 + nu[..., None] * fr.N2) + np.asarray(spec.center, dtype=float)
        frames = fr.as_dict()
        psi_val = psi.value
        tag = f"hypersphere:psi={psi},r1={spec.r1!r},r2={spec.r2!r}"
    elif isinstance(spec, Product):
        pos1, tan1 = _plane_curve(spec.gamma1, spec.r1, X, timelike_plane=False)
        pos2, tan2 = _plane_curve(spec.gamma2, spec.r2, Y, timelike_plane=True)
        F = np.concatenate([pos2, pos1], axis=-1)
        zero = np.zeros_like(tan1)
        T1 = np.concatenate([zero, tan1], axis=-1)
        T2 = np.concatenate([tan2, zero], axis=-1)
        N2, N1 = normal_frame(T1, T2)
        frames = {"T1": T1, "T2": T2, "N1": N1, "N2": N2}
        mu = np.ones_like(X)
        nu = np.ones_like(X)
        psi_val = complex(math.pi / 2, 0.0)
        tag = f"product:gamma1={spec.gamma1},gamma2={spec.gamma2},r1={spec.r1!r},r2={spec.r2!r}"
    elif isinstance(spec, TrigExample):
        psi = as_angle(spec.psi)
        c1, c2 = psi.constants
        k = 2 + c1 ** 2 - c2 ** 2
        if abs(k) < 1e-8:
            raise BadSpecParameters("2 + c1^2 - c2^2 vanishes for this psi")
        t = c2 * X + c1 * Y
        m0, n0 = np.sin(t), -np.cos(t)
        fr = adapted_frame(psi, X + 1j * Y)
        F = (
            (-c2 * n0)[..., None] * fr.T1
            - (c1 * m0)[..., None] * fr.T2
            - m0[..., None] * fr.N1
            + n0[..., None] * fr.N2
        )
        frames = fr.as_dict()
        mu, nu = k * m0, k * n0
        psi_val = psi.value
        tag = f"trig:psi={psi}"
    elif isinstance(spec, PolyTrigExample):
        psi = as_angle(spec.psi)
        fields_ = polytrig_fields(psi, X, Y)
        if abs(fields_["k"]) < 1e-8:
            raise BadSpecParameters("2 + c1^2 - c2^2 vanishes for this psi")
        fr = adapted_frame(psi, X + 1j * Y)
        F = _potentials_immersion(psi, fields_["f"], fields_["fy"], fields_["g"], fields_["gy"], fr)
        frames = fr.as_dict()
        mu, nu = fields_["mu"], fields_["nu"]
        psi_val = psi.value
        tag = f"polytrig:psi={psi}"
    elif isinstance(spec, DegenerateHyperplane):
        s = np.asarray(np.broadcast_to(spec.s(X, Y), X.shape), dtype=float)
        F = np.stack([s, s, X, Y], axis=-1)
        psi_val = 0j
        tag = f"degenerate:s={spec.label}"
    else:
        raise BadSpecParameters(f"unknown family spec {spec!r}")

    mask = None
    if mu is not None:
        # keep the sign-consistent component, where the tangent orientation is fixed
        mask = retained_component(mu, nu, default_base_node(metric_mask(mu, nu)))
    return ImmersionGrid(
        float(xs[0]), float(ys[0]), float(h), float(h), F, frames=frames,
        mu=None if mu is None else np.asarray(mu, dtype=float),
        nu=None if nu is None else np.asarray(nu, dtype=float),
        mask=mask, psi=psi_val, family=tag,
    )


# --------------------------------------------------------------------------
# Potentials route
# --------------------------------------------------------------------------

@dataclass
class PotentialPair:
    f: np.ndarray
    g: np.ndarray


@dataclass
class PotentialReport:
    residuals: tuple
    tolerance: float
    dF_x: float
    dF_y: float
    scale: float

    @property
    def ok(self) -> bool:
        return max(self.residuals) <= self.tolerance


def potential_residuals(psi: AngleLike, metric: MetricField, pot: PotentialPair) -> tuple:
    """Max interior residuals of the six equations of the potential system."""
    psi = as_angle(psi)
    c1, c2 = psi.constants
    f, g = np.asarray(pot.f, float), np.asarray(pot.g, float)
    hx, hy = metric.hx, metric.hy
    mu, nu = metric.mu, metric.nu
    s = (slice(1, -1), slice(1, -1))

    def dx(a):
        return (a[2:, 1:-1] - a[:-2, 1:-1]) / (2 * hx)

    def dy(a):
        return (a[1:-1, 2:] - a[1:-1, :-2]) / (2 * hy)

    def dyy(a):
        return (a[1:-1, 2:] - 2 * a[1:-1, 1:-1] + a[1:-1, :-2]) / hy ** 2

    def dxy(a):
        return (a[2:, 2:] - a[2:, :-2] - a[:-2, 2:] + a[:-2, :-2]) / (4 * hx * hy)

    fi, gi = f[s], g[s]
    r = [
        dx(f) - (mu[s] + ((4 + c1 ** 2) * gi - dyy(g)) / 2),
        dy(f) - c2 * (c1 ** 2 * gi - dyy(g)) / (2 * c1),
        dx(g) - (-c2 / 2 * nu[s] + ((c2 ** 2 - 4) * fi + dyy(f)) / 2),
        dy(g) - (c1 / 2 * nu[s] - c1 * (c2 ** 2 * fi + dyy(f)) / (2 * c2)),
        dxy(f) + c1 * c2 * fi,
        dxy(g) + c1 * c2 * gi,
    ]
    m = metric.mask[s]
    return tuple(float(np.max(np.abs(ri[m]), initial=0.0)) for ri in r)


def immersion_from_potentials(
    psi: AngleLike, metric: MetricField, pot: PotentialPair, base=None, base_node=(0, 0)
) -> tuple[ImmersionGrid, PotentialReport]:
    """F = f T1 + (d_y f / c2) T2 + g N1 + (d_y g / c1) N2 with discrete derivatives.

    Residuals of the six potential equations must stay below
    10 h^2 max(|f|, |g|, |mu|, |nu|); the derivatives of F are compared with
    mu T1 and nu T2 on nodes at least two rings inside the grid.
    """
    psi = as_angle(psi)
    c1, c2 = psi.constants
    if abs(c1) < 1e-12 or abs(c2) < 1e-12:
        raise AngleDegenerate("the potential form needs c1 != 0 and c2 != 0")
    if not metric.is_uniform:
        raise ValueError("immersion_from_potentials needs a uniform grid")
    f, g = np.asarray(pot.f, float), np.asarray(pot.g, float)
    hx, hy = metric.hx, metric.hy
    res = potential_residuals(psi, metric, pot)
    m = metric.mask
    scale = max(
        float(np.max(np.abs(a[m]), initial=0.0)) for a in (f, g, metric.mu, metric.nu)
    )
    tol = 10.0 * max(hx, hy) ** 2 * scale
    fy = np.gradient(f, hy, axis=1, edge_order=2)
    gy = np.gradient(g, hy, axis=1, edge_order=2)
    X, Y = metric.mesh()
    fr = adapted_frame(psi, X + 1j * Y)
    F = _potentials_immersion(psi, f, fy, g, gy, fr)
    # F already holds a y-derivative, so its own differences are compared two rings in
    Fx = (F[3:-1, 2:-2] - F[1:-3, 2:-2]) / (2 * hx)
    Fy = (F[2:-2, 3:-1] - F[2:-2, 1:-3]) / (2 * hy)
    s = (slice(2, -2), slice(2, -2))
    ex = np.linalg.norm(Fx - metric.mu[s][..., None] * fr.T1[s], axis=-1)[m[s]]
    ey = np.linalg.norm(Fy - metric.nu[s][..., None] * fr.T2[s], axis=-1)[m[s]]
    report = PotentialReport(res, tol, float(np.max(ex, initial=0.0)), float(np.max(ey, initial=0.0)), scale)
    if not report.ok:
        raise PotentialsInconsistent(
            f"potential-system residual {max(res):.3g} exceeds {tol:.3g}"
        )
    if base is not None:
        F = F - F[base_node] + np.asarray(base, dtype=float)
    grid = ImmersionGrid(
        metric.x0, metric.y0, hx, hy, F, frames=fr.as_dict(), mu=metric.mu.copy(),
        nu=metric.nu.copy(), mask=np.asarray(m, bool).copy(), psi=psi.value, family="potentials",
    )
    return grid, report
