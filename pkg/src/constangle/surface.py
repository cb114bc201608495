"""Numerical differential geometry of sampled spacelike surfaces.

All derivatives are second-order central differences. Quantities built from
first derivatives are reported on the interior nodes (boundary ring
excluded); quantities that differentiate the Gauss map a second time (K_N,
delta, Delta) lose one more ring. Unavailable entries are NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .algebra import hform, mdot, qmul, wedge
from .errors import DegeneratePlane, NotSpacelike, WrongAngleClass
from .grid import ImmersionGrid, sample_immersion  # noqa: F401  (re-exported)
from .planes import (
    E1_PLANE,
    PLANE_TOL,
    AngleLike,
    ComplexAngle,
    OrientedPlane,
    as_angle,
    complex_arccos,
    normal_frame,
    normalize_angle,
    plane_from_frame,
)
from .synthesis import MetricField

ETA = np.diag([-1.0, 1.0, 1.0, 1.0])

# A node is resolved when the tangent lengths |F_x|, |F_y| change by less
# than their own size over RESOLUTION grid spacings.
RESOLUTION = 50.0


# --------------------------------------------------------------------------
# Differences
# --------------------------------------------------------------------------

def _nan_like(shape, dtype=float) -> np.ndarray:
    out = np.empty(shape, dtype=dtype)
    out[...] = np.nan
    return out


def _d1(a: np.ndarray, hx: float, hy: float) -> tuple[np.ndarray, np.ndarray]:
    """Central first differences, NaN on the outer ring."""
    ax = _nan_like(a.shape, a.dtype)
    ay = _nan_like(a.shape, a.dtype)
    ax[1:-1, 1:-1] = (a[2:, 1:-1] - a[:-2, 1:-1]) / (2 * hx)
    ay[1:-1, 1:-1] = (a[1:-1, 2:] - a[1:-1, :-2]) / (2 * hy)
    return ax, ay


def _d2(a: np.ndarray, hx: float, hy: float):
    axx = _nan_like(a.shape)
    ayy = _nan_like(a.shape)
    axy = _nan_like(a.shape)
    c = a[1:-1, 1:-1]
    axx[1:-1, 1:-1] = (a[2:, 1:-1] - 2 * c + a[:-2, 1:-1]) / hx ** 2
    ayy[1:-1, 1:-1] = (a[1:-1, 2:] - 2 * c + a[1:-1, :-2]) / hy ** 2
    axy[1:-1, 1:-1] = (a[2:, 2:] - a[2:, :-2] - a[:-2, 2:] + a[:-2, :-2]) / (4 * hx * hy)
    return axx, ayy, axy


def tangents(grid: ImmersionGrid) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference tangents d_x F, d_y F (NaN on the boundary ring)."""
    return _d1(grid.points, grid.hx, grid.hy)


def _interior(shape, ring: int = 1) -> np.ndarray:
    m = np.zeros(shape[:2], dtype=bool)
    m[ring:shape[0] - ring, ring:shape[1] - ring] = True
    return m


def resolved_nodes(grid: ImmersionGrid, resolution: float = RESOLUTION) -> np.ndarray:
    """Nodes where the local length scale |F_k| / |grad |F_k|| is at least resolution * h.

    Near a zero of mu or nu (where the parametrisation degenerates) the
    relative truncation error of central differences grows like h^2 / l^2
    with l that length scale; such nodes are flagged instead of reported.
    """
    Fx, Fy = tangents(grid)
    h = max(grid.hx, grid.hy)
    ok = np.zeros((grid.nx, grid.ny), dtype=bool)
    if grid.nx < 4 or grid.ny < 4:
        return ok
    ell = np.full((grid.nx - 2, grid.ny - 2), np.inf)
    for T in (Fx, Fy):
        s = np.sqrt(np.abs(mdot(T, T)))[1:-1, 1:-1]
        gx, gy = np.gradient(s, grid.hx, grid.hy)
        g = np.hypot(gx, gy)
        with np.errstate(divide="ignore", invalid="ignore"):
            ell = np.minimum(ell, np.where(g > 0, s / g, np.inf))
    ok[1:-1, 1:-1] = ell >= resolution * h
    return ok


def _check_spacelike(Fx, Fy, nodes):
    E = mdot(Fx, Fx)
    G = mdot(Fy, Fy)
    Fm = mdot(Fx, Fy)
    D = E * G - Fm * Fm
    scale = np.where(nodes, np.abs(E) + np.abs(G), 1.0)
    if np.any(nodes & ~(E > 0)) or np.any(nodes & ~(D > 1e-12 * scale ** 2)):
        raise NotSpacelike("tangents are not spacelike and independent at every interior node")
    return E, Fm, G, D


# --------------------------------------------------------------------------
# Gauss map and angles
# --------------------------------------------------------------------------

def gauss_map(grid: ImmersionGrid, i: int, j: int) -> OrientedPlane:
    """Tangent plane at interior node (i, j), oriented by (d_x F, d_y F)."""
    if not (0 < i < grid.nx - 1 and 0 < j < grid.ny - 1):
        raise IndexError("gauss_map needs an interior node")
    P = grid.points
    fx = (P[i + 1, j] - P[i - 1, j]) / (2 * grid.hx)
    fy = (P[i, j + 1] - P[i, j - 1]) / (2 * grid.hy)
    return plane_from_frame(fx, fy)


def gauss_field(
    grid: ImmersionGrid, source: str = "difference", resolution: Optional[float] = RESOLUTION
) -> np.ndarray:
    """Unit bivector field of the tangent planes, shape (nx, ny, 4), complex.

    ``source='difference'`` uses central-difference tangents (boundary ring is
    NaN); ``source='frames'`` uses the stored analytic T1, T2 at every node.
    Tangents are required to be spacelike and independent on the retained,
    resolved interior nodes.
    """
    if source == "frames":
        if not grid.frames or "T1" not in grid.frames:
            raise ValueError("grid carries no analytic frames")
        T1, T2 = grid.frames["T1"], grid.frames["T2"]
        W = wedge(T1, T2)
        n = hform(W, W)
        return W / np.sqrt(n)[..., None]
    if source != "difference":
        raise ValueError("source must be 'difference' or 'frames'")
    Fx, Fy = tangents(grid)
    nodes = _interior(grid.points.shape) & grid.retained
    if resolution is not None:
        nodes &= resolved_nodes(grid, resolution)
    _, _, _, D = _check_spacelike(Fx, Fy, nodes)
    W = wedge(Fx, Fy)
    with np.errstate(invalid="ignore"):
        return W / np.sqrt(D)[..., None]


def _valid_nodes(grid: ImmersionGrid, source: str) -> np.ndarray:
    base = grid.retained
    if source == "frames":
        return base
    return base & _interior(grid.points.shape)


def cos_field(
    grid: ImmersionGrid,
    p0: OrientedPlane = E1_PLANE,
    source: str = "difference",
    resolution: Optional[float] = RESOLUTION,
) -> np.ndarray:
    """H(p0, G) per node; NaN on the boundary ring, masked and unresolved nodes."""
    G = gauss_field(grid, source, resolution)
    nodes = _valid_nodes(grid, source)
    if source == "difference" and resolution is not None:
        nodes = nodes & resolved_nodes(grid, resolution)
    with np.errstate(invalid="ignore"):
        c = hform(G, p0.bivector.coeffs)
    return np.where(nodes, c, np.nan + 0j)


def angle_field(
    grid: ImmersionGrid,
    p0: OrientedPlane = E1_PLANE,
    source: str = "difference",
    resolution: Optional[float] = RESOLUTION,
) -> np.ndarray:
    """Normalised complex angle psi1 + i psi2 between p0 and the tangent plane, per node."""
    c = cos_field(grid, p0, source, resolution)
    out = np.full(c.shape, np.nan + 0j)
    for idx in zip(*np.nonzero(np.isfinite(c))):
        p1, p2 = normalize_angle(complex_arccos(c[idx]))
        out[idx] = complex(p1, p2)
    return out


@dataclass
class AngleReport:
    max_deviation: float
    mean_cos: complex
    tolerance: float
    passed: bool
    nodes: int
    unresolved: int = 0

    @property
    def psi(self) -> ComplexAngle:
        return ComplexAngle.from_cos(self.mean_cos)


def check_constant_angle(
    grid: ImmersionGrid,
    p0: OrientedPlane = E1_PLANE,
    tol: Optional[float] = None,
    source: str = "difference",
    resolution: Optional[float] = RESOLUTION,
) -> AngleReport:
    """Max |cos psi - mean| over retained interior nodes; default tolerance 10 hx^2.

    With central differences, unresolved nodes (see ``resolved_nodes``) are
    counted but left out of the maximum; pass ``resolution=None`` to keep them.
    """
    if tol is None:
        tol = 10.0 * grid.hx ** 2
    c = cos_field(grid, p0, source, resolution)
    use = np.isfinite(c)
    vals = c[use]
    candidates = _valid_nodes(grid, source)
    skipped = int(np.sum(candidates)) - int(vals.size)
    if vals.size == 0:
        return AngleReport(math.nan, complex(math.nan), tol, False, 0, skipped)
    mean = complex(np.mean(vals))
    dev = float(np.max(np.abs(vals - mean)))
    return AngleReport(dev, mean, tol, dev < tol, int(vals.size), skipped)


# --------------------------------------------------------------------------
# Curvatures and invariants
# --------------------------------------------------------------------------

@dataclass
class InvariantReport:
    """Per-node curvature quantities (NaN where not available)."""

    K: np.ndarray
    K_gauss_map: np.ndarray
    K_N: np.ndarray
    H2: np.ndarray
    H_vector: np.ndarray
    Delta: np.ndarray
    delta: np.ndarray
    cos_psi: np.ndarray
    metric: tuple
    normal_frame: tuple
    reliable: np.ndarray
    max_abs: dict = field(default_factory=dict)

    def max_over_reliable(self, values: np.ndarray) -> float:
        v = np.abs(values[self.reliable & np.isfinite(values)])
        return float(v.max()) if v.size else math.nan

    @property
    def psi(self) -> np.ndarray:
        out = np.full(self.cos_psi.shape, np.nan + 0j)
        for idx in zip(*np.nonzero(np.isfinite(self.cos_psi))):
            out[idx] = complex(*normalize_angle(complex_arccos(self.cos_psi[idx])))
        return out


def _mixed(a, b, c) -> np.ndarray:
    """[a, b, c] = H((ab - ba)/2, c) for arrays of imaginary quaternions."""
    cross = 0.5 * (qmul(a, b) - qmul(b, a))
    return hform(cross, c)


def curvatures(
    grid: ImmersionGrid, p0: OrientedPlane = E1_PLANE, resolution: Optional[float] = RESOLUTION
) -> InvariantReport:
    """K, K_N, |H|^2, Delta and delta from central differences.

    K comes from the Gauss equation with the second fundamental form in a
    Gram-Schmidt normal frame; K + i K_N is also evaluated as the pull-back
    of the area form of the Grassmannian, [G_x, G_y, G] / sqrt(EG - F^2),
    whose imaginary part gives K_N. ``reliable`` flags resolved nodes (all
    nodes when ``resolution`` is None); ``max_abs`` is taken over them.
    """
    if grid.nx < 5 or grid.ny < 5:
        raise ValueError("curvatures need at least a 5 x 5 grid")
    P = grid.points
    hx, hy = grid.hx, grid.hy
    Fx, Fy = _d1(P, hx, hy)
    Fxx, Fyy, Fxy = _d2(P, hx, hy)
    ring1 = _interior(P.shape, 1) & grid.retained
    ring2 = _interior(P.shape, 2) & grid.retained
    reliable = ring1.copy()
    if resolution is not None:
        reliable &= resolved_nodes(grid, resolution)
    E, Fm, Gm, D = _check_spacelike(Fx, Fy, reliable)

    with np.errstate(invalid="ignore", divide="ignore"):
        t1 = Fx / np.sqrt(E)[..., None]
        w = Fy - (Fm / E)[..., None] * Fx
        t2 = w / np.sqrt(mdot(w, w))[..., None]
        safe = ring1[..., None]
        N2, N1 = normal_frame(np.where(safe, t1, [0, 0, 1, 0]), np.where(safe, t2, [0, 0, 0, 1]))

        def comps(X):
            return mdot(X, N1), -mdot(X, N2)

        a_xx, b_xx = comps(Fxx)
        a_yy, b_yy = comps(Fyy)
        a_xy, b_xy = comps(Fxy)
        K = (a_xx * a_yy - b_xx * b_yy - (a_xy * a_xy - b_xy * b_xy)) / D
        H1 = (Gm * a_xx - 2 * Fm * a_xy + E * a_yy) / (2 * D)
        H2c = (Gm * b_xx - 2 * Fm * b_xy + E * b_yy) / (2 * D)
        H2 = H1 * H1 - H2c * H2c
        Hvec = H1[..., None] * N1 + H2c[..., None] * N2

        G = wedge(Fx, Fy) / np.sqrt(D)[..., None]
        Gx = _nan_like(G.shape, complex)
        Gy = _nan_like(G.shape, complex)
        Gx[1:-1, 1:-1] = (G[2:, 1:-1] - G[:-2, 1:-1]) / (2 * hx)
        Gy[1:-1, 1:-1] = (G[1:-1, 2:] - G[1:-1, :-2]) / (2 * hy)
        KK = _mixed(Gx, Gy, G) / np.sqrt(D)

        # delta_ij = 1/2 G_i ^ G_j with eta ^ eta' = Im H(eta, eta'), so e0^e1^e2^e3 = 1
        dxx = 0.5 * hform(Gx, Gx).imag
        dxy = 0.5 * hform(Gx, Gy).imag
        dyy = 0.5 * hform(Gy, Gy).imag
        Delta = (dxx * dyy - dxy * dxy) / D
        # delta in the orthonormal tangent frame (t1, t2): columns of coordinate coefficients
        sE = np.sqrt(E)
        r = np.sqrt(D / E)
        # t1 = Fx / sE ; t2 = (Fy - (F/E) Fx) / r
        p11, p21 = 1 / sE, np.zeros_like(E)
        p12, p22 = -(Fm / E) / r, 1 / r
        d11 = p11 * p11 * dxx + 2 * p11 * p21 * dxy + p21 * p21 * dyy
        d12 = p11 * p12 * dxx + (p11 * p22 + p21 * p12) * dxy + p21 * p22 * dyy
        d22 = p12 * p12 * dxx + 2 * p12 * p22 * dxy + p22 * p22 * dyy
        delta = np.stack([np.stack([d11, d12], -1), np.stack([d12, d22], -1)], -2)

    def keep(a, nodes):
        a = np.array(a)
        a[~nodes] = np.nan
        return a

    K = keep(K, ring1)
    H2 = keep(H2, ring1)
    Hvec = keep(Hvec, ring1)
    Kg = keep(KK.real, ring2)
    KN = keep(KK.imag, ring2)
    Delta = keep(Delta, ring2)
    delta = keep(delta, ring2)
    cpsi = np.where(ring1, hform(G, p0.bivector.coeffs), np.nan + 0j)

    report = InvariantReport(
        K=K, K_gauss_map=Kg, K_N=KN, H2=H2, H_vector=Hvec, Delta=Delta, delta=delta,
        cos_psi=cpsi, metric=(keep(E, ring1), keep(Fm, ring1), keep(Gm, ring1)),
        normal_frame=(keep(N1, ring1), keep(N2, ring1)), reliable=reliable,
    )
    report.max_abs = {k: report.max_over_reliable(v) for k, v in (("K", K), ("K_N", KN), ("H2", H2))}
    return report


# --------------------------------------------------------------------------
# Geometric characterisations
# --------------------------------------------------------------------------

@dataclass
class HyperplaneReport:
    is_in_affine_hyperplane: bool
    normal_is_null: bool
    normal: np.ndarray
    offset: float
    residual: float
    minkowski_norm: float


def check_degenerate_hyperplane(grid: ImmersionGrid, tol: float = 1e-8, null_tol: float = 1e-6) -> HyperplaneReport:
    """Total-least-squares affine hyperplane through the sample points."""
    pts = grid.points[grid.retained].reshape(-1, 4)
    centre = pts.mean(axis=0)
    C = (pts - centre).T @ (pts - centre)
    _, vecs = np.linalg.eigh(C)
    n = vecs[:, 0]
    n = n / np.linalg.norm(n)
    offset = float(n @ centre)
    # the fitted relation is sum_k n_k F_k = c; as a Minkowski normal that is eta n
    resid = float(np.max(np.abs(pts @ n - offset)))
    eta_n = ETA @ n
    mnorm = float(mdot(eta_n, eta_n))
    inside = resid < tol
    return HyperplaneReport(inside, bool(inside and abs(mnorm) < null_tol), eta_n, offset, resid, mnorm)


@dataclass
class HolonomyReport:
    kind: str
    plane_residual: float
    plane_tol: float
    product_residual: float
    product_tol: float
    expected_product: float

    @property
    def passed(self) -> bool:
        return self.plane_residual < self.plane_tol and self.product_residual < self.product_tol


def check_holonomy_tube(
    grid: ImmersionGrid,
    p0: OrientedPlane = E1_PLANE,
    psi: AngleLike = None,
    tol: Optional[float] = None,
    base_node: Optional[tuple[int, int]] = None,
) -> HolonomyReport:
    """Plane-curve and helix properties of holonomy tubes.

    Real psi: every x-curve lies in a translate of p0, and along the y-curve
    through the base node the product <T2, A> is constant, A being T1(base)
    rotated by +90 degrees inside p0. Purely imaginary psi: the roles of x and
    y are exchanged (A is T2(base) rotated by -90 degrees). Both products
    equal Re cos psi.
    """
    if psi is None:
        if grid.psi is None:
            raise ValueError("psi is required")
        psi = grid.psi
    psi = as_angle(psi)
    if psi.is_real():
        kind = "real"
    elif psi.is_imaginary():
        kind = "imaginary"
    else:
        raise WrongAngleClass(f"psi = {psi} is neither real nor purely imaginary")
    h = max(grid.hx, grid.hy)
    plane_tol = 10.0 * h * h if tol is None else tol
    P = grid.points
    m = grid.retained

    if grid.frames and "T1" in grid.frames:
        T1, T2 = grid.frames["T1"], grid.frames["T2"]
        product_tol = 1e-8
        default_base = (0, 0)
    else:
        Fx, Fy = tangents(grid)
        T1 = Fx / np.sqrt(mdot(Fx, Fx))[..., None]
        T2 = Fy / np.sqrt(mdot(Fy, Fy))[..., None]
        product_tol = 10.0 * h * h
        default_base = (1, 1)
    i0, j0 = base_node if base_node is not None else default_base

    if kind == "real":
        rel = P - P[:1, :, :]
        A = p0.rotate90(T1[i0, j0])
        prod = mdot(T2[i0, :], A)
        sel = m[i0, :] & np.isfinite(prod)
    else:
        rel = P - P[:, :1, :]
        A = -p0.rotate90(T2[i0, j0])
        prod = mdot(T1[:, j0], A)
        sel = m[:, j0] & np.isfinite(prod)
    off = np.linalg.norm(p0.reject(rel), axis=-1)
    plane_res = float(np.max(off[m], initial=0.0))
    expected = psi.cos.real
    prod_res = float(np.max(np.abs(prod[sel] - expected), initial=0.0))
    return HolonomyReport(kind, plane_res, plane_tol, prod_res, product_tol, expected)


@dataclass
class BlowupReport:
    route: str
    relative_residual: float
    tolerance: float
    nodes: int = 0

    @property
    def passed(self) -> bool:
        return self.relative_residual < self.tolerance


def _metric_resolved(metric: MetricField, resolution: float) -> np.ndarray:
    """Nodes where |zeta| / |grad zeta| >= resolution * h for zeta in {mu, nu}."""
    h = max(metric.hx, metric.hy)
    ok = np.ones(metric.mu.shape, dtype=bool)
    for z in (metric.mu, metric.nu):
        gx, gy = np.gradient(z, metric.x, metric.y)
        g = np.hypot(gx, gy)
        with np.errstate(divide="ignore", invalid="ignore"):
            ell = np.where(g > 0, np.abs(z) / g, np.inf)
        ok &= ell >= resolution * h
    return ok


def blowup_ode_check(metric: MetricField, resolution: Optional[float] = RESOLUTION) -> BlowupReport:
    """Check the Riccati-type identity behind incompleteness.

    With c1 != 0 and f = 1/|mu|, along y-columns d(f^2)/dt = 2 c1 sign(mu) f^3
    where d/dt = (1/nu) d/dy; in signed form (1/nu) d_y(mu^-2) = 2 c1 mu^-3.
    With c1 = 0 and c2 != 0 the x-rows give (1/mu) d_x(nu^-2) = -2 c2 nu^-3.
    The relative residual of central differences must be below 10 h. It is
    taken over retained nodes where mu and nu are resolved (length scale
    |zeta| / |grad zeta| at least resolution * h), since the relative
    truncation error diverges at zeros of mu or nu.
    """
    try:
        c1, c2 = metric.constants
    except Exception:
        c1 = c2 = 0.0
    h = max(metric.hx, metric.hy)
    tol = 10.0 * h
    if abs(c1) < 1e-12 and abs(c2) < 1e-12:
        return BlowupReport("trivial", 0.0, tol)
    mu, nu = metric.mu, metric.nu
    keep = np.asarray(metric.mask, bool)
    if resolution is not None:
        keep = keep & _metric_resolved(metric, resolution)
    m = keep[1:-1, 1:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        if abs(c1) >= 1e-12:
            w = mu ** -2.0
            dy = (metric.y[2:] - metric.y[:-2])[None, :]
            lhs = (w[1:-1, 2:] - w[1:-1, :-2]) / dy / nu[1:-1, 1:-1]
            rhs = 2 * c1 * mu[1:-1, 1:-1] ** -3.0
            route = "c1"
        else:
            w = nu ** -2.0
            dx = (metric.x[2:] - metric.x[:-2])[:, None]
            lhs = (w[2:, 1:-1] - w[:-2, 1:-1]) / dx / mu[1:-1, 1:-1]
            rhs = -2 * c2 * nu[1:-1, 1:-1] ** -3.0
            route = "c2"
        rel = np.abs(lhs - rhs) / np.abs(rhs)
    rel = rel[m & np.isfinite(rel)]
    return BlowupReport(route, float(np.max(rel, initial=0.0)), tol, int(rel.size))
