import math

import numpy as np
import pytest

from constangle.algebra import I, mdot
from constangle.errors import NotSpacelike, WrongAngleClass
from constangle.planes import as_angle
from constangle.surface import (
    angle_field,
    blowup_ode_check,
    check_constant_angle,
    check_degenerate_hyperplane,
    check_holonomy_tube,
    curvatures,
    gauss_field,
    gauss_map,
    sample_immersion,
    tangents,
)
from constangle.synthesis import (
    DegenerateHyperplane,
    Hypersphere,
    Lightcone,
    MetricField,
    Product,
    TrigExample,
    angle_constants,
    integrate_immersion,
    make_family,
    solve_goursat,
)

PSI = complex(math.pi / 3, 0.4)
UNIT = ((0.0, 1.0), (0.0, 1.0))


def lightcone_map(a, b):
    def f(x, y):
        e = np.exp(a * x - b * y)
        return e * np.cosh(x), e * np.sinh(x), e * np.cos(y), e * np.sin(y)
    return f


def flat_grid(h=0.1):
    return sample_immersion(lambda x, y: (0 * x, 0 * x, x, y), UNIT, h)


def synthesized(psi, h, domain=UNIT):
    metric = solve_goursat(psi, lambda x: 1 + 0.3 * np.sin(x), lambda y: 1.5 + 0.2 * y, domain, h)
    return integrate_immersion(metric)


def interior(a):
    return a[1:-1, 1:-1]


# --- sampling ----------------------------------------------------------------

def test_sample_constant_map():
    g = sample_immersion(lambda x, y: (1.0, 2.0, 3.0, 4.0), UNIT, 0.25)
    assert g.points.shape == (5, 5, 4)
    assert np.all(g.points == [1.0, 2.0, 3.0, 4.0])


def test_sample_lightcone_origin():
    for a, b in ((0.5, 0.3), (-1.2, 2.0)):
        g = sample_immersion(lightcone_map(a, b), ((-0.5, 0.5), (-0.5, 0.5)), 0.1)
        assert np.allclose(g.points[5, 5], [1, 0, 1, 0], atol=1e-14)


def test_sample_affine_map_lies_in_e1_plane():
    g = flat_grid()
    assert np.all(g.points[..., :2] == 0)
    assert np.isclose(g.points[3, 7, 2], 0.3) and np.isclose(g.points[3, 7, 3], 0.7)


# --- gauss map and angle ------------------------------------------------------------

def test_gauss_map_flat():
    g = flat_grid()
    assert gauss_map(g, 4, 4).bivector.allclose(I)
    G = gauss_field(g)
    assert np.allclose(interior(G), I.coeffs, atol=1e-14)


def test_gauss_map_requires_interior_node():
    with pytest.raises(IndexError):
        gauss_map(flat_grid(), 0, 3)


def test_lightcone_cos_is_a_plus_ib():
    a, b = 0.5, 0.3
    errs = []
    for h in (0.02, 0.01):
        g = sample_immersion(lightcone_map(a, b), UNIT, h)
        c = interior(angle_field(g))
        cos = np.cos(c)
        errs.append(np.max(np.abs(cos - (a + 1j * b))))
    assert errs[1] < 1e-4
    assert 3.3 < errs[0] / errs[1] < 4.7


def test_product_angle_is_right_angle():
    g = make_family(Product(), ((0.0, 2.0), (-1.0, 1.0)), 0.05)
    psi = interior(angle_field(g))
    assert np.allclose(psi, math.pi / 2, atol=1e-12)


def test_angle_field_flat_is_zero():
    assert np.all(interior(angle_field(flat_grid())) == 0)


@pytest.mark.parametrize(
    "grid",
    [
        make_family(Lightcone(0.5, 0.3), UNIT, 0.02),
        make_family(Hypersphere(PSI, 1.0, -1.0), ((1.0, 2.0), (-1.0, 0.0)), 0.01),
        make_family(Product(), UNIT, 0.02),
        make_family(TrigExample(PSI), ((-0.6, -0.2), (-0.6, -0.2)), 0.01),
    ],
    ids=["lightcone", "hypersphere", "product", "trig"],
)
def test_constant_angle_families_pass(grid):
    rep = check_constant_angle(grid)
    assert rep.tolerance == pytest.approx(10 * grid.hx ** 2)
    assert rep.passed, rep
    assert rep.nodes > 0


def test_hypersphere_angle_matches_parameter():
    g = make_family(Hypersphere(PSI, 1.0, -1.0), ((1.0, 2.0), (-1.0, 0.0)), 0.01)
    # mu > 0 > nu here, so (F_x, F_y) is oriented opposite to (T1, T2)
    assert np.all(g.mu * g.nu < 0)
    assert abs(check_constant_angle(g).mean_cos + np.cos(PSI)) < 1e-3
    assert abs(check_constant_angle(g, source="frames").mean_cos - np.cos(PSI)) < 1e-12


def test_graph_surface_fails():
    g = sample_immersion(lambda x, y: (0 * x, x, y, x * x), UNIT, 0.02)
    rep = check_constant_angle(g, tol=1e-3)
    assert not rep.passed
    assert rep.max_deviation > 0.1


def test_flat_passes_tight():
    assert check_constant_angle(flat_grid(), tol=1e-14).passed


# --- curvatures -----------------------------------------------------------------

def test_flat_curvatures_vanish():
    r = curvatures(flat_grid())
    for a in (r.K, r.K_N, r.H2, r.K_gauss_map):
        v = a[np.isfinite(a)]
        assert v.size > 0 and np.all(np.abs(v) < 1e-12)


def test_lightcone_curvatures():
    g = sample_immersion(lightcone_map(0.5, 0.3), UNIT, 0.01)
    r = curvatures(g)
    assert r.max_abs["K"] < 1e-3
    assert r.max_abs["K_N"] < 1e-3
    assert r.max_abs["H2"] < 1e-3


def test_gauss_equation_matches_pullback():
    g = sample_immersion(lambda x, y: (0 * x, x, y, 0.5 * (x * x + y * y)), UNIT, 0.01)
    r = curvatures(g, resolution=None)
    sel = np.isfinite(r.K_gauss_map)
    assert np.max(np.abs(r.K[sel] - r.K_gauss_map[sel])) < 1e-3
    # paraboloid in Euclidean 3-space: K = 1 / (1 + x^2 + y^2)^2
    X, Y = np.meshgrid(np.linspace(0, 1, 101), np.linspace(0, 1, 101), indexing="ij")
    exact = 1 / (1 + X * X + Y * Y) ** 2
    assert np.max(np.abs(r.K[sel] - exact[sel])) < 1e-3


def test_synthesized_metric_matches_mu_nu():
    errs = []
    for h in (0.02, 0.01):
        g = synthesized(PSI, h)
        Fx, Fy = tangents(g)
        sel = np.zeros(g.mu.shape, bool)
        sel[1:-1, 1:-1] = True
        sel &= g.retained
        errs.append([
            np.max(np.abs(mdot(Fx, Fx) - g.mu ** 2)[sel]),
            np.max(np.abs(mdot(Fy, Fy) - g.nu ** 2)[sel]),
            np.max(np.abs(mdot(Fx, Fy))[sel]),
        ])
    assert max(errs[1]) < 5e-3
    for coarse, fine in zip(*errs):
        assert 3.3 < coarse / fine < 4.7


def test_synthesized_invariants():
    g = synthesized(PSI, 0.01)
    r = curvatures(g)
    mn = g.mu * g.nu
    sel = r.reliable & np.isfinite(r.Delta)
    assert np.max(np.abs(r.Delta[sel] + 4 / mn[sel] ** 2) / (4 / mn[sel] ** 2)) < 1e-3
    h2 = 1 / g.mu ** 2 - 1 / g.nu ** 2
    sel = r.reliable & np.isfinite(r.H2)
    assert np.max(np.abs(r.H2[sel] - h2[sel])) < 1e-3


def test_delta_matrix_is_antidiagonal():
    g = make_family(TrigExample(PSI), ((-0.6, -0.2), (-0.6, -0.2)), 0.01)
    r = curvatures(g)
    sel = r.reliable & np.isfinite(r.delta[..., 0, 0])
    assert sel.sum() > 100
    d = r.delta[sel]
    mn = (g.mu * g.nu)[sel]
    # the numerical frame is (sign(mu) T1, sign(nu) T2)
    d_T = np.sign(mn) * d[:, 0, 1]
    assert np.max(np.abs(d[:, 0, 0] * mn)) < 1e-3
    assert np.max(np.abs(d[:, 1, 1] * mn)) < 1e-3
    assert np.max(np.abs(d_T * mn - 2)) < 1e-3


def test_curvature_two_grid_ratio():
    vals = []
    for h in (0.02, 0.01):
        g = synthesized(PSI, h)
        r = curvatures(g)
        X, Y = np.meshgrid(g.x0 + g.hx * np.arange(g.nx), g.y0 + g.hy * np.arange(g.ny), indexing="ij")
        box = (X > 0.2 - 1e-9) & (X < 0.8 + 1e-9) & (Y > 0.2 - 1e-9) & (Y < 0.8 + 1e-9)
        vals.append([np.max(np.abs(a[box])) for a in (r.K, r.K_N)])
    for coarse, fine in zip(*vals):
        assert 3.3 < coarse / fine < 4.7


def test_timelike_tangent_raises():
    g = sample_immersion(lambda x, y: (x, 0 * x, y, 0 * x), UNIT, 0.1)
    with pytest.raises(NotSpacelike):
        curvatures(g)
    with pytest.raises(NotSpacelike):
        gauss_field(g)


def test_small_grid_rejected():
    g = sample_immersion(lambda x, y: (0 * x, 0 * x, x, y), UNIT, 0.5)
    with pytest.raises(ValueError):
        curvatures(g)


# --- hyperplane ------------------------------------------------------------------

def test_degenerate_hyperplane_null():
    g = make_family(DegenerateHyperplane(lambda x, y: np.sin(3 * x) * y + x * x), UNIT, 0.05)
    rep = check_degenerate_hyperplane(g)
    assert rep.is_in_affine_hyperplane and rep.normal_is_null
    n = rep.normal / rep.normal[0]
    assert np.allclose(n, [1, 1, 0, 0], atol=1e-8)
    assert check_constant_angle(g, tol=1e-10).mean_cos == pytest.approx(1)


def test_flat_in_hyperplane_not_null():
    rep = check_degenerate_hyperplane(flat_grid())
    assert rep.is_in_affine_hyperplane and not rep.normal_is_null


def test_lightcone_not_in_hyperplane():
    rep = check_degenerate_hyperplane(make_family(Lightcone(0.5, 0.0), UNIT, 0.05))
    assert not rep.is_in_affine_hyperplane


def test_lightcone_a_one_is_in_hyperplane():
    rep = check_degenerate_hyperplane(make_family(Lightcone(1.0, 0.0), UNIT, 0.05))
    assert rep.is_in_affine_hyperplane and rep.normal_is_null


# --- holonomy tubes -------------------------------------------------------------

def test_holonomy_real_angle():
    rep = check_holonomy_tube(synthesized(math.pi / 3, 0.01), psi=math.pi / 3)
    assert rep.kind == "real" and rep.passed
    assert rep.expected_product == pytest.approx(0.5)


def test_holonomy_imaginary_angle():
    rep = check_holonomy_tube(synthesized(0.7j, 0.01), psi=0.7j)
    assert rep.kind == "imaginary" and rep.passed
    assert rep.expected_product == pytest.approx(math.cosh(0.7))


def test_holonomy_generic_angle_rejected():
    with pytest.raises(WrongAngleClass):
        check_holonomy_tube(synthesized(PSI, 0.05), psi=PSI)


def test_holonomy_fails_on_generic_surface():
    g = synthesized(PSI, 0.02)
    g.psi = complex(math.pi / 3)
    assert not check_holonomy_tube(g, psi=math.pi / 3).passed


# --- blow-up ODE -----------------------------------------------------------------

def _metric(psi, mu_fn, nu_fn, h=0.01, domain=((0.0, 1.0), (0.5, 1.5))):
    (xa, xb), (ya, yb) = domain
    x = np.linspace(xa, xb, int(round((xb - xa) / h)) + 1)
    y = np.linspace(ya, yb, int(round((yb - ya) / h)) + 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    return MetricField(x, y, mu_fn(X, Y), nu_fn(X, Y), as_angle(psi))


def test_blowup_hypersphere():
    c1, c2 = angle_constants(PSI)
    m = _metric(PSI, lambda X, Y: 2 * np.sinh(c1 * Y - c2 * X), lambda X, Y: -2 * np.cosh(c1 * Y - c2 * X))
    rep = blowup_ode_check(m)
    assert rep.route == "c1" and rep.passed and rep.nodes > 0


def test_blowup_lightcone_metric():
    c1, c2 = angle_constants(PSI)
    m = _metric(PSI, lambda X, Y: np.exp(c1 * Y - c2 * X), lambda X, Y: -np.exp(c1 * Y - c2 * X))
    assert blowup_ode_check(m).passed


def test_blowup_imaginary_route():
    psi = 0.7j
    c1, c2 = angle_constants(psi)
    assert abs(c1) < 1e-12
    m = _metric(psi, lambda X, Y: np.cosh(c2 * X), lambda X, Y: np.sinh(c2 * X), domain=((0.3, 1.0), (0.0, 1.0)))
    rep = blowup_ode_check(m)
    assert rep.route == "c2" and rep.passed


def test_blowup_trivial_case():
    m = _metric(math.pi / 2, lambda X, Y: 1 + 0 * X, lambda X, Y: 1 + 0 * X)
    rep = blowup_ode_check(m)
    assert rep.route == "trivial" and rep.passed and rep.relative_residual == 0


def test_blowup_detects_wrong_metric():
    m = _metric(PSI, lambda X, Y: 2 + X * Y, lambda X, Y: 1 + 0 * X)
    assert not blowup_ode_check(m).passed
