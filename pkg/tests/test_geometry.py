import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import Scaled, asymmetric_shears, orders, standard_shears
from lagflow import geometry as geo
from lagflow.tensoralg import Metric2
from lagflow.torusmap import (
    Shear,
    TorusMap,
    TrigPoly,
    det_drift,
    grid_coords,
    hessian,
    jacobian,
    make_shear_composition,
)
from oracles import shear_fields

CAT = np.array([[2, 1], [1, 1]])
PROFILE = TrigPoly((1.0, 0.3), (0.2,))
AMP = 0.1
NS = (32, 64, 128)


def shear_map(n):
    return make_shear_composition([Shear("y", AMP, PROFILE)], n)


@pytest.fixture(scope="module")
def shear_study():
    """Geometry caches and exact fields for the x-dependent shear at three resolutions."""
    out = []
    for n in NS:
        geom = geo.build_geometry(shear_map(n))
        X, _ = grid_coords(n)
        out.append((geom, shear_fields(Scaled(AMP, PROFILE), X)))
    return out


def max_err(study, numeric, name):
    return [float(np.max(np.abs(numeric(g) - ex[name]))) for g, ex in study]


def assert_fourth_order(errs, floor=1e-11):
    # components that vanish for this family only carry rounding noise
    if max(errs) < floor:
        return
    assert min(orders(errs)) >= 3.5, errs


# --------------------------------------------------------------------------
# metric and eta
# --------------------------------------------------------------------------

def test_induced_metric_examples():
    g = geo.induced_metric(np.eye(2))
    assert (g.g11, g.g12, g.g22) == (2.0, 0.0, 2.0)
    s = 0.37
    g = geo.induced_metric(np.array([[1.0, 0.0], [s, 1.0]]))
    assert (g.g11, g.g12, g.g22) == pytest.approx((2 + s * s, s, 2.0), abs=1e-15)
    g = geo.induced_metric(CAT.astype(float))
    assert (g.g11, g.g12, g.g22, g.det) == (6.0, 3.0, 3.0, 9.0)


def test_eta_examples():
    assert geo.eta(geo.induced_metric(np.eye(2))) == 1.0
    assert abs(geo.eta(geo.induced_metric(CAT.astype(float))) - 2 / 3) <= 1e-14
    s = 0.2 * math.pi
    e = geo.eta(geo.induced_metric(np.array([[1.0, 0.0], [s, 1.0]])))
    assert e == pytest.approx(2 / math.sqrt(4 + s * s), abs=1e-15)
    assert e == pytest.approx(0.95403, abs=5e-6)


def test_eta_of_single_shear_at_max_node():
    geom = geo.build_geometry(make_shear_composition([Shear("y", 0.1, TrigPoly((1.0,)))], 64))
    assert geom.eta[0, 0] == pytest.approx(2 / math.sqrt(4 + (0.2 * math.pi) ** 2), abs=1e-6)
    assert np.min(geom.eta) == pytest.approx(geom.eta[0, 0], abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(st.floats(-0.4, 0.4), st.floats(-0.4, 0.4), st.sampled_from([16, 32]))
def test_eta_in_unit_interval(a, b, n):
    spec = [Shear("x", a, TrigPoly((1.0, 0.2))), Shear("y", b, TrigPoly((0.5,), (1.0,)))]
    fmap = make_shear_composition(spec, n)
    exact = geo.eta(geo.induced_metric(jacobian(fmap, analytic=True)))
    assert np.all(exact > 0) and np.all(exact <= 1 + 1e-9)
    # det(I + D^T D) >= (1 + |det D|)^2, so the sampled map exceeds 1 only by its drift
    geom = geo.build_geometry(fmap)
    assert np.all(geom.eta > 0) and np.all(geom.eta <= 1 + 1e-9 + det_drift(fmap))


def test_area_broken_flag():
    assert not geo.build_geometry(make_shear_composition(standard_shears(), 32)).area_broken
    X, _ = grid_coords(16)
    disp = np.zeros((16, 16, 2))
    disp[..., 0] = 0.1 * np.sin(2 * np.pi * X)  # not area preserving
    assert geo.build_geometry(TorusMap(np.eye(2), disp)).area_broken


# --------------------------------------------------------------------------
# second fundamental form
# --------------------------------------------------------------------------

@pytest.mark.parametrize("L", [np.eye(2, dtype=int), CAT, np.array([[1, 3], [0, 1]])])
def test_linear_maps_are_totally_geodesic(L):
    geom = geo.build_geometry(TorusMap.linear_map(L, 16))
    for c in (geom.h.h111, geom.h.h112, geom.h.h122, geom.h.h222, geom.Hcov.H1, geom.Hcov.H2):
        assert np.all(c == 0.0)
    assert np.all(geom.Gamma == 0.0)


@pytest.mark.parametrize("spec", [standard_shears(), asymmetric_shears()], ids=["standard", "asymmetric"])
def test_frame_oracle(spec):
    fmap = make_shear_composition(spec, 16)
    Df = jacobian(fmap)
    D2u = np.stack([hessian(fmap.disp[..., 0], fmap.h), hessian(fmap.disp[..., 1], fmap.h)], -3)
    _, raw = geo.second_fundamental_form(Df, D2u)
    assert np.max(np.abs(raw - geo.second_fundamental_form_frame(Df, D2u))) <= 1e-12


def test_frame_oracle_perturbed_data(rng):
    # also away from exact Lagrangian data; the frame oracle projects the same way
    Df = np.eye(2) + 0.3 * rng.normal(size=(5, 2, 2))
    D2u = rng.normal(size=(5, 2, 2, 2))
    D2u = 0.5 * (D2u + np.swapaxes(D2u, -1, -2))
    _, raw = geo.second_fundamental_form(Df, D2u)
    assert np.max(np.abs(raw - geo.second_fundamental_form_frame(Df, D2u))) <= 1e-12


def test_single_shear_second_fundamental_form():
    # only d^2 u^2 / dx^2 is nonzero
    n = 64
    geom = geo.build_geometry(make_shear_composition([Shear("y", 0.1, TrigPoly((1.0,)))], n))
    assert np.max(np.abs(geom.D2u[..., 1, 0, 0] + 4 * np.pi**2 * 0.1 * np.sin(2 * np.pi * grid_coords(n)[0]))) < 1e-4
    for comp in [(0, 0, 1), (0, 1, 1), (1, 1, 1)]:
        assert np.max(np.abs(geom.D2u[(...,) + comp])) <= 1e-10


def test_second_fundamental_form_vs_exact(shear_study):
    for i, j, k in [(0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1), (0, 1, 0)]:
        assert_fourth_order(max_err(shear_study, lambda g: g.raw_h[..., i, j, k], f"h{i}{j}{k}"))


def test_symmetry_defect_vanishes_at_fourth_order():
    d = [geo.build_geometry(make_shear_composition(asymmetric_shears(), n)).sym_defect for n in NS]
    assert min(orders(d)) >= 3.5


def test_mean_curvature_vector_is_normal():
    # J'F_l is normal only up to the area-preservation defect
    errs = []
    for n in NS:
        geom = geo.build_geometry(make_shear_composition(standard_shears(), n))
        F, _ = geo.tangent_frame(geom.Df)
        errs.append(np.max(np.abs(np.einsum("...a,...ka->...k", geom.H_vector(), F))))
    assert min(orders(errs)) >= 3.5


@pytest.mark.parametrize("name", ["A2", "H2", "cross", "eta"])
def test_scalars_vs_exact(shear_study, name):
    pick = {
        "A2": lambda g: g.scalars.A2,
        "H2": lambda g: g.scalars.H2,
        "cross": lambda g: g.scalars.cross,
        "eta": lambda g: g.eta,
    }[name]
    assert_fourth_order(max_err(shear_study, pick, name))


def test_mean_curvature_covector_vs_exact(shear_study):
    assert_fourth_order(max_err(shear_study, lambda g: g.Hcov.H1, "H_1"))
    assert_fourth_order(max_err(shear_study, lambda g: g.Hcov.H2, "H_2"))


# --------------------------------------------------------------------------
# Christoffel symbols
# --------------------------------------------------------------------------

def test_christoffel_symmetric_exactly():
    geom = geo.build_geometry(make_shear_composition(asymmetric_shears(), 32))
    assert np.array_equal(geom.Gamma, np.swapaxes(geom.Gamma, -1, -2))


def test_christoffel_constant_metric():
    g = Metric2(np.full((8, 8), 6.0), np.full((8, 8), 3.0), np.full((8, 8), 3.0))
    assert np.all(geo.christoffel(g, geo.metric_gradient(g, 1 / 8)) == 0.0)


@pytest.mark.parametrize("kij", [(0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 0, 0), (1, 0, 1), (1, 1, 1)])
def test_christoffel_vs_exact(shear_study, kij):
    k, i, j = kij
    assert_fourth_order(max_err(shear_study, lambda g: g.Gamma[..., k, i, j], f"Gamma{k}{i}{j}"))


# --------------------------------------------------------------------------
# Laplace-Beltrami and covariant derivative
# --------------------------------------------------------------------------

def test_laplacian_of_constant():
    geom = geo.build_geometry(make_shear_composition(asymmetric_shears(), 32))
    assert np.max(np.abs(geo.laplace_beltrami(np.full((32, 32), 2.5), geom))) <= 1e-12


def test_laplacian_identity_map_order():
    errs = []
    for n in NS:
        geom = geo.build_geometry(TorusMap.identity(n))
        X, _ = grid_coords(n)
        phi = np.sin(2 * np.pi * X)
        errs.append(np.max(np.abs(geo.laplace_beltrami(phi, geom) + 2 * np.pi**2 * phi)))
    assert min(orders(errs)) >= 3.7


def test_laplacian_of_eta_vs_exact(shear_study):
    assert_fourth_order(max_err(shear_study, lambda g: geo.laplace_beltrami(g.eta, g), "lap_eta"))


def test_discrete_divergence_theorem(rng):
    n = 32
    geom = geo.build_geometry(make_shear_composition(asymmetric_shears(), n))
    X, Y = grid_coords(n)
    for _ in range(3):
        a, b, c = rng.normal(size=3)
        phi = a * np.sin(2 * np.pi * (X + 2 * Y)) + b * np.cos(4 * np.pi * X) * np.sin(2 * np.pi * Y) + c * X * 0
        lap = geo.laplace_beltrami(phi, geom)
        assert abs(geo.integrate(lap, geom)) <= 1e-12 * max(1.0, geo.integrate(np.abs(lap), geom))


def test_covariant_derivative_trivial_cases():
    z = np.zeros((8, 8, 2))
    G = np.zeros((8, 8, 2, 2, 2))
    assert np.all(geo.covariant_derivative_H(z, G, 1 / 8) == 0.0)
    const = np.broadcast_to(np.array([0.3, -1.2]), (8, 8, 2)).copy()
    assert np.max(np.abs(geo.covariant_derivative_H(const, G, 1 / 8))) <= 1e-14
    geom = geo.build_geometry(TorusMap.identity(8))
    assert np.all(geo.covariant_grad_H(geom.Hcov.array(), geom.Gamma, geom) == 0.0)


def test_covariant_gradient_vs_exact(shear_study):
    assert_fourth_order(max_err(shear_study, lambda g: geo.covariant_grad_H(g.Hcov.array(), g.Gamma, g), "gradH2"))


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------

def test_area_identity_and_linear():
    assert geo.integrate(1.0, geo.build_geometry(TorusMap.identity(16))) == 2.0
    assert geo.integrate(1.0, geo.build_geometry(TorusMap.linear_map(CAT, 16))) == pytest.approx(3.0, abs=1e-14)


def test_integral_of_x_mode_over_x_independent_metric():
    n = 32
    geom = geo.build_geometry(make_shear_composition([Shear("x", 0.2, TrigPoly((1.0,)))], n))
    X, _ = grid_coords(n)
    assert abs(geo.integrate(np.sin(2 * np.pi * X), geom)) <= 1e-14


def test_integrate_is_order_independent(rng):
    geom = geo.build_geometry(make_shear_composition(asymmetric_shears(), 16))
    phi = rng.normal(size=(16, 16))
    ref = geo.integrate(phi, geom)
    perm = rng.permutation(16)
    geom2 = geo.GeometryCache(**{**geom.__dict__, "sqrt_det_g": geom.sqrt_det_g[perm]})
    assert geo.integrate(phi[perm], geom2) == ref


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 15), st.integers(0, 15))
def test_translation_invariance(kx, ky):
    fmap = make_shear_composition(asymmetric_shears(), 16)
    moved = fmap.with_disp(np.roll(fmap.disp, (kx, ky), axis=(0, 1)))
    a, b = geo.build_geometry(fmap), geo.build_geometry(moved)
    for f in (lambda g: g.eta, lambda g: g.scalars.A2, lambda g: g.scalars.H2, lambda g: g.scalars.cross):
        assert np.array_equal(np.roll(f(a), (kx, ky), axis=(0, 1)), f(b))
    for name in ("A2", "H2"):
        assert geo.integrate(getattr(a.scalars, name), a) == geo.integrate(getattr(b.scalars, name), b)


# --------------------------------------------------------------------------
# Gauss identity
# --------------------------------------------------------------------------

def gauss_gap(n, a):
    geom = geo.build_geometry(make_shear_composition(standard_shears(a), n))
    IA = geo.integrate(geom.scalars.A2, geom)
    return abs(IA - geo.integrate(geom.scalars.H2, geom)) / IA


@pytest.mark.parametrize("a", [0.1, 0.2])
def test_gauss_identity(a):
    gaps = [gauss_gap(n, a) for n in NS]
    assert gaps[1] <= 0.01
    assert min(orders(gaps)) >= 2.0
