import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import orders, standard_shears
from lagflow.torusmap import (
    MAGIC,
    Shear,
    SnapshotError,
    TorusMap,
    TrigPoly,
    compose_shears,
    d1,
    d2,
    det_drift,
    grid_coords,
    hessian,
    jacobian,
    load_snapshot,
    make_shear_composition,
    save_snapshot,
    shear_from_dict,
)

CAT = np.array([[2, 1], [1, 1]])


def test_identity_jacobian():
    assert np.array_equal(jacobian(TorusMap.identity(16)), np.broadcast_to(np.eye(2), (16, 16, 2, 2)))
    assert det_drift(TorusMap.identity(16)) == 0.0


def test_linear_map_jacobian_exact():
    J = jacobian(TorusMap.linear_map(CAT, 16))
    assert np.array_equal(J, np.broadcast_to(CAT.astype(float), (16, 16, 2, 2)))


def test_single_shear_jacobian_fd_vs_analytic():
    errs = []
    for n in (32, 64, 128):
        fmap = make_shear_composition([Shear("y", 0.1, TrigPoly((1.0,)))], n)
        X, _ = grid_coords(n)
        exact = np.zeros((n, n, 2, 2))
        exact[..., 0, 0] = exact[..., 1, 1] = 1.0
        exact[..., 1, 0] = 0.2 * np.pi * np.cos(2 * np.pi * X)
        assert np.max(np.abs(jacobian(fmap, analytic=True) - exact)) <= 1e-15
        errs.append(np.max(np.abs(jacobian(fmap) - exact)))
    assert min(orders(errs)) >= 3.7


@pytest.mark.parametrize("a, tol", [(0.05, 1e-14), (0.1, 1e-14), (0.2, 1e-14), (0.5, 1e-13)])
def test_analytic_det_drift_of_compositions(a, tol):
    spec = standard_shears(a) + [Shear("x", a / 2, TrigPoly((0.3, 1.0), (0.5,)))]
    assert det_drift(make_shear_composition(spec, 32), analytic=True) <= tol


def test_analytic_det_drift_large_amplitude_is_rounding():
    spec = standard_shears(1.0) + [Shear("x", 0.5, TrigPoly((0.3, 1.0), (0.5,)))]
    fmap = make_shear_composition(spec, 32)
    J = jacobian(fmap, analytic=True)
    assert det_drift(fmap, analytic=True) <= 4 * np.finfo(float).eps * np.max(np.abs(J)) ** 2


def test_fd_det_drift_fourth_order():
    d64 = det_drift(make_shear_composition(standard_shears(), 64))
    d128 = det_drift(make_shear_composition(standard_shears(), 128))
    assert 12.0 <= d64 / d128 <= 20.0


def test_analytic_jacobian_needs_shears():
    with pytest.raises(ValueError):
        jacobian(TorusMap.linear_map(CAT, 8), analytic=True)


def test_composition_order():
    # x-shear first, then the y-shear acts on the moved point
    p = np.array([[0.3, 0.1]])
    q, _ = compose_shears(standard_shears(), p)
    x1 = 0.3 + 0.1 * np.sin(2 * np.pi * 0.1)
    assert q[0] == pytest.approx([x1, 0.1 + 0.1 * np.sin(2 * np.pi * x1)], abs=1e-15)


@settings(max_examples=50)
@given(st.floats(-0.5, 0.5), st.floats(0, 1), st.floats(0, 1))
def test_compose_jacobian_matches_finite_difference(a, x, y):
    spec = [Shear("x", a, TrigPoly((1.0, 0.2))), Shear("y", -a, TrigPoly((0.5,), (0.3,)))]
    p = np.array([x, y])
    _, J = compose_shears(spec, p)
    e = 1e-6
    num = np.stack([(compose_shears(spec, p + e * v)[0] - compose_shears(spec, p - e * v)[0]) / (2 * e)
                    for v in np.eye(2)], -1)
    assert np.allclose(J, num, atol=1e-8)
    assert np.linalg.det(J) == pytest.approx(1.0, abs=1e-13)


def test_trigpoly_derivatives():
    p = TrigPoly((1.0, 0.5), (0.2,))
    s = np.linspace(0, 1, 7)
    w = 2 * np.pi
    ref = w * np.cos(w * s) + 0.5 * 2 * w * np.cos(2 * w * s) - 0.2 * w * np.sin(w * s)
    assert np.allclose(p.deriv(s), ref, atol=1e-13)
    ref2 = -w**2 * np.sin(w * s) - 0.5 * (2 * w) ** 2 * np.sin(2 * w * s) - 0.2 * w**2 * np.cos(w * s)
    assert np.allclose(p.deriv(s, 2), ref2, atol=1e-11)
    assert p.degree == 2


@pytest.mark.parametrize("which", ["d1", "d2"])
def test_fd_order_on_trig_polynomial(which):
    p = TrigPoly((1.0, 0.5, -0.25, 0.3), (0.2, 0.0, 0.4))
    errs = []
    for n in (32, 64, 128):
        s = np.arange(n) / n
        if which == "d1":
            errs.append(np.max(np.abs(d1(p(s), 0, 1 / n) - p.deriv(s))))
        else:
            errs.append(np.max(np.abs(d2(p(s), 0, 1 / n) - p.deriv(s, 2))))
    assert min(orders(errs)) >= 3.7


def test_mixed_derivative():
    errs = []
    for n in (32, 64, 128):
        X, Y = grid_coords(n)
        f = np.sin(2 * np.pi * X) * np.cos(2 * np.pi * Y)
        H = hessian(f, 1 / n)
        exact = -(2 * np.pi) ** 2 * np.cos(2 * np.pi * X) * np.sin(2 * np.pi * Y)
        assert np.array_equal(H[..., 0, 1], H[..., 1, 0])
        errs.append(np.max(np.abs(H[..., 0, 1] - exact)))
    assert min(orders(errs)) >= 3.7


def test_fd_axis_convention():
    n = 16
    X, Y = grid_coords(n)
    f = np.sin(2 * np.pi * X)
    assert np.max(np.abs(d1(f, 1, 1 / n))) <= 1e-14
    assert np.max(np.abs(d1(f, 0, 1 / n))) > 6.0


@pytest.mark.parametrize("n", [7, 6, 9])
def test_bad_resolution(n):
    with pytest.raises(ValueError):
        TorusMap.identity(n)


def test_linear_part_unimodular():
    with pytest.raises(ValueError):
        TorusMap.linear_map([[2, 0], [0, 1]], 8)
    with pytest.raises(ValueError):
        TorusMap(np.eye(2), np.zeros((8, 4, 2)))


def test_with_disp_keeps_linear_part():
    fmap = TorusMap.linear_map(CAT, 8)
    g = fmap.with_disp(np.ones((8, 8, 2)))
    assert np.array_equal(g.linear, CAT) and g.shears is None
    assert np.array_equal(fmap.disp, np.zeros((8, 8, 2)))


def test_values_wrap():
    fmap = make_shear_composition(standard_shears(0.3), 16)
    v = fmap.values()
    assert np.all((v >= 0) & (v < 1))
    assert np.allclose(np.mod(fmap.values(wrap=False), 1.0), v)


def test_shear_from_dict():
    s = shear_from_dict({"axis": "y", "amplitude": 0.1, "sin": [1]})
    assert s == Shear("y", 0.1, TrigPoly((1.0,)))
    with pytest.raises(ValueError):
        shear_from_dict({"axis": "z", "amplitude": 0.1})
    with pytest.raises(ValueError):
        shear_from_dict({"axis": "x", "amplitude": 0.1, "phase": 1})


# --------------------------------------------------------------------------
# snapshots
# --------------------------------------------------------------------------

def test_snapshot_round_trip(tmp_path, rng):
    fmap = TorusMap(CAT, rng.normal(size=(12, 12, 2)))
    p = tmp_path / "s.bin"
    save_snapshot(p, fmap, t=0.125, step=42, quiet=3)
    snap = load_snapshot(p)
    assert np.array_equal(snap.fmap.disp, fmap.disp)
    assert np.array_equal(snap.fmap.linear, CAT)
    assert (snap.t, snap.step, snap.quiet) == (0.125, 42, 3)
    assert p.read_bytes()[:8] == MAGIC
    save_snapshot(tmp_path / "again.bin", snap.fmap, snap.t, snap.step, snap.quiet)
    assert (tmp_path / "again.bin").read_bytes() == p.read_bytes()


def test_snapshot_bad_magic(tmp_path):
    p = tmp_path / "s.bin"
    save_snapshot(p, TorusMap.identity(8))
    raw = bytearray(p.read_bytes())
    raw[0] ^= 0xFF
    p.write_bytes(bytes(raw))
    with pytest.raises(SnapshotError):
        load_snapshot(p)


def test_snapshot_truncated(tmp_path):
    p = tmp_path / "s.bin"
    save_snapshot(p, TorusMap.identity(8))
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(SnapshotError):
        load_snapshot(p)
    p.write_bytes(b"LAG")
    with pytest.raises(SnapshotError):
        load_snapshot(p)
