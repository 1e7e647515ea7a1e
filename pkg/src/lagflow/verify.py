"""Randomised and refinement verification suites behind ``lagflow verify``.

Every suite returns a JSON-friendly dict with a ``passed`` flag. Failing
randomised suites report the index and inputs of the worst sample, which is
reproducible from the seed.
"""

from __future__ import annotations

import math

import numpy as np

from . import geometry as geo
from . import tensoralg as ta
from .torusmap import Shear, TrigPoly, d1, d2, det_drift, hessian, jacobian, make_shear_composition

COND_MAX = 1e3
CHUNK = 250_000


def random_metrics(rng: np.random.Generator, size: int) -> ta.Metric2:
    """``M^T M + 1e-3 I`` with ``M`` uniform in [-1, 1], rejecting condition number > 1e3."""
    out = np.empty((0, 2, 2))
    while len(out) < size:
        M = rng.uniform(-1.0, 1.0, (size, 2, 2))
        G = np.einsum("nab,nac->nbc", M, M) + 1e-3 * np.eye(2)
        out = np.concatenate([out, G[np.linalg.cond(G) <= COND_MAX]])
    return ta.Metric2.from_matrix(out[:size])


def random_tensors(rng: np.random.Generator, size: int) -> ta.SymTensor3:
    return ta.SymTensor3(*rng.uniform(-1.0, 1.0, (4, size)))


def abs_scale(h: ta.SymTensor3, g: ta.Metric2) -> ta.CurvatureScalars:
    """Contractions with every factor replaced by its absolute value.

    This is the natural size of the rounding error of any contraction order.
    """
    ha = ta.SymTensor3(*(np.abs(np.asarray(c, float)) for c in (h.h111, h.h112, h.h122, h.h222)))
    gi = g.inverse()
    ga = ta.Metric2(np.abs(gi.g11), np.abs(gi.g12), np.abs(gi.g22))
    s, _ = ta.norms_naive(ha, ga.inverse())
    return s


def cube_tensor(v: np.ndarray) -> ta.SymTensor3:
    """``v_i v_j v_k``: the equality case of the Cauchy-Schwarz step."""
    a, b = v[..., 0], v[..., 1]
    return ta.SymTensor3(a**3, a * a * b, a * b * b, b**3)


def _sample(i: int, h: ta.SymTensor3, g: ta.Metric2) -> dict:
    return {
        "index": int(i),
        "h": [float(np.asarray(c)[i]) for c in (h.h111, h.h112, h.h122, h.h222)],
        "g": [float(np.asarray(c)[i]) for c in (g.g11, g.g12, g.g22)],
    }


def _chunks(samples: int):
    done = 0
    while done < samples:
        k = min(CHUNK, samples - done)
        yield done, k
        done += k


def suite_inequalities(seed: int, samples: int) -> list[dict]:
    """``|H|^2 <= 4/3 |A|^2`` and the Cauchy-Schwarz step on random (h, g)."""
    rng = np.random.default_rng(seed)
    worst_h, worst_cs = (math.inf, None), (math.inf, None)
    for start, k in _chunks(samples):
        g = random_metrics(rng, k)
        h = random_tensors(rng, k)
        s, _ = ta.norms(h, g)
        rh = np.asarray(ta.check_h_inequality(h, g)) / np.maximum(s.A2, 1e-300)
        rc = np.asarray(ta.check_cauchy_schwarz(h, g)) / np.maximum(s.H2 * s.A2, 1e-300)
        i, j = int(np.argmin(rh)), int(np.argmin(rc))
        if rh[i] < worst_h[0]:
            worst_h = (float(rh[i]), _sample(i, h, g) | {"index": start + i})
        if rc[j] < worst_cs[0]:
            worst_cs = (float(rc[j]), _sample(j, h, g) | {"index": start + j})
    out = []
    for name, (val, smp) in (("h_inequality", worst_h), ("cauchy_schwarz", worst_cs)):
        ok = val >= -1e-9
        out.append({"name": name, "samples": samples, "min_normalized_residual": val, "passed": ok}
                   | ({} if ok else {"failing_sample": smp}))
    return out


def suite_equality_cases(seed: int, samples: int = 10_000) -> list[dict]:
    rng = np.random.default_rng(seed + 1)
    g = random_metrics(rng, samples)
    H = rng.uniform(-1.0, 1.0, (samples, 2))
    he = ta.equality_tensor(H, g)
    err_h = np.max(np.abs(ta.check_h_inequality(he, g)) / abs_scale(he, g).A2)
    cube = cube_tensor(rng.uniform(-1.0, 1.0, (samples, 2)))
    sc = abs_scale(cube, g)
    err_cs = np.max(np.abs(ta.check_cauchy_schwarz(cube, g)) / (sc.H2 * sc.A2))
    hand = ta.SymTensor3(0.75, 0.0, 0.25, 0.0)
    hand_err = abs(float(ta.check_h_inequality(hand, ta.Metric2.identity())))
    cube_hand = abs(float(ta.check_cauchy_schwarz(ta.SymTensor3(1.0, 0.0, 0.0, 0.0), ta.Metric2.identity())))
    return [
        {"name": "equality_h_inequality", "max_scaled_error": float(err_h), "hand_case_error": hand_err,
         "passed": bool(err_h <= 1e-14 and hand_err <= 1e-14)},
        {"name": "equality_cauchy_schwarz", "max_scaled_error": float(err_cs), "hand_case_error": cube_hand,
         "passed": bool(err_cs <= 1e-14 and cube_hand <= 1e-14)},
    ]


def suite_square_completion(seed: int, samples: int) -> dict:
    rng = np.random.default_rng(seed + 2)
    worst = 0.0
    for _, k in _chunks(samples):
        g = random_metrics(rng, k)
        eta = rng.uniform(0.05, 1.0, k)
        H = rng.uniform(0.0, 2.0, k)
        ge = rng.uniform(-1.0, 1.0, (k, 2))
        gh = rng.uniform(-1.0, 1.0, (k, 2))
        lhs, rhs = ta.square_completion_identity(eta, H, ge, gh, g)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / (np.abs(lhs) + np.abs(rhs) + 1.0))))
    return {"name": "square_completion", "samples": samples, "max_relative_error": worst, "passed": worst <= 1e-12}


def suite_naive_oracle(seed: int, samples: int = 100_000) -> dict:
    rng = np.random.default_rng(seed + 3)
    g = random_metrics(rng, samples)
    h = random_tensors(rng, samples)
    s, Hc = ta.norms(h, g)
    sn, Hn = ta.norms_naive(h, g)
    sc = abs_scale(h, g)
    err = max(
        float(np.max(np.abs(s.A2 - sn.A2) / sc.A2)),
        float(np.max(np.abs(s.H2 - sn.H2) / sc.H2)),
        float(np.max(np.abs(s.cross - sn.cross) / sc.cross)),
    )
    return {"name": "naive_contraction_oracle", "samples": samples, "max_scaled_error": err, "passed": err <= 1e-13}


def suite_pointwise_formulas() -> dict:
    """Hand values of the evolution right-hand sides for c in {-1, 0, 1}."""
    checks = []
    for c in (-1, 0, 1):
        checks.append(("eta_rhs fixed point c=%d" % c, ta.eta_rhs(1.0, 0.0, 0.0, 0.0, c), 0.0))
    checks += [
        ("eta_rhs c=0", ta.eta_rhs(0.5, 0.2, 0.0, 0.1, 0), 0.3),
        ("eta_rhs c=-1", ta.eta_rhs(0.5, 0.0, 0.0, 0.0, -1), -0.375),
        ("eta_rhs_lower", ta.eta_rhs_lower(1.0, 3.0, 0.0, 0), 2.0),
        ("H2_rhs c=1", ta.H2_rhs(1.0, 0.0, 0.0, 1.0, 1), 1.0),
        ("H2_rhs c=-1", ta.H2_rhs(1.0, 0.25, 0.5, 0.8, -1), -0.86),
        ("bound c=0", ta.eta_lower_bound(1 / math.sqrt(2), 0, 3.0), 1 / math.sqrt(2)),
        ("bound c=-1", ta.eta_lower_bound(1 / math.sqrt(2), -1, math.log(2)), 1 / math.sqrt(5)),
        ("bound c=1 far", ta.eta_lower_bound(1 / math.sqrt(2), 1, 50.0), 1.0),
    ]
    errs = {name: abs(float(got) - want) for name, got, want in checks}
    worst = max(errs.values())
    return {"name": "pointwise_formulas", "max_error": worst, "passed": worst <= 1e-14}


def _standard_shears(a: float = 0.1):
    return [Shear("x", a, TrigPoly((1.0,))), Shear("y", a, TrigPoly((1.0,)))]


def suite_frame_oracle(n: int = 16) -> dict:
    fmap = make_shear_composition(_standard_shears(), n)
    Df = jacobian(fmap)
    D2u = np.stack([hessian(fmap.disp[..., 0], fmap.h), hessian(fmap.disp[..., 1], fmap.h)], -3)
    _, raw = geo.second_fundamental_form(Df, D2u)
    oracle = geo.second_fundamental_form_frame(Df, D2u)
    err = float(np.max(np.abs(raw - oracle)))
    return {"name": "frame_oracle", "n": n, "max_error": err, "passed": err <= 1e-12}


def observed_orders(errors: list[float]) -> list[float]:
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


def suite_refinement() -> list[dict]:
    ns = (32, 64, 128)
    out = []
    # derivative of a degree-<= n/4 trigonometric polynomial
    p = TrigPoly((1.0, 0.5, -0.25, 0.3), (0.2, 0.0, 0.4))
    e1, e2 = [], []
    for n in ns:
        s = np.arange(n) / n
        e1.append(float(np.max(np.abs(d1(p(s), 0, 1 / n) - p.deriv(s)))))
        e2.append(float(np.max(np.abs(d2(p(s), 0, 1 / n) - p.deriv(s, 2)))))
    o1, o2 = observed_orders(e1), observed_orders(e2)
    out.append({"name": "fd_first_derivative_order", "errors": e1, "orders": o1, "passed": min(o1) >= 3.7})
    out.append({"name": "fd_second_derivative_order", "errors": e2, "orders": o2, "passed": min(o2) >= 3.7})

    drift = [det_drift(make_shear_composition(_standard_shears(), n)) for n in ns]
    od = observed_orders(drift)
    out.append({"name": "det_drift_order", "errors": drift, "orders": od, "passed": min(od) >= 3.7})

    analytic = max(det_drift(make_shear_composition(_standard_shears(a), 64), analytic=True) for a in (0.1, 0.2, 0.5))
    out.append({"name": "analytic_det_drift", "max": analytic, "passed": analytic <= 1e-13})

    # Laplace-Beltrami on the identity graph: Delta sin(2 pi x) = -2 pi^2 sin(2 pi x)
    el = []
    from .torusmap import TorusMap  # local to keep the module surface small

    for n in ns:
        geom = geo.build_geometry(TorusMap.identity(n))
        x = np.arange(n)[:, None] / n * np.ones((1, n))
        phi = np.sin(2 * np.pi * x)
        el.append(float(np.max(np.abs(geo.laplace_beltrami(phi, geom) + 2 * np.pi**2 * phi))))
    ol = observed_orders(el)
    out.append({"name": "laplace_beltrami_order", "errors": el, "orders": ol, "passed": min(ol) >= 3.7})
    return out


def run_all(seed: int, samples: int = 1_000_000) -> dict:
    suites: list[dict] = []
    suites += suite_inequalities(seed, samples)
    suites += suite_equality_cases(seed)
    suites.append(suite_square_completion(seed, max(samples // 10, 1)))
    suites.append(suite_naive_oracle(seed, min(samples, 100_000)))
    suites.append(suite_pointwise_formulas())
    suites.append(suite_frame_oracle())
    suites += suite_refinement()
    return {"seed": seed, "samples": samples, "passed": all(s["passed"] for s in suites), "suites": suites}
