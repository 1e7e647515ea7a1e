"""Monitored quantities of a flow run and the checks built on them."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields
from os import PathLike
from typing import Sequence

import numpy as np

from . import tensoralg as ta
from .flow import FlowState, tangential_velocity, velocity
from .geometry import covariant_grad_H, integrate, laplace_beltrami
from .torusmap import gradient


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    min_eta: float
    M: float  # integral of |H|^2 / eta
    I_H2: float
    I_A2: float
    sup_A2: float
    sup_H: float
    gauss_gap: float
    det_drift: float
    sym_defect: float
    residual_eq1: float = math.nan
    residual_eq4: float = math.nan
    dt: float = 0.0

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list[float]:
        return [getattr(self, k) for k in self.columns()]


def measure(state: FlowState) -> DiagnosticsRecord:
    geom = state.geom
    s = geom.scalars
    H2 = np.asarray(s.H2)
    A2 = np.asarray(s.A2)
    I_H2 = integrate(H2, geom)
    I_A2 = integrate(A2, geom)
    Df = geom.Df
    det = Df[..., 0, 0] * Df[..., 1, 1] - Df[..., 0, 1] * Df[..., 1, 0]
    return DiagnosticsRecord(
        t=state.t,
        min_eta=float(np.min(geom.eta)),
        M=integrate(H2 / geom.eta, geom),
        I_H2=I_H2,
        I_A2=I_A2,
        sup_A2=float(np.max(A2)),
        sup_H=float(np.sqrt(np.max(H2))),
        gauss_gap=abs(I_A2 - I_H2),
        det_drift=float(np.max(np.abs(det - 1.0))),
        sym_defect=geom.sym_defect,
        dt=state.dt_last,
    )


# --------------------------------------------------------------------------
# time-series checks
# --------------------------------------------------------------------------

@dataclass
class MonotonicityReport:
    violations: list[float] = field(default_factory=list)

    @property
    def max_violation(self) -> float:
        return max(self.violations, default=0.0)

    @property
    def total_violation(self) -> float:
        return math.fsum(self.violations)


def check_monotonicity(records: Sequence[DiagnosticsRecord], c: int = 0) -> MonotonicityReport:
    """Per-interval excess of ``M(t2)`` over ``M(t1) e^{c (t2 - t1)}``."""
    rep = MonotonicityReport()
    for a, b in zip(records, records[1:]):
        rep.violations.append(max(0.0, b.M - a.M * math.exp(c * (b.t - a.t))))
    return rep


def check_eta_lower_bound(records: Sequence[DiagnosticsRecord], c: int = 0) -> float:
    """Smallest ``min_eta(t) - bound(t)`` over the records (``inf`` if empty)."""
    if not records:
        return math.inf
    m0 = records[0].min_eta
    t0 = records[0].t
    return min(r.min_eta - float(ta.eta_lower_bound(m0, c, r.t - t0)) for r in records)


def eta_bound_ok(records: Sequence[DiagnosticsRecord], c: int = 0, tol: float = 1e-6) -> bool:
    """Every margin at least ``-tol (1 + t)``."""
    if not records:
        return True
    m0, t0 = records[0].min_eta, records[0].t
    return all(r.min_eta - float(ta.eta_lower_bound(m0, c, r.t - t0)) >= -tol * (1.0 + r.t) for r in records)


@dataclass
class H2DecayReport:
    sandwich_ok: bool  # I_H2 <= M at every record
    bounded_ok: bool  # M(t) <= M(0) (up to rounding) at every record
    ratio: float  # I_H2(end) / I_H2(0)

    @property
    def decayed(self) -> bool:
        return self.ratio <= 0.01


def check_H2_decay(records: Sequence[DiagnosticsRecord], c: int = 0, rtol: float = 1e-12) -> H2DecayReport:
    if c != 0:
        raise ValueError("decay check is only defined for flat runs")
    if not records:
        return H2DecayReport(True, True, 0.0)
    M0 = records[0].M
    slack = rtol * max(M0, 1e-300)
    sandwich = all(r.I_H2 <= r.M + rtol * r.M for r in records)
    bounded = all(r.M <= M0 + slack for r in records)
    I0 = records[0].I_H2
    ratio = records[-1].I_H2 / I0 if I0 > 0 else 0.0
    return H2DecayReport(sandwich, bounded, ratio)


# --------------------------------------------------------------------------
# evolution-equation residuals
# --------------------------------------------------------------------------

def _eta_slack(geom) -> float:
    # eta <= 1 only holds up to the discrete area-preservation defect
    Df = geom.Df
    det = Df[..., 0, 0] * Df[..., 1, 1] - Df[..., 0, 1] * Df[..., 1, 0]
    return max(ta.ETA_TOL, float(np.max(np.abs(det - 1.0))))


def _central_dt(prev: FlowState, mid: FlowState, nxt: FlowState) -> float:
    if not (mid.dt_last > 0 and nxt.dt_last == mid.dt_last):
        raise ValueError("residuals need three states at uniform dt")
    return mid.dt_last


def _material(prev_f, nxt_f, mid_f, dt, T, hs, gauge_correction):
    rate = (nxt_f - prev_f) / (2.0 * dt)
    if gauge_correction:
        rate = rate - np.einsum("...k,...k->...", T, gradient(mid_f, hs))
    return rate


def residual_eq1_field(
    prev: FlowState, mid: FlowState, nxt: FlowState, c: int = 0, gauge_correction: bool = True
) -> np.ndarray:
    """Pointwise residual of the ``eta`` evolution at the middle state."""
    dt = _central_dt(prev, mid, nxt)
    geom = mid.geom
    eta = geom.eta
    T = tangential_velocity(mid)
    rate = _material(prev.geom.eta, nxt.geom.eta, eta, dt, T, geom.spacing, gauge_correction)
    s = geom.scalars
    rhs = ta.eta_rhs(eta, s.A2, s.H2, laplace_beltrami(eta, geom), c, eta_tol=_eta_slack(geom))
    return rate - rhs


def residual_eq4_field(
    prev: FlowState, mid: FlowState, nxt: FlowState, c: int = 0, gauge_correction: bool = True
) -> np.ndarray:
    """Pointwise residual of the ``|H|^2`` evolution at the middle state."""
    dt = _central_dt(prev, mid, nxt)
    geom = mid.geom
    H2 = np.asarray(geom.scalars.H2)
    T = tangential_velocity(mid)
    rate = _material(np.asarray(prev.geom.scalars.H2), np.asarray(nxt.geom.scalars.H2), H2, dt, T, geom.spacing,
                     gauge_correction)
    gradH2 = covariant_grad_H(geom.Hcov.array(), geom.Gamma, geom)
    # clip rounding-level negatives of the quadratic forms
    reaction = ta.H2_rhs(
        H2, np.maximum(gradH2, 0.0), np.maximum(geom.scalars.cross, 0.0), geom.eta, c, eta_tol=_eta_slack(geom)
    )
    return rate - (laplace_beltrami(H2, geom) + reaction)


def residual_eq1(prev: FlowState, mid: FlowState, nxt: FlowState, c: int = 0, gauge_correction: bool = True) -> float:
    return float(np.max(np.abs(residual_eq1_field(prev, mid, nxt, c, gauge_correction))))


def residual_eq4(prev: FlowState, mid: FlowState, nxt: FlowState, c: int = 0, gauge_correction: bool = True) -> float:
    return float(np.max(np.abs(residual_eq4_field(prev, mid, nxt, c, gauge_correction))))


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(x, ".17g")


def write_csv(records: Sequence[DiagnosticsRecord], path: str | PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DiagnosticsRecord.columns())
        for r in records:
            w.writerow([_fmt(v) for v in r.row()])


def read_csv(path: str | PathLike) -> list[DiagnosticsRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    cols = DiagnosticsRecord.columns()
    if not rows or rows[0] != cols:
        raise ValueError(f"{path}: unexpected header")
    return [DiagnosticsRecord(**{k: float(v) for k, v in zip(cols, row)}) for row in rows[1:]]


def summarize(records: Sequence[DiagnosticsRecord], c: int = 0) -> dict:
    """Report payload: monotonicity, lower bound, Gauss identity and decay."""
    mono = check_monotonicity(records, c)
    M0 = records[0].M if records else 0.0
    decay = check_H2_decay(records, c)
    gauss_rel = max((r.gauss_gap / r.I_A2 for r in records if r.I_A2 > 0), default=0.0)
    return {
        "n_records": len(records),
        "monotonicity": {
            "max_violation": mono.max_violation,
            "total_violation": mono.total_violation,
            "M0": M0,
            "ok": mono.max_violation <= 1e-4 * M0,
        },
        "eta_lower_bound": {
            "worst_margin": check_eta_lower_bound(records, c),
            "ok": eta_bound_ok(records, c),
        },
        "gauss": {"max_relative_gap": gauss_rel},
        "H2_decay": asdict(decay) | {"decayed": decay.decayed},
        "final": asdict(records[-1]) if records else None,
    }
