"""Nonparametric mean curvature flow of a torus-map graph.

The unknown is the periodic displacement ``u`` of ``f(x) = L x + u(x)``; it
evolves by the graph-gauge equation ``du/dt = g^{ij} D_i D_j u``. The ambient
velocity ``V = (0, du/dt)`` has normal part equal to the mean curvature
vector, so the surfaces coincide with the normal-velocity flow up to the
tangential reparametrisation ``T``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from . import _kernels
from .geometry import GeometryCache, build_geometry, tangent_frame
from .torusmap import TorusMap, save_snapshot

log = logging.getLogger(__name__)

#: ``min eta`` below this aborts the run: the graph is about to degenerate.
ETA_ABORT = 1e-3
#: Convergence detector: ``sup |H|`` threshold and number of consecutive records.
CONVERGED_SUP_H = 1e-5
CONVERGED_RECORDS = 10


class IntegrationError(RuntimeError):
    """A step produced non-finite values; ``last_state`` is the last good state."""

    def __init__(self, msg: str, last_state: "FlowState"):
        super().__init__(msg)
        self.last_state = last_state


class FlowAbort(IntegrationError):
    """``min eta`` fell below :data:`ETA_ABORT`."""


@dataclass(frozen=True)
class FlowState:
    t: float
    fmap: TorusMap
    step: int = 0
    dt_last: float = 0.0
    # consecutive diagnostic records with sup |H| below threshold
    quiet: int = 0

    @cached_property
    def geom(self) -> GeometryCache:
        return build_geometry(self.fmap)

    @property
    def u(self) -> np.ndarray:
        return self.fmap.disp


@dataclass(frozen=True)
class StepControl:
    sigma: float = 0.2
    t_end: float = 1.0
    diag_every: int = 50
    snapshot_every: int = 0
    residual_every: int = 0

    def __post_init__(self):
        if not 0.0 < self.sigma <= 0.5:
            raise ValueError(f"sigma must lie in (0, 0.5], got {self.sigma}")
        if self.t_end < 0:
            raise ValueError("t_end must be nonnegative")
        if self.diag_every < 1:
            raise ValueError("diag_every must be >= 1")
        if self.snapshot_every < 0 or self.residual_every < 0:
            raise ValueError("cadences must be nonnegative")

    def dt(self, lam_max: float, h: float) -> float:
        return self.sigma * h * h / lam_max


def velocity(state: FlowState) -> np.ndarray:
    """``du/dt = g^{ij} D_i D_j u`` at every node, shape ``(n, n, 2)``."""
    v, _, _ = _kernels.velocity(state.u, state.fmap.linear, state.fmap.h)
    return v


def tangential_velocity(state: FlowState, v: np.ndarray | None = None) -> np.ndarray:
    """Index-raised tangential velocity ``T^k = g^{kl} <V, F_l>`` with ``V = (0, v)``.

    A scalar ``phi`` following the normal-velocity flow changes at the rate
    ``d_t phi - T^k d_k phi``, where ``d_t`` is the graph-gauge derivative.
    """
    if v is None:
        v = velocity(state)
    geom = state.geom
    VF = np.einsum("...a,...al->...l", v, geom.Df)
    return np.einsum("...kl,...l->...k", geom.ginv.matrix(), VF)


def normal_velocity_defect(state: FlowState) -> float:
    """``max |V^perp - H|`` over nodes; zero for the exact graph-gauge equation."""
    geom = state.geom
    v = velocity(state)
    F, _ = tangent_frame(geom.Df)
    V = np.zeros(v.shape[:-1] + (4,))
    V[..., 2:] = v
    tang = np.einsum("...k,...ka->...a", tangential_velocity(state, v), F)
    return float(np.max(np.linalg.norm(V - tang - geom.H_vector(), axis=-1)))


def step_rk4(state: FlowState, control: StepControl | None = None, dt: float | None = None) -> FlowState:
    """One classical Runge-Kutta step with geometry rebuilt per stage.

    ``dt`` defaults to the CFL value ``sigma h^2 / lambda_max`` computed from
    the current state.
    """
    L = state.fmap.linear
    h = state.fmap.h
    u = state.u
    k1, lam, eta_min = _kernels.velocity(u, L, h)
    if eta_min < ETA_ABORT:
        raise FlowAbort(f"min eta = {eta_min:.3e} below {ETA_ABORT:g} at t = {state.t}", state)
    if dt is None:
        dt = (control or StepControl()).dt(lam, h)
    k2, _, _ = _kernels.velocity(u + 0.5 * dt * k1, L, h)
    k3, _, _ = _kernels.velocity(u + 0.5 * dt * k2, L, h)
    k4, _, _ = _kernels.velocity(u + dt * k3, L, h)
    u_new = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(u_new)):
        raise IntegrationError(f"non-finite displacement after step at t = {state.t}", state)
    return FlowState(state.t + dt, state.fmap.with_disp(u_new), state.step + 1, dt, state.quiet)


@dataclass
class RunResult:
    records: list = field(default_factory=list)
    final: FlowState | None = None
    converged: bool = False
    snapshots: list[Path] = field(default_factory=list)


def run(
    state: FlowState,
    control: StepControl,
    *,
    c: int = 0,
    snapshot_dir: str | Path | None = None,
    on_record: Callable | None = None,
) -> RunResult:
    """Integrate until ``t >= t_end`` or the convergence detector fires.

    Records are emitted for the initial state, whenever the step counter is a
    multiple of ``diag_every``, and once more for the final state. Only
    cadence-aligned records feed the convergence detector. A state resumed
    from a snapshot (``step > 0``) is not recorded again, so the records of
    the original run up to the snapshot followed by those of the resumed run
    equal the records of the uninterrupted run.
    """
    from .diagnostics import measure, residual_eq1, residual_eq4

    if c != 0:
        raise ValueError("only the flat ambient flow (c = 0) can be integrated")
    res = RunResult()
    snap_dir = Path(snapshot_dir) if snapshot_dir is not None else None

    def emit(s: FlowState, prev: FlowState | None, aligned: bool) -> FlowState:
        rec = measure(s)
        k = s.step // control.diag_every
        if aligned and prev is not None and control.residual_every and k % control.residual_every == 0:
            side = step_rk4(s, dt=s.dt_last)
            rec = replace(rec, residual_eq1=residual_eq1(prev, s, side, c), residual_eq4=residual_eq4(prev, s, side, c))
        res.records.append(rec)
        if on_record is not None:
            on_record(rec)
        if aligned:
            quiet = s.quiet + 1 if rec.sup_H < CONVERGED_SUP_H else 0
            ns = replace(s, quiet=quiet)
            if "geom" in s.__dict__:
                ns.__dict__["geom"] = s.__dict__["geom"]
            s = ns
        return s

    def snapshot(s: FlowState) -> None:
        if snap_dir is None:
            return
        snap_dir.mkdir(parents=True, exist_ok=True)
        p = snap_dir / f"snap_{s.step:08d}.bin"
        save_snapshot(p, s.fmap, s.t, s.step, s.quiet)
        res.snapshots.append(p)

    # a resumed state was already recorded (and counted) by the run that saved it
    last_emitted = state.step
    if state.step == 0:
        state = emit(state, None, True)
    prev = None
    try:
        while state.t < control.t_end and state.quiet < CONVERGED_RECORDS:
            nxt = step_rk4(state, control)
            prev, state = state, nxt
            if state.step % control.diag_every == 0:
                state = emit(state, prev, True)
                last_emitted = state.step
            if control.snapshot_every and state.step % control.snapshot_every == 0:
                snapshot(state)
    except IntegrationError as e:
        res.final = e.last_state
        e.partial = res
        raise
    if last_emitted != state.step:
        state = emit(state, prev, False)
    res.converged = state.quiet >= CONVERGED_RECORDS
    res.final = state
    if snap_dir is not None:
        snap_dir.mkdir(parents=True, exist_ok=True)
        p = snap_dir / "final.bin"
        save_snapshot(p, state.fmap, state.t, state.step, state.quiet)
        res.snapshots.append(p)
    log.info("run finished at t=%.6g after %d steps (converged=%s)", state.t, state.step, res.converged)
    return res
