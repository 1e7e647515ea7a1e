"""Area-preserving maps of the flat torus R^2/Z^2 sampled on a periodic grid.

A map is stored as ``f(x) = L x + u(x)`` with an integer matrix ``L``
(``det L == 1``) and a periodic displacement ``u`` kept unwrapped, i.e. real
valued and never reduced mod 1.

Grid layout: ``u[i, j, a]`` is component ``a`` of the displacement at
``(x, y) = (i / n, j / n)``. Axis 0 is ``x``, axis 1 is ``y``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from os import PathLike
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

MAGIC = b"LAGFLOW1"
_HEADER = struct.Struct("<8sq4qdqq")


class SnapshotError(ValueError):
    """Malformed or foreign snapshot file."""


# --------------------------------------------------------------------------
# periodic finite differences (4th order)
# --------------------------------------------------------------------------

def _sh(f: NDArray, k: int, axis: int) -> NDArray:
    # value at index i + k
    return np.roll(f, -k, axis=axis)


def d1(f: NDArray, axis: int, h: float) -> NDArray:
    """Centered 4th-order first derivative along a periodic grid axis."""
    return (-_sh(f, 2, axis) + 8.0 * _sh(f, 1, axis) - 8.0 * _sh(f, -1, axis) + _sh(f, -2, axis)) / (12.0 * h)


def d2(f: NDArray, axis: int, h: float) -> NDArray:
    """Centered 4th-order second derivative along a periodic grid axis."""
    return (
        -_sh(f, 2, axis) + 16.0 * _sh(f, 1, axis) - 30.0 * f + 16.0 * _sh(f, -1, axis) - _sh(f, -2, axis)
    ) / (12.0 * h * h)


def hessian(f: NDArray, h: float) -> NDArray:
    """Second derivatives ``D_i D_j f`` stacked as trailing ``(2, 2)`` axes.

    Diagonal entries use the direct second-difference stencil, the mixed entry
    is the composition of two first-difference stencils.
    """
    fxx = d2(f, 0, h)
    fyy = d2(f, 1, h)
    fxy = d1(d1(f, 1, h), 0, h)
    return np.stack([np.stack([fxx, fxy], -1), np.stack([fxy, fyy], -1)], -2)


def gradient(f: NDArray, h: float) -> NDArray:
    """``(D_x f, D_y f)`` stacked on a new trailing axis."""
    return np.stack([d1(f, 0, h), d1(f, 1, h)], -1)


def check_resolution(n: int) -> None:
    if n < 8 or n % 2:
        raise ValueError(f"grid size must be even and >= 8, got {n}")


def grid_coords(n: int) -> tuple[NDArray, NDArray]:
    s = np.arange(n) / n
    return np.meshgrid(s, s, indexing="ij")


# --------------------------------------------------------------------------
# shear compositions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TrigPoly:
    """Profile ``phi(s) = sum_k cos[k-1] cos(2 pi k s) + sin[k-1] sin(2 pi k s)``."""

    sin: tuple[float, ...] = ()
    cos: tuple[float, ...] = ()

    @property
    def degree(self) -> int:
        return max(len(self.sin), len(self.cos))

    def _terms(self):
        for k, b in enumerate(self.sin, start=1):
            yield k, 0.0, b
        for k, a in enumerate(self.cos, start=1):
            yield k, a, 0.0

    def __call__(self, s: ArrayLike) -> NDArray:
        s = np.asarray(s, float)
        out = np.zeros_like(s)
        for k, a, b in self._terms():
            w = 2.0 * np.pi * k
            out = out + a * np.cos(w * s) + b * np.sin(w * s)
        return out

    def deriv(self, s: ArrayLike, order: int = 1) -> NDArray:
        s = np.asarray(s, float)
        out = np.zeros_like(s)
        for k, a, b in self._terms():
            w = 2.0 * np.pi * k
            # d^m/ds^m of (a cos + b sin)(ws): rotate phase by m * pi / 2
            c = np.cos(w * s + order * np.pi / 2)
            sn = np.sin(w * s + order * np.pi / 2)
            out = out + w**order * (a * c + b * sn)
        return out


@dataclass(frozen=True)
class Shear:
    """One exact area-preserving shear.

    ``axis == "y"``: ``(x, y) -> (x, y + a phi(x))``;
    ``axis == "x"``: ``(x, y) -> (x + a phi(y), y)``.
    """

    axis: str
    amplitude: float
    profile: TrigPoly

    def __post_init__(self):
        if self.axis not in ("x", "y"):
            raise ValueError(f"shear axis must be 'x' or 'y', got {self.axis!r}")

    @property
    def _moved(self) -> int:
        return 0 if self.axis == "x" else 1

    def apply(self, p: NDArray) -> NDArray:
        m = self._moved
        q = p.copy()
        q[..., m] = p[..., m] + self.amplitude * self.profile(p[..., 1 - m])
        return q

    def jacobian(self, p: NDArray) -> NDArray:
        m = self._moved
        J = np.zeros(p.shape[:-1] + (2, 2))
        J[..., 0, 0] = 1.0
        J[..., 1, 1] = 1.0
        J[..., m, 1 - m] = self.amplitude * self.profile.deriv(p[..., 1 - m])
        return J


ShearSpec = Sequence[Shear]


def shear_from_dict(d: dict) -> Shear:
    """Build a shear from ``{"axis", "amplitude", "sin", "cos"}``."""
    allowed = {"axis", "amplitude", "sin", "cos"}
    extra = set(d) - allowed
    if extra:
        raise ValueError(f"unknown shear keys: {sorted(extra)}")
    prof = TrigPoly(tuple(float(v) for v in d.get("sin", ())), tuple(float(v) for v in d.get("cos", ())))
    return Shear(str(d["axis"]), float(d["amplitude"]), prof)


def compose_shears(spec: ShearSpec, p: NDArray) -> tuple[NDArray, NDArray]:
    """Apply ``S_k o ... o S_1`` to points ``p``; returns images and analytic Jacobians."""
    J = np.zeros(p.shape[:-1] + (2, 2))
    J[..., 0, 0] = J[..., 1, 1] = 1.0
    q = np.asarray(p, float)
    for s in spec:
        J = np.einsum("...ab,...bc->...ac", s.jacobian(q), J)
        q = s.apply(q)
    return q, J


# --------------------------------------------------------------------------
# maps
# --------------------------------------------------------------------------

@dataclass
class TorusMap:
    """``f(x) = linear @ x + disp(x)`` sampled on an ``n x n`` periodic grid."""

    linear: NDArray[np.int64]
    disp: NDArray[np.float64]
    shears: tuple[Shear, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        self.linear = np.asarray(self.linear, dtype=np.int64).reshape(2, 2)
        self.disp = np.ascontiguousarray(self.disp, dtype=np.float64)
        n = self.disp.shape[0]
        if self.disp.shape != (n, n, 2):
            raise ValueError(f"displacement must have shape (n, n, 2), got {self.disp.shape}")
        check_resolution(n)
        if round(np.linalg.det(self.linear)) != 1:
            raise ValueError("linear part must have determinant 1")

    @property
    def n(self) -> int:
        return self.disp.shape[0]

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @classmethod
    def identity(cls, n: int) -> TorusMap:
        return cls(np.eye(2, dtype=np.int64), np.zeros((n, n, 2)), shears=())

    @classmethod
    def linear_map(cls, L: ArrayLike, n: int) -> TorusMap:
        return cls(np.asarray(L), np.zeros((n, n, 2)))

    def with_disp(self, disp: NDArray) -> TorusMap:
        # a flowed map no longer matches its generating shears
        return TorusMap(self.linear, disp)

    def points(self) -> NDArray:
        X, Y = grid_coords(self.n)
        return np.stack([X, Y], -1)

    def values(self, wrap: bool = True) -> NDArray:
        """Images ``f(x)`` at the nodes, reduced mod 1 unless ``wrap`` is False."""
        f = self.points() @ self.linear.T.astype(float) + self.disp
        return np.mod(f, 1.0) if wrap else f


def make_shear_composition(spec: ShearSpec, n: int) -> TorusMap:
    """Sample ``S_k o ... o S_1`` on the grid (identity linear part)."""
    check_resolution(n)
    X, Y = grid_coords(n)
    p = np.stack([X, Y], -1)
    q, _ = compose_shears(spec, p)
    return TorusMap(np.eye(2, dtype=np.int64), q - p, shears=tuple(spec))


def jacobian(fmap: TorusMap, analytic: bool = False) -> NDArray:
    """``Df[..., a, b] = d f^a / d x^b`` at every node.

    ``analytic=True`` uses the chain rule through the generating shears and
    is only available for maps built by :func:`make_shear_composition`.
    """
    if analytic:
        if fmap.shears is None:
            raise ValueError("analytic Jacobian needs a map built from shears")
        _, J = compose_shears(fmap.shears, fmap.points())
        return J
    Du = np.stack([gradient(fmap.disp[..., 0], fmap.h), gradient(fmap.disp[..., 1], fmap.h)], -2)
    return Du + fmap.linear.astype(float)


def det_drift(fmap: TorusMap, analytic: bool = False) -> float:
    """``max |det Df - 1|`` over the nodes: the Lagrangian-condition defect of the graph."""
    J = jacobian(fmap, analytic=analytic)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    return float(np.max(np.abs(det - 1.0)))


# --------------------------------------------------------------------------
# snapshots
# --------------------------------------------------------------------------

@dataclass
class Snapshot:
    fmap: TorusMap
    t: float = 0.0
    step: int = 0
    quiet: int = 0


def save_snapshot(path: str | PathLike, fmap: TorusMap, t: float = 0.0, step: int = 0, quiet: int = 0) -> None:
    """Write a binary snapshot.

    Layout (little endian): magic ``LAGFLOW1``, ``n`` (int64), ``L`` row-major
    (4 x int64), ``t`` (float64), step counter (int64), converged-record
    counter (int64), then ``n*n`` displacement pairs row-major (float64).
    """
    L = fmap.linear.ravel()
    header = _HEADER.pack(MAGIC, fmap.n, *map(int, L), float(t), int(step), int(quiet))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(fmap.disp.astype("<f8").tobytes(order="C"))


def load_snapshot(path: str | PathLike) -> Snapshot:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size or raw[:8] != MAGIC:
        raise SnapshotError(f"{path}: not a LAGFLOW1 snapshot (bad magic header)")
    magic, n, l00, l01, l10, l11, t, step, quiet = _HEADER.unpack_from(raw)
    body = raw[_HEADER.size:]
    if n < 8 or len(body) != n * n * 2 * 8:
        raise SnapshotError(f"{path}: payload size does not match n = {n}")
    disp = np.frombuffer(body, dtype="<f8").reshape(n, n, 2).astype(np.float64)
    fmap = TorusMap(np.array([[l00, l01], [l10, l11]]), disp)
    return Snapshot(fmap, t, step, quiet)
