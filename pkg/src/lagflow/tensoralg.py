"""Pointwise tensor algebra for Lagrangian surfaces in a four-dimensional Kähler product.

Everything here is written in a coordinate frame with explicit metric
contractions. Fields of the dataclasses may be Python floats or numpy arrays
of a common shape, in which case every operation acts node-by-node (this is
how the grid code calls into this module).

Component layout:

* ``Metric2``     -> ``(g11, g12, g22)``
* ``SymTensor3``  -> ``(h111, h112, h122, h222)``, fully symmetric
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

Real = Union[float, NDArray[np.float64]]

#: Slack allowed above ``eta == 1`` before an input is considered out of domain.
ETA_TOL = 1e-9


class DomainError(ValueError):
    """Raised when an input violates the mathematical domain of an operation."""


@dataclass(frozen=True)
class Metric2:
    """Symmetric 2x2 metric ``[[g11, g12], [g12, g22]]``."""

    g11: Real
    g12: Real
    g22: Real

    @classmethod
    def identity(cls) -> Metric2:
        return cls(1.0, 0.0, 1.0)

    @classmethod
    def from_matrix(cls, m: ArrayLike) -> Metric2:
        m = np.asarray(m, dtype=float)
        return cls(m[..., 0, 0], 0.5 * (m[..., 0, 1] + m[..., 1, 0]), m[..., 1, 1])

    @property
    def det(self) -> Real:
        return self.g11 * self.g22 - self.g12 * self.g12

    def matrix(self) -> NDArray[np.float64]:
        g11, g12, g22 = np.broadcast_arrays(
            np.asarray(self.g11, float), np.asarray(self.g12, float), np.asarray(self.g22, float)
        )
        return np.stack([np.stack([g11, g12], -1), np.stack([g12, g22], -1)], -2)

    def inverse(self) -> Metric2:
        d = self.det
        return Metric2(self.g22 / d, -self.g12 / d, self.g11 / d)

    def check(self) -> None:
        """Raise :class:`DomainError` unless positive definite at every node."""
        g11 = np.asarray(self.g11)
        if not (np.all(g11 > 0) and np.all(np.asarray(self.det) > 0)):
            raise DomainError("metric is not positive definite")


@dataclass(frozen=True)
class SymTensor3:
    """Fully symmetric covariant 3-tensor in two dimensions (4 independent components)."""

    h111: Real
    h112: Real
    h122: Real
    h222: Real

    @classmethod
    def zero(cls) -> SymTensor3:
        return cls(0.0, 0.0, 0.0, 0.0)

    def component(self, i: int, j: int, k: int) -> Real:
        """``h(i, j, k)`` with zero-based indices; invariant under permutations."""
        ones = (i == 1) + (j == 1) + (k == 1)
        return (self.h111, self.h112, self.h122, self.h222)[ones]

    def full(self) -> NDArray[np.float64]:
        """Dense array of shape ``(..., 2, 2, 2)``."""
        comps = np.broadcast_arrays(*(np.asarray(c, float) for c in (self.h111, self.h112, self.h122, self.h222)))
        out = np.empty(comps[0].shape + (2, 2, 2))
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    out[..., i, j, k] = comps[i + j + k]
        return out


@dataclass(frozen=True)
class MeanCurvCovector:
    """Mean curvature covector ``H_k = g^{ij} h_ijk``."""

    H1: Real
    H2: Real

    def array(self) -> NDArray[np.float64]:
        a, b = np.broadcast_arrays(np.asarray(self.H1, float), np.asarray(self.H2, float))
        return np.stack([a, b], -1)


@dataclass(frozen=True)
class CurvatureScalars:
    A2: Real
    H2: Real
    cross: Real


def symmetric_h_from_full(t: ArrayLike) -> SymTensor3:
    """Average a dense ``(..., 2, 2, 2)`` array over all index permutations."""
    t = np.asarray(t, float)
    h111 = t[..., 0, 0, 0]
    h112 = (t[..., 0, 0, 1] + t[..., 0, 1, 0] + t[..., 1, 0, 0]) / 3.0
    h122 = (t[..., 0, 1, 1] + t[..., 1, 0, 1] + t[..., 1, 1, 0]) / 3.0
    h222 = t[..., 1, 1, 1]
    return SymTensor3(h111, h112, h122, h222)


def equality_tensor(H: ArrayLike, g: Metric2) -> SymTensor3:
    """The tensor ``(H_i g_jk + H_j g_ik + H_k g_ij) / 4``.

    Its trace is ``H`` and it saturates ``|H|^2 <= 4/3 |A|^2``. It does not
    saturate the Cauchy-Schwarz bound; ``v_i v_j v_k`` does.
    """
    H = np.asarray(H, float)
    G = g.matrix()
    t = (
        np.einsum("...i,...jk->...ijk", H, G)
        + np.einsum("...j,...ik->...ijk", H, G)
        + np.einsum("...k,...ij->...ijk", H, G)
    ) / 4.0
    return symmetric_h_from_full(t)


def norms(h: SymTensor3, g: Metric2) -> tuple[CurvatureScalars, MeanCurvCovector]:
    """Metric contractions of a Lagrangian second fundamental form.

    Returns ``|A|^2``, ``|H|^2`` and ``sum_ij (H^k h_kij)^2`` (indices raised
    with ``g``), together with the mean curvature covector.
    """
    g.check()
    gi = g.inverse()
    a, b, d = gi.g11, gi.g12, gi.g22
    h111, h112, h122, h222 = h.h111, h.h112, h.h122, h.h222

    # raise the first index: h^i_jk for (jk) in {11, 12, 22}
    u111 = a * h111 + b * h112
    u112 = a * h112 + b * h122
    u122 = a * h122 + b * h222
    u211 = b * h111 + d * h112
    u212 = b * h112 + d * h122
    u222 = b * h122 + d * h222

    H1 = a * h111 + 2.0 * b * h112 + d * h122
    H2c = a * h112 + 2.0 * b * h122 + d * h222
    Hu1 = a * H1 + b * H2c
    Hu2 = b * H1 + d * H2c
    H2 = H1 * Hu1 + H2c * Hu2

    # contraction X_jk Y_j'k' g^{jj'} g^{kk'} for symmetric X, Y
    def sym_pair(x11, x12, x22, y11, y12, y22):
        return (
            a * a * x11 * y11
            + d * d * x22 * y22
            + 2.0 * a * b * (x11 * y12 + x12 * y11)
            + 2.0 * b * d * (x12 * y22 + x22 * y12)
            + b * b * (x11 * y22 + x22 * y11)
            + 2.0 * (a * d + b * b) * x12 * y12
        )

    # h_ijk h_i'j'k' g^{ii'} ... = sum_i h^i_jk h_i j'k' g^{jj'} g^{kk'}
    A2 = sym_pair(u111, u112, u122, h111, h112, h122) + sym_pair(u211, u212, u222, h112, h122, h222)

    # B_ij = H^k h_kij
    B11 = Hu1 * h111 + Hu2 * h112
    B12 = Hu1 * h112 + Hu2 * h122
    B22 = Hu1 * h122 + Hu2 * h222
    cross = sym_pair(B11, B12, B22, B11, B12, B22)

    return CurvatureScalars(A2, H2, cross), MeanCurvCovector(H1, H2c)


def norms_naive(h: SymTensor3, g: Metric2) -> tuple[CurvatureScalars, MeanCurvCovector]:
    """Reference contraction by explicit loops over the full index ranges."""
    g.check()
    G = g.inverse().matrix()
    t = h.full()
    R = range(2)
    A2 = 0.0
    for i in R:
        for j in R:
            for k in R:
                for p in R:
                    for q in R:
                        for r in R:
                            A2 = A2 + t[..., i, j, k] * t[..., p, q, r] * G[..., i, p] * G[..., j, q] * G[..., k, r]
    Hk = [sum(G[..., i, j] * t[..., i, j, k] for i in R for j in R) for k in R]
    Hup = [sum(G[..., k, l] * Hk[l] for l in R) for k in R]
    H2 = sum(Hk[k] * Hup[k] for k in R)
    B = [[sum(Hup[k] * t[..., k, i, j] for k in R) for j in R] for i in R]
    cross = 0.0
    for i in R:
        for j in R:
            for p in R:
                for q in R:
                    cross = cross + G[..., i, p] * G[..., j, q] * B[i][j] * B[p][q]
    return CurvatureScalars(A2, H2, cross), MeanCurvCovector(Hk[0], Hk[1])


def check_h_inequality(h: SymTensor3, g: Metric2) -> Real:
    """``4/3 |A|^2 - |H|^2``; nonnegative for every fully symmetric ``h``."""
    s, _ = norms(h, g)
    return (4.0 / 3.0) * s.A2 - s.H2


def check_cauchy_schwarz(h: SymTensor3, g: Metric2) -> Real:
    """``|H|^2 |A|^2 - sum_ij (H^k h_kij)^2``; nonnegative by Cauchy-Schwarz."""
    s, _ = norms(h, g)
    return s.H2 * s.A2 - s.cross


def _cov_inner(g: Metric2, v: NDArray, w: NDArray) -> Real:
    gi = g.inverse()
    return gi.g11 * v[..., 0] * w[..., 0] + gi.g12 * (v[..., 0] * w[..., 1] + v[..., 1] * w[..., 0]) + gi.g22 * v[..., 1] * w[..., 1]


def square_completion_identity(
    eta: Real, H: Real, grad_eta: ArrayLike, grad_H: ArrayLike, g: Metric2
) -> tuple[Real, Real]:
    """Both sides of the completed-square identity for the gradient terms.

    ``lhs = (4 eta H <d eta, dH> - 2 |d eta|^2 H^2 - 2 eta^2 |dH|^2) / eta^3``
    ``rhs = -2 |H d eta - eta dH|^2 / eta^3``

    Gradients are covectors; inner products use ``g^{-1}``.
    """
    eta_a = np.asarray(eta, float)
    if np.any(eta_a <= 0):
        raise DomainError("eta must be positive")
    ge = np.asarray(grad_eta, float)
    gh = np.asarray(grad_H, float)
    H = np.asarray(H, float)
    lhs = (
        4.0 * eta_a * H * _cov_inner(g, ge, gh)
        - 2.0 * _cov_inner(g, ge, ge) * H * H
        - 2.0 * eta_a * eta_a * _cov_inner(g, gh, gh)
    ) / eta_a**3
    w = ge * H[..., None] - eta_a[..., None] * gh
    rhs = -2.0 * _cov_inner(g, w, w) / eta_a**3
    return lhs, rhs


def _check_eta(eta: Real, tol: float = ETA_TOL) -> None:
    e = np.asarray(eta)
    if not np.all((e > 0) & (e <= 1.0 + tol)):
        raise DomainError(f"eta must lie in (0, 1 + {tol:g}]")


def _check_c(c: int) -> None:
    if c not in (-1, 0, 1):
        raise DomainError("curvature sign c must be -1, 0 or 1")


def eta_rhs(eta: Real, A2: Real, H2: Real, lap_eta: Real, c: int, *, eta_tol: float = ETA_TOL) -> Real:
    """Right-hand side of the evolution of ``eta`` under the flow.

    ``eta_tol`` is the slack allowed above 1; discrete data that is only
    approximately area preserving needs it widened to its det-drift.
    """
    _check_eta(eta, eta_tol)
    _check_c(c)
    return lap_eta + eta * (2.0 * A2 - H2) + c * eta * (1.0 - eta * eta)


def eta_rhs_lower(eta: Real, A2: Real, lap_eta: Real, c: int, *, eta_tol: float = ETA_TOL) -> Real:
    """Lower bound of :func:`eta_rhs` obtained from ``|H|^2 <= 4/3 |A|^2``."""
    _check_eta(eta, eta_tol)
    _check_c(c)
    return lap_eta + (2.0 / 3.0) * A2 * eta + c * eta * (1.0 - eta * eta)


def H2_rhs(H2: Real, grad_H_norm2: Real, cross: Real, eta: Real, c: int, *, eta_tol: float = ETA_TOL) -> Real:
    """Reaction part of ``(d/dt - Laplacian) |H|^2``."""
    _check_eta(eta, eta_tol)
    _check_c(c)
    if np.any(np.asarray(H2) < 0) or np.any(np.asarray(grad_H_norm2) < 0) or np.any(np.asarray(cross) < 0):
        raise DomainError("norms must be nonnegative")
    return -2.0 * grad_H_norm2 + 2.0 * cross + c * (2.0 - eta * eta) * H2


def eta_lower_bound(min_eta0: float, c: int, t: Real) -> Real:
    """Comparison-principle lower bound for ``min eta`` at time ``t``.

    ``alpha e^{ct} / sqrt(1 + alpha^2 e^{2ct})`` with ``alpha / sqrt(1 + alpha^2)``
    equal to the initial minimum. For ``c == 0`` this is the initial minimum.
    """
    _check_c(c)
    if min_eta0 <= 0:
        raise DomainError("initial minimum of eta must be positive")
    if np.any(np.asarray(t) < 0):
        raise DomainError("time must be nonnegative")
    m = min(float(min_eta0), 1.0 - 1e-12)
    if c == 0:
        return np.full_like(np.asarray(t, float), m) if np.ndim(t) else m
    alpha = m / np.sqrt(1.0 - m * m)
    # written to stay finite as alpha e^{ct} grows
    return 1.0 / np.sqrt(1.0 + np.exp(-2.0 * c * np.asarray(t, float)) / (alpha * alpha))
