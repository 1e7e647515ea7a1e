"""Discrete differential geometry of the graph of a torus map.

The graph ``Sigma = {(x, f(x))}`` sits in ``T^2 x T^2`` with the flat product
metric. Locally we lift it to ``F(x) = (x, f(x))`` in flat R^4, so that
``F_i = (e_i, D_i f)`` spans the tangent plane and ``F_ij = (0, D_i D_j u)``.

The complex structure compatible with ``omega_1 - omega_2`` is
``J'(v, w) = (J0 v, -J0 w)`` with ``J0`` the rotation by +pi/2. On a
Lagrangian graph ``J' F_k`` is a normal frame with Gram matrix ``g``, and

    h_ijk = < (F_ij)^perp, J' F_k >

is fully symmetric. Derivatives of fields use the 4th-order periodic
stencils from :mod:`lagflow.torusmap`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .tensoralg import CurvatureScalars, MeanCurvCovector, Metric2, SymTensor3, norms, symmetric_h_from_full
from .torusmap import TorusMap, d1, gradient, hessian, jacobian

#: ``det g`` below this value means area preservation is visibly broken.
DET_G_FLOOR = 4.0 - 1e-6


def induced_metric(Df: NDArray) -> Metric2:
    """``g = I + Df^T Df`` (the pullback of the flat product metric)."""
    fx = Df[..., :, 0]
    fy = Df[..., :, 1]
    return Metric2(
        1.0 + np.sum(fx * fx, -1),
        np.sum(fx * fy, -1),
        1.0 + np.sum(fy * fy, -1),
    )


def eta(g: Metric2):
    """``2 / sqrt(det g)``: twice the Jacobian of the projection to the first factor."""
    return 2.0 / np.sqrt(g.det)


def tangent_frame(Df: NDArray) -> tuple[NDArray, NDArray]:
    """Tangent vectors ``F_k`` and their images ``J' F_k``, both shaped ``(..., 2, 4)``."""
    shape = Df.shape[:-2]
    F = np.zeros(shape + (2, 4))
    F[..., 0, 0] = 1.0
    F[..., 1, 1] = 1.0
    F[..., :, 2:] = np.swapaxes(Df, -1, -2)
    JF = np.empty_like(F)
    # J0 (a, b) = (-b, a) on each factor, with the sign flipped on the second
    JF[..., 0] = -F[..., 1]
    JF[..., 1] = F[..., 0]
    JF[..., 2] = F[..., 3]
    JF[..., 3] = -F[..., 2]
    return F, JF


def second_derivative_vectors(D2u: NDArray) -> NDArray:
    """``F_ij = (0, D_i D_j u)`` shaped ``(..., 2, 2, 4)``; ``D2u`` is ``(..., a, i, j)``."""
    shape = D2u.shape[:-3]
    Fij = np.zeros(shape + (2, 2, 4))
    Fij[..., 2:] = np.moveaxis(D2u, -3, -1)
    return Fij


def second_fundamental_form(Df: NDArray, D2u: NDArray, g: Metric2 | None = None):
    """Symmetrised ``h_ijk`` and the raw (pre-symmetrisation) tensor.

    Returns ``(h, raw)`` where ``raw[..., i, j, k] = <(F_ij)^perp, J' F_k>``.
    """
    if g is None:
        g = induced_metric(Df)
    F, JF = tangent_frame(Df)
    Fij = second_derivative_vectors(D2u)
    gi = g.inverse().matrix()
    # tangential part of F_ij: F_k g^{kl} <F_l, F_ij>
    proj = np.einsum("...ija,...la->...ijl", Fij, F)
    coef = np.einsum("...kl,...ijl->...ijk", gi, proj)
    perp = Fij - np.einsum("...ijk,...ka->...ija", coef, F)
    raw = np.einsum("...ija,...ka->...ijk", perp, JF)
    return symmetric_h_from_full(raw), raw


def symmetry_defect(raw: NDArray) -> NDArray:
    """Per-node ``max |h_ijk - h_ikj|`` of a tensor already symmetric in ``(i, j)``."""
    return np.maximum(np.abs(raw[..., 0, 0, 1] - raw[..., 0, 1, 0]), np.abs(raw[..., 0, 1, 1] - raw[..., 1, 1, 0]))


def second_fundamental_form_frame(Df: NDArray, D2u: NDArray) -> NDArray:
    """Oracle for the raw ``h_ijk`` via a Gram-Schmidt orthonormal normal frame.

    Independent of the metric-inverse projection: the normal plane is spanned
    by orthonormalising the standard basis of R^4 against the tangent plane.
    Works node by node; meant for tests and verification, not speed.
    """
    F, JF = tangent_frame(Df)
    Fij = second_derivative_vectors(D2u)
    shape = Df.shape[:-2]
    out = np.empty(shape + (2, 2, 2))
    for idx in np.ndindex(*shape):
        basis = []
        for v in (F[idx][0], F[idx][1], *np.eye(4)):
            w = v.astype(float).copy()
            for b in basis:
                w -= np.dot(w, b) * b
            nw = np.linalg.norm(w)
            if nw > 1e-8:
                basis.append(w / nw)
            if len(basis) == 4:
                break
        normals = basis[2:]
        for i in range(2):
            for j in range(2):
                for k in range(2):
                    out[idx + (i, j, k)] = sum(np.dot(Fij[idx][i, j], nu) * np.dot(nu, JF[idx][k]) for nu in normals)
    return out


def metric_gradient(g: Metric2, h: float) -> NDArray:
    """``Dg[..., l, i, j] = d_l g_ij`` by periodic differencing of the metric field."""
    G = g.matrix()
    return np.stack([d1(G, 0, h), d1(G, 1, h)], -3)


def christoffel(g: Metric2, Dg: NDArray) -> NDArray:
    """``Gamma[..., k, i, j] = 1/2 g^{kl} (d_i g_jl + d_j g_il - d_l g_ij)``."""
    gi = g.inverse().matrix()
    # lower[..., l, i, j] = d_i g_jl + d_j g_il - d_l g_ij
    lower = np.einsum("...ijl->...lij", Dg) + np.einsum("...jil->...lij", Dg) - Dg
    Gam = 0.5 * np.einsum("...kl,...lij->...kij", gi, lower)
    # exact symmetry in the lower pair
    return 0.5 * (Gam + np.swapaxes(Gam, -1, -2))


@dataclass
class GeometryCache:
    """Differential geometry of one flow slice, one entry per grid node."""

    n: int
    Df: NDArray
    D2u: NDArray
    g: Metric2
    ginv: Metric2
    sqrt_det_g: NDArray
    eta: NDArray
    h: SymTensor3
    raw_h: NDArray
    Hcov: MeanCurvCovector
    scalars: CurvatureScalars
    Gamma: NDArray

    @property
    def spacing(self) -> float:
        return 1.0 / self.n

    @property
    def sym_defect(self) -> float:
        return float(np.max(symmetry_defect(self.raw_h)))

    @property
    def area_broken(self) -> bool:
        """True if ``det g`` dropped below 4 anywhere (flag, not an error)."""
        return bool(np.min(self.g.det) < DET_G_FLOOR)

    def H_vector(self) -> NDArray:
        """Mean curvature vector ``g^{kl} H_k J' F_l`` in R^4, shape ``(n, n, 4)``."""
        _, JF = tangent_frame(self.Df)
        Hup = np.einsum("...kl,...l->...k", self.ginv.matrix(), self.Hcov.array())
        return np.einsum("...k,...ka->...a", Hup, JF)


def build_geometry(fmap: TorusMap) -> GeometryCache:
    h = fmap.h
    Df = jacobian(fmap)
    D2u = np.stack([hessian(fmap.disp[..., 0], h), hessian(fmap.disp[..., 1], h)], -3)
    g = induced_metric(Df)
    sff, raw = second_fundamental_form(Df, D2u, g)
    scal, Hcov = norms(sff, g)
    Gam = christoffel(g, metric_gradient(g, h))
    return GeometryCache(
        n=fmap.n,
        Df=Df,
        D2u=D2u,
        g=g,
        ginv=g.inverse(),
        sqrt_det_g=np.sqrt(g.det),
        eta=eta(g),
        h=sff,
        raw_h=raw,
        Hcov=Hcov,
        scalars=scal,
        Gamma=Gam,
    )


def laplace_beltrami(phi: NDArray, geom: GeometryCache) -> NDArray:
    """Divergence-form ``(1/sqrt g) d_i (sqrt g g^{ij} d_j phi)``."""
    hs = geom.spacing
    grad = gradient(phi, hs)
    gi = geom.ginv
    s = geom.sqrt_det_g
    w1 = s * (gi.g11 * grad[..., 0] + gi.g12 * grad[..., 1])
    w2 = s * (gi.g12 * grad[..., 0] + gi.g22 * grad[..., 1])
    return (d1(w1, 0, hs) + d1(w2, 1, hs)) / s


def covariant_derivative_H(Hcov: NDArray, Gamma: NDArray, h: float) -> NDArray:
    """``nabla_i H_k = d_i H_k - Gamma^l_ik H_l`` shaped ``(..., i, k)``."""
    dH = np.stack([gradient(Hcov[..., 0], h), gradient(Hcov[..., 1], h)], -1)  # (..., i, k)
    return dH - np.einsum("...lik,...l->...ik", Gamma, Hcov)


def covariant_grad_H(Hcov: NDArray, Gamma: NDArray, geom: GeometryCache) -> NDArray:
    """``|nabla H|^2 = g^{ii'} g^{kk'} nabla_i H_k nabla_i' H_k'``."""
    nab = covariant_derivative_H(Hcov, Gamma, geom.spacing)
    gi = geom.ginv.matrix()
    return np.einsum("...ip,...kq,...ik,...pq->...", gi, gi, nab, nab)


def integrate(phi, geom: GeometryCache) -> float:
    """Trapezoidal integral over the surface, ``sum phi sqrt(det g) h^2``.

    Uses an exactly rounded sum so the result does not depend on node order.
    """
    w = np.broadcast_to(np.asarray(phi, float), geom.sqrt_det_g.shape) * geom.sqrt_det_g
    return math.fsum(w.ravel()) * geom.spacing**2
