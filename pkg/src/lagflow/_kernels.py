"""Hot inner loops of the flow.

Each kernel exists twice: a vectorised numpy version and a numba ``@njit``
version. ``LAGFLOW_NUMBA=0`` in the environment forces the numpy path;
otherwise numba is used when importable. ``LAGFLOW_THREADS`` caps the number
of numba worker threads.

Both paths evaluate the same stencils node by node, so they agree to
rounding; each path on its own is bitwise deterministic.
"""

from __future__ import annotations

import os

import numpy as np

from .torusmap import d1, d2

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the bundled TBB is too old; avoid the probe and its warning
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("LAGFLOW_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")


def _apply_thread_cap() -> None:
    cap = os.environ.get("LAGFLOW_THREADS")
    if not (HAVE_NUMBA and cap):
        return
    try:
        k = int(cap)
    except ValueError:
        raise ValueError(f"LAGFLOW_THREADS must be an integer, got {cap!r}") from None
    numba.set_num_threads(max(1, min(k, numba.config.NUMBA_NUM_THREADS)))


_apply_thread_cap()


def velocity_numpy(u: np.ndarray, L: np.ndarray, h: float):
    """Graph-gauge velocity ``g^{ij} D_i D_j u`` plus step-control scalars.

    Returns ``(v, lam_max, eta_min)`` where ``lam_max`` is the largest
    eigenvalue of ``g^{-1}`` over the grid (CFL) and ``eta_min`` the smallest
    value of ``2 / sqrt(det g)``.
    """
    Lf = np.asarray(L, float)
    ux = np.stack([d1(u[..., 0], 0, h), d1(u[..., 1], 0, h)], -1)
    uy = np.stack([d1(u[..., 0], 1, h), d1(u[..., 1], 1, h)], -1)
    fx = ux + Lf[:, 0]
    fy = uy + Lf[:, 1]
    g11 = 1.0 + fx[..., 0] ** 2 + fx[..., 1] ** 2
    g12 = fx[..., 0] * fy[..., 0] + fx[..., 1] * fy[..., 1]
    g22 = 1.0 + fy[..., 0] ** 2 + fy[..., 1] ** 2
    det = g11 * g22 - g12 * g12
    i11 = g22 / det
    i12 = -g12 / det
    i22 = g11 / det
    v = np.empty_like(u)
    for a in range(2):
        uxx = d2(u[..., a], 0, h)
        uyy = d2(u[..., a], 1, h)
        uxy = d1(uy[..., a], 0, h)
        v[..., a] = i11 * uxx + 2.0 * i12 * uxy + i22 * uyy
    tr = g11 + g22
    lam_min_g = 0.5 * (tr - np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0)))
    lam_max = float(np.max(1.0 / lam_min_g))
    eta_min = float(np.min(2.0 / np.sqrt(det)))
    return v, lam_max, eta_min


if HAVE_NUMBA:

    @njit(cache=True, parallel=True)
    def _velocity_nb(u, L, h):
        n = u.shape[0]
        v = np.empty_like(u)
        row_lam = np.empty(n)
        row_eta = np.empty(n)
        c1 = 1.0 / (12.0 * h)
        c2 = 1.0 / (12.0 * h * h)
        # first-difference weights at offsets -2..2
        w = np.array([1.0, -8.0, 0.0, 8.0, -1.0])
        for i in prange(n):
            lam_row = 0.0
            eta_row = np.inf
            im2 = (i - 2) % n
            im1 = (i - 1) % n
            ip1 = (i + 1) % n
            ip2 = (i + 2) % n
            for j in range(n):
                jm2 = (j - 2) % n
                jm1 = (j - 1) % n
                jp1 = (j + 1) % n
                jp2 = (j + 2) % n
                fx0 = (-u[ip2, j, 0] + 8.0 * u[ip1, j, 0] - 8.0 * u[im1, j, 0] + u[im2, j, 0]) * c1 + L[0, 0]
                fx1 = (-u[ip2, j, 1] + 8.0 * u[ip1, j, 1] - 8.0 * u[im1, j, 1] + u[im2, j, 1]) * c1 + L[1, 0]
                fy0 = (-u[i, jp2, 0] + 8.0 * u[i, jp1, 0] - 8.0 * u[i, jm1, 0] + u[i, jm2, 0]) * c1 + L[0, 1]
                fy1 = (-u[i, jp2, 1] + 8.0 * u[i, jp1, 1] - 8.0 * u[i, jm1, 1] + u[i, jm2, 1]) * c1 + L[1, 1]
                g11 = 1.0 + fx0 * fx0 + fx1 * fx1
                g12 = fx0 * fy0 + fx1 * fy1
                g22 = 1.0 + fy0 * fy0 + fy1 * fy1
                det = g11 * g22 - g12 * g12
                i11 = g22 / det
                i12 = -g12 / det
                i22 = g11 / det
                for a in range(2):
                    uxx = (
                        -u[ip2, j, a] + 16.0 * u[ip1, j, a] - 30.0 * u[i, j, a] + 16.0 * u[im1, j, a] - u[im2, j, a]
                    ) * c2
                    uyy = (
                        -u[i, jp2, a] + 16.0 * u[i, jp1, a] - 30.0 * u[i, j, a] + 16.0 * u[i, jm1, a] - u[i, jm2, a]
                    ) * c2
                    # D_x applied to D_y u, matching the numpy composition
                    uxy = 0.0
                    for p in range(5):
                        if p == 2:
                            continue
                        ii = (i + p - 2) % n
                        dy = (
                            -u[ii, jp2, a] + 8.0 * u[ii, jp1, a] - 8.0 * u[ii, jm1, a] + u[ii, jm2, a]
                        ) * c1
                        uxy += w[p] * dy
                    uxy *= c1
                    v[i, j, a] = i11 * uxx + 2.0 * i12 * uxy + i22 * uyy
                tr = g11 + g22
                disc = tr * tr - 4.0 * det
                if disc < 0.0:
                    disc = 0.0
                lam = 1.0 / (0.5 * (tr - np.sqrt(disc)))
                if lam > lam_row:
                    lam_row = lam
                e = 2.0 / np.sqrt(det)
                if e < eta_row:
                    eta_row = e
            row_lam[i] = lam_row
            row_eta[i] = eta_row
        return v, row_lam.max(), row_eta.min()

    def velocity_numba(u: np.ndarray, L: np.ndarray, h: float):
        v, lam, eta = _velocity_nb(np.ascontiguousarray(u, dtype=np.float64), np.asarray(L, dtype=np.float64), float(h))
        return v, float(lam), float(eta)

else:  # pragma: no cover
    velocity_numba = None


def velocity(u: np.ndarray, L: np.ndarray, h: float):
    """Dispatch to the configured backend."""
    if USE_NUMBA:
        return velocity_numba(u, L, h)
    return velocity_numpy(u, L, h)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"
