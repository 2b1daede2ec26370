"""Hot loops of the coupled-dipole solver: Green's-matrix assembly and
plane-wave structure sums.

Each kernel has a numba implementation and a pure-numpy one. The numba path
is used when numba imports and ``RYDMIRROR_DISABLE_NUMBA`` is unset or ``0``.
"""
from __future__ import annotations

import os

import numpy as np

_CHUNK = 256

try:
    if os.environ.get("RYDMIRROR_DISABLE_NUMBA", "0") not in ("", "0"):
        raise ImportError("numba disabled by environment")
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA


def _green_block_coeffs(kr):
    pre = 1.5 * np.exp(1j * kr) / kr
    inv = 1.0 / kr
    a = pre * (1 + 1j * inv - inv * inv)
    b = pre * (-1 - 3j * inv + 3 * inv * inv)
    return a, b


def interaction_matrix_numpy(pos, k, alpha):
    """``I - diag(alpha) G`` with G the normalised free-space dyadic Green's function.

    ``pos`` is (N, 3) in metres, ``alpha`` the per-site normalised
    polarisability (N,). The self term is excluded. Returns a (3N, 3N)
    complex matrix in site-major, component-minor order.
    """
    pos = np.ascontiguousarray(pos, dtype=float)
    alpha = np.asarray(alpha, dtype=complex)
    n = len(pos)
    m = np.zeros((3 * n, 3 * n), dtype=complex)
    eye3 = np.eye(3)
    for s in range(0, n, _CHUNK):
        e = min(s + _CHUNK, n)
        d = pos[s:e, None, :] - pos[None, :, :]
        r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
        self_mask = r == 0
        r[self_mask] = 1.0
        a, b = _green_block_coeffs(k * r)
        a[self_mask] = 0
        b[self_mask] = 0
        rh = d / r[..., None]
        blk = a[..., None, None] * eye3 + b[..., None, None] * rh[..., :, None] * rh[..., None, :]
        blk *= -alpha[s:e, None, None, None]
        m[3 * s:3 * e] = blk.transpose(0, 2, 1, 3).reshape(3 * (e - s), 3 * n)
    m[np.diag_indices(3 * n)] += 1.0
    return m


def structure_sum_numpy(kvecs, pos, x):
    """``S[m] = sum_j x[j] exp(-i kvecs[m] . pos[j])`` for (M, 3) wavevectors."""
    kvecs = np.asarray(kvecs, dtype=float)
    out = np.empty((len(kvecs), x.shape[1]), dtype=complex)
    for s in range(0, len(kvecs), 4 * _CHUNK):
        e = min(s + 4 * _CHUNK, len(kvecs))
        out[s:e] = np.exp(-1j * (kvecs[s:e] @ pos.T)) @ x
    return out


if HAVE_NUMBA:

    @njit(cache=True)
    def _interaction_matrix_nb(pos, k, alpha, m):
        n = pos.shape[0]
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                dx = pos[i, 0] - pos[j, 0]
                dy = pos[i, 1] - pos[j, 1]
                dz = pos[i, 2] - pos[j, 2]
                r = np.sqrt(dx * dx + dy * dy + dz * dz)
                kr = k * r
                inv = 1.0 / kr
                pre = 1.5 * np.exp(1j * kr) * inv
                a = pre * (1 + 1j * inv - inv * inv)
                b = pre * (-1 - 3j * inv + 3 * inv * inv)
                u = (dx / r, dy / r, dz / r)
                for p in range(3):
                    for q in range(3):
                        g = b * u[p] * u[q]
                        if p == q:
                            g += a
                        m[3 * i + p, 3 * j + q] = -alpha[i] * g
        for i in range(3 * n):
            m[i, i] += 1.0

    @njit(cache=True)
    def _structure_sum_nb(kvecs, pos, x, out):
        nk = kvecs.shape[0]
        n = pos.shape[0]
        nc = x.shape[1]
        for m in range(nk):
            for c in range(nc):
                out[m, c] = 0.0
            for j in range(n):
                ph = kvecs[m, 0] * pos[j, 0] + kvecs[m, 1] * pos[j, 1] + kvecs[m, 2] * pos[j, 2]
                f = np.cos(ph) - 1j * np.sin(ph)
                for c in range(nc):
                    out[m, c] += x[j, c] * f

    def interaction_matrix_numba(pos, k, alpha):
        pos = np.ascontiguousarray(pos, dtype=np.float64)
        alpha = np.ascontiguousarray(alpha, dtype=np.complex128)
        m = np.zeros((3 * len(pos), 3 * len(pos)), dtype=np.complex128)
        _interaction_matrix_nb(pos, float(k), alpha, m)
        return m

    def structure_sum_numba(kvecs, pos, x):
        kvecs = np.ascontiguousarray(kvecs, dtype=np.float64)
        x = np.ascontiguousarray(x, dtype=np.complex128)
        out = np.empty((len(kvecs), x.shape[1]), dtype=np.complex128)
        _structure_sum_nb(kvecs, np.ascontiguousarray(pos, dtype=np.float64), x, out)
        return out

else:  # pragma: no cover
    interaction_matrix_numba = interaction_matrix_numpy
    structure_sum_numba = structure_sum_numpy


def interaction_matrix(pos, k, alpha):
    if USE_NUMBA:
        return interaction_matrix_numba(pos, k, alpha)
    return interaction_matrix_numpy(pos, k, alpha)


def structure_sum(kvecs, pos, x):
    if USE_NUMBA:
        return structure_sum_numba(kvecs, pos, x)
    return structure_sum_numpy(kvecs, pos, x)
