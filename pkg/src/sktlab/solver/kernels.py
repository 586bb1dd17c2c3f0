"""Finite-volume residual and Jacobian kernels.

Unknowns are the entropy variables w = log u.  For the interior face between
cells l and r (r one step up along some axis, spacing h) with face average
ub = (u_l + u_r) / 2 and jump dw = w_r - w_l the flux of species i is

    F_i = ub_i * ((a_i0 + sum_k a_ik ub_k) dw_i + sum_j a_ij ub_j dw_j) / h - ub_i b_i,

which is sum_j A_ij(ub) ub_j dw_j / h - ub_i b_i.  Boundary faces carry no flux.

Each kernel exists twice: a vectorised numpy version and an explicit-loop
version compiled with numba.  ``USE_NUMBA`` selects the default.
"""
from __future__ import annotations

import numpy as np

from .._accel import USE_NUMBA, njit


def jacobian_pattern(n: int, ncells: int, left: np.ndarray, right: np.ndarray):
    """COO (rows, cols) matching the data layout of ``fv_system``.

    Unknown (cell p, species i) has index p * n + i.  The data array holds one
    n x n block per cell followed by four blocks (ll, lr, rl, rr) per face.
    """
    ii, mm = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ii = ii.reshape(-1)
    mm = mm.reshape(-1)
    cells = np.arange(ncells)
    rows = [(cells[:, None] * n + ii).reshape(-1)]
    cols = [(cells[:, None] * n + mm).reshape(-1)]
    blocks = np.empty((left.size, 4, n * n), dtype=np.int64)
    cblocks = np.empty_like(blocks)
    for k, (rp, cp) in enumerate(((left, left), (left, right), (right, left), (right, right))):
        blocks[:, k] = rp[:, None] * n + ii
        cblocks[:, k] = cp[:, None] * n + mm
    rows.append(blocks.reshape(-1))
    cols.append(cblocks.reshape(-1))
    return np.concatenate(rows), np.concatenate(cols)


# --------------------------------------------------------------------------
# numpy path


def _face_terms_numpy(u, w, left, right, inv_h, bface, a0, a):
    ul, ur = u[:, left], u[:, right]
    ub = 0.5 * (ul + ur)
    dw = w[:, right] - w[:, left]
    crowd = a0[:, None] + a @ ub
    t = crowd * dw + a @ (ub * dw)
    flux = ub * (t * inv_h - bface)
    # dF_i / d ub_m and dF_i / d dw_m, shape (n, n, F)
    n = u.shape[0]
    eye = np.eye(n)[:, :, None]
    d_ub = eye * (t * inv_h - bface)[:, None, :] \
        + ub[:, None, :] * a[:, :, None] * (dw[:, None, :] + dw[None, :, :]) * inv_h
    d_dw = ub[:, None, :] * (eye * crowd[:, None, :] + a[:, :, None] * ub[None, :, :]) * inv_h
    grad_l = 0.5 * d_ub * ul[None, :, :] - d_dw
    grad_r = 0.5 * d_ub * ur[None, :, :] + d_dw
    return flux, grad_l, grad_r


def _fv_system_numpy(u, w, u_old, inv_dt, left, right, inv_h, bface, a0, a, src, dsrc, with_jac):
    n, ncells = u.shape
    flux, grad_l, grad_r = _face_terms_numpy(u, w, left, right, inv_h, bface, a0, a)
    scaled = flux * inv_h
    div = np.zeros_like(u)
    for i in range(n):
        div[i] = np.bincount(left, scaled[i], ncells) - np.bincount(right, scaled[i], ncells)
    res = (u - u_old) * inv_dt - div - src
    if not with_jac:
        return res, np.empty(0)
    cell = -dsrc * u[None, :, :]
    idx = np.arange(n)
    cell[idx, idx] += u * inv_dt
    cell_data = np.transpose(cell, (2, 0, 1)).reshape(-1)
    gl = np.transpose(grad_l * inv_h, (2, 0, 1)).reshape(left.size, n * n)
    gr = np.transpose(grad_r * inv_h, (2, 0, 1)).reshape(left.size, n * n)
    face_data = np.stack([-gl, -gr, gl, gr], axis=1).reshape(-1)
    return res, np.concatenate([cell_data, face_data])


# --------------------------------------------------------------------------
# numba path


@njit
def _fv_system_loops(u, w, u_old, inv_dt, left, right, inv_h, bface, a0, a, src, dsrc, with_jac):
    n, ncells = u.shape
    nf = left.size
    nn = n * n
    res = np.empty((n, ncells))
    for p in range(ncells):
        for i in range(n):
            res[i, p] = (u[i, p] - u_old[i, p]) * inv_dt - src[i, p]
    data = np.empty(ncells * nn + 4 * nf * nn if with_jac else 0)
    if with_jac:
        for p in range(ncells):
            for i in range(n):
                for m in range(n):
                    val = -dsrc[i, m, p] * u[m, p]
                    if i == m:
                        val += u[i, p] * inv_dt
                    data[p * nn + i * n + m] = val
    ub = np.empty(n)
    dw = np.empty(n)
    crowd = np.empty(n)
    t = np.empty(n)
    base = ncells * nn
    for f in range(nf):
        l = left[f]
        r = right[f]
        h = inv_h[f]
        for k in range(n):
            ub[k] = 0.5 * (u[k, l] + u[k, r])
            dw[k] = w[k, r] - w[k, l]
        for i in range(n):
            c = a0[i]
            s = 0.0
            for k in range(n):
                c += a[i, k] * ub[k]
                s += a[i, k] * ub[k] * dw[k]
            crowd[i] = c
            t[i] = c * dw[i] + s
        for i in range(n):
            flux = ub[i] * (t[i] * h - bface[i, f])
            res[i, l] -= flux * h
            res[i, r] += flux * h
        if with_jac:
            off = base + f * 4 * nn
            for i in range(n):
                for m in range(n):
                    d_ub = ub[i] * a[i, m] * (dw[i] + dw[m]) * h
                    d_dw = ub[i] * a[i, m] * ub[m] * h
                    if i == m:
                        d_ub += t[i] * h - bface[i, f]
                        d_dw += ub[i] * crowd[i] * h
                    gl = (0.5 * d_ub * u[m, l] - d_dw) * h
                    gr = (0.5 * d_ub * u[m, r] + d_dw) * h
                    k = i * n + m
                    data[off + k] = -gl
                    data[off + nn + k] = -gr
                    data[off + 2 * nn + k] = gl
                    data[off + 3 * nn + k] = gr
    return res, data


def fv_system_numpy(*args):
    """Residual (n, ncells) and Jacobian data for one implicit Euler step.

    Arguments: u, w = log u, u_old, 1/dt, face arrays (left, right, inv_h),
    per-face drift bface (n, F), a0, a, source values src = f(u) + g,
    source Jacobian dsrc (n, n, ncells), and whether to build the Jacobian.
    """
    return _fv_system_numpy(*args)


def fv_system_numba(*args):
    """Same contract as ``fv_system_numpy``, compiled loops."""
    return _fv_system_loops(*args)


fv_system = fv_system_numba if USE_NUMBA else fv_system_numpy
