"""NumPy reference implementation of the hot stencil kernels.

Same call surface as the compiled extension `_kernels_cy`; the backend is
chosen once at import in `ylab.kernels`.  Fields are passed as flat C-order
box arrays; outputs are packed over the interior node set.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def lap_grad(v_flat, table, anc_m, anc_p, skip_grad=False):
    """Packed Laplacian and gradient at interior nodes.

    Anchored arms read `anc_m`/`anc_p` instead of the field (pass zeros for
    Jacobian-vector products, where closure data does not vary).
    """
    n = table.n
    idx = table.interior
    inv_h2 = 1.0 / (table.h * table.h)
    inv_2h = 0.5 / table.h
    vc = v_flat[idx]
    lap = np.zeros(idx.size)
    grad = None if skip_grad else np.empty((n, idx.size))
    for k in range(n):
        s = int(table.strides[k])
        vp = v_flat[idx + s]
        vm = v_flat[idx - s]
        lap += (vp + vm - 2.0 * vc) * inv_h2
        if grad is not None:
            grad[k] = (vp - vm) * inv_2h

    rows = table.irr_rows
    if rows.size:
        vci = vc[rows]
        lap_i = np.zeros(rows.size)
        for k in range(n):
            am = table.arm_m[:, k]
            ap = table.arm_p[:, k]
            im = table.idx_m[:, k]
            ip = table.idx_p[:, k]
            vm = np.where(im >= 0, v_flat[np.maximum(im, 0)], anc_m[:, k])
            vp = np.where(ip >= 0, v_flat[np.maximum(ip, 0)], anc_p[:, k])
            den = am * ap * (am + ap)
            lap_i += 2.0 * (ap * vm + am * vp - (am + ap) * vci) / den
            if grad is not None:
                grad[k][rows] = (am * am * vp - ap * ap * vm
                                 + (ap * ap - am * am) * vci) / den
        lap[rows] = lap_i
    return lap, grad


def stencil_diag(table):
    """Center weights (lap_w0 [N], grad_w0 [n, N]) of the discrete operators."""
    n = table.n
    N = table.interior.size
    inv_h2 = 1.0 / (table.h * table.h)
    lap_w0 = np.full(N, -2.0 * n * inv_h2)
    grad_w0 = np.zeros((n, N))
    rows = table.irr_rows
    if rows.size:
        am = table.arm_m
        ap = table.arm_p
        lap_w0[rows] = (-2.0 / (am * ap)).sum(axis=1)
        for k in range(n):
            grad_w0[k][rows] = (ap[:, k] - am[:, k]) / (am[:, k] * ap[:, k])
    return lap_w0, grad_w0


def _shift(a, axis, sign):
    """Non-wrapping shift by one cell; vacated cells are zero."""
    out = np.zeros_like(a)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if sign > 0:
        src[axis] = slice(1, None)
        dst[axis] = slice(None, -1)
    else:
        src[axis] = slice(None, -1)
        dst[axis] = slice(1, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _lap_box(z, h):
    n = z.ndim
    out = -2.0 * n * z
    for k in range(n):
        out += _shift(z, k, +1) + _shift(z, k, -1)
    return out / (h * h)


def mg_residual(z, rhs, mask_f, h):
    """r = (rhs + lap z) * mask for the -lap z = rhs level problem."""
    return (rhs + _lap_box(z, h)) * mask_f


def mg_sweep(z, rhs, mask_f, h, omega, sweeps):
    """Damped-Jacobi sweeps on -lap z = rhs, keeping z = 0 off the mask."""
    w = omega * h * h / (2.0 * z.ndim)
    for _ in range(sweeps):
        z = (z + w * (rhs + _lap_box(z, h))) * mask_f
    return z


def mg_restrict(r):
    """Full-weighting restriction: per-axis [1/4, 1/2, 1/4] then subsample."""
    n = r.ndim
    for k in range(n):
        r = 0.5 * r + 0.25 * (_shift(r, k, +1) + _shift(r, k, -1))
    return r[tuple(slice(None, None, 2) for _ in range(n))]


def mg_prolong_add(z_fine, e_coarse, mask_f):
    """n-linear prolongation of the coarse correction, masked, added in place."""
    e = e_coarse
    fine_shape = z_fine.shape
    for ax in range(e.ndim):
        fdim = fine_shape[ax]
        sh = list(e.shape)
        sh[ax] = fdim
        out = np.zeros(sh)
        sl = [slice(None)] * e.ndim
        sl[ax] = slice(0, fdim, 2)
        out[tuple(sl)] = e
        nodd = len(range(1, fdim, 2))
        left = [slice(None)] * e.ndim
        left[ax] = slice(0, nodd)
        if e.shape[ax] >= nodd + 1:
            right = [slice(None)] * e.ndim
            right[ax] = slice(1, nodd + 1)
            rpart = e[tuple(right)]
        else:
            right = [slice(None)] * e.ndim
            right[ax] = slice(1, None)
            pad_sh = list(e.shape)
            pad_sh[ax] = nodd - (e.shape[ax] - 1)
            rpart = np.concatenate([e[tuple(right)], np.zeros(pad_sh)], axis=ax)
        odd = [slice(None)] * e.ndim
        odd[ax] = slice(1, fdim, 2)
        out[tuple(odd)] = 0.5 * (e[tuple(left)] + rpart)
        e = out
    z_fine += e * mask_f


def hessian(v_flat, idx, strides, h, n):
    """Central-difference gradient and Hessian at the given flat indices.

    Valid only where the full 2-wide cross and diagonal neighbors carry
    field values (interior depth > ~1.5 h).  Returns (grad [n, K],
    hess_diag [n, K], hess_off [n(n-1)/2, K]) with off-diagonal pairs in
    lexicographic (i, j) order, i < j.
    """
    inv_h2 = 1.0 / (h * h)
    inv_2h = 0.5 / h
    K = idx.size
    vc = v_flat[idx]
    grad = np.empty((n, K))
    hdiag = np.empty((n, K))
    hoff = np.empty((n * (n - 1) // 2, K))
    for k in range(n):
        s = int(strides[k])
        vp = v_flat[idx + s]
        vm = v_flat[idx - s]
        grad[k] = (vp - vm) * inv_2h
        hdiag[k] = (vp + vm - 2.0 * vc) * inv_h2
    pos = 0
    for i in range(n):
        si = int(strides[i])
        for j in range(i + 1, n):
            sj = int(strides[j])
            hoff[pos] = (v_flat[idx + si + sj] - v_flat[idx + si - sj]
                         - v_flat[idx - si + sj] + v_flat[idx - si - sj]) \
                        * (0.25 * inv_h2)
            pos += 1
    return grad, hdiag, hoff
