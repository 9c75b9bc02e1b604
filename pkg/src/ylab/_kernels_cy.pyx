# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled stencil kernels; `_kernels_py` holds the reference semantics.

The multigrid level kernels are specialized for 3-d boxes (full-grid solves
are limited to n <= 4, and 4-d scans run coarse enough for the NumPy path).
"""

import numpy as np

cimport numpy as cnp

from . import _kernels_py as _py

BACKEND = "cython"


def lap_grad(v_flat, table, anc_m, anc_p, bint skip_grad=False):
    cdef double[::1] v = np.ascontiguousarray(v_flat, dtype=np.float64)
    cdef cnp.int64_t[::1] interior = table.interior
    cdef cnp.int32_t[::1] irr_of = table.irr_of
    cdef cnp.int64_t[::1] strides = table.strides
    cdef double[:, ::1] am_ = table.arm_m
    cdef double[:, ::1] ap_ = table.arm_p
    cdef cnp.int64_t[:, ::1] im_ = table.idx_m
    cdef cnp.int64_t[:, ::1] ip_ = table.idx_p
    cdef double[:, ::1] cm_ = np.ascontiguousarray(anc_m, dtype=np.float64)
    cdef double[:, ::1] cp_ = np.ascontiguousarray(anc_p, dtype=np.float64)
    cdef int n = table.n
    cdef double h = table.h
    cdef double invh2 = 1.0 / (h * h)
    cdef double inv2h = 0.5 / h
    cdef Py_ssize_t N = interior.shape[0]

    lap_np = np.empty(N)
    grad_np = np.empty((1, 1)) if skip_grad else np.empty((n, N))
    cdef double[::1] lap = lap_np
    cdef double[:, ::1] grad = grad_np

    cdef Py_ssize_t j
    cdef cnp.int64_t i, s, nb
    cdef int k, row
    cdef double vc, vp, vm, acc, am, ap, den

    with nogil:
        for j in range(N):
            i = interior[j]
            vc = v[i]
            row = irr_of[j]
            acc = 0.0
            if row < 0:
                for k in range(n):
                    s = strides[k]
                    vp = v[i + s]
                    vm = v[i - s]
                    acc += vp + vm - 2.0 * vc
                    if not skip_grad:
                        grad[k, j] = (vp - vm) * inv2h
                lap[j] = acc * invh2
            else:
                for k in range(n):
                    am = am_[row, k]
                    ap = ap_[row, k]
                    nb = im_[row, k]
                    vm = v[nb] if nb >= 0 else cm_[row, k]
                    nb = ip_[row, k]
                    vp = v[nb] if nb >= 0 else cp_[row, k]
                    den = am * ap * (am + ap)
                    acc += 2.0 * (ap * vm + am * vp - (am + ap) * vc) / den
                    if not skip_grad:
                        grad[k, j] = (am * am * vp - ap * ap * vm
                                      + (ap * ap - am * am) * vc) / den
                lap[j] = acc
    return lap_np, (None if skip_grad else grad_np)


def hessian(v_flat, idx, strides, double h, int n):
    cdef double[::1] v = np.ascontiguousarray(v_flat, dtype=np.float64)
    cdef cnp.int64_t[::1] ix = np.ascontiguousarray(idx, dtype=np.int64)
    cdef cnp.int64_t[::1] st = np.ascontiguousarray(strides, dtype=np.int64)
    cdef double invh2 = 1.0 / (h * h)
    cdef double inv2h = 0.5 / h
    cdef Py_ssize_t K = ix.shape[0]
    cdef int noff = n * (n - 1) // 2

    grad_np = np.empty((n, K))
    hdiag_np = np.empty((n, K))
    hoff_np = np.empty((max(noff, 1), K))
    cdef double[:, ::1] grad = grad_np
    cdef double[:, ::1] hdiag = hdiag_np
    cdef double[:, ::1] hoff = hoff_np

    cdef Py_ssize_t j
    cdef cnp.int64_t i, si, sj
    cdef int k, a, b, pos
    cdef double vc, vp, vm

    with nogil:
        for j in range(K):
            i = ix[j]
            vc = v[i]
            for k in range(n):
                si = st[k]
                vp = v[i + si]
                vm = v[i - si]
                grad[k, j] = (vp - vm) * inv2h
                hdiag[k, j] = (vp + vm - 2.0 * vc) * invh2
            pos = 0
            for a in range(n):
                si = st[a]
                for b in range(a + 1, n):
                    sj = st[b]
                    hoff[pos, j] = (v[i + si + sj] - v[i + si - sj]
                                    - v[i - si + sj] + v[i - si - sj]) \
                                   * 0.25 * invh2
                    pos += 1
    return grad_np, hdiag_np, hoff_np[:noff]


cdef void _sweep3_pass(double[:, :, ::1] src, double[:, :, ::1] dst,
                       double[:, :, ::1] rhs, double[:, :, ::1] m,
                       double invh2, double w) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t ni = src.shape[0], nj = src.shape[1], nk = src.shape[2]
    cdef double lap
    for i in range(1, ni - 1):
        for j in range(1, nj - 1):
            for k in range(1, nk - 1):
                if m[i, j, k] != 0.0:
                    lap = (src[i + 1, j, k] + src[i - 1, j, k]
                           + src[i, j + 1, k] + src[i, j - 1, k]
                           + src[i, j, k + 1] + src[i, j, k - 1]
                           - 6.0 * src[i, j, k]) * invh2
                    dst[i, j, k] = src[i, j, k] + w * (rhs[i, j, k] + lap)
                else:
                    dst[i, j, k] = 0.0


def mg_sweep(z, rhs, mask_f, double h, double omega, int sweeps):
    if z.ndim != 3:
        return _py.mg_sweep(z, rhs, mask_f, h, omega, sweeps)
    cdef double invh2 = 1.0 / (h * h)
    cdef double w = omega * h * h / 6.0
    buf = np.zeros_like(z)
    cdef double[:, :, ::1] a = z
    cdef double[:, :, ::1] b = buf
    cdef double[:, :, ::1] r = rhs
    cdef double[:, :, ::1] m = mask_f
    cdef int s
    cdef bint flipped = False
    with nogil:
        for s in range(sweeps):
            if not flipped:
                _sweep3_pass(a, b, r, m, invh2, w)
            else:
                _sweep3_pass(b, a, r, m, invh2, w)
            flipped = not flipped
    return buf if flipped else z


def mg_residual(z, rhs, mask_f, double h):
    if z.ndim != 3:
        return _py.mg_residual(z, rhs, mask_f, h)
    out = np.zeros_like(z)
    cdef double[:, :, ::1] o = out
    cdef double[:, :, ::1] a = z
    cdef double[:, :, ::1] r = rhs
    cdef double[:, :, ::1] m = mask_f
    cdef double invh2 = 1.0 / (h * h)
    cdef Py_ssize_t i, j, k
    cdef Py_ssize_t ni = a.shape[0], nj = a.shape[1], nk = a.shape[2]
    with nogil:
        for i in range(1, ni - 1):
            for j in range(1, nj - 1):
                for k in range(1, nk - 1):
                    if m[i, j, k] != 0.0:
                        o[i, j, k] = r[i, j, k] + (
                            a[i + 1, j, k] + a[i - 1, j, k]
                            + a[i, j + 1, k] + a[i, j - 1, k]
                            + a[i, j, k + 1] + a[i, j, k - 1]
                            - 6.0 * a[i, j, k]) * invh2
    return out


def mg_restrict(r):
    if r.ndim != 3:
        return _py.mg_restrict(r)
    cdef double[:, :, ::1] a = r
    cdef Py_ssize_t fi = a.shape[0], fj = a.shape[1], fk = a.shape[2]
    out = np.zeros(((fi + 1) // 2, (fj + 1) // 2, (fk + 1) // 2))
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t ci = o.shape[0], cj = o.shape[1], ck = o.shape[2]
    cdef Py_ssize_t i, j, k, bi, bj, bk
    cdef Py_ssize_t hi = (fi - 2 + 1) // 2, hj = (fj - 2 + 1) // 2, hk = (fk - 2 + 1) // 2
    cdef double acc_i, acc_j
    with nogil:
        for i in range(1, min(ci, hi)):
            bi = 2 * i
            for j in range(1, min(cj, hj)):
                bj = 2 * j
                for k in range(1, min(ck, hk)):
                    bk = 2 * k
                    o[i, j, k] = (
                        0.125 * a[bi, bj, bk]
                        + 0.0625 * (a[bi + 1, bj, bk] + a[bi - 1, bj, bk]
                                    + a[bi, bj + 1, bk] + a[bi, bj - 1, bk]
                                    + a[bi, bj, bk + 1] + a[bi, bj, bk - 1])
                        + 0.03125 * (a[bi + 1, bj + 1, bk] + a[bi + 1, bj - 1, bk]
                                     + a[bi - 1, bj + 1, bk] + a[bi - 1, bj - 1, bk]
                                     + a[bi + 1, bj, bk + 1] + a[bi + 1, bj, bk - 1]
                                     + a[bi - 1, bj, bk + 1] + a[bi - 1, bj, bk - 1]
                                     + a[bi, bj + 1, bk + 1] + a[bi, bj + 1, bk - 1]
                                     + a[bi, bj - 1, bk + 1] + a[bi, bj - 1, bk - 1])
                        + 0.015625 * (a[bi + 1, bj + 1, bk + 1] + a[bi + 1, bj + 1, bk - 1]
                                      + a[bi + 1, bj - 1, bk + 1] + a[bi + 1, bj - 1, bk - 1]
                                      + a[bi - 1, bj + 1, bk + 1] + a[bi - 1, bj + 1, bk - 1]
                                      + a[bi - 1, bj - 1, bk + 1] + a[bi - 1, bj - 1, bk - 1]))
    return out


def mg_prolong_add(z_fine, e_coarse, mask_f):
    if z_fine.ndim != 3:
        _py.mg_prolong_add(z_fine, e_coarse, mask_f)
        return
    cdef double[:, :, ::1] z = z_fine
    cdef double[:, :, ::1] e = e_coarse
    cdef double[:, :, ::1] m = mask_f
    cdef Py_ssize_t fi = z.shape[0], fj = z.shape[1], fk = z.shape[2]
    cdef Py_ssize_t ci = e.shape[0], cj = e.shape[1], ck = e.shape[2]
    cdef Py_ssize_t i, j, k, i0, j0, k0
    cdef int pi, pj, pk
    cdef double wi0, wi1, wj0, wj1, wk0, wk1, val
    with nogil:
        for i in range(fi):
            i0 = i >> 1
            pi = i & 1
            wi0 = 1.0 if pi == 0 else 0.5
            wi1 = 0.0 if pi == 0 else 0.5
            for j in range(fj):
                j0 = j >> 1
                pj = j & 1
                wj0 = 1.0 if pj == 0 else 0.5
                wj1 = 0.0 if pj == 0 else 0.5
                for k in range(fk):
                    if m[i, j, k] == 0.0:
                        continue
                    k0 = k >> 1
                    pk = k & 1
                    wk0 = 1.0 if pk == 0 else 0.5
                    wk1 = 0.0 if pk == 0 else 0.5
                    val = 0.0
                    if i0 < ci and j0 < cj and k0 < ck:
                        val += wi0 * wj0 * wk0 * e[i0, j0, k0]
                    if wk1 != 0.0 and i0 < ci and j0 < cj and k0 + 1 < ck:
                        val += wi0 * wj0 * wk1 * e[i0, j0, k0 + 1]
                    if wj1 != 0.0 and i0 < ci and j0 + 1 < cj:
                        if k0 < ck:
                            val += wi0 * wj1 * wk0 * e[i0, j0 + 1, k0]
                        if wk1 != 0.0 and k0 + 1 < ck:
                            val += wi0 * wj1 * wk1 * e[i0, j0 + 1, k0 + 1]
                    if wi1 != 0.0 and i0 + 1 < ci:
                        if j0 < cj:
                            if k0 < ck:
                                val += wi1 * wj0 * wk0 * e[i0 + 1, j0, k0]
                            if wk1 != 0.0 and k0 + 1 < ck:
                                val += wi1 * wj0 * wk1 * e[i0 + 1, j0, k0 + 1]
                        if wj1 != 0.0 and j0 + 1 < cj:
                            if k0 < ck:
                                val += wi1 * wj1 * wk0 * e[i0 + 1, j0 + 1, k0]
                            if wk1 != 0.0 and k0 + 1 < ck:
                                val += wi1 * wj1 * wk1 * e[i0 + 1, j0 + 1, k0 + 1]
                    z[i, j, k] += val
    return
