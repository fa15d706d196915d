# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: fused row softmax, layernorm and GRU step.

Same contracts as `_pykernels`; operates on C-contiguous float64 arrays.
The fused loops avoid the per-op dispatch and temporary allocations that
dominate the numpy path at desk-scale shapes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt, tanh

cnp.import_array()

NAME = "compiled"

ctypedef cnp.float64_t f64


cdef inline double _sigmoid(double a) noexcept nogil:
    cdef double e
    if a >= 0.0:
        return 1.0 / (1.0 + exp(-a))
    e = exp(a)
    return e / (1.0 + e)


cdef inline void _gemm(const f64[:, ::1] a, const f64[:, ::1] b,
                       f64[:, ::1] out, bint accumulate) noexcept nogil:
    # out (+)= a @ b for small dense matrices.
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[1]
    cdef Py_ssize_t i, j, p
    cdef double aip
    if not accumulate:
        for i in range(m):
            for j in range(n):
                out[i, j] = 0.0
    for i in range(m):
        for p in range(k):
            aip = a[i, p]
            if aip != 0.0:
                for j in range(n):
                    out[i, j] += aip * b[p, j]


cdef inline void _gemm_tn(const f64[:, ::1] a, const f64[:, ::1] b,
                          f64[:, ::1] out) noexcept nogil:
    # out = a.T @ b
    cdef Py_ssize_t m = a.shape[1], k = a.shape[0], n = b.shape[1]
    cdef Py_ssize_t i, j, p
    cdef double api
    for i in range(m):
        for j in range(n):
            out[i, j] = 0.0
    for p in range(k):
        for i in range(m):
            api = a[p, i]
            if api != 0.0:
                for j in range(n):
                    out[i, j] += api * b[p, j]


cdef inline void _gemm_nt(const f64[:, ::1] a, const f64[:, ::1] b,
                          f64[:, ::1] out, bint accumulate) noexcept nogil:
    # out (+)= a @ b.T
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[0]
    cdef Py_ssize_t i, j, p
    cdef double acc
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for p in range(k):
                acc += a[i, p] * b[j, p]
            if accumulate:
                out[i, j] += acc
            else:
                out[i, j] = acc


def softmax_fwd(cnp.ndarray x_in):
    cdef f64[:, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef Py_ssize_t rows = x.shape[0], cols = x.shape[1]
    out_arr = np.empty((rows, cols), dtype=np.float64)
    cdef f64[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double m, s
    with nogil:
        for i in range(rows):
            m = x[i, 0]
            for j in range(1, cols):
                if x[i, j] > m:
                    m = x[i, j]
            s = 0.0
            for j in range(cols):
                out[i, j] = exp(x[i, j] - m)
                s += out[i, j]
            for j in range(cols):
                out[i, j] /= s
    return out_arr


def softmax_bwd(cnp.ndarray y_in, cnp.ndarray dy_in):
    cdef f64[:, ::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef f64[:, ::1] dy = np.ascontiguousarray(dy_in, dtype=np.float64)
    cdef Py_ssize_t rows = y.shape[0], cols = y.shape[1]
    dx_arr = np.empty((rows, cols), dtype=np.float64)
    cdef f64[:, ::1] dx = dx_arr
    cdef Py_ssize_t i, j
    cdef double inner
    with nogil:
        for i in range(rows):
            inner = 0.0
            for j in range(cols):
                inner += dy[i, j] * y[i, j]
            for j in range(cols):
                dx[i, j] = y[i, j] * (dy[i, j] - inner)
    return dx_arr


def layernorm_fwd(cnp.ndarray x_in, cnp.ndarray gain_in, cnp.ndarray bias_in,
                  double eps):
    cdef f64[:, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef f64[::1] gain = np.ascontiguousarray(gain_in, dtype=np.float64)
    cdef f64[::1] bias = np.ascontiguousarray(bias_in, dtype=np.float64)
    cdef Py_ssize_t rows = x.shape[0], cols = x.shape[1]
    y_arr = np.empty((rows, cols), dtype=np.float64)
    xhat_arr = np.empty((rows, cols), dtype=np.float64)
    istd_arr = np.empty(rows, dtype=np.float64)
    cdef f64[:, ::1] y = y_arr
    cdef f64[:, ::1] xhat = xhat_arr
    cdef f64[::1] istd = istd_arr
    cdef Py_ssize_t i, j
    cdef double mu, var, d, inv
    with nogil:
        for i in range(rows):
            mu = 0.0
            for j in range(cols):
                mu += x[i, j]
            mu /= cols
            var = 0.0
            for j in range(cols):
                d = x[i, j] - mu
                var += d * d
            var /= cols
            inv = 1.0 / sqrt(var + eps)
            istd[i] = inv
            for j in range(cols):
                xhat[i, j] = (x[i, j] - mu) * inv
                y[i, j] = xhat[i, j] * gain[j] + bias[j]
    return y_arr, xhat_arr, istd_arr


def layernorm_bwd(cnp.ndarray xhat_in, cnp.ndarray istd_in, cnp.ndarray gain_in,
                  cnp.ndarray dy_in):
    cdef f64[:, ::1] xhat = np.ascontiguousarray(xhat_in, dtype=np.float64)
    cdef f64[::1] istd = np.ascontiguousarray(istd_in, dtype=np.float64)
    cdef f64[::1] gain = np.ascontiguousarray(gain_in, dtype=np.float64)
    cdef f64[:, ::1] dy = np.ascontiguousarray(dy_in, dtype=np.float64)
    cdef Py_ssize_t rows = xhat.shape[0], cols = xhat.shape[1]
    dx_arr = np.empty((rows, cols), dtype=np.float64)
    dgain_arr = np.zeros(cols, dtype=np.float64)
    dbias_arr = np.zeros(cols, dtype=np.float64)
    cdef f64[:, ::1] dx = dx_arr
    cdef f64[::1] dgain = dgain_arr
    cdef f64[::1] dbias = dbias_arr
    cdef Py_ssize_t i, j
    cdef double m1, m2, g
    with nogil:
        for i in range(rows):
            m1 = 0.0
            m2 = 0.0
            for j in range(cols):
                g = dy[i, j] * gain[j]
                m1 += g
                m2 += g * xhat[i, j]
            m1 /= cols
            m2 /= cols
            for j in range(cols):
                g = dy[i, j] * gain[j]
                dx[i, j] = istd[i] * (g - m1 - xhat[i, j] * m2)
                dgain[j] += dy[i, j] * xhat[i, j]
                dbias[j] += dy[i, j]
    return dx_arr, dgain_arr, dbias_arr


def gru_fwd(cnp.ndarray x_in, cnp.ndarray h_in,
            cnp.ndarray wz_in, cnp.ndarray uz_in, cnp.ndarray bz_in,
            cnp.ndarray wr_in, cnp.ndarray ur_in, cnp.ndarray br_in,
            cnp.ndarray wh_in, cnp.ndarray uh_in, cnp.ndarray bh_in):
    cdef f64[:, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef f64[:, ::1] h = np.ascontiguousarray(h_in, dtype=np.float64)
    cdef f64[:, ::1] wz = np.ascontiguousarray(wz_in, dtype=np.float64)
    cdef f64[:, ::1] uz = np.ascontiguousarray(uz_in, dtype=np.float64)
    cdef f64[::1] bz = np.ascontiguousarray(bz_in, dtype=np.float64)
    cdef f64[:, ::1] wr = np.ascontiguousarray(wr_in, dtype=np.float64)
    cdef f64[:, ::1] ur = np.ascontiguousarray(ur_in, dtype=np.float64)
    cdef f64[::1] br = np.ascontiguousarray(br_in, dtype=np.float64)
    cdef f64[:, ::1] wh = np.ascontiguousarray(wh_in, dtype=np.float64)
    cdef f64[:, ::1] uh = np.ascontiguousarray(uh_in, dtype=np.float64)
    cdef f64[::1] bh = np.ascontiguousarray(bh_in, dtype=np.float64)

    cdef Py_ssize_t b = x.shape[0], dh = h.shape[1]
    z_arr = np.empty((b, dh), dtype=np.float64)
    r_arr = np.empty((b, dh), dtype=np.float64)
    hbar_arr = np.empty((b, dh), dtype=np.float64)
    hnew_arr = np.empty((b, dh), dtype=np.float64)
    tmp_arr = np.empty((b, dh), dtype=np.float64)
    hr_arr = np.empty((b, dh), dtype=np.float64)
    cdef f64[:, ::1] z = z_arr
    cdef f64[:, ::1] r = r_arr
    cdef f64[:, ::1] hbar = hbar_arr
    cdef f64[:, ::1] hnew = hnew_arr
    cdef f64[:, ::1] tmp = tmp_arr
    cdef f64[:, ::1] hr = hr_arr
    cdef Py_ssize_t i, j

    with nogil:
        _gemm(x, wz, z, False)
        _gemm(h, uz, z, True)
        for i in range(b):
            for j in range(dh):
                z[i, j] = _sigmoid(z[i, j] + bz[j])

        _gemm(x, wr, r, False)
        _gemm(h, ur, r, True)
        for i in range(b):
            for j in range(dh):
                r[i, j] = _sigmoid(r[i, j] + br[j])

        for i in range(b):
            for j in range(dh):
                hr[i, j] = r[i, j] * h[i, j]
        _gemm(x, wh, tmp, False)
        _gemm(hr, uh, tmp, True)
        for i in range(b):
            for j in range(dh):
                hbar[i, j] = tanh(tmp[i, j] + bh[j])
                hnew[i, j] = (1.0 - z[i, j]) * h[i, j] + z[i, j] * hbar[i, j]
    return hnew_arr, z_arr, r_arr, hbar_arr


def gru_bwd(cnp.ndarray x_in, cnp.ndarray h_in,
            cnp.ndarray z_in, cnp.ndarray r_in, cnp.ndarray hbar_in,
            cnp.ndarray wz_in, cnp.ndarray uz_in,
            cnp.ndarray wr_in, cnp.ndarray ur_in,
            cnp.ndarray wh_in, cnp.ndarray uh_in,
            cnp.ndarray dh_new_in):
    cdef f64[:, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef f64[:, ::1] h = np.ascontiguousarray(h_in, dtype=np.float64)
    cdef f64[:, ::1] z = np.ascontiguousarray(z_in, dtype=np.float64)
    cdef f64[:, ::1] r = np.ascontiguousarray(r_in, dtype=np.float64)
    cdef f64[:, ::1] hbar = np.ascontiguousarray(hbar_in, dtype=np.float64)
    cdef f64[:, ::1] wz = np.ascontiguousarray(wz_in, dtype=np.float64)
    cdef f64[:, ::1] uz = np.ascontiguousarray(uz_in, dtype=np.float64)
    cdef f64[:, ::1] wr = np.ascontiguousarray(wr_in, dtype=np.float64)
    cdef f64[:, ::1] ur = np.ascontiguousarray(ur_in, dtype=np.float64)
    cdef f64[:, ::1] wh = np.ascontiguousarray(wh_in, dtype=np.float64)
    cdef f64[:, ::1] uh = np.ascontiguousarray(uh_in, dtype=np.float64)
    cdef f64[:, ::1] dh_new = np.ascontiguousarray(dh_new_in, dtype=np.float64)

    cdef Py_ssize_t b = x.shape[0], dx_dim = x.shape[1], dh_dim = h.shape[1]

    da_z_arr = np.empty((b, dh_dim), dtype=np.float64)
    da_r_arr = np.empty((b, dh_dim), dtype=np.float64)
    da_h_arr = np.empty((b, dh_dim), dtype=np.float64)
    dhr_arr = np.empty((b, dh_dim), dtype=np.float64)
    hr_arr = np.empty((b, dh_dim), dtype=np.float64)
    dh_arr = np.empty((b, dh_dim), dtype=np.float64)
    dx_arr = np.empty((b, dx_dim), dtype=np.float64)
    dwz_arr = np.empty((dx_dim, dh_dim), dtype=np.float64)
    duz_arr = np.empty((dh_dim, dh_dim), dtype=np.float64)
    dbz_arr = np.zeros(dh_dim, dtype=np.float64)
    dwr_arr = np.empty((dx_dim, dh_dim), dtype=np.float64)
    dur_arr = np.empty((dh_dim, dh_dim), dtype=np.float64)
    dbr_arr = np.zeros(dh_dim, dtype=np.float64)
    dwh_arr = np.empty((dx_dim, dh_dim), dtype=np.float64)
    duh_arr = np.empty((dh_dim, dh_dim), dtype=np.float64)
    dbh_arr = np.zeros(dh_dim, dtype=np.float64)

    cdef f64[:, ::1] da_z = da_z_arr
    cdef f64[:, ::1] da_r = da_r_arr
    cdef f64[:, ::1] da_h = da_h_arr
    cdef f64[:, ::1] dhr = dhr_arr
    cdef f64[:, ::1] hr = hr_arr
    cdef f64[:, ::1] dh = dh_arr
    cdef f64[:, ::1] dx = dx_arr
    cdef f64[:, ::1] dwz = dwz_arr
    cdef f64[:, ::1] duz = duz_arr
    cdef f64[:, ::1] dwr = dwr_arr
    cdef f64[:, ::1] dur = dur_arr
    cdef f64[:, ::1] dwh = dwh_arr
    cdef f64[:, ::1] duh = duh_arr
    cdef f64[::1] dbz = dbz_arr
    cdef f64[::1] dbr = dbr_arr
    cdef f64[::1] dbh = dbh_arr
    cdef Py_ssize_t i, j
    cdef double g, dzv, dhbar

    with nogil:
        for i in range(b):
            for j in range(dh_dim):
                g = dh_new[i, j]
                dzv = g * (hbar[i, j] - h[i, j])
                da_z[i, j] = dzv * z[i, j] * (1.0 - z[i, j])
                dhbar = g * z[i, j]
                da_h[i, j] = dhbar * (1.0 - hbar[i, j] * hbar[i, j])
                dh[i, j] = g * (1.0 - z[i, j])
                hr[i, j] = r[i, j] * h[i, j]

        _gemm_nt(da_h, uh, dhr, False)
        for i in range(b):
            for j in range(dh_dim):
                g = dhr[i, j] * h[i, j]
                da_r[i, j] = g * r[i, j] * (1.0 - r[i, j])
                dh[i, j] += dhr[i, j] * r[i, j]
        _gemm_nt(da_z, uz, dh, True)
        _gemm_nt(da_r, ur, dh, True)

        _gemm_nt(da_z, wz, dx, False)
        _gemm_nt(da_r, wr, dx, True)
        _gemm_nt(da_h, wh, dx, True)

        _gemm_tn(x, da_z, dwz)
        _gemm_tn(h, da_z, duz)
        _gemm_tn(x, da_r, dwr)
        _gemm_tn(h, da_r, dur)
        _gemm_tn(x, da_h, dwh)
        _gemm_tn(hr, da_h, duh)
        for i in range(b):
            for j in range(dh_dim):
                dbz[j] += da_z[i, j]
                dbr[j] += da_r[i, j]
                dbh[j] += da_h[i, j]

    return (dx_arr, dh_arr, dwz_arr, duz_arr, dbz_arr, dwr_arr, dur_arr,
            dbr_arr, dwh_arr, duh_arr, dbh_arr)
