# cython: language_level=3
"""Compiled kernels: identical contracts to numpy_backend, inner loops in C.

Matrix products go through BLAS dgemm; the row-major arrays are passed via
the transposed-operand trick. Elementwise gate math, patch gather/scatter,
and pooling are plain C loops.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh
from libc.string cimport memcpy, memset
from scipy.linalg.cython_blas cimport dgemm

NAME = "cython"


cdef inline double sigmoid(double x) nogil:
    # branch-free so the gate loops stay auto-vectorizable; overflow of
    # exp(-x) saturates to the correct limit
    return 1.0 / (1.0 + exp(-x))


# Row-major GEMM wrappers (computed as transposed column-major products).
cdef void mm_nn(double* C, double* A, double* B, int m, int k, int n,
                double alpha, double beta) nogil:
    # C[m,n] = alpha * A[m,k] @ B[k,n] + beta * C
    dgemm("N", "N", &n, &m, &k, &alpha, B, &n, A, &k, &beta, C, &n)


cdef void mm_nt(double* C, double* A, double* B, int m, int k, int n,
                double alpha, double beta) nogil:
    # C[m,n] = alpha * A[m,k] @ B[n,k]^T + beta * C
    dgemm("T", "N", &n, &m, &k, &alpha, B, &k, A, &k, &beta, C, &n)


cdef void mm_tn(double* C, double* A, double* B, int m, int k, int n,
                double alpha, double beta) nogil:
    # C[m,n] = alpha * A[k,m]^T @ B[k,n] + beta * C
    dgemm("N", "T", &n, &m, &k, &alpha, B, &n, A, &m, &beta, C, &n)


def im2col(double[:, :, ::1] xp, int kernel):
    cdef Py_ssize_t b = xp.shape[0], lp = xp.shape[1], c = xp.shape[2]
    cdef Py_ssize_t lo = lp - kernel + 1
    cols_arr = np.empty((b, lo, kernel * c))
    cdef double[:, :, ::1] cols = cols_arr
    cdef Py_ssize_t bi, l, k
    with nogil:
        for bi in range(b):
            for l in range(lo):
                for k in range(kernel):
                    memcpy(&cols[bi, l, k * c], &xp[bi, l + k, 0], c * sizeof(double))
    return cols_arr


def col2im(double[:, :, ::1] dcols, int kernel, int lp):
    cdef Py_ssize_t b = dcols.shape[0], lo = dcols.shape[1], kc = dcols.shape[2]
    cdef Py_ssize_t c = kc // kernel
    dxp_arr = np.zeros((b, lp, c))
    cdef double[:, :, ::1] dxp = dxp_arr
    cdef Py_ssize_t bi, l, k, j
    with nogil:
        for bi in range(b):
            for l in range(lo):
                for k in range(kernel):
                    for j in range(c):
                        dxp[bi, l + k, j] += dcols[bi, l, k * c + j]
    return dxp_arr


def maxpool_forward(double[:, :, ::1] x, int size, int stride):
    cdef Py_ssize_t b = x.shape[0], length = x.shape[1], c = x.shape[2]
    cdef Py_ssize_t p = (length - size) // stride + 1
    out_arr = np.empty((b, p, c))
    idx_arr = np.empty((b, p, c), dtype=np.int64)
    cdef double[:, :, ::1] out = out_arr
    cdef cnp.int64_t[:, :, ::1] idx = idx_arr
    cdef Py_ssize_t bi, pi, ci, k, base, best_i
    cdef double best, v
    with nogil:
        for bi in range(b):
            for pi in range(p):
                base = pi * stride
                for ci in range(c):
                    best = x[bi, base, ci]
                    best_i = base
                    for k in range(1, size):
                        v = x[bi, base + k, ci]
                        if v > best:
                            best = v
                            best_i = base + k
                    out[bi, pi, ci] = best
                    idx[bi, pi, ci] = best_i
    return out_arr, idx_arr


def maxpool_backward(double[:, :, ::1] dout, cnp.int64_t[:, :, ::1] idx, int length):
    cdef Py_ssize_t b = dout.shape[0], p = dout.shape[1], c = dout.shape[2]
    dx_arr = np.zeros((b, length, c))
    cdef double[:, :, ::1] dx = dx_arr
    cdef Py_ssize_t bi, pi, ci
    with nogil:
        for bi in range(b):
            for pi in range(p):
                for ci in range(c):
                    dx[bi, idx[bi, pi, ci], ci] += dout[bi, pi, ci]
    return dx_arr


def lstm_forward(double[:, :, ::1] xp, double[:, ::1] wh):
    cdef Py_ssize_t b = xp.shape[0], t_len = xp.shape[1], h4 = xp.shape[2]
    cdef Py_ssize_t h_dim = h4 // 4
    h_arr = np.empty((b, t_len, h_dim))
    c_arr = np.empty((b, t_len, h_dim))
    gates_arr = np.empty((b, t_len, h4))
    tanh_c_arr = np.empty((b, t_len, h_dim))
    a_arr = np.empty((b, h4))
    hp_arr = np.zeros((b, h_dim))
    cp_arr = np.zeros((b, h_dim))
    cdef double[:, :, ::1] h = h_arr, c = c_arr, gates = gates_arr, tanh_c = tanh_c_arr
    cdef double[:, ::1] a = a_arr, h_prev = hp_arr, c_prev = cp_arr
    cdef Py_ssize_t t, bi, u
    cdef int bm = <int> b, hm = <int> h_dim, h4m = <int> h4
    with nogil:
        for t in range(t_len):
            for bi in range(b):
                memcpy(&a[bi, 0], &xp[bi, t, 0], h4 * sizeof(double))
            if t > 0:
                mm_nn(&a[0, 0], &h_prev[0, 0], &wh[0, 0], bm, hm, h4m, 1.0, 1.0)
            # unit-stride activation passes keep the transcendentals
            # vectorizable (libmvec)
            for bi in range(b):
                for u in range(2 * h_dim):
                    a[bi, u] = sigmoid(a[bi, u])
                for u in range(2 * h_dim, 3 * h_dim):
                    a[bi, u] = tanh(a[bi, u])
                for u in range(3 * h_dim, h4):
                    a[bi, u] = sigmoid(a[bi, u])
                memcpy(&gates[bi, t, 0], &a[bi, 0], h4 * sizeof(double))
                for u in range(h_dim):
                    c[bi, t, u] = a[bi, h_dim + u] * c_prev[bi, u] + a[bi, u] * a[bi, 2 * h_dim + u]
                for u in range(h_dim):
                    tanh_c[bi, t, u] = tanh(c[bi, t, u])
                for u in range(h_dim):
                    h[bi, t, u] = a[bi, 3 * h_dim + u] * tanh_c[bi, t, u]
                    h_prev[bi, u] = h[bi, t, u]
                    c_prev[bi, u] = c[bi, t, u]
    return h_arr, c_arr, gates_arr, tanh_c_arr


def lstm_backward(double[:, :, ::1] dh_out, double[:, :, ::1] h,
                  double[:, :, ::1] c, double[:, :, ::1] gates,
                  double[:, :, ::1] tanh_c, double[:, ::1] wh):
    cdef Py_ssize_t b = dh_out.shape[0], t_len = dh_out.shape[1], h_dim = dh_out.shape[2]
    cdef Py_ssize_t h4 = 4 * h_dim
    dxp_arr = np.empty((b, t_len, h4))
    dwh_arr = np.zeros((h_dim, h4))
    dhn_arr = np.zeros((b, h_dim))
    dcn_arr = np.zeros((b, h_dim))
    hp_arr = np.empty((b, h_dim))
    da_arr = np.empty((b, h4))
    cdef double[:, :, ::1] dxp = dxp_arr
    cdef double[:, ::1] dwh = dwh_arr, dh_next = dhn_arr, dc_next = dcn_arr
    cdef double[:, ::1] h_prev = hp_arr, da = da_arr
    cdef Py_ssize_t t, bi, u
    cdef double gi, gf, gg, go, tc, dh, dc, cp
    cdef int bm = <int> b, hm = <int> h_dim, h4m = <int> h4
    with nogil:
        for t in range(t_len - 1, -1, -1):
            for bi in range(b):
                for u in range(h_dim):
                    gi = gates[bi, t, u]
                    gf = gates[bi, t, h_dim + u]
                    gg = gates[bi, t, 2 * h_dim + u]
                    go = gates[bi, t, 3 * h_dim + u]
                    tc = tanh_c[bi, t, u]
                    dh = dh_out[bi, t, u] + dh_next[bi, u]
                    dc = dh * go * (1.0 - tc * tc) + dc_next[bi, u]
                    cp = c[bi, t - 1, u] if t > 0 else 0.0
                    da[bi, u] = dc * gg * gi * (1.0 - gi)
                    da[bi, h_dim + u] = dc * cp * gf * (1.0 - gf)
                    da[bi, 2 * h_dim + u] = dc * gi * (1.0 - gg * gg)
                    da[bi, 3 * h_dim + u] = dh * tc * go * (1.0 - go)
                    dc_next[bi, u] = dc * gf
            for bi in range(b):
                memcpy(&dxp[bi, t, 0], &da[bi, 0], h4 * sizeof(double))
            if t > 0:
                for bi in range(b):
                    memcpy(&h_prev[bi, 0], &h[bi, t - 1, 0], h_dim * sizeof(double))
                mm_tn(&dwh[0, 0], &h_prev[0, 0], &da[0, 0], hm, bm, h4m, 1.0, 1.0)
            mm_nt(&dh_next[0, 0], &da[0, 0], &wh[0, 0], bm, h4m, hm, 1.0, 0.0)
    return dxp_arr, dwh_arr
