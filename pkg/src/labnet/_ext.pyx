# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: the learnable RBF activation, convolution unfolding, max pooling.

Same contract as ``labnet._fallback``. Activation inputs are laid out (N, C, M): batch,
channel, positions within a channel. Parameter arrays have B rows, with B == C
(one block per channel) or B == 1 (one shared block). Parameter gradients are
accumulated in float64 in a fixed loop order, so results are reproducible.
"""
import numpy as np
from libc.math cimport exp, sqrt, log, fabs

ctypedef fused real:
    float
    double


cdef inline double _ipow(double r, int k) noexcept nogil:
    cdef double out = 1.0
    while k > 0:
        out *= r
        k -= 1
    return out


cdef inline double _phi(int fam, int k, double r) noexcept nogil:
    if fam == 0:
        return exp(-r * r)
    if fam == 1:
        return sqrt(1.0 + r * r)
    if k == 3:
        return r * r * r
    if k & 1:
        return _ipow(r, k)
    if r == 0.0:
        return 0.0
    return _ipow(r, k) * log(r)


cdef inline double _dphi(int fam, int k, double r) noexcept nogil:
    if fam == 0:
        return -2.0 * r * exp(-r * r)
    if fam == 1:
        return r / sqrt(1.0 + r * r)
    if k == 3:
        return 3.0 * r * r
    if k & 1:
        return k * _ipow(r, k - 1)
    if r == 0.0:
        return 0.0
    return _ipow(r, k - 1) * (k * log(r) + 1.0)


cdef enum:
    MAX_S = 64


def forward(real[:, :, ::1] x, double[:, ::1] cen, double[:, ::1] lam,
            double[::1] v0, double[::1] v1, int fam, int degree, double clip):
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], M = x.shape[2]
    cdef Py_ssize_t B = cen.shape[0], S = cen.shape[1]
    cdef Py_ssize_t n, c, m, i, b
    cdef double xv, acc, a, bias
    cdef double cl[MAX_S]
    cdef double ll[MAX_S]
    cdef const real* xr
    cdef real* yr
    cdef unsigned char* mr
    if S > MAX_S:
        raise ValueError(f"at most {MAX_S} kernels per block")
    dtype = np.float32 if real is float else np.float64
    y_arr = np.empty((N, C, M), dtype=dtype)
    mask_arr = np.empty((N, C, M), dtype=np.uint8)
    cdef real[:, :, ::1] y = y_arr
    cdef unsigned char[:, :, ::1] mask = mask_arr
    with nogil:
        for c in range(C):
            b = c if B > 1 else 0
            for i in range(S):
                cl[i] = cen[b, i]
                ll[i] = lam[b, i]
            a = v0[b]
            bias = v1[b]
            for n in range(N):
                if M == 0:
                    continue
                xr = &x[n, c, 0]
                yr = &y[n, c, 0]
                mr = &mask[n, c, 0]
                for m in range(M):
                    xv = xr[m]
                    acc = a * xv + bias
                    for i in range(S):
                        acc = acc + ll[i] * _phi(fam, degree, fabs(xv - cl[i]))
                    if acc > clip:
                        yr[m] = <real>clip
                        mr[m] = 0
                    elif acc < -clip:
                        yr[m] = <real>(-clip)
                        mr[m] = 0
                    else:
                        yr[m] = <real>acc
                        mr[m] = 1
    return y_arr, mask_arr


def backward(real[:, :, ::1] x, real[:, :, ::1] dy, unsigned char[:, :, ::1] mask,
             double[:, ::1] cen, double[:, ::1] lam, double[::1] v0, double[::1] v1,
             int fam, int degree):
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], M = x.shape[2]
    cdef Py_ssize_t B = cen.shape[0], S = cen.shape[1]
    cdef Py_ssize_t n, c, m, i, b
    cdef double xv, g, d, r, dp, slope, a, s0, s1
    cdef double cl[MAX_S]
    cdef double ll[MAX_S]
    cdef double gc[MAX_S]
    cdef double gl[MAX_S]
    cdef const real* xr
    cdef const real* gr
    cdef const unsigned char* mr
    cdef real* dxr
    if S > MAX_S:
        raise ValueError(f"at most {MAX_S} kernels per block")
    dtype = np.float32 if real is float else np.float64
    dx_arr = np.zeros((N, C, M), dtype=dtype)
    dcen_arr = np.zeros((B, S), dtype=np.float64)
    dlam_arr = np.zeros((B, S), dtype=np.float64)
    dv0_arr = np.zeros(B, dtype=np.float64)
    dv1_arr = np.zeros(B, dtype=np.float64)
    cdef real[:, :, ::1] dx = dx_arr
    cdef double[:, ::1] dcen = dcen_arr
    cdef double[:, ::1] dlam = dlam_arr
    cdef double[::1] dv0 = dv0_arr
    cdef double[::1] dv1 = dv1_arr
    with nogil:
        for n in range(N):
            for c in range(C):
                if M == 0:
                    continue
                b = c if B > 1 else 0
                for i in range(S):
                    cl[i] = cen[b, i]
                    ll[i] = lam[b, i]
                    gc[i] = 0.0
                    gl[i] = 0.0
                a = v0[b]
                s0 = 0.0
                s1 = 0.0
                xr = &x[n, c, 0]
                gr = &dy[n, c, 0]
                mr = &mask[n, c, 0]
                dxr = &dx[n, c, 0]
                for m in range(M):
                    if not mr[m]:
                        continue
                    g = gr[m]
                    xv = xr[m]
                    slope = a
                    for i in range(S):
                        d = xv - cl[i]
                        r = fabs(d)
                        dp = _dphi(fam, degree, r) * ((d > 0) - (d < 0))
                        slope = slope + ll[i] * dp
                        gl[i] += g * _phi(fam, degree, r)
                        gc[i] -= g * ll[i] * dp
                    s0 += g * xv
                    s1 += g
                    dxr[m] = <real>(g * slope)
                for i in range(S):
                    dcen[b, i] += gc[i]
                    dlam[b, i] += gl[i]
                dv0[b] += s0
                dv1[b] += s1
    return dx_arr, dcen_arr, dlam_arr, dv0_arr, dv1_arr


# ------------------------------------------------------------ convolution

def im2col(real[:, :, :, ::1] x, int k, int stride, int pad, int ho, int wo):
    """Unfold (N, C, H, W) into rows (N*ho*wo, C*k*k), zero outside the image."""
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t n, c, i, j, oh, ow, row, col, ih, iw
    dtype = np.float32 if real is float else np.float64
    out_arr = np.zeros((N * ho * wo, C * k * k), dtype=dtype)
    cdef real[:, ::1] out = out_arr
    with nogil:
        for n in range(N):
            for oh in range(ho):
                for ow in range(wo):
                    row = (n * ho + oh) * wo + ow
                    col = 0
                    for c in range(C):
                        for i in range(k):
                            ih = oh * stride + i - pad
                            for j in range(k):
                                iw = ow * stride + j - pad
                                if 0 <= ih < H and 0 <= iw < W:
                                    out[row, col] = x[n, c, ih, iw]
                                col += 1
    return out_arr


def col2im(real[:, ::1] cols, int N, int C, int H, int W, int k, int stride, int pad, int ho, int wo):
    """Adjoint of ``im2col``: scatter-add rows back into (N, C, H, W)."""
    cdef Py_ssize_t n, c, i, j, oh, ow, row, col, ih, iw
    dtype = np.float32 if real is float else np.float64
    out_arr = np.zeros((N, C, H, W), dtype=dtype)
    cdef real[:, :, :, ::1] out = out_arr
    with nogil:
        for n in range(N):
            for oh in range(ho):
                for ow in range(wo):
                    row = (n * ho + oh) * wo + ow
                    col = 0
                    for c in range(C):
                        for i in range(k):
                            ih = oh * stride + i - pad
                            for j in range(k):
                                iw = ow * stride + j - pad
                                if 0 <= ih < H and 0 <= iw < W:
                                    out[n, c, ih, iw] += cols[row, col]
                                col += 1
    return out_arr


# ------------------------------------------------------------ max pooling

def maxpool_forward(real[:, :, :, ::1] x, int k):
    """Non-overlapping k x k max pooling; returns output and flat window argmax (first max wins)."""
    cdef Py_ssize_t N = x.shape[0], C = x.shape[1]
    cdef Py_ssize_t ho = x.shape[2] // k, wo = x.shape[3] // k
    cdef Py_ssize_t n, c, oh, ow, i, j, best
    cdef real v, m
    dtype = np.float32 if real is float else np.float64
    y_arr = np.empty((N, C, ho, wo), dtype=dtype)
    arg_arr = np.empty((N, C, ho, wo), dtype=np.int64)
    cdef real[:, :, :, ::1] y = y_arr
    cdef long long[:, :, :, ::1] arg = arg_arr
    with nogil:
        for n in range(N):
            for c in range(C):
                for oh in range(ho):
                    for ow in range(wo):
                        m = x[n, c, oh * k, ow * k]
                        best = 0
                        for i in range(k):
                            for j in range(k):
                                v = x[n, c, oh * k + i, ow * k + j]
                                if v > m:
                                    m = v
                                    best = i * k + j
                        y[n, c, oh, ow] = m
                        arg[n, c, oh, ow] = best
    return y_arr, arg_arr


def maxpool_backward(real[:, :, :, ::1] dy, long long[:, :, :, ::1] arg, int k, int H, int W):
    cdef Py_ssize_t N = dy.shape[0], C = dy.shape[1], ho = dy.shape[2], wo = dy.shape[3]
    cdef Py_ssize_t n, c, oh, ow, a
    dtype = np.float32 if real is float else np.float64
    dx_arr = np.zeros((N, C, H, W), dtype=dtype)
    cdef real[:, :, :, ::1] dx = dx_arr
    with nogil:
        for n in range(N):
            for c in range(C):
                for oh in range(ho):
                    for ow in range(wo):
                        a = arg[n, c, oh, ow]
                        dx[n, c, oh * k + a // k, ow * k + a % k] = dy[n, c, oh, ow]
    return dx_arr
