# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled texel-selection kernels.

Arithmetic follows ``_purepy.py`` term by term (build with
``-ffp-contract=off``) so both backends agree bit for bit.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, ceil, sqrt, fabs, nextafter

cnp.import_array()

NAME = "cython"

cdef double ONE_MINUS_EPSILON = nextafter(1.0, 0.0)
from stochtex._tables import EWA_LUT

cdef enum:
    LUT_SIZE = 1024
cdef double[::1] LUT = np.ascontiguousarray(EWA_LUT, dtype=np.float64)


cdef inline double _clamp1(double x) noexcept nogil:
    return x if x < ONE_MINUS_EPSILON else ONE_MINUS_EPSILON


cdef inline double _fract(double x, double* base) noexcept nogil:
    cdef double b = floor(x)
    cdef double f = x - b
    base[0] = b
    return f if f < ONE_MINUS_EPSILON else ONE_MINUS_EPSILON


def _lerp_axes(const double[:, ::1] p, const double[::1] xi):
    cdef Py_ssize_t n = p.shape[0], d = p.shape[1], i, k
    out = np.empty((n, d), dtype=np.int64)
    uo = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] c = out
    cdef double[::1] uv = uo
    cdef double u, f, b
    with nogil:
        for i in range(n):
            u = xi[i]
            for k in range(d):
                f = _fract(p[i, k], &b)
                c[i, k] = <cnp.int64_t>b
                if u < f:
                    c[i, k] += 1
                    u = _clamp1(u / f)
                else:
                    u = _clamp1((u - f) / (1.0 - f))
            uv[i] = u
    return out, uo


def bilinear(st, xi):
    return _lerp_axes(np.ascontiguousarray(st, dtype=np.float64), np.ascontiguousarray(xi, dtype=np.float64))


def trilinear(p, xi):
    return _lerp_axes(np.ascontiguousarray(p, dtype=np.float64), np.ascontiguousarray(xi, dtype=np.float64))


cdef inline void _bspline_w(double t, double* w) noexcept nogil:
    cdef double t2 = t * t
    w[0] = (1.0 / 6.0) * (-t * t2 + 3 * t2 - 3 * t + 1)
    w[1] = (1.0 / 6.0) * (3 * t * t2 - 6 * t2 + 4)
    w[2] = (1.0 / 6.0) * (-3 * t * t2 + 3 * t2 + 3 * t + 1)
    w[3] = (1.0 / 6.0) * t * t2


cdef inline int _sample_discrete4(double* w, double* u) noexcept nogil:
    cdef double total = ((w[0] + w[1]) + w[2]) + w[3]
    cdef double up = u[0] * total
    cdef double s = 0.0
    cdef int i = 0
    if up == total:
        up = nextafter(total, 0.0)
    while i < 3 and s + w[i] <= up:
        s = s + w[i]
        i += 1
    u[0] = _clamp1((up - s) / w[i])
    return i


def bicubic_bspline(st, xi):
    cdef const double[:, ::1] p = np.ascontiguousarray(st, dtype=np.float64)
    cdef const double[::1] x = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], i
    out = np.empty((n, 2), dtype=np.int64)
    uo = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] c = out
    cdef double[::1] uv = uo
    cdef double ws[4]
    cdef double wt[4]
    cdef double u, fs, ft, bs, bt
    cdef int js, jt
    with nogil:
        for i in range(n):
            fs = _fract(p[i, 0], &bs)
            ft = _fract(p[i, 1], &bt)
            _bspline_w(fs, ws)
            _bspline_w(ft, wt)
            u = x[i]
            js = _sample_discrete4(ws, &u)
            jt = _sample_discrete4(wt, &u)
            c[i, 0] = <cnp.int64_t>bs - 1 + js
            c[i, 1] = <cnp.int64_t>bt - 1 + jt
            uv[i] = u
    return out, uo


def tricubic_bspline(pp, xi):
    cdef const double[:, ::1] p = np.ascontiguousarray(pp, dtype=np.float64)
    cdef const double[::1] x = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], i
    out = np.empty((n, 3), dtype=np.int64)
    uo = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] c = out
    cdef double[::1] uv = uo
    cdef double w[4]
    cdef double u, f, b, sum_wt, pj
    cdef int axis, j, idx
    with nogil:
        for i in range(n):
            u = x[i]
            for axis in range(3):
                f = _fract(p[i, axis], &b)
                _bspline_w(f, w)
                sum_wt = w[0]
                idx = 0
                for j in range(1, 4):
                    sum_wt = sum_wt + w[j]
                    pj = w[j] / sum_wt
                    if u < pj:
                        idx = j
                        u = _clamp1(u / pj)
                    else:
                        u = _clamp1((u - pj) / (1.0 - pj))
                c[i, axis] = <cnp.int64_t>b - 1 + idx
            uv[i] = u
    return out, uo


cdef inline double _mitchell(double a, double t) noexcept nogil:
    cdef double x = fabs(t)
    cdef double x2 = x * x
    cdef double x3 = x2 * x
    if x < 1.0:
        return (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    if x < 2.0:
        return a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    return 0.0


def mitchell_positivized(st, xi, double a=-0.5):
    cdef const double[:, ::1] p = np.ascontiguousarray(st, dtype=np.float64)
    cdef const double[::1] x = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], i
    pos = np.empty((n, 2), dtype=np.int64)
    neg = np.empty((n, 2), dtype=np.int64)
    wp = np.empty(n, dtype=np.float64)
    wn = np.empty(n, dtype=np.float64)
    uo = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] cp = pos
    cdef cnp.int64_t[:, ::1] cn = neg
    cdef double[::1] vwp = wp
    cdef double[::1] vwn = wn
    cdef double[::1] uv = uo
    cdef double u, fx, fy, bx, by, wy, w, aw, pr, spos, sneg
    cdef int dx, dy, pdx, pdy, ndx, ndy
    with nogil:
        for i in range(n):
            fx = _fract(p[i, 0], &bx)
            fy = _fract(p[i, 1], &by)
            u = x[i]
            spos = 0.0
            sneg = 0.0
            pdx = pdy = ndx = ndy = 0
            for dy in range(-1, 3):
                wy = _mitchell(a, fy - dy)
                for dx in range(-1, 3):
                    w = wy * _mitchell(a, fx - dx)
                    if w == 0.0:
                        continue
                    aw = fabs(w)
                    if w < 0.0:
                        sneg = sneg + aw
                        pr = aw / sneg
                    else:
                        spos = spos + aw
                        pr = aw / spos
                    if u <= pr:
                        if w < 0.0:
                            ndx = dx
                            ndy = dy
                        else:
                            pdx = dx
                            pdy = dy
                        u = _clamp1(u / pr)
                    else:
                        u = _clamp1((u - pr) / (1.0 - pr))
            cp[i, 0] = <cnp.int64_t>bx + pdx
            cp[i, 1] = <cnp.int64_t>by + pdy
            cn[i, 0] = <cnp.int64_t>bx + ndx
            cn[i, 1] = <cnp.int64_t>by + ndy
            vwp[i] = spos
            vwn[i] = sneg
            uv[i] = u
    return pos, neg, wp, wn, uo


def _gaussian_window_weights(st, double sigma):
    # numpy exp (not libm) so the weights match the fallback exactly
    st = np.asarray(st, dtype=np.float64)
    base = np.floor(st)
    f = np.minimum(st - base, ONE_MINUS_EPSILON)
    inv_sigma_sq = 1.0 / (sigma * sigma)
    fx, fy = f[:, 0], f[:, 1]
    gx = 1.0 - fx
    gy = 1.0 - fy
    d2min = np.minimum(fx * fx, gx * gx) + np.minimum(fy * fy, gy * gy)
    w = np.empty((st.shape[0], 16))
    k = 0
    for dy in range(-1, 3):
        ey = dy - fy
        for dx in range(-1, 3):
            ex = dx - fx
            d2 = ex * ex + ey * ey
            w[:, k] = np.exp(-0.5 * (d2 - d2min) * inv_sigma_sq)
            k += 1
    return base, w


def discrete_gaussian(st, double sigma, xi):
    base_arr, w_arr = _gaussian_window_weights(st, sigma)
    cdef const double[:, ::1] base = base_arr
    cdef const double[:, ::1] wts = w_arr
    cdef const double[::1] x = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t n = base.shape[0], i
    out = np.empty((n, 2), dtype=np.int64)
    uo = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] c = out
    cdef double[::1] uv = uo
    cdef double u, w, wsum, pr
    cdef int dx, dy, ox, oy, k
    with nogil:
        for i in range(n):
            u = x[i]
            wsum = 0.0
            ox = oy = 0
            k = 0
            for dy in range(-1, 3):
                for dx in range(-1, 3):
                    w = wts[i, k]
                    k += 1
                    if not w > 0.0:
                        continue
                    wsum = wsum + w
                    pr = w / wsum
                    if u <= pr:
                        ox = dx
                        oy = dy
                        u = _clamp1(u / pr)
                    else:
                        u = _clamp1((u - pr) / (1.0 - pr))
            c[i, 0] = <cnp.int64_t>base[i, 0] + ox
            c[i, 1] = <cnp.int64_t>base[i, 1] + oy
            uv[i] = u
    return out, uo


def ewa(st, dst0, dst1, xi):
    cdef const double[:, ::1] p = np.ascontiguousarray(st, dtype=np.float64)
    cdef Py_ssize_t n = p.shape[0], i
    cdef const double[:, ::1] d0 = np.ascontiguousarray(np.broadcast_to(np.asarray(dst0, dtype=np.float64), (n, 2)))
    cdef const double[:, ::1] d1 = np.ascontiguousarray(np.broadcast_to(np.asarray(dst1, dtype=np.float64), (n, 2)))
    cdef const double[::1] x = np.ascontiguousarray(xi, dtype=np.float64)
    out = np.zeros((n, 2), dtype=np.int64)
    uo = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] c = out
    cdef double[::1] uv = uo
    cdef double A, B, C, inv_f, det, inv_det, u_sqrt, v_sqrt, u, tt, ss, r2, w, wsum, pr
    cdef long long s0, s1, t0, t1, it, is_, idx
    with nogil:
        for i in range(n):
            A = d0[i, 1] * d0[i, 1] + d1[i, 1] * d1[i, 1] + 1.0
            B = -2.0 * (d0[i, 0] * d0[i, 1] + d1[i, 0] * d1[i, 1])
            C = d0[i, 0] * d0[i, 0] + d1[i, 0] * d1[i, 0] + 1.0
            inv_f = 1.0 / (A * C - B * B * 0.25)
            A = A * inv_f
            B = B * inv_f
            C = C * inv_f
            det = -B * B + 4.0 * A * C
            inv_det = 1.0 / det
            u_sqrt = sqrt(det * C if det * C > 0.0 else 0.0)
            v_sqrt = sqrt(A * det if A * det > 0.0 else 0.0)
            s0 = <long long>ceil(p[i, 0] - 2.0 * inv_det * u_sqrt)
            s1 = <long long>floor(p[i, 0] + 2.0 * inv_det * u_sqrt)
            t0 = <long long>ceil(p[i, 1] - 2.0 * inv_det * v_sqrt)
            t1 = <long long>floor(p[i, 1] + 2.0 * inv_det * v_sqrt)
            u = x[i]
            wsum = 0.0
            for it in range(t0, t1 + 1):
                tt = it - p[i, 1]
                for is_ in range(s0, s1 + 1):
                    ss = is_ - p[i, 0]
                    r2 = A * (ss * ss) + B * ss * tt + C * (tt * tt)
                    if r2 >= 1.0:
                        continue
                    idx = <long long>(r2 * LUT_SIZE)
                    if idx > LUT_SIZE - 1:
                        idx = LUT_SIZE - 1
                    w = LUT[idx]
                    if w <= 0.0:
                        continue
                    wsum = wsum + w
                    pr = w / wsum
                    if u < pr:
                        c[i, 0] = is_
                        c[i, 1] = it
                        u = _clamp1(u / pr)
                    else:
                        u = _clamp1((u - pr) / (1.0 - pr))
            uv[i] = u
    return out, uo


def nearest(pp):
    return np.floor(np.asarray(pp, dtype=np.float64) + 0.5).astype(np.int64)
