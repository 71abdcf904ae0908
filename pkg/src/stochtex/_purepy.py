"""Pure numpy implementation of the batched texel-selection kernels.

Every function mirrors ``_core.pyx`` operation for operation so the two
backends return bit-identical results for identical inputs. Inputs are
float64 arrays with one lookup per row; outputs are int64 texel coords
plus the remapped uniform of each lookup.
"""

import math

import numpy as np

from ._tables import EWA_LUT, EWA_LUT_SIZE

ONE_MINUS_EPSILON = math.nextafter(1.0, 0.0)
LUT_SIZE = EWA_LUT_SIZE
_LUT = EWA_LUT

NAME = "python"


def _fract(x):
    base = np.floor(x)
    return base, np.minimum(x - base, ONE_MINUS_EPSILON)


def _warp(u, p, taken):
    """Sample-reuse step for arrays; ``taken`` already evaluated by caller."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a = u / p
        b = (u - p) / (1.0 - p)
    return np.minimum(np.where(taken, a, b), ONE_MINUS_EPSILON)


def _lerp_axes(p, xi):
    base, f = _fract(p)
    coords = base.astype(np.int64)
    u = np.array(xi, dtype=np.float64, copy=True)
    for axis in range(p.shape[1]):
        d = f[:, axis]
        taken = u < d
        coords[:, axis] += taken
        u = _warp(u, d, taken)
    return coords, u


def bilinear(st, xi):
    return _lerp_axes(np.asarray(st, dtype=np.float64), xi)


def trilinear(p, xi):
    return _lerp_axes(np.asarray(p, dtype=np.float64), xi)


def _bspline_w(t):
    t2 = t * t
    return (
        (1.0 / 6.0) * (-t * t2 + 3 * t2 - 3 * t + 1),
        (1.0 / 6.0) * (3 * t * t2 - 6 * t2 + 4),
        (1.0 / 6.0) * (-3 * t * t2 + 3 * t2 + 3 * t + 1),
        (1.0 / 6.0) * t * t2,
    )


def _sample_discrete4(w, u):
    """First index whose running sum exceeds ``u * sum``; remaps ``u``."""
    total = ((w[0] + w[1]) + w[2]) + w[3]
    up = u * total
    up = np.where(up == total, np.nextafter(total, 0.0), up)
    idx = np.zeros(u.shape, dtype=np.int64)
    s = np.zeros(u.shape)
    active = np.ones(u.shape, dtype=bool)
    for i in range(3):
        adv = active & (s + w[i] <= up)
        s = np.where(adv, s + w[i], s)
        idx += adv
        active = adv
    wsel = np.choose(idx, w)
    u_new = np.minimum((up - s) / wsel, ONE_MINUS_EPSILON)
    return idx, u_new


def bicubic_bspline(st, xi):
    st = np.asarray(st, dtype=np.float64)
    base, f = _fract(st)
    u = np.asarray(xi, dtype=np.float64)
    i_s, u = _sample_discrete4(_bspline_w(f[:, 0]), u)
    i_t, u = _sample_discrete4(_bspline_w(f[:, 1]), u)
    coords = base.astype(np.int64) - 1
    coords[:, 0] += i_s
    coords[:, 1] += i_t
    return coords, u


def tricubic_bspline(p, xi):
    p = np.asarray(p, dtype=np.float64)
    base, f = _fract(p)
    u = np.array(xi, dtype=np.float64, copy=True)
    coords = base.astype(np.int64) - 1
    for axis in range(3):
        w = _bspline_w(f[:, axis])
        sum_wt = w[0]
        idx = np.zeros(u.shape, dtype=np.int64)
        for j in (1, 2, 3):
            sum_wt = sum_wt + w[j]
            pj = w[j] / sum_wt
            taken = u < pj
            idx = np.where(taken, j, idx)
            u = _warp(u, pj, taken)
        coords[:, axis] += idx
    return coords, u


def _mitchell(a, t):
    x = np.abs(t)
    x2 = x * x
    x3 = x2 * x
    inner = (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
    outer = a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
    return np.where(x < 1.0, inner, np.where(x < 2.0, outer, 0.0))


def mitchell_positivized(st, xi, a=-0.5):
    st = np.asarray(st, dtype=np.float64)
    base, f = _fract(st)
    n = st.shape[0]
    u = np.array(xi, dtype=np.float64, copy=True)
    sums = [np.zeros(n), np.zeros(n)]
    sel = [np.zeros((n, 2), dtype=np.int64), np.zeros((n, 2), dtype=np.int64)]
    for dy in range(-1, 3):
        wy = _mitchell(a, f[:, 1] - dy)
        for dx in range(-1, 3):
            wx = _mitchell(a, f[:, 0] - dx)
            w = wy * wx
            live = w != 0.0
            neg = w < 0.0
            aw = np.abs(w)
            for side, mask in ((0, live & ~neg), (1, live & neg)):
                sums[side] = np.where(mask, sums[side] + aw, sums[side])
            ssel = np.where(neg, sums[1], sums[0])
            with np.errstate(divide="ignore", invalid="ignore"):
                p = aw / ssel
            taken = live & (u <= p)
            for side, mask in ((0, taken & ~neg), (1, taken & neg)):
                sel[side][mask, 0] = dx
                sel[side][mask, 1] = dy
            u = np.where(live, _warp(u, p, taken), u)
    b = base.astype(np.int64)
    return b + sel[0], b + sel[1], sums[0], sums[1], u


def discrete_gaussian(st, sigma, xi):
    st = np.asarray(st, dtype=np.float64)
    base, f = _fract(st)
    u = np.array(xi, dtype=np.float64, copy=True)
    inv_sigma_sq = 1.0 / (sigma * sigma)
    fx, fy = f[:, 0], f[:, 1]
    gx = 1.0 - fx
    gy = 1.0 - fy
    d2min = np.minimum(fx * fx, gx * gx) + np.minimum(fy * fy, gy * gy)
    wsum = np.zeros(st.shape[0])
    off = np.zeros((st.shape[0], 2), dtype=np.int64)
    for dy in range(-1, 3):
        ey = dy - fy
        for dx in range(-1, 3):
            ex = dx - fx
            d2 = ex * ex + ey * ey
            w = np.exp(-0.5 * (d2 - d2min) * inv_sigma_sq)
            live = w > 0.0
            wsum = np.where(live, wsum + w, wsum)
            with np.errstate(divide="ignore", invalid="ignore"):
                p = w / wsum
            taken = live & (u <= p)
            off[taken, 0] = dx
            off[taken, 1] = dy
            u = np.where(live, _warp(u, p, taken), u)
    return base.astype(np.int64) + off, u


def _ellipse(st, d0, d1):
    A = d0[:, 1] * d0[:, 1] + d1[:, 1] * d1[:, 1] + 1.0
    B = -2.0 * (d0[:, 0] * d0[:, 1] + d1[:, 0] * d1[:, 1])
    C = d0[:, 0] * d0[:, 0] + d1[:, 0] * d1[:, 0] + 1.0
    inv_f = 1.0 / (A * C - B * B * 0.25)
    A = A * inv_f
    B = B * inv_f
    C = C * inv_f
    det = -B * B + 4.0 * A * C
    inv_det = 1.0 / det
    u_sqrt = np.sqrt(np.maximum(0.0, det * C))
    v_sqrt = np.sqrt(np.maximum(0.0, A * det))
    s0 = np.ceil(st[:, 0] - 2.0 * inv_det * u_sqrt).astype(np.int64)
    s1 = np.floor(st[:, 0] + 2.0 * inv_det * u_sqrt).astype(np.int64)
    t0 = np.ceil(st[:, 1] - 2.0 * inv_det * v_sqrt).astype(np.int64)
    t1 = np.floor(st[:, 1] + 2.0 * inv_det * v_sqrt).astype(np.int64)
    return A, B, C, s0, s1, t0, t1


def ewa(st, dst0, dst1, xi):
    st = np.asarray(st, dtype=np.float64)
    d0 = np.asarray(dst0, dtype=np.float64)
    d1 = np.asarray(dst1, dtype=np.float64)
    n = st.shape[0]
    d0 = np.broadcast_to(d0, (n, 2))
    d1 = np.broadcast_to(d1, (n, 2))
    A, B, C, s0, s1, t0, t1 = _ellipse(st, d0, d1)
    u = np.array(xi, dtype=np.float64, copy=True)
    coords = np.zeros((n, 2), dtype=np.int64)
    wsum = np.zeros(n)
    width = int((s1 - s0).max()) + 1 if n else 0
    height = int((t1 - t0).max()) + 1 if n else 0
    for jt in range(height):
        it = t0 + jt
        row_ok = it <= t1
        tt = it - st[:, 1]
        for js in range(width):
            is_ = s0 + js
            ss = is_ - st[:, 0]
            r2 = A * (ss * ss) + B * ss * tt + C * (tt * tt)
            ok = row_ok & (is_ <= s1) & (r2 < 1.0)
            idx = np.minimum((np.where(ok, r2, 0.0) * LUT_SIZE).astype(np.int64), LUT_SIZE - 1)
            w = _LUT[idx]
            ok &= w > 0.0
            wsum = np.where(ok, wsum + w, wsum)
            with np.errstate(divide="ignore", invalid="ignore"):
                p = w / wsum
            taken = ok & (u < p)
            coords[taken, 0] = is_[taken]
            coords[taken, 1] = it[taken]
            u = np.where(ok, _warp(u, p, taken), u)
    return coords, u


def nearest(p):
    """Index of the texel whose centre is closest (ties round up)."""
    return np.floor(np.asarray(p, dtype=np.float64) + 0.5).astype(np.int64)
