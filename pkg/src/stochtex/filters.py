"""Stochastic single-fetch texel selection.

Scalar entry points return a :class:`TexelSelection`; the ``*_batch`` forms
work on arrays of lookups and are what the renderer uses. Coordinates are
texture raster coordinates (texel ``i`` at integer ``i``) unless a function
says it takes normalized ``uv``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import backend
from .kernels import (
    FIS_KINDS,
    KernelSpec,
    NoContinuousSamplerError,
    box_muller,
    sample_kernel_fis_batch,
    uniforms_needed,
)
from .texture import FetchCounter, ewa_is_degenerate

GAUSSIAN_WINDOW = 4
GAUSSIAN_SIGMA_LIMIT = 0.8
DEFAULT_MAX_ANISOTROPY = 64.0

METHODS = ("nearest", "bilinear", "trilinear", "bicubic", "tricubic", "mitchell", "gaussian", "ewa")


class TruncationWarning(UserWarning):
    """Gaussian too wide for the fixed 4x4 selection window."""


@dataclass(frozen=True)
class TexelSelection:
    primary_coord: tuple
    primary_weight: float = 1.0
    negative_coord: tuple | None = None
    negative_weight: float = 0.0
    xi: float = 0.0
    fallback: bool = False

    @property
    def fetches(self) -> int:
        return 1 + (self.negative_coord is not None)

    def estimate(self, tex, counter: FetchCounter | None = None) -> np.ndarray:
        v = self.primary_weight * tex.fetch_coords(np.array(self.primary_coord), counter)
        if self.negative_coord is not None:
            v = v - self.negative_weight * tex.fetch_coords(np.array(self.negative_coord), counter)
        return v


@dataclass
class BatchSelection:
    """Selections for N lookups; negative side only for positivized kernels."""

    coords: np.ndarray  # (N, d) int64
    xi: np.ndarray
    weights: np.ndarray | None = None  # W_plus, None means all ones
    neg_coords: np.ndarray | None = None
    neg_weights: np.ndarray | None = None
    fallback: np.ndarray | None = None

    def __len__(self):
        return self.coords.shape[0]

    @property
    def has_negative(self) -> np.ndarray:
        if self.neg_weights is None:
            return np.zeros(len(self), dtype=bool)
        return self.neg_weights > 0

    def fetch_count(self) -> int:
        return len(self) + int(self.has_negative.sum())

    def evaluate(self, tex, counter: FetchCounter | None = None) -> np.ndarray:
        """Estimator values (N, channels); fetches only the texels used."""
        vals = tex.fetch_coords(self.coords, counter)
        if self.weights is not None:
            vals = self.weights[:, None] * vals
        if self.neg_weights is not None:
            neg = self.has_negative
            if np.any(neg):
                nv = tex.fetch_coords(self.neg_coords[neg], counter)
                vals[neg] -= self.neg_weights[neg, None] * nv
        return vals

    def row(self, i: int) -> TexelSelection:
        neg = bool(self.has_negative[i])
        return TexelSelection(
            tuple(int(c) for c in self.coords[i]),
            1.0 if self.weights is None else float(self.weights[i]),
            tuple(int(c) for c in self.neg_coords[i]) if neg else None,
            float(self.neg_weights[i]) if neg else 0.0,
            float(self.xi[i]),
            bool(self.fallback[i]) if self.fallback is not None else False,
        )


def _rows(x, d: int) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    return a.reshape(-1, d)


def _xi(xi, n: int) -> np.ndarray:
    return np.broadcast_to(np.asarray(xi, dtype=np.float64), (n,)).copy()


def _check_gaussian_sigma(sigma: float) -> None:
    if not sigma > 0:
        raise ValueError("gaussian sigma must be positive")
    if sigma > GAUSSIAN_SIGMA_LIMIT:
        warnings.warn(
            f"sigma={sigma} exceeds {GAUSSIAN_SIGMA_LIMIT}; the 4x4 selection window truncates "
            "the Gaussian and shows grid-like artifacts",
            TruncationWarning,
            stacklevel=3,
        )


# --- batched selection -----------------------------------------------------

def bilinear_batch(st, xi, impl=None) -> BatchSelection:
    st = _rows(st, 2)
    c, u = backend.get(impl).bilinear(st, _xi(xi, len(st)))
    return BatchSelection(c, u)


def trilinear_batch(p, xi, impl=None) -> BatchSelection:
    p = _rows(p, 3)
    c, u = backend.get(impl).trilinear(p, _xi(xi, len(p)))
    return BatchSelection(c, u)


def bicubic_bspline_batch(st, xi, impl=None) -> BatchSelection:
    st = _rows(st, 2)
    c, u = backend.get(impl).bicubic_bspline(st, _xi(xi, len(st)))
    return BatchSelection(c, u)


def tricubic_bspline_batch(p, xi, impl=None) -> BatchSelection:
    p = _rows(p, 3)
    c, u = backend.get(impl).tricubic_bspline(p, _xi(xi, len(p)))
    return BatchSelection(c, u)


def mitchell_positivized_batch(st, xi, a: float = -0.5, impl=None) -> BatchSelection:
    st = _rows(st, 2)
    pos, neg, wp, wn, u = backend.get(impl).mitchell_positivized(st, _xi(xi, len(st)), a)
    return BatchSelection(pos, u, wp, neg, wn)


def discrete_gaussian_batch(st, sigma: float, xi, impl=None) -> BatchSelection:
    _check_gaussian_sigma(sigma)
    st = _rows(st, 2)
    c, u = backend.get(impl).discrete_gaussian(st, float(sigma), _xi(xi, len(st)))
    return BatchSelection(c, u)


def ewa_batch(st, dst0, dst1, xi, impl=None) -> BatchSelection:
    """Stochastic EWA; rows with both gradients zero fall back to bilinear."""
    st = _rows(st, 2)
    n = len(st)
    d0 = np.broadcast_to(np.asarray(dst0, dtype=np.float64), (n, 2))
    d1 = np.broadcast_to(np.asarray(dst1, dtype=np.float64), (n, 2))
    u = _xi(xi, n)
    degen = ~(np.any(d0 != 0, axis=1) | np.any(d1 != 0, axis=1))
    coords = np.empty((n, 2), dtype=np.int64)
    u_out = np.empty(n)
    k = backend.get(impl)
    ok = ~degen
    if np.any(ok):
        coords[ok], u_out[ok] = k.ewa(st[ok], np.ascontiguousarray(d0[ok]), np.ascontiguousarray(d1[ok]), u[ok])
    if np.any(degen):
        coords[degen], u_out[degen] = k.bilinear(st[degen], u[degen])
    return BatchSelection(coords, u_out, fallback=degen)


def nearest_batch(p, d: int = 2) -> BatchSelection:
    p = _rows(p, d)
    return BatchSelection(backend.get().nearest(p), np.zeros(len(p)))


def fis_jitter_batch(p, spec: KernelSpec, u) -> np.ndarray:
    """Raster positions offset by independent per-axis FIS draws.

    ``u`` has shape ``(uniforms_needed(spec) * d, N)``; a nearest fetch at the
    result realizes ``spec`` (box-convolved for tent/bspline3).
    """
    if spec.kind not in FIS_KINDS:
        raise NoContinuousSamplerError(spec.kind)
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    n, d = p.shape
    u = np.asarray(u, dtype=np.float64).reshape(-1, n)
    k = uniforms_needed(spec)
    if spec.kind == "gaussian":
        # one Box-Muller pair covers two axes
        out = p.copy()
        for axis0 in range(0, d, 2):
            c, s = box_muller(u[axis0], u[axis0 + 1])
            out[:, axis0] += spec.sigma * c
            if axis0 + 1 < d:
                out[:, axis0 + 1] += spec.sigma * s
        return out
    out = p.copy()
    for axis in range(d):
        out[:, axis] += sample_kernel_fis_batch(spec, u[axis * k:(axis + 1) * k])
    return out


def fis_uniforms_needed(spec: KernelSpec, d: int = 2) -> int:
    if spec.kind == "gaussian":
        return 2 * ((d + 1) // 2)
    return uniforms_needed(spec) * d


def fis_batch(p, spec: KernelSpec, u) -> BatchSelection:
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    return nearest_batch(fis_jitter_batch(p, spec, u), p.shape[1])


def select_batch(method: str, p, xi, *, sigma: float = 0.5, a: float = -0.5,
                 dst0=None, dst1=None, impl=None) -> BatchSelection:
    """Dispatch a batched FRS-style selection by method name."""
    if method == "nearest":
        return nearest_batch(p, np.shape(p)[-1])
    if method == "bilinear":
        return bilinear_batch(p, xi, impl)
    if method == "trilinear":
        return trilinear_batch(p, xi, impl)
    if method == "bicubic":
        return bicubic_bspline_batch(p, xi, impl)
    if method == "tricubic":
        return tricubic_bspline_batch(p, xi, impl)
    if method == "mitchell":
        return mitchell_positivized_batch(p, xi, a, impl)
    if method == "gaussian":
        return discrete_gaussian_batch(p, sigma, xi, impl)
    if method == "ewa":
        if dst0 is None or dst1 is None:
            raise ValueError("ewa selection needs gradients")
        return ewa_batch(p, dst0, dst1, xi, impl)
    raise ValueError(f"unknown selection method {method!r}")


# --- scalar selection ------------------------------------------------------

def select_bilinear(st, xi: float) -> TexelSelection:
    return bilinear_batch(st, xi).row(0)


def select_trilinear(p, xi: float) -> TexelSelection:
    return trilinear_batch(p, xi).row(0)


def select_bicubic_bspline(st, xi: float) -> TexelSelection:
    return bicubic_bspline_batch(st, xi).row(0)


def select_tricubic_bspline(p, xi: float) -> TexelSelection:
    return tricubic_bspline_batch(p, xi).row(0)


def select_bicubic_mitchell_positivized(st, xi: float, a: float = -0.5) -> TexelSelection:
    return mitchell_positivized_batch(st, xi, a).row(0)


def select_ewa(st, dst0, dst1, xi: float) -> TexelSelection:
    if ewa_is_degenerate(dst0, dst1):
        return ewa_batch(st, (0.0, 0.0), (0.0, 0.0), xi).row(0)
    return ewa_batch(st, dst0, dst1, xi).row(0)


def select_discrete_gaussian(uv, dims, sigma: float, xi: float) -> TexelSelection:
    """Gaussian FRS over the 4x4 window around normalized ``uv``."""
    st = np.asarray(uv, dtype=np.float64) * np.asarray(dims, dtype=np.float64) - 0.5
    return discrete_gaussian_batch(st, sigma, xi).row(0)


def fis_offset_uv(uv, dims, spec: KernelSpec, xi) -> tuple[float, float]:
    """Normalized ``uv`` jittered by a kernel draw per axis, in texel units.

    ``xi`` supplies ``fis_uniforms_needed(spec)`` uniforms: a Box-Muller pair
    for gaussian, otherwise the x-axis uniforms followed by the y-axis ones.
    """
    if spec.kind not in FIS_KINDS:
        raise NoContinuousSamplerError(spec.kind)
    dims = np.asarray(dims, dtype=np.float64)
    u = np.asarray(xi, dtype=np.float64).reshape(-1, 1)
    need = fis_uniforms_needed(spec)
    if u.shape[0] < need:
        raise ValueError(f"{spec.kind} jitter needs {need} uniforms")
    off = fis_jitter_batch(np.zeros((1, 2)), spec, u[:need])[0]
    out = np.asarray(uv, dtype=np.float64) + off / dims
    return float(out[0]), float(out[1])


def uv_to_texel(uv, dims) -> tuple[int, int]:
    """Nearest texel of a normalized ``uv``."""
    st = np.asarray(uv, dtype=np.float64) * np.asarray(dims, dtype=np.float64) - 0.5
    c = backend.get().nearest(st.reshape(1, 2))[0]
    return int(c[0]), int(c[1])


# --- level of detail -------------------------------------------------------

def lod_axes(dims, dst0, dst1, max_aniso: float = DEFAULT_MAX_ANISOTROPY):
    """Minor/major footprint axis lengths in texels, minor widened to the ratio limit.

    Vectorized over leading dimensions of ``dst0`` / ``dst1`` (normalized uv
    gradients along screen x and y).
    """
    if not max_aniso >= 1:
        raise ValueError("max_aniso must be >= 1")
    dims = np.asarray(dims, dtype=np.float64)
    ax = np.asarray(dst0, dtype=np.float64) * dims
    ay = np.asarray(dst1, dtype=np.float64) * dims
    lx = np.sqrt(np.sum(ax * ax, axis=-1))
    ly = np.sqrt(np.sum(ay * ay, axis=-1))
    minor = np.minimum(lx, ly)
    major = np.maximum(lx, ly)
    widen = (minor > 0) & (minor * max_aniso < major)
    with np.errstate(divide="ignore", invalid="ignore"):
        minor = np.where(widen, major / max_aniso, minor)
    return minor, major


def continuous_lod(dims, dst0, dst1, min_lod, max_lod, max_aniso, u=0.5, lod_bias: float = 0.0):
    """``clamp(log2(minor) + bias + u - 0.5)``; ``u = 0.5`` gives the unjittered LOD."""
    minor, _ = lod_axes(dims, dst0, dst1, max_aniso)
    with np.errstate(divide="ignore"):
        lod = np.log2(minor) + lod_bias + (np.asarray(u, dtype=np.float64) - 0.5)
    return np.clip(np.where(minor > 0, lod, min_lod), min_lod, max_lod)


def stochastic_lod_batch(dims, dst0, dst1, min_lod: float, max_lod: float,
                         max_aniso: float, u, lod_bias: float = 0.0) -> np.ndarray:
    """Integer MIP level per lookup: jittered LOD rounded to nearest."""
    lod = continuous_lod(dims, dst0, dst1, min_lod, max_lod, max_aniso, u, lod_bias)
    return np.floor(lod + 0.5).astype(np.int64)


def stochastic_lod(dims, dst0, dst1, min_lod: float = 0.0, max_lod: float = 64.0,
                   max_aniso: float = DEFAULT_MAX_ANISOTROPY, u: float = 0.5):
    """Returns ``(level, (dst0, dst1))`` with gradients in texels of that level."""
    level = int(stochastic_lod_batch(dims, dst0, dst1, min_lod, max_lod, max_aniso, u))
    scale = np.asarray(dims, dtype=np.float64) / 2.0 ** level
    g0 = tuple(float(v) for v in np.asarray(dst0, dtype=np.float64) * scale)
    g1 = tuple(float(v) for v in np.asarray(dst1, dtype=np.float64) * scale)
    return level, (g0, g1)


def screen_jitter(pixel, xi2) -> tuple[float, float]:
    """Uniform position inside pixel ``(x, y)``; ``xi2 = (0.5, 0.5)`` is its centre."""
    out = []
    for p, u in zip(pixel, xi2):
        p = np.asarray(p, dtype=np.float64)
        v = p + 0.5 + (np.asarray(u, dtype=np.float64) - 0.5)
        # rounding can carry xi near 1 into the next pixel
        v = np.minimum(v, np.nextafter(p + 1.0, p))
        out.append(float(v) if v.ndim == 0 else v)
    return tuple(out)


def level_raster(uv, level_dims) -> np.ndarray:
    """Normalized uv to raster coords of a level (texel centres at +0.5)."""
    return np.asarray(uv, dtype=np.float64) * np.asarray(level_dims, dtype=np.float64) - 0.5


def mip_level_count(dims) -> int:
    """Levels produced by halving (rounding up) down to 1x1."""
    n, m = 1, max(int(d) for d in dims)
    while m > 1:
        m = (m + 1) // 2
        n += 1
    return n
