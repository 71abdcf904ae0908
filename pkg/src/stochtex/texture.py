"""Texel storage, instrumented fetching and exact deterministic filters.

Coordinates are texture raster coordinates with texel ``i`` located at the
integer position ``i`` along each axis.
"""

from __future__ import annotations

import functools
import itertools
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from ._tables import EWA_LUT, EWA_LUT_SIZE
from .kernels import KernelSpec, UnboundedSupportError, eval_kernel, tap_offsets

WRAP_MODES = ("clamp", "repeat")


class FetchCounter:
    """Thread-safe texel fetch counter."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    @property
    def count(self) -> int:
        return self._count

    def add(self, n: int = 1) -> None:
        with self._lock:
            self._count += int(n)

    def reset(self) -> None:
        with self._lock:
            self._count = 0


def _wrap(i: np.ndarray, n: int, mode: str) -> np.ndarray:
    if mode == "repeat":
        return np.mod(i, n)
    return np.clip(i, 0, n - 1)


class Image2D:
    """Row-major texel array of shape (height, width, channels)."""

    def __init__(self, data, wrap: str = "clamp"):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] < 1 or not 1 <= arr.shape[2] <= 4:
            raise ValueError(f"bad image shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("texel values must be finite")
        if wrap not in WRAP_MODES:
            raise ValueError(f"unknown wrap mode {wrap!r}")
        self.data = arr
        self.wrap = wrap

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def dims(self) -> tuple[int, int]:
        return (self.width, self.height)

    @property
    def ndim(self) -> int:
        return 2

    def fetch(self, ix, iy, counter: FetchCounter | None = None) -> np.ndarray:
        """Texels at integer coords after wrapping; shape ``(..., channels)``."""
        ix = np.asarray(ix, dtype=np.int64)
        iy = np.asarray(iy, dtype=np.int64)
        if counter is not None:
            counter.add(np.broadcast(ix, iy).size)
        return self.data[_wrap(iy, self.height, self.wrap), _wrap(ix, self.width, self.wrap)]

    def fetch_coords(self, coords, counter: FetchCounter | None = None) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64)
        return self.fetch(coords[..., 0], coords[..., 1], counter)

    def with_data(self, data) -> "Image2D":
        return Image2D(data, self.wrap)


class Grid3D:
    """Dense voxel grid, x fastest; stored as array (nz, ny, nx)."""

    wrap = "clamp"

    def __init__(self, data):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValueError(f"bad grid shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("voxel values must be finite")
        self.data = arr

    @property
    def dims(self) -> tuple[int, int, int]:
        nz, ny, nx = self.data.shape
        return (nx, ny, nz)

    @property
    def channels(self) -> int:
        return 1

    @property
    def ndim(self) -> int:
        return 3

    def fetch(self, ix, iy, iz, counter: FetchCounter | None = None) -> np.ndarray:
        ix, iy, iz = (np.asarray(v, dtype=np.int64) for v in (ix, iy, iz))
        if counter is not None:
            counter.add(np.broadcast(ix, iy, iz).size)
        nx, ny, nz = self.dims
        v = self.data[np.clip(iz, 0, nz - 1), np.clip(iy, 0, ny - 1), np.clip(ix, 0, nx - 1)]
        return v[..., None]

    def fetch_coords(self, coords, counter: FetchCounter | None = None) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64)
        return self.fetch(coords[..., 0], coords[..., 1], coords[..., 2], counter)


def fetch_texel(tex, coord, counter: FetchCounter) -> np.ndarray:
    """Fetch one texel (wrap applied) and bump ``counter`` by one."""
    return tex.fetch_coords(np.asarray(coord, dtype=np.int64), counter)


@dataclass
class LookupRequest:
    uv: tuple
    dst0: tuple = (0.0, 0.0)
    dst1: tuple = (0.0, 0.0)
    lod_bias: float = 0.0
    max_anisotropy: float = 64.0


@functools.lru_cache(maxsize=None)
def _tap_grid(k: int, d: int) -> np.ndarray:
    """Per-tap offset indices (k**d, d), x fastest."""
    return np.array(list(itertools.product(range(k), repeat=d)))[:, ::-1]


def footprint(coords: np.ndarray, spec: KernelSpec, window: int | None = None):
    """Separable footprint for lookups ``coords`` of shape (N, d).

    Returns integer tap coordinates (N, T, d) and unnormalized product
    weights (N, T), taps enumerated with the x axis fastest.
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=np.float64))
    n, d = coords.shape
    base = np.floor(coords)
    fract = coords - base
    offs = tap_offsets(spec, window)
    # per-axis weights (N, d, k)
    x = fract[:, :, None] - offs[None, None, :]
    if spec.kind == "gaussian":
        # scaled so the nearest tap weighs 1; narrow kernels would underflow to all zeros
        x2 = x * x
        w_axis = np.exp(-(x2 - x2.min(axis=-1, keepdims=True)) / (2.0 * spec.sigma * spec.sigma))
    else:
        w_axis = eval_kernel(spec, x)
    tap_coords = base[:, None, :].astype(np.int64) + offs[_tap_grid(len(offs), d)][None, :, :]
    weights = w_axis[:, d - 1]
    for axis in range(d - 2, -1, -1):
        weights = (weights[:, :, None] * w_axis[:, axis, None, :]).reshape(n, -1)
    return tap_coords, weights


def filter_batch(tex, coords, spec: KernelSpec, window: int | None = None,
                 counter: FetchCounter | None = None) -> np.ndarray:
    """Normalized separable filter at each row of ``coords``; (N, channels)."""
    tap_coords, w = footprint(coords, spec, window)
    vals = tex.fetch_coords(tap_coords, counter)
    return np.einsum("nt,ntc->nc", w, vals) / w.sum(axis=1)[:, None]


def filter_deterministic(tex, request, spec: KernelSpec, window: int | None = None,
                         counter: FetchCounter | None = None) -> np.ndarray:
    """Exact filtered value ``sum(w t) / sum(w)`` at one lookup point."""
    uv = request.uv if isinstance(request, LookupRequest) else request
    if math.isinf(spec.radius) and window is None:
        raise UnboundedSupportError()
    return filter_batch(tex, np.asarray(uv, dtype=np.float64)[None, :], spec, window, counter)[0]


# --- EWA -------------------------------------------------------------------

@dataclass
class EwaEllipse:
    A: float
    B: float
    C: float
    bounds: tuple[int, int, int, int]  # s0, s1, t0, t1 inclusive
    center: tuple[float, float] = field(default=(0.0, 0.0))

    def r2(self, s, t):
        ss = np.asarray(s, dtype=np.float64) - self.center[0]
        tt = np.asarray(t, dtype=np.float64) - self.center[1]
        return self.A * (ss * ss) + self.B * ss * tt + self.C * (tt * tt)


def ewa_is_degenerate(dst0, dst1) -> bool:
    return not (np.any(np.asarray(dst0) != 0) or np.any(np.asarray(dst1) != 0))


def ewa_ellipse(st, dst0, dst1) -> EwaEllipse:
    """Ellipse coefficients and bounding box for an EWA lookup."""
    d0x, d0y = float(dst0[0]), float(dst0[1])
    d1x, d1y = float(dst1[0]), float(dst1[1])
    A = d0y * d0y + d1y * d1y + 1.0
    B = -2.0 * (d0x * d0y + d1x * d1y)
    C = d0x * d0x + d1x * d1x + 1.0
    inv_f = 1.0 / (A * C - B * B * 0.25)
    A *= inv_f
    B *= inv_f
    C *= inv_f
    det = -B * B + 4.0 * A * C
    inv_det = 1.0 / det
    u_sqrt = math.sqrt(max(0.0, det * C))
    v_sqrt = math.sqrt(max(0.0, A * det))
    s0 = math.ceil(st[0] - 2.0 * inv_det * u_sqrt)
    s1 = math.floor(st[0] + 2.0 * inv_det * u_sqrt)
    t0 = math.ceil(st[1] - 2.0 * inv_det * v_sqrt)
    t1 = math.floor(st[1] + 2.0 * inv_det * v_sqrt)
    return EwaEllipse(A, B, C, (s0, s1, t0, t1), (float(st[0]), float(st[1])))


def ewa_lut_weight(r2):
    idx = np.minimum((np.asarray(r2) * EWA_LUT_SIZE).astype(np.int64), EWA_LUT_SIZE - 1)
    return EWA_LUT[idx]


def ewa_taps(st, dst0, dst1):
    """All (coords, weight) pairs with positive EWA weight, scan order."""
    e = ewa_ellipse(st, dst0, dst1)
    s0, s1, t0, t1 = e.bounds
    tt, ss = np.meshgrid(np.arange(t0, t1 + 1), np.arange(s0, s1 + 1), indexing="ij")
    ss = ss.ravel()
    tt = tt.ravel()
    r2 = e.r2(ss, tt)
    inside = r2 < 1.0
    w = np.where(inside, ewa_lut_weight(np.where(inside, r2, 0.0)), 0.0)
    keep = w > 0
    return np.stack([ss[keep], tt[keep]], axis=1), w[keep]


def ewa_deterministic(image: Image2D, request: LookupRequest,
                      counter: FetchCounter | None = None) -> np.ndarray:
    """Normalized EWA filter; falls back to bilinear for zero gradients."""
    if ewa_is_degenerate(request.dst0, request.dst1):
        return filter_deterministic(image, request.uv, KernelSpec("tent"), counter=counter)
    coords, w = ewa_taps(request.uv, request.dst0, request.dst1)
    vals = image.fetch_coords(coords, counter)
    return (w[:, None] * vals).sum(axis=0) / w.sum()


# --- MIP pyramid -----------------------------------------------------------

class MipPyramid:
    def __init__(self, levels: list[Image2D]):
        self.levels = levels

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, i) -> Image2D:
        return self.levels[i]


def _downsample(data: np.ndarray) -> np.ndarray:
    h, w, c = data.shape
    nh, nw = (h + 1) // 2, (w + 1) // 2
    acc = np.zeros((nh, nw, c))
    cnt = np.zeros((nh, nw, 1))
    for dy in (0, 1):
        for dx in (0, 1):
            sub = data[dy::2, dx::2]
            acc[: sub.shape[0], : sub.shape[1]] += sub
            cnt[: sub.shape[0], : sub.shape[1]] += 1
    return acc / cnt


def build_mip_pyramid(image: Image2D) -> MipPyramid:
    """Box-prefiltered pyramid down to 1x1 (odd sizes round up)."""
    levels = [image]
    data = image.data
    while data.shape[0] > 1 or data.shape[1] > 1:
        data = _downsample(data)
        levels.append(Image2D(data, image.wrap))
    return MipPyramid(levels)
