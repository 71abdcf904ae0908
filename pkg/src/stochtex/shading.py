"""BRDF evaluation and the three texture-filtering orders.

Shading points are batched: vector fields of :class:`ShadingContext` may be
``(3,)`` or ``(N, 3)``, lookup coords ``(2,)`` or ``(N, 2)``. Lookup coords
are raster coordinates of the bound textures, which must share dimensions.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import filters
from .kernels import FIS_KINDS, KernelSpec, NoContinuousSamplerError, box_muller, density_uniforms_needed, sample_kernel_density
from .sampling import ONE_MINUS_EPSILON
from .texture import FetchCounter, Grid3D, Image2D, ewa_is_degenerate, ewa_taps, footprint

EPS = 1e-6
ROUGHNESS_MIN = 0.01
TRIPLANAR_SHARPNESS = 4.0

# CODATA constants, SI units
PLANCK_H = 6.62607015e-34
LIGHT_C = 299792458.0
BOLTZMANN_K = 1.380649e-23
PLANCK_WAVELENGTHS = (630e-9, 532e-9, 465e-9)
PLANCK_REFERENCE_T = 6500.0


def _normalize(v):
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.maximum(n, 1e-300)


def _dot(a, b):
    return np.sum(a * b, axis=-1)


@dataclass
class ShadingContext:
    position: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    bitangent: np.ndarray
    wo: np.ndarray
    light_dir: np.ndarray
    light_radiance: np.ndarray = field(default_factory=lambda: np.ones(3))
    uv: np.ndarray = field(default_factory=lambda: np.zeros(2))
    dst0: np.ndarray = field(default_factory=lambda: np.zeros(2))
    dst1: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        for name in ("position", "normal", "tangent", "bitangent", "wo", "light_dir",
                     "light_radiance", "uv", "dst0", "dst1"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))

    def validate(self, tol: float = 1e-6) -> None:
        for name in ("normal", "tangent", "bitangent", "wo", "light_dir"):
            if np.any(np.abs(np.linalg.norm(getattr(self, name), axis=-1) - 1.0) > tol):
                raise ValueError(f"{name} is not unit length")
        for a, b in (("normal", "tangent"), ("normal", "bitangent"), ("tangent", "bitangent")):
            if np.any(np.abs(_dot(getattr(self, a), getattr(self, b))) > tol):
                raise ValueError(f"{a} and {b} are not orthogonal")

    @property
    def batch_shape(self) -> tuple:
        return np.broadcast_shapes(self.position.shape[:-1], self.normal.shape[:-1], self.uv.shape[:-1],
                                   self.wo.shape[:-1])

    def lookup(self) -> np.ndarray:
        return np.broadcast_to(self.uv, self.batch_shape + (2,)).reshape(-1, 2)


@dataclass
class BrdfParams:
    albedo: np.ndarray  # (..., 3)
    roughness: np.ndarray  # (...)
    metalness: np.ndarray  # (...)
    normal: np.ndarray | None = None  # world-space shading normal (..., 3)


@dataclass
class MaterialBindings:
    """Textures (or constants) feeding the BRDF.

    ``observer`` is called with every metalness array handed to the BRDF.
    """

    albedo: Image2D | tuple | float = (0.8, 0.8, 0.8)  # or any texture with fetch_coords
    normal_map: Image2D | None = None
    roughness: Image2D | float = 0.5
    metalness: Image2D | float = 0.0
    specular: bool = True
    observer: Callable[[np.ndarray], None] | None = None

    def with_textures(self, textures: dict) -> "MaterialBindings":
        return dataclasses.replace(self, **textures)

    def textures(self) -> dict[str, Image2D]:
        out = {}
        for name in ("albedo", "normal_map", "roughness", "metalness"):
            v = getattr(self, name)
            if hasattr(v, "fetch_coords"):
                out[name] = v
        dims = {t.dims for t in out.values()}
        if len(dims) > 1:
            raise ValueError(f"bound textures must share dimensions, got {sorted(dims)}")
        return out


# --- BRDF ------------------------------------------------------------------

def _smith_g1(ndx, alpha2):
    return 2.0 * ndx / np.maximum(ndx + np.sqrt(alpha2 + (1.0 - alpha2) * ndx * ndx), EPS)


def shade(ctx: ShadingContext, params: BrdfParams, specular: bool = True) -> np.ndarray:
    """Reflected radiance toward ``ctx.wo`` from the directional light; (..., 3)."""
    n = ctx.normal if params.normal is None else params.normal
    l, v = ctx.light_dir, ctx.wo
    albedo = np.asarray(params.albedo, dtype=np.float64)
    metal = np.asarray(params.metalness, dtype=np.float64)[..., None]
    rough = np.clip(np.asarray(params.roughness, dtype=np.float64), ROUGHNESS_MIN, 1.0)[..., None]
    ndl = _dot(n, l)[..., None]
    out = (1.0 - metal) * albedo / math.pi
    if specular:
        ndv = np.maximum(_dot(n, v)[..., None], EPS)
        cl = np.maximum(ndl, EPS)
        h = _normalize(l + v)
        ndh = np.maximum(_dot(n, h)[..., None], 0.0)
        vdh = np.clip(_dot(v, h)[..., None], 0.0, 1.0)
        alpha = rough * rough
        a2 = alpha * alpha
        denom = ndh * ndh * (a2 - 1.0) + 1.0
        d = a2 / np.maximum(math.pi * denom * denom, EPS)
        g = _smith_g1(cl, a2) * _smith_g1(ndv, a2)
        f0 = 0.04 * (1.0 - metal) + albedo * metal
        f = f0 + (1.0 - f0) * (1.0 - vdh) ** 5
        out = out + d * g * f / np.maximum(4.0 * cl * ndv, EPS)
    return out * np.maximum(ndl, 0.0) * ctx.light_radiance


def planck_emission(temperature) -> np.ndarray:
    """Blackbody RGB at three wavelengths; 6500 K has a peak channel of 1."""
    t = np.asarray(temperature, dtype=np.float64)
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise ValueError("temperature must be finite and non-negative")
    return _planck_raw(t) / _PLANCK_NORM


def _planck_raw(t):
    # T = 0 gives 1/T = inf and radiance 0; no NaN is possible for T >= 0
    t = np.asarray(t, dtype=np.float64)
    out = np.empty(t.shape + (len(PLANCK_WAVELENGTHS),))
    with np.errstate(divide="ignore", over="ignore"):
        inv_t = 1.0 / t
        for i, lam in enumerate(PLANCK_WAVELENGTHS):
            x = inv_t * (PLANCK_H * LIGHT_C / (lam * BOLTZMANN_K))
            out[..., i] = (2.0 * PLANCK_H * LIGHT_C**2 / lam**5) / np.expm1(x)
    return out


_PLANCK_NORM = float(_planck_raw(np.float64(PLANCK_REFERENCE_T)).max())


# --- parameter decoding ----------------------------------------------------

def _const_rows(v, n: int, width: int) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64).reshape(-1)
    if a.size == 1:
        a = np.repeat(a, width)
    return np.broadcast_to(a[:width], (n, width))


def _rgb(raw: np.ndarray) -> np.ndarray:
    if raw.shape[-1] >= 3:
        return raw[..., :3]
    return np.repeat(raw[..., :1], 3, axis=-1)


def decode_normal(ctx_frame, rgb) -> np.ndarray:
    """Tangent-space RGB in [0,1] to a unit world-space normal."""
    t, b, n = ctx_frame
    m = 2.0 * np.asarray(rgb, dtype=np.float64)[..., :3] - 1.0
    return _normalize(m[..., 0:1] * t + m[..., 1:2] * b + m[..., 2:3] * n)


def _frame(ctx, shape):
    return tuple(np.broadcast_to(getattr(ctx, k), shape + (3,)) for k in ("tangent", "bitangent", "normal"))


def decode_params(ctx: ShadingContext, bindings: MaterialBindings, raw: dict, shape: tuple) -> BrdfParams:
    """Turn raw (possibly filtered) texel values into BRDF parameters.

    ``raw`` maps texture names to arrays of shape ``shape + (channels,)``;
    unbound parameters come from the constants in ``bindings``.
    """
    n = int(np.prod(shape)) if shape else 1

    def get(name, width):
        if name in raw:
            return raw[name]
        return _const_rows(getattr(bindings, name), n, width).reshape(shape + (width,))

    albedo = _rgb(get("albedo", 3))
    rough = get("roughness", 1)[..., 0]
    metal = get("metalness", 1)[..., 0]
    normal = None
    if "normal_map" in raw:
        normal = decode_normal(_frame(ctx, shape), raw["normal_map"])
    if bindings.observer is not None:
        bindings.observer(np.array(metal, copy=True))
    return BrdfParams(albedo, rough, metal, normal)


def _ctx_rows(ctx: ShadingContext, shape: tuple) -> ShadingContext:
    """Context with per-point vectors broadcast to ``shape`` (leading dims)."""
    def b(v):
        v = np.asarray(v)
        lead = v.shape[:-1]
        if lead and len(shape) > len(lead):
            v = v.reshape(lead + (1,) * (len(shape) - len(lead)) + v.shape[-1:])
        return np.broadcast_to(v, shape + v.shape[-1:])

    return ShadingContext(b(ctx.position), b(ctx.normal), b(ctx.tangent), b(ctx.bitangent),
                          b(ctx.wo), b(ctx.light_dir), b(ctx.light_radiance), b(ctx.uv),
                          b(ctx.dst0), b(ctx.dst1))


def _finish(ctx: ShadingContext, out: np.ndarray) -> np.ndarray:
    return out.reshape(ctx.batch_shape + (3,))


# --- filter footprints -----------------------------------------------------

@dataclass(frozen=True)
class FisFilter:
    """Filter realized by jittering with ``spec`` and fetching the nearest texel.

    tent and bspline3 are realized exactly; gaussian becomes the Gaussian
    integrated over each texel cell (no truncation).
    """

    spec: KernelSpec

    def __post_init__(self):
        if self.spec.kind not in FIS_KINDS:
            raise NoContinuousSamplerError(self.spec.kind)


Filter = KernelSpec | FisFilter | str  # a kernel, its FIS realization, or "ewa"

FIS_GAUSSIAN_WINDOW = 8


def _fis_gaussian_taps(sigma: float, st: np.ndarray):
    base = np.floor(st)
    f = st - base
    offs = np.arange(-(FIS_GAUSSIAN_WINDOW - 1) // 2, FIS_GAUSSIAN_WINDOW - (FIS_GAUSSIAN_WINDOW - 1) // 2)
    s = sigma * math.sqrt(2.0)
    erf = np.vectorize(math.erf, otypes=[np.float64])
    # per-axis cell probabilities (N, 2, k)
    lo = (offs[None, None, :] - 0.5 - f[:, :, None]) / s
    hi = (offs[None, None, :] + 0.5 - f[:, :, None]) / s
    w_axis = 0.5 * (erf(hi) - erf(lo))
    k = len(offs)
    ty, tx = np.divmod(np.arange(k * k), k)
    coords = base[:, None, :].astype(np.int64) + np.stack([offs[tx], offs[ty]], axis=-1)[None]
    w = w_axis[:, 0, tx] * w_axis[:, 1, ty]
    return coords, w


def filter_taps(flt: Filter, st: np.ndarray, dst0=None, dst1=None):
    """Tap coords (N, T, 2) and normalized weights (N, T) for lookups ``st``.

    EWA footprints vary in size; they are padded with zero-weight taps.
    """
    st = np.atleast_2d(np.asarray(st, dtype=np.float64))
    if isinstance(flt, FisFilter):
        if flt.spec.kind == "gaussian":
            coords, w = _fis_gaussian_taps(flt.spec.sigma, st)
            return coords, w / w.sum(axis=1, keepdims=True)
        flt = flt.spec
    if isinstance(flt, KernelSpec):
        window = filters.GAUSSIAN_WINDOW if flt.kind == "gaussian" else None
        coords, w = footprint(st, flt, window)
        return coords, w / w.sum(axis=1, keepdims=True)
    if flt != "ewa":
        raise ValueError(f"unknown filter {flt!r}")
    n = len(st)
    d0 = np.broadcast_to(np.asarray(dst0, dtype=np.float64), (n, 2))
    d1 = np.broadcast_to(np.asarray(dst1, dtype=np.float64), (n, 2))
    per = []
    for i in range(n):
        if ewa_is_degenerate(d0[i], d1[i]):
            c, w = footprint(st[i:i + 1], KernelSpec("tent"))
            per.append((c[0], w[0]))
        else:
            per.append(ewa_taps(st[i], d0[i], d1[i]))
    t = max(len(w) for _, w in per)
    coords = np.zeros((n, t, 2), dtype=np.int64)
    weights = np.zeros((n, t))
    for i, (c, w) in enumerate(per):
        coords[i, : len(w)] = c
        coords[i, len(w):] = c[0]
        weights[i, : len(w)] = w / w.sum()
    return coords, weights


def _fetch_raw(bindings: MaterialBindings, coords: np.ndarray, counter: FetchCounter | None) -> dict:
    return {name: tex.fetch_coords(coords, counter) for name, tex in bindings.textures().items()}


def filter_parameters(bindings: MaterialBindings, flt: Filter, st, dst0=None, dst1=None,
                      counter: FetchCounter | None = None) -> dict:
    """Deterministically filtered raw texel values per bound texture, (N, C)."""
    coords, w = filter_taps(flt, st, dst0, dst1)
    raw = _fetch_raw(bindings, coords, counter)
    return {k: np.einsum("nt,ntc->nc", w, v) for k, v in raw.items()}


# --- filtering orders ------------------------------------------------------

def radiance_filter_before(ctx: ShadingContext, bindings: MaterialBindings, flt: Filter,
                           counter: FetchCounter | None = None) -> np.ndarray:
    """Filter every texture parameter, then shade once."""
    st = ctx.lookup()
    n = len(st)
    raw = filter_parameters(bindings, flt, st, _rows2(ctx.dst0, n), _rows2(ctx.dst1, n), counter)
    c = _ctx_rows(ctx, (n,))
    return _finish(ctx, shade(c, decode_params(c, bindings, raw, (n,)), bindings.specular))


def _rows2(v, n):
    return np.broadcast_to(np.asarray(v, dtype=np.float64), (n, 2)) if v is not None else None


def radiance_filter_after_exhaustive(ctx: ShadingContext, bindings: MaterialBindings, flt: Filter,
                                     counter: FetchCounter | None = None) -> np.ndarray:
    """Shade every footprint texel with its own parameters; weight the radiances."""
    st = ctx.lookup()
    n = len(st)
    coords, w = filter_taps(flt, st, _rows2(ctx.dst0, n), _rows2(ctx.dst1, n))
    t = coords.shape[1]
    raw = _fetch_raw(bindings, coords, counter)
    c = _ctx_rows(ctx, (n, t))
    lo = shade(c, decode_params(c, bindings, raw, (n, t)), bindings.specular)
    return _finish(ctx, np.einsum("nt,ntc->nc", w, lo))


def selection_method(flt: Filter) -> str:
    """FRS selection routine matching a filter."""
    if isinstance(flt, FisFilter):
        return "fis"
    if isinstance(flt, str):
        if flt == "ewa":
            return "ewa"
        raise ValueError(f"unknown filter {flt!r}")
    return {"box": "nearest", "tent": "bilinear", "bspline3": "bicubic", "mitchell": "mitchell",
            "gaussian": "gaussian"}.get(flt.kind) or _no_frs(flt)


def _no_frs(flt):
    raise ValueError(f"no stochastic selection for kernel {flt.kind!r}")


def select_texels(flt: Filter, st, xi, selection: str = "frs", dst0=None, dst1=None):
    """One texel selection per lookup, by FRS or FIS."""
    st = np.atleast_2d(np.asarray(st, dtype=np.float64))
    if isinstance(flt, FisFilter):
        flt, selection = flt.spec, "fis"
    if selection == "fis":
        if not isinstance(flt, KernelSpec):
            raise ValueError("FIS needs a kernel filter")
        return filters.fis_batch(st, flt, xi)
    if selection != "frs":
        raise ValueError(f"unknown selection {selection!r}")
    spec = flt if isinstance(flt, KernelSpec) else KernelSpec()
    return filters.select_batch(selection_method(flt), st, xi, sigma=spec.sigma, a=spec.a,
                                dst0=dst0, dst1=dst1)


def radiance_filter_after_stochastic(ctx: ShadingContext, bindings: MaterialBindings, flt: Filter,
                                     xi, selection: str = "frs", counter: FetchCounter | None = None,
                                     independent: bool = False) -> np.ndarray:
    """Shade one selected texel (two for positivized kernels) per lookup.

    With ``independent`` every bound texture draws its own texel from the
    matching row of ``xi``; that estimator converges to a product-of-filters
    integral instead of the filter-after-shading value.
    """
    st = ctx.lookup()
    n = len(st)
    d0, d1 = _rows2(ctx.dst0, n), _rows2(ctx.dst1, n)
    texs = bindings.textures()
    c = _ctx_rows(ctx, (n,))
    if independent:
        xi = np.asarray(xi, dtype=np.float64)
        raw = {}
        for k, (name, tex) in enumerate(texs.items()):
            sel = select_texels(flt, st, xi[k], selection, d0, d1)
            if sel.neg_weights is not None:
                raise ValueError("independent selection does not support signed kernels")
            raw[name] = tex.fetch_coords(sel.coords, counter)
        return _finish(ctx, shade(c, decode_params(c, bindings, raw, (n,)), bindings.specular))
    sel = select_texels(flt, st, xi, selection, d0, d1)
    raw = _fetch_raw(bindings, sel.coords, counter)
    lo = shade(c, decode_params(c, bindings, raw, (n,)), bindings.specular)
    if sel.weights is not None:
        lo = sel.weights[:, None] * lo
    if sel.neg_weights is not None:
        neg = sel.has_negative
        if np.any(neg):
            cn = _ctx_rows(ctx, (n,))
            cn = ShadingContext(*(getattr(cn, f)[neg] for f in _CTX_FIELDS))
            raw_n = _fetch_raw(bindings, sel.neg_coords[neg], counter)
            lo_n = shade(cn, decode_params(cn, bindings, raw_n, (int(neg.sum()),)), bindings.specular)
            lo[neg] -= sel.neg_weights[neg, None] * lo_n
    return _finish(ctx, lo)


_CTX_FIELDS = ("position", "normal", "tangent", "bitangent", "wo", "light_dir", "light_radiance",
               "uv", "dst0", "dst1")


def radiance_split_filter(ctx: ShadingContext, bindings: MaterialBindings, reconstruction: Filter,
                          lowpass: KernelSpec | None, xi, counter: FetchCounter | None = None) -> np.ndarray:
    """Sample a lookup position from ``lowpass``, reconstruct it exactly, shade once.

    ``lowpass`` offsets are in texels; ``None`` is a delta. ``xi`` has shape
    ``(2 * density_uniforms_needed(lowpass), N)``: x-axis rows then y-axis rows.
    """
    st = ctx.lookup().copy()
    if lowpass is not None:
        u = np.asarray(xi, dtype=np.float64).reshape(-1, len(st))
        k = density_uniforms_needed(lowpass)
        if lowpass.kind == "gaussian":
            cx, sy = box_muller(u[0], u[1])
            st[:, 0] += lowpass.sigma * cx
            st[:, 1] += lowpass.sigma * sy
        else:
            st[:, 0] += sample_kernel_density(lowpass, u[:k])
            st[:, 1] += sample_kernel_density(lowpass, u[k:2 * k])
    moved = dataclasses.replace(ctx, uv=st.reshape(ctx.batch_shape + (2,)))
    return radiance_filter_before(moved, bindings, reconstruction, counter)


def split_uniforms_needed(lowpass: KernelSpec | None) -> int:
    if lowpass is None:
        return 0
    if lowpass.kind == "gaussian":
        return 2
    return 2 * density_uniforms_needed(lowpass)


# --- triplanar -------------------------------------------------------------

TRIPLANAR_AXES = ((1, 2), (0, 2), (0, 1))  # projection planes for dominant x, y, z


def triplanar_weights(normal, sharpness: float = TRIPLANAR_SHARPNESS) -> np.ndarray:
    a = np.abs(np.asarray(normal, dtype=np.float64)) ** sharpness
    return a / a.sum(axis=-1, keepdims=True)


def triplanar_uv(position, plane: int, dims, scale: float = 1.0) -> np.ndarray:
    """Raster coords of ``position`` projected along axis ``plane``."""
    i, j = TRIPLANAR_AXES[plane]
    p = np.asarray(position, dtype=np.float64)
    uv = np.stack([p[..., i], p[..., j]], axis=-1) * scale
    return filters.level_raster(uv, dims)


def triplanar(ctx: ShadingContext, bindings: MaterialBindings, flt: Filter, xi=None,
              mode: str = "deterministic", scale: float = 1.0, selection: str = "frs",
              counter: FetchCounter | None = None) -> np.ndarray:
    """Blend of three planar projections by the normal.

    deterministic: filter-before shading per plane, radiances blended.
    exhaustive: filter-after shading per plane, radiances blended.
    stochastic: ``xi[0]`` picks one plane by its blend weight; the warped
    uniform drives a single-texel selection on that plane (``xi[1:]`` feed
    FIS when ``selection == "fis"``).
    """
    dims = next(iter(bindings.textures().values())).dims
    shape = ctx.batch_shape
    n = int(np.prod(shape)) if shape else 1
    c = _ctx_rows(ctx, (n,))
    w = triplanar_weights(c.normal)
    if mode in ("deterministic", "exhaustive"):
        plane_fn = radiance_filter_before if mode == "deterministic" else radiance_filter_after_exhaustive
        out = np.zeros((n, 3))
        for plane in range(3):
            live = w[:, plane] > 0
            if not np.any(live):
                continue
            sub = ShadingContext(*(getattr(c, f)[live] for f in _CTX_FIELDS[:7]),
                                 uv=triplanar_uv(c.position[live], plane, dims, scale))
            out[live] += w[live, plane, None] * plane_fn(sub, bindings, flt, counter)
        return out.reshape(shape + (3,))
    if mode != "stochastic":
        raise ValueError(f"unknown triplanar mode {mode!r}")
    xi = np.asarray(xi, dtype=np.float64).reshape(-1, n)
    cdf = np.cumsum(w, axis=1)
    u = xi[0]
    plane = np.sum(u[:, None] >= cdf[:, :2], axis=1)
    # rounding can land on a zero-weight plane past the end of the cdf
    for _ in range(2):
        plane = np.where((w[np.arange(n), plane] <= 0) & (plane > 0), plane - 1, plane)
    cdf_lo = np.where(plane == 0, 0.0, cdf[np.arange(n), np.maximum(plane - 1, 0)])
    u = np.minimum((u - cdf_lo) / w[np.arange(n), plane], ONE_MINUS_EPSILON)
    out = np.zeros((n, 3))
    for k in range(3):
        m = plane == k
        if not np.any(m):
            continue
        sub = ShadingContext(*(getattr(c, f)[m] for f in _CTX_FIELDS[:7]),
                             uv=triplanar_uv(c.position[m], k, dims, scale))
        sx = xi[1:, m] if selection == "fis" else u[m]
        out[m] = radiance_filter_after_stochastic(sub, bindings, flt, sx, selection, counter)
    return out.reshape(shape + (3,))


# --- volumetric emission ---------------------------------------------------

def emission_filter_before(grid: Grid3D, p, flt: KernelSpec, counter: FetchCounter | None = None) -> np.ndarray:
    """Planck of the filtered temperature at raster positions ``p`` (N, 3)."""
    coords, w = footprint(np.atleast_2d(p), flt)
    temp = np.einsum("nt,ntc->nc", w / w.sum(axis=1, keepdims=True), grid.fetch_coords(coords, counter))
    return planck_emission(np.maximum(temp[:, 0], 0.0))


def emission_filter_after_exhaustive(grid: Grid3D, p, flt: KernelSpec,
                                     counter: FetchCounter | None = None) -> np.ndarray:
    coords, w = footprint(np.atleast_2d(p), flt)
    e = planck_emission(np.maximum(grid.fetch_coords(coords, counter)[..., 0], 0.0))
    return np.einsum("nt,ntc->nc", w / w.sum(axis=1, keepdims=True), e)


def emission_filter_after_stochastic(grid: Grid3D, p, flt: KernelSpec, xi, selection: str = "frs",
                                     counter: FetchCounter | None = None) -> np.ndarray:
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    if selection == "fis":
        sel = filters.fis_batch(p, flt, xi)
    else:
        method = {"box": "nearest", "tent": "trilinear", "bspline3": "tricubic"}.get(flt.kind)
        if method is None:
            raise ValueError(f"no 3D selection for kernel {flt.kind!r}")
        sel = filters.select_batch(method, p, xi)
    return planck_emission(np.maximum(grid.fetch_coords(sel.coords, counter)[:, 0], 0.0))
