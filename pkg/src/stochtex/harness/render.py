"""Tile renderer: screen jitter, analytic hits, texture filtering, shading."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .. import filters, shading
from ..kernels import FIS_KINDS, KernelSpec
from ..sampling import NoiseSource, RngStream
from ..shading import FisFilter, ShadingContext
from ..texture import FetchCounter, Image2D, filter_batch
from .config import SceneConfig
from .scenes import LIGHT_DIR, LIGHT_RADIANCE, build_scene
from .stats import RenderStats, compare

MAX_ROWS = 1 << 16
# uniform dimensions per sample
DIM_JITTER_X, DIM_JITTER_Y, DIM_LOD, DIM_SELECT = 0, 1, 2, 3
STEP_STRIDE = 16  # emission: dims per ray-march step, last one jitters the step


def make_filter(cfg: SceneConfig):
    if cfg.filter == "ewa":
        return "ewa"
    spec = KernelSpec(cfg.filter, a=cfg.filter_a, n=cfg.filter_n, sigma=cfg.filter_sigma)
    if cfg.selection == "fis" and spec.kind in FIS_KINDS:
        return FisFilter(spec)
    return spec


def make_noise(cfg: SceneConfig) -> NoiseSource:
    if cfg.noise == "mask":
        return NoiseSource.from_directory(cfg.mask_dir, cfg.seed)
    return NoiseSource("white", cfg.seed)


class _Uniforms:
    """Per-row uniform lookups for a batch of (pixel, sample) keys."""

    def __init__(self, noise, px, py, s):
        self.noise, self.px, self.py, self.s = noise, px, py, s

    def __call__(self, dim, rows=None):
        if rows is None:
            return self.noise.uniforms(self.px, self.py, self.s, dim)
        return self.noise.uniforms(self.px[rows], self.py[rows], self.s[rows], dim)

    def stack(self, dims, rows=None):
        return np.stack([self(d, rows) for d in dims]) if len(dims) else np.zeros((0, len(self.px)))


def _xi_rows(cfg, flt, u: _Uniforms, rows, n_textures: int, d: int = 2):
    if isinstance(flt, FisFilter):
        need = filters.fis_uniforms_needed(flt.spec, d)
        return u.stack(range(DIM_SELECT, DIM_SELECT + need), rows)
    if cfg.independent_selection:
        return u.stack(range(DIM_SELECT, DIM_SELECT + n_textures), rows)
    return u(DIM_SELECT, rows)


def _ctx(hits, rows, st, d0, d1) -> ShadingContext:
    return ShadingContext(hits.position[rows], hits.normal[rows], hits.tangent[rows], hits.bitangent[rows],
                          hits.wo[rows], LIGHT_DIR, LIGHT_RADIANCE, st, d0, d1)


def _level_plan(scene, cfg, hits, u: _Uniforms, rows):
    """List of (level index array, weight array) pairs per lookup."""
    nlev = len(scene.levels)
    n = len(rows)
    if not cfg.mip or nlev == 1:
        return [(np.zeros(n, dtype=np.int64), np.ones(n))]
    dims0 = scene.dims[0]
    d0, d1 = hits.duv_dx[rows], hits.duv_dy[rows]
    if cfg.mode in ("before", "after_exhaustive"):
        x = filters.continuous_lod(dims0, d0, d1, 0, nlev - 1, cfg.max_aniso, 0.5, cfg.lod_bias)
        lo = np.floor(x).astype(np.int64)
        f = x - lo
        return [(lo, 1.0 - f), (np.minimum(lo + 1, nlev - 1), f)]
    level = filters.stochastic_lod_batch(dims0, d0, d1, 0, nlev - 1, cfg.max_aniso, u(DIM_LOD, rows), cfg.lod_bias)
    return [(level, np.ones(n))]


def _shade_plane(scene, cfg, hits, u: _Uniforms, rows, flt, counter):
    n = len(rows)
    plan = _level_plan(scene, cfg, hits, u, rows)
    out = np.zeros((n, 3))
    raw_total = None
    for levels, weights in plan:
        for lev in np.unique(levels[weights > 0]):
            m = (levels == lev) & (weights > 0)
            r = rows[m]
            dims = scene.dims[lev]
            st = filters.level_raster(hits.uv[r], dims)
            d0 = hits.duv_dx[r] * dims
            d1 = hits.duv_dy[r] * dims
            b = scene.levels[lev]
            wm = weights[m][:, None]
            if cfg.mode == "before":
                raw = shading.filter_parameters(b, flt, st, d0, d1, counter)
                if raw_total is None:
                    raw_total = {k: np.zeros((n, v.shape[1])) for k, v in raw.items()}
                for k, v in raw.items():
                    raw_total[k][m] += wm * v
                continue
            ctx = _ctx(hits, r, st, d0, d1)
            if cfg.mode == "after_exhaustive":
                out[m] += wm * shading.radiance_filter_after_exhaustive(ctx, b, flt, counter)
            elif cfg.mode == "split":
                out[m] += wm * shading.radiance_filter_before(ctx, b, flt, counter)
            else:
                xi = _xi_rows(cfg, flt, u, r, len(b.textures()))
                out[m] += wm * shading.radiance_filter_after_stochastic(
                    ctx, b, flt, xi, "frs", counter, cfg.independent_selection)
    if cfg.mode == "before":
        ctx = _ctx(hits, rows, np.zeros((n, 2)), None, None)
        params = shading.decode_params(ctx, scene.bindings, raw_total or {}, (n,))
        out = shading.shade(ctx, params, scene.bindings.specular)
    return out


def _shade_triplanar(scene, cfg, hits, u: _Uniforms, rows, flt, counter):
    n = len(rows)
    ctx = _ctx(hits, rows, np.zeros((n, 2)), np.zeros((n, 2)), np.zeros((n, 2)))
    b = scene.levels[0]
    if cfg.mode in ("before", "split"):
        return shading.triplanar(ctx, b, flt, mode="deterministic", scale=cfg.uv_scale, counter=counter)
    if cfg.mode == "after_exhaustive":
        return shading.triplanar(ctx, b, flt, mode="exhaustive", scale=cfg.uv_scale, counter=counter)
    xi = u(DIM_SELECT, rows)[None]
    if isinstance(flt, FisFilter):
        need = filters.fis_uniforms_needed(flt.spec)
        xi = np.concatenate([xi, u.stack(range(DIM_SELECT + 1, DIM_SELECT + 1 + need), rows)])
    return shading.triplanar(ctx, b, flt, xi, mode="stochastic", scale=cfg.uv_scale,
                             selection="fis" if isinstance(flt, FisFilter) else "frs", counter=counter)


def _shade_volume(scene, cfg, u: _Uniforms, sx, sy, flt, counter):
    valid, d, t0, t1 = scene.intersect(sx, sy)
    out = np.zeros((len(sx), 3))
    rows = np.flatnonzero(valid)
    if len(rows) == 0:
        return out, 0
    grid = scene.grid
    dims = np.asarray(grid.dims, dtype=np.float64)
    o = scene.camera.origin
    dv, a, b = d[rows], t0[rows], t1[rows]
    spec = flt.spec if isinstance(flt, FisFilter) else flt
    k_steps = scene.steps
    acc = np.zeros((len(rows), 3))
    for k in range(k_steps):
        base = DIM_SELECT + STEP_STRIDE * k
        t = a + (k + u(base + STEP_STRIDE - 1, rows)) / k_steps * (b - a)
        p = (o + t[:, None] * dv) * dims - 0.5
        if cfg.mode in ("before", "split"):
            e = shading.emission_filter_before(grid, p, spec, counter)
        elif cfg.mode == "after_exhaustive":
            e = shading.emission_filter_after_exhaustive(grid, p, spec, counter)
        elif isinstance(flt, FisFilter):
            need = filters.fis_uniforms_needed(spec, 3)
            e = shading.emission_filter_after_stochastic(grid, p, spec, u.stack(range(base, base + need), rows),
                                                         "fis", counter)
        else:
            e = shading.emission_filter_after_stochastic(grid, p, spec, u(base, rows), "frs", counter)
        acc += e
    seg = (b - a) * np.linalg.norm(dv, axis=1)
    out[rows] = acc * (seg / k_steps)[:, None]
    return out, len(rows)


def shade_samples(scene, cfg, noise, px, py, s, counter: FetchCounter):
    """Radiance of one sample per row; returns (radiance (N, 3), hit count)."""
    u = _Uniforms(noise, px, py, s)
    sx, sy = filters.screen_jitter((px, py), (u(DIM_JITTER_X), u(DIM_JITTER_Y)))
    flt = make_filter(cfg)
    if scene.kind == "volume":
        return _shade_volume(scene, cfg, u, sx, sy, flt, counter)
    hits = scene.intersect(sx, sy)
    out = np.zeros((len(px), 3))
    rows = np.flatnonzero(hits.valid)
    if len(rows):
        fn = _shade_triplanar if scene.kind == "triplanar" else _shade_plane
        out[rows] = fn(scene, cfg, hits, u, rows, flt, counter)
    return out, len(rows)


def tiles_for(width: int, height: int, tile: int):
    return [(x, y, min(x + tile, width), min(y + tile, height))
            for y in range(0, height, tile) for x in range(0, width, tile)]


def _render_tile(scene, cfg, noise, tile):
    x0, y0, x1, y1 = tile
    yy, xx = np.mgrid[y0:y1, x0:x1]
    px, py = xx.ravel(), yy.ravel()
    npx = len(px)
    counter = FetchCounter()
    total = np.zeros((npx, 3))
    total_sq = np.zeros((npx, 3))
    hits = 0
    chunk = max(1, MAX_ROWS // npx)
    for s0 in range(0, cfg.spp, chunk):
        ns = min(chunk, cfg.spp - s0)
        s = np.repeat(np.arange(s0, s0 + ns), npx)
        rad, h = shade_samples(scene, cfg, noise, np.tile(px, ns), np.tile(py, ns), s, counter)
        rad = rad.reshape(ns, npx, 3)
        total += rad.sum(axis=0)
        total_sq += (rad * rad).sum(axis=0)
        hits += h
    n = cfg.spp
    mean = total / n
    var = (total_sq - total * mean) / (n - 1) if n > 1 else np.zeros_like(total)
    shape = (y1 - y0, x1 - x0, 3)
    return mean.reshape(shape), np.maximum(var, 0.0).reshape(shape), counter.count, hits


def render(cfg: SceneConfig, reference: Image2D | None = None):
    """Render ``cfg``; returns ``(image, RenderStats)``.

    Tiles are processed in a fixed order (or mapped in order across threads)
    and every sample draws its uniforms from (seed, pixel, sample, dim), so
    output is identical for any thread count.
    """
    scene = build_scene(cfg)
    noise = make_noise(cfg)
    w, h = cfg.resolution
    tiles = tiles_for(w, h, cfg.tile_size)
    t_start = time.perf_counter()
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            results = list(ex.map(lambda t: _render_tile(scene, cfg, noise, t), tiles))
    else:
        results = [_render_tile(scene, cfg, noise, t) for t in tiles]
    wall = time.perf_counter() - t_start
    img = np.zeros((h, w, 3))
    var = np.zeros((h, w, 3))
    fetches = 0
    lookups = 0
    for (x0, y0, x1, y1), (m, v, f, nh) in zip(tiles, results):
        img[y0:y1, x0:x1] = m
        var[y0:y1, x0:x1] = v
        fetches += f
        lookups += nh
    if not np.all(np.isfinite(img)):
        raise FloatingPointError("render produced non-finite radiance")
    image = Image2D(img)
    mse = compare(image, reference)[0] if reference is not None else None
    return image, RenderStats(mse, var, fetches, wall, cfg.spp, lookups)


# --- single-texture filtering demo ----------------------------------------

def filter_image(tex: Image2D, spec: KernelSpec, mode: str = "det", spp: int = 64, scale: int = 1,
                 seed: int = 0, counter: FetchCounter | None = None) -> Image2D:
    """Resample ``tex`` at ``scale`` times its resolution.

    ``det`` evaluates the filter exactly (Gaussian over a 4x4 window); ``frs``
    and ``fis`` average ``spp`` single-texel estimates per output pixel.
    """
    w, h = tex.dims
    yy, xx = np.mgrid[0 : h * scale, 0 : w * scale]
    px, py = xx.ravel(), yy.ravel()
    st = np.stack([(px + 0.5) / scale - 0.5, (py + 0.5) / scale - 0.5], axis=1)
    if mode == "det":
        window = filters.GAUSSIAN_WINDOW if spec.kind == "gaussian" else None
        out = filter_batch(tex, st, spec, window, counter)
        return Image2D(out.reshape(h * scale, w * scale, -1))
    if mode not in ("frs", "fis"):
        raise ValueError(f"unknown filtering mode {mode!r}")
    rng = RngStream(seed)
    npx = len(px)
    acc = np.zeros((npx, tex.channels))
    chunk = max(1, (MAX_ROWS * 4) // npx)
    method = shading.selection_method(spec) if mode == "frs" else None
    for s0 in range(0, spp, chunk):
        ns = min(chunk, spp - s0)
        s = np.repeat(np.arange(s0, s0 + ns), npx)
        pxs, pys = np.tile(px, ns), np.tile(py, ns)
        sts = np.tile(st, (ns, 1))
        if mode == "frs":
            sel = filters.select_batch(method, sts, rng.uniforms(pxs, pys, s, 0), sigma=spec.sigma, a=spec.a)
        else:
            need = filters.fis_uniforms_needed(spec)
            u = np.stack([rng.uniforms(pxs, pys, s, d) for d in range(need)])
            sel = filters.fis_batch(sts, spec, u)
        acc += sel.evaluate(tex, counter).reshape(ns, npx, -1).sum(axis=0)
    return Image2D((acc / spp).reshape(h * scale, w * scale, -1))
