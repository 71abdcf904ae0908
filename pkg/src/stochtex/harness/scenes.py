"""Analytic demonstration scenes: geometry, ray differentials and textures."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..codec_dct import compress_dct
from ..imageio import load_grid, load_image
from ..shading import MaterialBindings
from ..texture import Grid3D, Image2D, build_mip_pyramid

LIGHT_DIR = np.array([-0.3, 0.8, -0.5]) / math.sqrt(0.3**2 + 0.8**2 + 0.5**2)
LIGHT_RADIANCE = np.array([3.0, 3.0, 3.0])

_CAMERAS = {
    "plane_checker": ((0.0, 1.0, 0.0), (0.0, 0.0, 2.0)),
    "normalmap_plane": ((0.0, 1.0, 0.0), (0.0, 0.0, 2.0)),
    "metalness_plane": ((0.0, 1.0, 0.0), (0.0, 0.0, 2.0)),
    "dct_material": ((0.0, 1.0, 0.0), (0.0, 0.0, 2.0)),
    # about 2 units from a unit sphere: the sphere covers the whole 40 degree view
    "triplanar_box": ((1.22, 1.02, -1.22), (0.0, 0.0, 0.0)),
    "emission_slab": ((0.5, 0.5, -1.2), (0.5, 0.5, 0.5)),
}


def default_camera(scene: str):
    return _CAMERAS[scene]


def _normalize(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


class Camera:
    """Pinhole camera; screen x to the right, y down, in pixels."""

    def __init__(self, position, target, fov_deg: float, resolution):
        self.origin = np.asarray(position, dtype=np.float64)
        fwd = _normalize(np.asarray(target, dtype=np.float64) - self.origin)
        up = np.array([0.0, 1.0, 0.0])
        if abs(fwd @ up) > 0.999:
            up = np.array([0.0, 0.0, 1.0])
        right = _normalize(np.cross(fwd, up))
        self.up = np.cross(right, fwd)
        self.right = right
        self.forward = fwd
        self.width, self.height = resolution
        self.tan_half = math.tan(math.radians(fov_deg) / 2.0)
        aspect = self.width / self.height
        self.ddx = right * (2.0 * self.tan_half * aspect / self.width)
        self.ddy = -self.up * (2.0 * self.tan_half / self.height)
        self._aspect = aspect

    def directions(self, sx, sy):
        """Unnormalized ray directions through screen points."""
        x = (2.0 * np.asarray(sx) / self.width - 1.0) * self.tan_half * self._aspect
        y = (1.0 - 2.0 * np.asarray(sy) / self.height) * self.tan_half
        return self.forward + x[:, None] * self.right + y[:, None] * self.up


def surface_differentials(t, d, n, ddx, ddy):
    """Position derivatives along screen x and y for hits ``o + t d`` on a
    surface with normal ``n`` (locally planar approximation)."""
    dn = np.sum(d * n, axis=-1, keepdims=True)
    dpdx = t[:, None] * (ddx - (n @ ddx)[:, None] / dn * d)
    dpdy = t[:, None] * (ddy - (n @ ddy)[:, None] / dn * d)
    return dpdx, dpdy


@dataclass
class SurfaceHits:
    valid: np.ndarray
    position: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray
    bitangent: np.ndarray
    wo: np.ndarray
    uv: np.ndarray | None = None  # normalized texture coords
    duv_dx: np.ndarray | None = None
    duv_dy: np.ndarray | None = None

    def subset(self, m) -> "SurfaceHits":
        f = {k: (None if v is None else v[m]) for k, v in self.__dict__.items()}
        return SurfaceHits(**f)


# --- procedural textures ---------------------------------------------------

def checker_texture(size: int, squares: int = 8, lo: float = 0.05, hi: float = 0.9) -> Image2D:
    yy, xx = np.mgrid[0:size, 0:size]
    cell = max(size // squares, 1)
    on = ((xx // cell) + (yy // cell)) % 2 == 0
    v = np.where(on, hi, lo)
    return Image2D(np.repeat(v[:, :, None], 3, axis=2), "repeat")


def smooth_texture(size: int, seed: int = 7, channels: int = 3, octaves: int = 3) -> Image2D:
    """Periodic sum of low-frequency sinusoids in [0.1, 0.9]."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size] / size
    out = np.zeros((size, size, channels))
    for c in range(channels):
        acc = np.zeros((size, size))
        for o in range(octaves):
            fx, fy = rng.integers(1, 3 + 2 * o, size=2)
            ph = rng.uniform(0, 2 * math.pi)
            acc += np.sin(2 * math.pi * (fx * xx + fy * yy) + ph) / (o + 1)
        acc = (acc - acc.min()) / max(np.ptp(acc), 1e-12)
        out[:, :, c] = 0.1 + 0.8 * acc
    return Image2D(out, "repeat")


def two_normal_texture(size: int, tilt_deg: float = 45.0) -> Image2D:
    """Alternating texel columns tilted +/- ``tilt_deg`` about the bitangent."""
    s, c = math.sin(math.radians(tilt_deg)), math.cos(math.radians(tilt_deg))
    xx = np.arange(size)[None, :].repeat(size, axis=0)
    nx = np.where(xx % 2 == 0, s, -s)
    n = np.stack([nx, np.zeros_like(nx), np.full_like(nx, c)], axis=-1)
    return Image2D((n + 1.0) * 0.5, "repeat")


METAL_ALBEDO = (0.95, 0.78, 0.35)
DIELECTRIC_ALBEDO = (0.15, 0.25, 0.6)
METAL_ROUGHNESS = 0.25
DIELECTRIC_ROUGHNESS = 0.7


def metalness_textures(size: int, cell: int = 4):
    """Binary metalness checker with matching albedo and roughness maps."""
    yy, xx = np.mgrid[0:size, 0:size]
    metal = (((xx // cell) + (yy // cell)) % 2).astype(np.float64)
    albedo = np.where(metal[:, :, None] > 0, METAL_ALBEDO, DIELECTRIC_ALBEDO)
    rough = np.where(metal > 0, METAL_ROUGHNESS, DIELECTRIC_ROUGHNESS)
    return (Image2D(albedo, "repeat"), Image2D(rough, "repeat"), Image2D(metal, "repeat"))


def temperature_grid(n: int, seed: int = 3, t_min: float = 1500.0, t_max: float = 7500.0) -> Grid3D:
    rng = np.random.default_rng(seed)
    zz, yy, xx = np.mgrid[0:n, 0:n, 0:n] / n
    acc = np.zeros((n, n, n))
    for o in range(4):
        f = rng.integers(1, 4 + 2 * o, size=3)
        ph = rng.uniform(0, 2 * math.pi)
        acc += np.sin(2 * math.pi * (f[0] * xx + f[1] * yy + f[2] * zz) + ph) / (o + 1)
    acc = (acc - acc.min()) / max(np.ptp(acc), 1e-12)
    return Grid3D(t_min + (t_max - t_min) * acc)


# --- scenes ----------------------------------------------------------------

class PlaneScene:
    """Ground plane y = 0 with texture coords ``(x, z) * uv_scale``."""

    kind = "surface"

    def __init__(self, camera: Camera, bindings: MaterialBindings, uv_scale: float, mip: bool):
        self.camera = camera
        self.bindings = bindings
        self.uv_scale = uv_scale
        texs = bindings.textures()
        if mip:
            pyr = {k: build_mip_pyramid(v) for k, v in texs.items()}
            nlev = len(next(iter(pyr.values())))
            self.levels = [bindings.with_textures({k: p[i] for k, p in pyr.items()}) for i in range(nlev)]
        else:
            self.levels = [bindings]
        self.dims = [next(iter(b.textures().values())).dims for b in self.levels]

    def intersect(self, sx, sy) -> SurfaceHits:
        cam = self.camera
        d = cam.directions(sx, sy)
        valid = d[:, 1] < -1e-9
        t = np.where(valid, -cam.origin[1] / np.where(valid, d[:, 1], -1.0), 0.0)
        p = cam.origin + t[:, None] * d
        n = np.broadcast_to(np.array([0.0, 1.0, 0.0]), p.shape)
        tan = np.broadcast_to(np.array([1.0, 0.0, 0.0]), p.shape)
        bit = np.broadcast_to(np.array([0.0, 0.0, 1.0]), p.shape)
        dpdx, dpdy = surface_differentials(t, d, n, cam.ddx, cam.ddy)
        s = self.uv_scale
        return SurfaceHits(valid, p, n, tan, bit, -_normalize(d), p[:, [0, 2]] * s,
                           dpdx[:, [0, 2]] * s, dpdy[:, [0, 2]] * s)


class DctPlaneScene(PlaneScene):
    """Plane whose albedo MIP levels are each stored DCT-compressed."""

    def __init__(self, camera: Camera, source: Image2D, uv_scale: float, mip: bool, specular: bool):
        levels = build_mip_pyramid(source).levels if mip else [source]
        self.camera = camera
        self.uv_scale = uv_scale
        self.compressed = [compress_dct(lv) for lv in levels]
        base = MaterialBindings(albedo=self.compressed[0], roughness=0.5, metalness=0.0, specular=specular)
        self.bindings = base
        self.levels = [base.with_textures({"albedo": c}) for c in self.compressed]
        self.dims = [c.dims for c in self.compressed]


class SphereScene:
    """Unit sphere at the origin, textured by triplanar projection."""

    kind = "triplanar"

    def __init__(self, camera: Camera, bindings: MaterialBindings, uv_scale: float):
        self.camera = camera
        self.bindings = bindings
        self.uv_scale = uv_scale
        self.levels = [bindings]
        self.dims = [next(iter(bindings.textures().values())).dims]

    def intersect(self, sx, sy) -> SurfaceHits:
        cam = self.camera
        d = cam.directions(sx, sy)
        o = cam.origin
        a = np.sum(d * d, axis=1)
        b = 2.0 * (d @ o)
        c = o @ o - 1.0
        disc = b * b - 4 * a * c
        valid = disc > 0
        t = np.where(valid, (-b - np.sqrt(np.maximum(disc, 0.0))) / (2 * a), 0.0)
        valid &= t > 0
        p = o + t[:, None] * d
        n = _normalize(np.where(valid[:, None], p, np.array([0.0, 1.0, 0.0])))
        ref = np.where(np.abs(n[:, 1:2]) < 0.99, np.array([0.0, 1.0, 0.0]), np.array([1.0, 0.0, 0.0]))
        tan = _normalize(np.cross(ref, n))
        bit = np.cross(n, tan)
        return SurfaceHits(valid, p, n, tan, bit, -_normalize(d))


class SlabScene:
    """Emissive unit cube [0, 1]^3 holding a temperature grid."""

    kind = "volume"

    def __init__(self, camera: Camera, grid: Grid3D, steps: int):
        self.camera = camera
        self.grid = grid
        self.steps = steps

    def intersect(self, sx, sy):
        """Ray origin, direction and entry/exit parameters; ``valid`` when hit."""
        cam = self.camera
        d = cam.directions(sx, sy)
        inv = 1.0 / np.where(np.abs(d) > 1e-12, d, 1e-12)
        t_a = (0.0 - cam.origin) * inv
        t_b = (1.0 - cam.origin) * inv
        t0 = np.maximum(np.minimum(t_a, t_b).max(axis=1), 0.0)
        t1 = np.maximum(t_a, t_b).min(axis=1)
        return t1 > t0, d, t0, t1


BUILTIN_TEXTURES = ("checker", "smooth")


def _albedo_texture(name: str, size: int, srgb: bool) -> Image2D | None:
    """Built-in pattern by name, an image file path, or None when empty."""
    if not name:
        return None
    if name == "checker":
        return checker_texture(size)
    if name == "smooth":
        return smooth_texture(size)
    return load_image(name, srgb=srgb, wrap="repeat")


def build_scene(cfg):
    cam = Camera(cfg.camera_position, cfg.camera_target, cfg.fov, cfg.resolution)
    size = cfg.texture_size
    albedo_override = _albedo_texture(cfg.texture, size, cfg.texture_srgb)
    if cfg.scene == "plane_checker":
        albedo = albedo_override or checker_texture(size)
        b = MaterialBindings(albedo=albedo, roughness=0.5, metalness=0.0, specular=cfg.specular)
        return PlaneScene(cam, b, cfg.uv_scale, cfg.mip)
    if cfg.scene == "normalmap_plane":
        b = MaterialBindings(albedo=albedo_override if albedo_override else (0.7, 0.7, 0.7),
                             normal_map=two_normal_texture(size), roughness=0.3, metalness=0.0,
                             specular=cfg.specular)
        return PlaneScene(cam, b, cfg.uv_scale, cfg.mip)
    if cfg.scene == "metalness_plane":
        albedo, rough, metal = metalness_textures(size)
        b = MaterialBindings(albedo=albedo, roughness=rough, metalness=metal, specular=cfg.specular)
        return PlaneScene(cam, b, cfg.uv_scale, cfg.mip)
    if cfg.scene == "dct_material":
        src = albedo_override or smooth_texture(size, seed=11, octaves=4)
        src = Image2D(np.clip(src.data, 0.0, 1.0), "repeat")
        return DctPlaneScene(cam, src, cfg.uv_scale, cfg.mip, cfg.specular)
    if cfg.scene == "triplanar_box":
        albedo = albedo_override or smooth_texture(size, seed=5)
        albedo = Image2D(albedo.data, "repeat")
        b = MaterialBindings(albedo=albedo, roughness=0.5, metalness=0.0, specular=cfg.specular)
        return SphereScene(cam, b, cfg.uv_scale)
    if cfg.scene == "emission_slab":
        grid = load_grid(cfg.grid) if cfg.grid else temperature_grid(cfg.grid_size)
        return SlabScene(cam, grid, cfg.emission_steps)
    raise ValueError(cfg.scene)
