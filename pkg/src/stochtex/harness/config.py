"""Scene configuration: ``key=value`` text files with ``#`` comments."""

from __future__ import annotations

from dataclasses import dataclass, field, fields

SCENES = ("plane_checker", "normalmap_plane", "metalness_plane", "emission_slab", "triplanar_box", "dct_material")
MODES = ("before", "split", "after_exhaustive", "after_stochastic")
SELECTIONS = ("frs", "fis")
NOISES = ("white", "mask")
FILTERS = ("box", "tent", "bspline3", "mitchell", "lanczos", "gaussian", "ewa")
FILTER_ALIASES = {"bilinear": "tent", "trilinear": "tent", "nearest": "box", "bicubic": "bspline3",
                  "tricubic": "bspline3", "bspline": "bspline3"}


class ConfigError(ValueError):
    pass


@dataclass
class SceneConfig:
    scene: str = "plane_checker"
    camera_position: tuple = (0.0, 1.0, 0.0)
    camera_target: tuple = (0.0, 0.0, 2.0)
    fov: float = 40.0
    resolution: tuple = (128, 128)
    spp: int = 16
    filter: str = "tent"
    filter_a: float = -0.5
    filter_n: int = 2
    filter_sigma: float = 0.5
    mode: str = "after_stochastic"
    selection: str = "frs"
    independent_selection: bool = False
    noise: str = "white"
    mask_dir: str = ""
    mip: bool = True
    lod_bias: float = 0.0
    max_aniso: float = 64.0
    seed: int = 0
    texture: str = ""
    texture_srgb: bool = True
    texture_size: int = 256
    grid: str = ""
    grid_size: int = 32
    uv_scale: float = 0.25
    specular: bool = True
    emission_steps: int = 4
    tile_size: int = 32
    threads: int = 1
    reference: str = ""
    camera_default: bool = field(default=True, repr=False)

    def validate(self) -> "SceneConfig":
        if self.scene not in SCENES:
            raise ConfigError(f"unknown scene {self.scene!r}; choose from {', '.join(SCENES)}")
        self.filter = FILTER_ALIASES.get(self.filter, self.filter)
        if self.filter not in FILTERS:
            raise ConfigError(f"unknown filter {self.filter!r}")
        for name, allowed in (("mode", MODES), ("selection", SELECTIONS), ("noise", NOISES)):
            if getattr(self, name) not in allowed:
                raise ConfigError(f"{name} must be one of {', '.join(allowed)}")
        if self.spp < 1 or self.resolution[0] < 1 or self.resolution[1] < 1:
            raise ConfigError("spp and resolution must be positive")
        if self.tile_size < 1 or self.threads < 1 or self.emission_steps < 1:
            raise ConfigError("tile_size, threads and emission_steps must be positive")
        if self.max_aniso < 1:
            raise ConfigError("max_aniso must be >= 1")
        if not 0 < self.fov < 180:
            raise ConfigError("fov must lie in (0, 180)")
        if self.noise == "mask" and not self.mask_dir:
            raise ConfigError("noise=mask needs mask_dir")
        stochastic = self.mode in ("after_stochastic",)
        if stochastic and self.selection == "fis" and self.filter not in ("tent", "bspline3", "gaussian"):
            raise ConfigError(f"FIS cannot sample the {self.filter} filter")
        if stochastic and self.selection == "frs" and self.filter == "lanczos":
            raise ConfigError("no stochastic selection for lanczos")
        if self.scene == "emission_slab":
            if self.filter not in ("box", "tent", "bspline3"):
                raise ConfigError("emission_slab supports box, tent and bspline3 filters")
        if self.filter == "ewa" and self.scene in ("triplanar_box",):
            raise ConfigError("ewa is not available for triplanar projection")
        if self.independent_selection and self.filter == "mitchell":
            raise ConfigError("independent selection needs a non-negative filter")
        return self


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_tuple(s: str, n: int, cast) -> tuple:
    parts = [p for p in s.replace("x", ",").replace(" ", ",").split(",") if p]
    if len(parts) != n:
        raise ValueError(f"expected {n} values, got {s!r}")
    return tuple(cast(p) for p in parts)


_TUPLES = {"camera_position": (3, float), "camera_target": (3, float), "resolution": (2, int)}
_KEYS = {f.name: f for f in fields(SceneConfig) if f.name != "camera_default"}


def coerce(key: str, value: str):
    if key not in _KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        if key in _TUPLES:
            n, cast = _TUPLES[key]
            return _parse_tuple(value, n, cast)
        t = _KEYS[key].type
        if t == "bool":
            return _parse_bool(value)
        if t == "int":
            return int(value)
        if t == "float":
            return float(value)
        return value.strip()
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {e}") from None


def parse_config(text: str, overrides: list[str] | None = None) -> SceneConfig:
    """Parse ``key=value`` lines; later keys and ``overrides`` win."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        k, v = line.split("=", 1)
        values[k.strip()] = coerce(k.strip(), v)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key=value")
        k, v = item.split("=", 1)
        values[k.strip()] = coerce(k.strip(), v)
    return make_config(**values)


def make_config(**values) -> SceneConfig:
    """Config with per-scene camera defaults unless a camera key is given."""
    for k in values:
        if k not in _KEYS:
            raise ConfigError(f"unknown config key {k!r}")
    cfg = SceneConfig(**values)
    if cfg.scene not in SCENES:
        raise ConfigError(f"unknown scene {cfg.scene!r}; choose from {', '.join(SCENES)}")
    if "camera_position" not in values and "camera_target" not in values:
        from .scenes import default_camera

        cfg.camera_position, cfg.camera_target = default_camera(cfg.scene)
    else:
        cfg.camera_default = False
    return cfg.validate()


def load_config(path, overrides: list[str] | None = None) -> SceneConfig:
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read(), overrides)


def dump_config(cfg: SceneConfig) -> str:
    out = []
    for k in _KEYS:
        v = getattr(cfg, k)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        out.append(f"{k}={v}")
    return "\n".join(out) + "\n"


def replace(cfg: SceneConfig, **changes) -> SceneConfig:
    values = {k: getattr(cfg, k) for k in _KEYS}
    if not cfg.camera_default:
        changes.setdefault("camera_position", cfg.camera_position)
        changes.setdefault("camera_target", cfg.camera_target)
    else:
        values.pop("camera_position")
        values.pop("camera_target")
    values.update(changes)
    return make_config(**values)

