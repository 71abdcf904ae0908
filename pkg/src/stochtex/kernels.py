"""1D reconstruction / low-pass kernels and their continuous samplers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

KINDS = ("box", "tent", "mitchell", "bspline3", "lanczos", "gaussian")
FIS_KINDS = ("tent", "bspline3", "gaussian")


class UnboundedSupportError(ValueError):
    def __init__(self, msg: str = "unbounded support"):
        super().__init__(msg)


class NoContinuousSamplerError(ValueError):
    def __init__(self, kind: str):
        super().__init__(f"no continuous sampler for kernel {kind!r}")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "tent"
    a: float = -0.5
    n: int = 2
    sigma: float = 0.5
    radius: float = field(init=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "lanczos" and (int(self.n) != self.n or self.n < 1):
            raise ValueError("lanczos lobes must be a positive integer")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise ValueError("gaussian sigma must be positive")
        radius = {
            "box": 0.5,
            "tent": 1.0,
            "mitchell": 2.0,
            "bspline3": 2.0,
            "lanczos": float(self.n),
            "gaussian": math.inf,
        }[self.kind]
        object.__setattr__(self, "radius", radius)

    @classmethod
    def parse(cls, name: str, **params) -> "KernelSpec":
        aliases = {"bilinear": "tent", "linear": "tent", "nearest": "box", "bspline": "bspline3",
                   "bicubic": "bspline3", "tricubic": "bspline3", "trilinear": "tent"}
        kind = aliases.get(name, name)
        kw = {k: v for k, v in params.items() if v is not None}
        return cls(kind, **kw)


def eval_kernel(spec: KernelSpec, t):
    """Kernel value K(t); accepts scalars or arrays. Zero outside the support."""
    x = np.abs(np.asarray(t, dtype=np.float64))
    kind = spec.kind
    if kind == "box":
        # value 1/2 on the boundary keeps the taps a partition of unity
        out = np.where(x < 0.5, 1.0, np.where(x == 0.5, 0.5, 0.0))
    elif kind == "tent":
        out = np.where(x < 1.0, 1.0 - x, 0.0)
    elif kind == "mitchell":
        a = spec.a
        x2 = x * x
        x3 = x2 * x
        inner = (a + 2.0) * x3 - (a + 3.0) * x2 + 1.0
        outer = a * x3 - 5.0 * a * x2 + 8.0 * a * x - 4.0 * a
        out = np.where(x < 1.0, inner, np.where(x < 2.0, outer, 0.0))
    elif kind == "bspline3":
        inner = 4.0 - 3.0 * x * x * (2.0 - x)
        outer = (2.0 - x) ** 3
        out = np.where(x <= 1.0, inner, np.where(x <= 2.0, outer, 0.0)) / 6.0
    elif kind == "lanczos":
        n = float(spec.n)
        out = np.where(x < n, np.sinc(x) * np.sinc(x / n), 0.0)
    elif kind == "gaussian":
        out = np.exp(-x * x / (2.0 * spec.sigma * spec.sigma))
    else:  # pragma: no cover - guarded by KernelSpec
        raise ValueError(kind)
    if np.ndim(out) == 0:
        return float(out)
    return out


def tap_offsets(spec: KernelSpec, window: int | None = None) -> np.ndarray:
    """Integer tap offsets relative to ``floor(u)`` covered by the kernel."""
    if math.isinf(spec.radius):
        if window is None:
            raise UnboundedSupportError()
        neg = (window - 1) // 2
        return np.arange(-neg, window - neg)
    r = int(math.ceil(spec.radius))
    return np.arange(-r + 1, r + 1)


def kernel_weights_1d(spec: KernelSpec, fract: float, window: int | None = None) -> list[tuple[int, float]]:
    """Tap offsets and raw weights ``K(fract - offset)`` for one axis."""
    offs = tap_offsets(spec, window)
    w = eval_kernel(spec, fract - offs.astype(np.float64))
    return [(int(o), float(wi)) for o, wi in zip(offs, np.atleast_1d(w))]


def bspline3_weights(t):
    """Closed-form cubic B-spline weights for taps -1, 0, 1, 2 (vectorized)."""
    t = np.asarray(t, dtype=np.float64)
    t2 = t * t
    t3 = t2 * t
    return (
        (1.0 / 6.0) * (-t3 + 3 * t2 - 3 * t + 1),
        (1.0 / 6.0) * (3 * t3 - 6 * t2 + 4),
        (1.0 / 6.0) * (-3 * t3 + 3 * t2 + 3 * t + 1),
        (1.0 / 6.0) * t3,
    )


def _as_xi(xi) -> list[float]:
    if isinstance(xi, (int, float)):
        return [float(xi)]
    return [float(v) for v in xi]


def sample_kernel_fis(spec: KernelSpec, xi: float | Sequence[float]) -> float:
    """Continuous offset whose box-convolution realizes ``spec``.

    tent takes one uniform, bspline3 three and gaussian two (a Box-Muller
    pair, first axis). A nearest-texel fetch at ``u + offset`` completes the
    convolution with the unit box.
    """
    u = _as_xi(xi)
    if spec.kind == "tent":
        return u[0] - 0.5
    if spec.kind == "bspline3":
        if len(u) < 3:
            raise ValueError("bspline3 sampling needs three uniforms")
        return u[0] + u[1] + u[2] - 1.5
    if spec.kind == "gaussian":
        if len(u) < 2:
            raise ValueError("gaussian sampling needs two uniforms")
        return spec.sigma * box_muller(u[0], u[1])[0]
    raise NoContinuousSamplerError(spec.kind)


def uniforms_needed(spec: KernelSpec) -> int:
    return {"tent": 1, "bspline3": 3, "gaussian": 2}.get(spec.kind, 0)


def box_muller(u1, u2):
    """Map two uniforms to a pair of independent standard normals.

    ``u1 = 0`` would give an infinite radius; it is treated as the smallest
    positive double.
    """
    u1 = np.maximum(np.asarray(u1, dtype=np.float64), np.finfo(np.float64).tiny)
    mag = np.sqrt(-2.0 * np.log(u1))
    ang = 2.0 * math.pi * np.asarray(u2, dtype=np.float64)
    c, s = mag * np.cos(ang), mag * np.sin(ang)
    if np.ndim(c) == 0:
        return float(c), float(s)
    return c, s


def sample_kernel_fis_batch(spec: KernelSpec, u: np.ndarray) -> np.ndarray:
    """Vectorized :func:`sample_kernel_fis`; ``u`` has shape (k, N)."""
    u = np.asarray(u, dtype=np.float64)
    if spec.kind == "tent":
        return u[0] - 0.5
    if spec.kind == "bspline3":
        return u[0] + u[1] + u[2] - 1.5
    if spec.kind == "gaussian":
        return spec.sigma * box_muller(u[0], u[1])[0]
    raise NoContinuousSamplerError(spec.kind)


def sample_kernel_density(spec: KernelSpec, u: np.ndarray) -> np.ndarray:
    """Offsets distributed exactly as the kernel itself (no box deconvolution).

    Used for low-pass sampling in split filtering. Shapes as in
    :func:`sample_kernel_fis_batch`; tent uses 2 uniforms, bspline3 uses 4.
    """
    u = np.asarray(u, dtype=np.float64)
    if spec.kind == "box":
        return u[0] - 0.5
    if spec.kind == "tent":
        return u[0] + u[1] - 1.0
    if spec.kind == "bspline3":
        return u[0] + u[1] + u[2] + u[3] - 2.0
    if spec.kind == "gaussian":
        return spec.sigma * box_muller(u[0], u[1])[0]
    raise NoContinuousSamplerError(spec.kind)


def density_uniforms_needed(spec: KernelSpec) -> int:
    return {"box": 1, "tent": 2, "bspline3": 4, "gaussian": 2}[spec.kind]


def fis_effective_weights_1d(spec: KernelSpec, fract: float, window: int = 8) -> list[tuple[int, float]]:
    """Exact tap probabilities of FIS followed by a nearest-texel fetch.

    Offsets are relative to ``floor(u)`` as in :func:`kernel_weights_1d`.
    tent and bspline3 reduce to the next-order B-spline; the gaussian case
    integrates the normal density over each texel cell.
    """
    if spec.kind == "tent":
        return kernel_weights_1d(KernelSpec("tent"), fract)
    if spec.kind == "bspline3":
        return kernel_weights_1d(KernelSpec("bspline3"), fract)
    if spec.kind == "gaussian":
        s = spec.sigma * math.sqrt(2.0)
        neg = (window - 1) // 2
        out = []
        for o in range(-neg, window - neg):
            lo = (o - 0.5 - fract) / s
            hi = (o + 0.5 - fract) / s
            out.append((o, 0.5 * (math.erf(hi) - math.erf(lo))))
        return out
    raise NoContinuousSamplerError(spec.kind)
