"""Uniform random streams and discrete sampling helpers.

All helpers take a uniform sample ``xi`` in [0, 1) and hand back a warped
copy that can drive the next decision (sample reuse).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ONE_MINUS_EPSILON = math.nextafter(1.0, 0.0)

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class DegenerateWeightsError(ValueError):
    """Raised when a weight array cannot be sampled."""

    def __init__(self, msg: str = "degenerate weight array"):
        super().__init__(msg)


def _clamp_unit(x: float) -> float:
    if x < 0.0:
        return 0.0
    if x > ONE_MINUS_EPSILON:
        return ONE_MINUS_EPSILON
    return x


def reuse_uniform(xi: float, p: float) -> tuple[bool, float]:
    """Make a binary decision with probability ``p`` and remap ``xi``.

    Returns ``(taken, xi_new)`` where ``taken = xi < p`` and ``xi_new`` is
    again uniform on [0, 1) and independent of the decision.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    if xi < p:
        return True, _clamp_unit(xi / p)
    if p >= 1.0:
        # only reachable if xi >= 1, which callers must not pass
        return False, _clamp_unit(xi)
    return False, _clamp_unit((xi - p) / (1.0 - p))


def _check_weights(weights: Sequence[float]) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0 or not np.all(np.isfinite(w)) or np.any(w < 0):
        raise DegenerateWeightsError()
    if not np.any(w > 0):
        raise DegenerateWeightsError()
    return w


def sample_discrete(weights: Sequence[float], xi: float) -> tuple[int, float, float]:
    """Pick index ``j`` with probability ``w_j / sum(w)``.

    Returns ``(index, pdf, xi_new)``; ``xi_new`` is ``xi`` rescaled inside the
    selected bin.
    """
    w = _check_weights(weights)
    total = float(w.sum())
    cdf = 0.0
    last = int(np.flatnonzero(w > 0)[-1])
    for j, wj in enumerate(w):
        if wj <= 0.0:
            continue
        lo = cdf
        cdf += float(wj)
        if xi * total < cdf or j == last:
            xi_new = (xi * total - lo) / float(wj)
            return j, float(wj) / total, _clamp_unit(xi_new)
    raise AssertionError("unreachable")


def reservoir_sample(weight_stream: Iterable[float], xi: float) -> tuple[int, float, float]:
    """Weighted reservoir sampling over a stream of non-negative weights.

    Item ``i`` is accepted with ``p = w_i / (running sum)``; ``xi`` is warped
    after every decision. Returns ``(index, weight_sum, xi_new)``.
    """
    total = 0.0
    index = -1
    for i, w in enumerate(weight_stream):
        w = float(w)
        if not math.isfinite(w) or w < 0:
            raise DegenerateWeightsError()
        if w == 0.0:
            continue
        total += w
        taken, xi = reuse_uniform(xi, w / total)
        if taken:
            index = i
    if index < 0:
        raise DegenerateWeightsError()
    return index, total, xi


@dataclass(frozen=True)
class Reservoir:
    index: int
    weight_sum: float


def positivized_pair(
    weights: Sequence[float], xi: float
) -> tuple[Reservoir | None, Reservoir | None, float]:
    """Sample one index from the positive and one from the negative weights.

    Both reservoirs are fed in array order and share the chained ``xi``. The
    estimate of ``sum(w * t)`` is ``pos.weight_sum * t[pos.index] -
    neg.weight_sum * t[neg.index]`` (a missing side contributes zero).
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or not np.all(np.isfinite(w)) or not np.any(w != 0):
        raise DegenerateWeightsError()
    sums = [0.0, 0.0]
    picks = [-1, -1]
    for i, wi in enumerate(w):
        if wi == 0.0:
            continue
        side = 1 if wi < 0 else 0
        sums[side] += abs(wi)
        taken, xi = reuse_uniform(xi, abs(wi) / sums[side])
        if taken:
            picks[side] = i
    pos = Reservoir(picks[0], sums[0]) if picks[0] >= 0 else None
    neg = Reservoir(picks[1], sums[1]) if picks[1] >= 0 else None
    return pos, neg, xi


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def hash_uniform(seed: int, px, py, sample, dim) -> np.ndarray:
    """Counter-based uniforms for arrays of (pixel x, pixel y, sample, dim).

    Pure function of its inputs; 32 random mantissa bits per value.
    """
    with np.errstate(over="ignore"):
        h = _mix64(np.asarray(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _GOLDEN, dtype=np.uint64))
        for k in (px, py, sample, dim):
            k = np.asarray(k, dtype=np.int64).astype(np.uint64)
            h = _mix64(h ^ (k * _GOLDEN + _M2))
    return (h >> np.uint64(32)).astype(np.float64) * (1.0 / 4294967296.0)


@dataclass(frozen=True)
class RngStream:
    """Replayable uniform stream keyed by (pixel, sample, dimension)."""

    seed: int = 0

    def uniform(self, px: int, py: int, sample: int, dim: int) -> float:
        return float(hash_uniform(self.seed, px, py, sample, dim))

    def uniforms(self, px, py, sample, dim) -> np.ndarray:
        return hash_uniform(self.seed, px, py, sample, dim)


# R2 sequence offsets so each sampling dimension reads a shifted mask tile
_R2_A1 = 0.7548776662466927
_R2_A2 = 0.5698402909980532


class NoiseSource:
    """Source of per-pixel uniforms: white noise or a tiled blue-noise mask stack.

    In mask mode dimension 0 returns the mask texel at
    ``(pixel mod mask_dims, sample mod frames)``; higher dimensions read the
    same stack at an R2-sequence pixel offset.
    """

    def __init__(self, mode: str = "white", seed: int = 0, masks: list[np.ndarray] | None = None):
        if mode not in ("white", "mask"):
            raise ValueError(f"unknown noise mode {mode!r}")
        self.mode = mode
        self.stream = RngStream(seed)
        if mode == "mask":
            if not masks:
                raise ValueError("mask mode needs at least one mask frame")
            stack = np.stack([np.asarray(m, dtype=np.float64).reshape(m.shape[0], m.shape[1]) for m in masks])
            if np.any(stack < 0) or np.any(stack >= 1):
                raise ValueError("mask values must lie in [0, 1)")
            self.masks = stack
        else:
            self.masks = None

    @classmethod
    def from_directory(cls, path: str | os.PathLike, seed: int = 0) -> "NoiseSource":
        from .imageio import load_pfm

        frames = []
        i = 0
        while os.path.exists(os.path.join(path, f"mask_{i}.pfm")):
            img = load_pfm(os.path.join(path, f"mask_{i}.pfm"))
            frames.append(img.data[:, :, 0])
            i += 1
        if not frames:
            raise FileNotFoundError(f"no mask_<frame>.pfm files in {path}")
        return cls("mask", seed=seed, masks=frames)

    def uniforms(self, px, py, sample, dim) -> np.ndarray:
        if self.mode == "white":
            return self.stream.uniforms(px, py, sample, dim)
        nf, h, w = self.masks.shape
        px = np.asarray(px, dtype=np.int64)
        py = np.asarray(py, dtype=np.int64)
        d = np.asarray(dim, dtype=np.int64)
        ox = np.floor(np.mod(d * _R2_A1, 1.0) * w).astype(np.int64)
        oy = np.floor(np.mod(d * _R2_A2, 1.0) * h).astype(np.int64)
        f = np.asarray(sample, dtype=np.int64) % nf
        return self.masks[f, (py + oy) % h, (px + ox) % w]
