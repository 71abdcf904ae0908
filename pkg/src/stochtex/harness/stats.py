"""Image comparison, temporal accumulation and render statistics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from ..texture import Image2D

CSV_COLUMNS = ("value", "mse", "psnr", "mean_variance", "total_fetches", "wall_time_seconds", "spp")


def _data(img) -> np.ndarray:
    return img.data if isinstance(img, Image2D) else np.asarray(img, dtype=np.float64)


def compare(image_a, image_b):
    """``(mse, psnr, squared-error image)``; psnr is ``inf`` for identical inputs."""
    a, b = _data(image_a), _data(image_b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    sq = (a - b) ** 2
    mse = float(sq.mean())
    psnr = math.inf if mse == 0.0 else 10.0 * math.log10(1.0 / mse)
    return mse, psnr, sq


def accumulate_temporal(history, frame, alpha: float):
    """Exponential moving average ``alpha * frame + (1 - alpha) * history``."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    h, f = _data(history), _data(frame)
    if h.shape != f.shape:
        raise ValueError(f"image shapes differ: {h.shape} vs {f.shape}")
    out = alpha * f + (1.0 - alpha) * h
    return Image2D(out) if isinstance(frame, Image2D) else out


@dataclass
class RenderStats:
    mse_vs_reference: float | None
    variance: np.ndarray  # per-pixel sample variance (H, W, 3)
    total_fetches: int
    wall_time_seconds: float
    spp: int
    lookups: int = 0  # shading samples that hit textured geometry

    @property
    def mean_variance(self) -> float:
        return float(self.variance.mean())

    def row(self, value="") -> dict:
        psnr = ""
        mse = ""
        if self.mse_vs_reference is not None:
            mse = f"{self.mse_vs_reference:.9g}"
            psnr = "inf" if self.mse_vs_reference == 0 else f"{10 * math.log10(1 / self.mse_vs_reference):.6g}"
        return {"value": value, "mse": mse, "psnr": psnr, "mean_variance": f"{self.mean_variance:.9g}",
                "total_fetches": self.total_fetches, "wall_time_seconds": f"{self.wall_time_seconds:.6f}",
                "spp": self.spp}


def stats_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx = np.log(np.asarray(xs, dtype=np.float64))
    ly = np.log(np.asarray(ys, dtype=np.float64))
    return float(np.polyfit(lx, ly, 1)[0])
