"""Stochastic texture filtering: single-fetch texel selection and its deterministic oracles."""

from .backend import NAME as BACKEND
from .kernels import KernelSpec
from .sampling import NoiseSource, RngStream, reservoir_sample, sample_discrete
from .texture import FetchCounter, Grid3D, Image2D, build_mip_pyramid

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "FetchCounter",
    "Grid3D",
    "Image2D",
    "KernelSpec",
    "NoiseSource",
    "RngStream",
    "build_mip_pyramid",
    "reservoir_sample",
    "sample_discrete",
]
