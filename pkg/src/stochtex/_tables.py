"""Lookup tables shared by the deterministic oracle and both kernel backends."""

import math

import numpy as np

EWA_LUT_SIZE = 1024
EWA_ALPHA = 2.0
# Gaussian of r^2 minus its value at the ellipse boundary r^2 = 1
EWA_LUT = np.exp(-EWA_ALPHA * np.arange(EWA_LUT_SIZE) / (EWA_LUT_SIZE - 1)) - math.exp(-EWA_ALPHA)
