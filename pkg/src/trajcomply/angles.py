"""Angle wrapping helpers."""

import numpy as np


def wrap_to_pi(a):
    """Wrap angles into (-pi, pi]; accepts scalars or arrays."""
    return np.pi - np.mod(np.pi - np.asarray(a, dtype=np.float64), 2.0 * np.pi)


def abs_angle_diff(a, b):
    """Shortest absolute angular distance, in [0, pi]."""
    return np.abs(wrap_to_pi(np.asarray(a, dtype=np.float64) - b))
