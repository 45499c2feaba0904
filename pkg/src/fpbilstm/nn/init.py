"""Seeded weight initializers (uniform fan-based scaling everywhere)."""

from __future__ import annotations

import numpy as np


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def lstm_bias(units: int) -> np.ndarray:
    """Zero bias with the forget gate set to 1 (gate order i, f, g, o)."""
    b = np.zeros(4 * units)
    b[units : 2 * units] = 1.0
    return b
