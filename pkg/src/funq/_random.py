"""Seeded standard normal streams (Box-Muller over a counter-based Philox generator)."""
from __future__ import annotations

import numpy as np


def generator(seed, *key: int) -> np.random.Generator:
    """Independent Philox stream for ``seed`` and an optional sub-stream key."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(key))
    return np.random.Generator(np.random.Philox(ss))


def box_muller(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard normal array of ``shape`` via the Box-Muller transform."""
    shape = (shape,) if np.isscalar(shape) else tuple(shape)
    size = int(np.prod(shape))
    half = (size + 1) // 2
    u1 = 1.0 - rng.random(half)  # (0, 1]
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    z = np.empty(2 * half)
    z[0::2] = r * np.cos(theta)
    z[1::2] = r * np.sin(theta)
    return z[:size].reshape(shape)


def normal_batches(seed, total: int, width: int, batch: int = 1 << 16, key: int = 0):
    """Yield ``(rows, width)`` normal blocks summing to ``total`` rows, in a fixed order."""
    done = 0
    i = 0
    while done < total:
        rows = min(batch, total - done)
        yield box_muller(generator(seed, key, i), (rows, width))
        done += rows
        i += 1
