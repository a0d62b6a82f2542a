"""Toy 2-D target distributions."""

from __future__ import annotations

import numpy as np

DATASETS = ("ring8", "two_moons")

RING_RADIUS = 2.0
RING_MODES = 8
RING_STD = 0.1


def ring8(n: int, rng: np.random.Generator) -> np.ndarray:
    """Eight Gaussians (variance 0.01) evenly spaced on a radius-2 circle."""
    k = rng.integers(0, RING_MODES, size=n)
    angle = 2.0 * np.pi * k / RING_MODES
    centers = RING_RADIUS * np.stack([np.cos(angle), np.sin(angle)], axis=1)
    return centers + RING_STD * rng.standard_normal((n, 2))


def two_moons(n: int, rng: np.random.Generator, noise: float = 0.05) -> np.ndarray:
    """Two interleaved crescents, centered and scaled to unit RMS radius."""
    upper = rng.random(n) < 0.5
    theta = np.pi * rng.random(n)
    x = np.where(upper, np.cos(theta), 1.0 - np.cos(theta))
    y = np.where(upper, np.sin(theta), 0.5 - np.sin(theta))
    pts = np.stack([x, y], axis=1) + noise * rng.standard_normal((n, 2))
    pts -= np.array([0.5, 0.25])
    return pts / np.sqrt(np.mean(np.sum(pts**2, axis=1)))


def sample_dataset(name: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if name == "ring8":
        return ring8(n, rng)
    if name == "two_moons":
        return two_moons(n, rng)
    raise ValueError(f"unknown dataset {name!r}; expected one of {DATASETS}")
