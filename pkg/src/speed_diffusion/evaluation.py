"""DDPM ancestral sampling and the energy distance between point clouds."""

from __future__ import annotations

import dataclasses
from typing import Literal

import numpy as np

from .denoiser import DenoiserParams, predict
from .errors import InvalidParameterError, NumericError
from .schedule import ScheduleTable


@dataclasses.dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    source: Literal["data", "generated"] = "data"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InvalidParameterError("a point cloud needs at least one point, shape (n, d)")
        if not np.all(np.isfinite(pts)):
            raise NumericError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]


def ancestral_sample(params: DenoiserParams, table: ScheduleTable, n: int, rng: np.random.Generator) -> PointCloud:
    """Generate ``n`` points with the full ``T``-step DDPM reverse chain.

    Uses the posterior variance ``beta_t (1 - ab_{t-1}) / (1 - ab_t)`` and
    no noise on the final step.

    Raises:
        NumericError: when a reverse step produces a non-finite point.
    """
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    ab_prev = table.alpha_bar_prev()
    x = rng.standard_normal((n, 2))
    for t in range(table.T, 0, -1):
        beta, alpha, ab = table.beta[t - 1], table.alpha[t - 1], table.alpha_bar[t - 1]
        eps = predict(params, x, t, table.T)
        x = (x - beta / np.sqrt(1.0 - ab) * eps) / np.sqrt(alpha)
        if t > 1:
            var = beta * (1.0 - ab_prev[t - 1]) / (1.0 - ab)
            x = x + np.sqrt(var) * rng.standard_normal((n, 2))
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite sample produced at reverse step t={t}")
    return PointCloud(x, "generated")


def _mean_pairwise_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = a[:, None, :] - b[None, :, :]
    return float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)).mean())


def energy_distance(a, b) -> float:
    """V-statistic energy distance ``2 E|a-b| - E|a-a'| - E|b-b'|``.

    Accepts :class:`PointCloud` objects or ``(n, d)`` arrays. All pairs
    (including self pairs) enter the within-sample means, so identical
    clouds give exactly zero.
    """
    a = a.points if isinstance(a, PointCloud) else PointCloud(a).points
    b = b.points if isinstance(b, PointCloud) else PointCloud(b).points
    if a.shape[1] != b.shape[1]:
        raise InvalidParameterError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    value = 2.0 * _mean_pairwise_distance(a, b) - _mean_pairwise_distance(a, a) - _mean_pairwise_distance(b, b)
    return max(value, 0.0)
