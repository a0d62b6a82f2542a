"""Time-step samplers and per-step loss weights.

The asymmetric sampler boosts every step ``t <= tau`` by a factor ``k``
relative to the suppressed steps ``t > tau``. Change-aware weights map the
variance growth rate ``dpsi_hat`` affinely onto ``[1 - lambda, lambda]``.
"""

from __future__ import annotations

import dataclasses
from typing import Literal

import numpy as np

from .errors import InvalidParameterError, StepIndexError
from .increments import IncrementProfile

DEFAULT_K = 5.0
DEFAULT_LAMBDA = 0.6


@dataclasses.dataclass(frozen=True)
class TimeStepSampler:
    """Two-level probability mass function over steps ``1..T``.

    ``p_low_region`` is the mass of each step ``t <= tau`` and ``p_high_t``
    the mass of each step ``t > tau``. A uniform sampler has ``tau = T``
    and ``k = 1``.
    """

    T: int
    kind: Literal["uniform", "asymmetric"]
    tau: int
    k: float
    p_low_region: float
    p_high_t: float

    @property
    def low_mass(self) -> float:
        """Total probability of the boosted region ``t <= tau``."""
        return self.tau * self.p_low_region

    def pmf(self, t):
        """Probability of step ``t`` (vectorized)."""
        t_arr = np.asarray(t)
        if t_arr.size and (t_arr.min() < 1 or t_arr.max() > self.T):
            raise StepIndexError(f"step index {t} outside [1, {self.T}]")
        return np.where(t_arr <= self.tau, self.p_low_region, self.p_high_t)

    def pmf_table(self) -> np.ndarray:
        return self.pmf(np.arange(1, self.T + 1)).astype(np.float64)

    def sample(self, rng: np.random.Generator, size=None):
        """Draw steps by inverse CDF on the two-piece pmf.

        One uniform variate per draw: it selects the region, then is
        rescaled within that region to a step index. A ``k = 1`` sampler
        takes exactly the uniform path so both consume the RNG identically.
        """
        u = rng.random(size=size)
        if self.kind == "uniform" or self.k == 1.0 or self.tau == self.T:
            t = np.floor(u * self.T).astype(np.int64) + 1
            return np.minimum(t, self.T)
        m = self.low_mass
        low = np.floor(u / m * self.tau).astype(np.int64) + 1
        high = self.tau + np.floor((u - m) / (1.0 - m) * (self.T - self.tau)).astype(np.int64) + 1
        t = np.where(u < m, np.minimum(low, self.tau), np.minimum(high, self.T))
        return t if size is not None else int(t)


def build_asymmetric(T: int, k: float, tau: int) -> TimeStepSampler:
    """Sampler with mass ``k / (T + tau (k - 1))`` on ``t <= tau`` and ``1 / (...)`` above."""
    if T < 1:
        raise InvalidParameterError(f"T must be >= 1, got {T}")
    if not k >= 1.0:
        raise InvalidParameterError(f"suppression intensity k must be >= 1, got {k}")
    if int(tau) != tau or not 1 <= tau <= T:
        raise InvalidParameterError(f"tau must be an integer step in [1, {T}], got {tau}")
    tau = int(tau)
    denom = T + tau * (k - 1.0)
    return TimeStepSampler(T, "asymmetric", tau, float(k), k / denom, 1.0 / denom)


def uniform_sampler(T: int) -> TimeStepSampler:
    if T < 1:
        raise InvalidParameterError(f"T must be >= 1, got {T}")
    return TimeStepSampler(T, "uniform", T, 1.0, 1.0 / T, 1.0 / T)


def sample_timestep(sampler: TimeStepSampler, rng: np.random.Generator) -> int:
    return int(sampler.sample(rng))


@dataclasses.dataclass(frozen=True, eq=False)
class WeightTable:
    """Per-step loss weights ``w[t - 1]``.

    ``source_min``/``source_max`` record the clamped extrema the affine map
    was anchored on (``nan`` for constant weights).
    """

    T: int
    w: np.ndarray
    lam: float
    source_min: float
    source_max: float

    def weight(self, t):
        return self.w[np.asarray(t) - 1]


def build_caw_weights(profile: IncrementProfile, lam: float = DEFAULT_LAMBDA) -> WeightTable:
    """Change-aware weights from the variance growth rate of ``profile``.

    ``min(1, max dpsi_hat)`` maps to ``lam`` and ``max(0, min dpsi_hat)`` to
    ``1 - lam``; values in between are interpolated linearly and values
    outside are clamped first.
    """
    if not 0.5 <= lam <= 1.0:
        raise InvalidParameterError(f"lambda must lie in [0.5, 1], got {lam}")
    src = np.asarray(profile.dpsi_hat, dtype=np.float64)
    hi = min(1.0, float(src.max()))
    lo = max(0.0, float(src.min()))
    if hi <= lo or lam == 0.5:
        w = np.full(profile.T, 0.5)
    else:
        frac = (np.clip(src, lo, hi) - lo) / (hi - lo)
        # lerp form hits both endpoints exactly at frac 0 and 1
        w = (1.0 - lam) * (1.0 - frac) + lam * frac
    w.setflags(write=False)
    return WeightTable(profile.T, w, float(lam), lo, hi)


def constant_weights(T: int, c: float = 1.0) -> WeightTable:
    if T < 1:
        raise InvalidParameterError(f"T must be >= 1, got {T}")
    if not c > 0.0:
        raise InvalidParameterError(f"constant weight must be > 0, got {c}")
    w = np.full(T, float(c))
    w.setflags(write=False)
    return WeightTable(T, w, float("nan"), float("nan"), float("nan"))
