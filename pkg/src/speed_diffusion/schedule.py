"""Discrete DDPM noise schedules and the forward (noising) process.

Arrays in :class:`ScheduleTable` are stored 0-based but indexed by the
1-based diffusion step everywhere in the public API: ``table.beta[t - 1]``
is the variance added at step ``t``.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Literal

import numpy as np

from .errors import InvalidParameterError, StepIndexError, UnderflowError

ScheduleKind = Literal["linear", "quadratic", "cosine"]
SCHEDULE_KINDS = ("linear", "quadratic", "cosine")

# Nichol & Dhariwal clip range for the cosine schedule.
COSINE_BETA_MIN = 1e-8
COSINE_BETA_MAX = 0.999


@dataclasses.dataclass(frozen=True)
class ScheduleSpec:
    """Parameters of a discrete beta schedule.

    ``beta_start``/``beta_end`` are ignored by the cosine schedule, which is
    parameterized by ``s_off`` instead.
    """

    kind: ScheduleKind = "linear"
    T: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 0.02
    s_off: float = 0.008

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise InvalidParameterError(
                f"unknown schedule kind {self.kind!r}; expected one of {SCHEDULE_KINDS}"
            )
        if isinstance(self.T, bool) or not isinstance(self.T, (int, np.integer)) or self.T < 2:
            raise InvalidParameterError(f"T must be an integer >= 2, got {self.T!r}")
        if not 0.0 < self.beta_start < self.beta_end < 1.0:
            raise InvalidParameterError(
                "need 0 < beta_start < beta_end < 1, got "
                f"beta_start={self.beta_start}, beta_end={self.beta_end}"
            )
        if self.kind == "cosine" and not self.s_off >= 0.0:
            raise InvalidParameterError(f"s_off must be >= 0, got {self.s_off}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True, eq=False)
class ScheduleTable:
    """Precomputed schedule arrays for steps ``1..T``.

    Attributes:
        T: number of diffusion steps.
        beta: per-step variances, ``beta[t - 1] = beta_t``.
        alpha: ``1 - beta``.
        alpha_bar: cumulative products of ``alpha``.
        delta_beta: ``max(beta) - min(beta)``.
        beta0: extrapolated ``beta_1 - delta_beta / T``.
        spec: the spec the table was built from, if any.
    """

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    delta_beta: float
    beta0: float
    spec: ScheduleSpec | None = None

    @property
    def beta_max(self) -> float:
        return float(self.beta.max())

    @property
    def steps(self) -> np.ndarray:
        """The integer grid ``1..T``."""
        return np.arange(1, self.T + 1)

    def check_step(self, t) -> None:
        t_arr = np.asarray(t)
        if t_arr.size and (t_arr.min() < 1 or t_arr.max() > self.T):
            raise StepIndexError(f"step index {t} outside [1, {self.T}]")

    def alpha_bar_prev(self) -> np.ndarray:
        """``alpha_bar[t - 1]`` for every step, with ``alpha_bar_0 = 1``."""
        return np.concatenate(([1.0], self.alpha_bar[:-1]))


def _linear_betas(spec: ScheduleSpec) -> np.ndarray:
    return np.linspace(spec.beta_start, spec.beta_end, spec.T, dtype=np.float64)


def _quadratic_betas(spec: ScheduleSpec) -> np.ndarray:
    root = np.linspace(math.sqrt(spec.beta_start), math.sqrt(spec.beta_end), spec.T)
    return root**2


def _cosine_betas(spec: ScheduleSpec) -> np.ndarray:
    t = np.arange(0, spec.T + 1, dtype=np.float64)
    f = np.cos((t / spec.T + spec.s_off) / (1.0 + spec.s_off) * math.pi / 2) ** 2
    alpha_bar = f / f[0]
    betas = 1.0 - alpha_bar[1:] / alpha_bar[:-1]
    return np.clip(betas, COSINE_BETA_MIN, COSINE_BETA_MAX)


_BUILDERS = {
    "linear": _linear_betas,
    "quadratic": _quadratic_betas,
    "cosine": _cosine_betas,
}


def table_from_betas(beta, spec: ScheduleSpec | None = None) -> ScheduleTable:
    """Build a :class:`ScheduleTable` from an explicit beta array.

    Raises:
        InvalidParameterError: if any beta is outside ``(0, 1)``.
        UnderflowError: if ``alpha_bar`` underflows to exactly zero.
    """
    beta = np.array(beta, dtype=np.float64)
    if beta.ndim != 1 or beta.size < 2:
        raise InvalidParameterError("beta must be a 1-D array with at least 2 entries")
    if not np.all((beta > 0.0) & (beta < 1.0)):
        raise InvalidParameterError("every beta must lie strictly inside (0, 1)")
    T = beta.size
    alpha = 1.0 - beta
    # log-space cumulative product avoids drift over long horizons
    alpha_bar = np.exp(np.cumsum(np.log1p(-beta)))
    if np.any(alpha_bar == 0.0):
        first = int(np.argmax(alpha_bar == 0.0)) + 1
        raise UnderflowError(f"alpha_bar underflows to 0 at t={first}; T={T} is too large")
    delta_beta = float(beta.max() - beta.min())
    beta0 = float(beta[0] - delta_beta / T)
    for arr in (beta, alpha, alpha_bar):
        arr.setflags(write=False)
    return ScheduleTable(T, beta, alpha, alpha_bar, delta_beta, beta0, spec)


def build_schedule(spec: ScheduleSpec) -> ScheduleTable:
    """Construct the schedule table described by ``spec``."""
    return table_from_betas(_BUILDERS[spec.kind](spec), spec)


def forward_sample(table: ScheduleTable, x0, t, noise) -> np.ndarray:
    """Noise clean points to step ``t``: ``sqrt(ab) * x0 + sqrt(1 - ab) * noise``.

    ``t`` may be a scalar or one step per row of ``x0``.
    """
    table.check_step(t)
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    ab = table.alpha_bar[np.asarray(t) - 1]
    if np.ndim(ab):
        ab = ab.reshape(ab.shape + (1,) * (x0.ndim - ab.ndim))
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise
