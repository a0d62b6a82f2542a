"""Closed-form bounds on the DDPM process increment and the three-area split.

The process increment ``delta_t = x_{t+1} - x_t`` (both marginals drawn from
the same clean point with independent noise) is Gaussian with mean
``(sqrt(alpha_{t+1}) - 1) sqrt(alpha_bar_t) x0`` and isotropic variance
``2 - alpha_bar_t (1 + alpha_{t+1})``. The bound curves below replace the
cumulative product by the exponential envelope
``exp{-(beta0 + delta_beta t / 2T) t}``, treating ``t`` as continuous.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from .errors import InvalidParameterError, NotReachedError, StepIndexError
from .schedule import ScheduleTable

ACCELERATION = "acceleration"
DECELERATION = "deceleration"
CONVERGENCE = "convergence"
AREAS = (ACCELERATION, DECELERATION, CONVERGENCE)

DEFAULT_R = 10.0


def _exponent(table: ScheduleTable, t):
    t = np.asarray(t, dtype=np.float64)
    return (table.beta0 + table.delta_beta * t / (2.0 * table.T)) * t


def bound_curves(table: ScheduleTable, t) -> dict[str, np.ndarray]:
    """Evaluate every bound curve at arbitrary real ``t >= 0`` without range checks.

    Useful for limits (``t -> 0``) and finite-difference checks. Returns a
    dict with keys ``phi_hat``, ``psi_hat``, ``dpsi_hat`` and ``r_hat``.
    """
    t = np.asarray(t, dtype=np.float64)
    e = _exponent(table, t)
    decay = np.exp(-e)
    return {
        "phi_hat": table.beta_max * decay,
        "psi_hat": 2.0 - 2.0 * decay,
        "dpsi_hat": 2.0 * (table.beta0 + table.delta_beta * t / table.T) * decay,
        "r_hat": np.exp(e),
    }


def phi_hat(table: ScheduleTable, t):
    """Upper-bound factor on the squared increment mean (per unit ``|E x0|^2``)."""
    table.check_step(t)
    return table.beta_max * np.exp(-_exponent(table, t))


def psi_hat(table: ScheduleTable, t):
    """Lower bound on the increment variance."""
    table.check_step(t)
    return 2.0 - 2.0 * np.exp(-_exponent(table, t))


def dpsi_hat(table: ScheduleTable, t):
    """Analytic time derivative of :func:`psi_hat`."""
    table.check_step(t)
    t = np.asarray(t, dtype=np.float64)
    return 2.0 * (table.beta0 + table.delta_beta * t / table.T) * np.exp(-_exponent(table, t))


def r_hat(table: ScheduleTable, t):
    """Magnitude ``exp{(beta0 + delta_beta t / 2T) t}``; ``psi_hat = 2 - 2 / r_hat``."""
    table.check_step(t)
    return np.exp(_exponent(table, t))


@dataclasses.dataclass(frozen=True)
class ExactIncrementMoments:
    """Exact scalars of the increment distribution at one step.

    ``mean_coeff`` multiplies ``x0`` in the mean; ``var_scalar`` multiplies
    the identity in the covariance.
    """

    mean_coeff: float
    var_scalar: float


def exact_increment_moments(table: ScheduleTable, t) -> ExactIncrementMoments:
    """Exact mean coefficient and variance of ``x_{t+1} - x_t``.

    Vectorized over ``t``; requires ``1 <= t <= T - 1``.
    """
    t_arr = np.asarray(t)
    if t_arr.size and (t_arr.min() < 1 or t_arr.max() > table.T - 1):
        raise StepIndexError(f"step index {t} outside [1, {table.T - 1}] (t = T has no successor)")
    ab = table.alpha_bar[t_arr - 1]
    a_next = table.alpha[t_arr]
    mean_coeff = (np.sqrt(a_next) - 1.0) * np.sqrt(ab)
    var_scalar = 2.0 - ab * (1.0 + a_next)
    if np.ndim(mean_coeff) == 0:
        return ExactIncrementMoments(float(mean_coeff), float(var_scalar))
    return ExactIncrementMoments(mean_coeff, var_scalar)


@dataclasses.dataclass(frozen=True, eq=False)
class IncrementProfile:
    """Bound curves on the grid ``1..T`` plus the area decomposition for magnitude ``r``."""

    T: int
    phi_hat: np.ndarray
    psi_hat: np.ndarray
    dpsi_hat: np.ndarray
    r_hat: np.ndarray
    t_ad: int
    t_dc: int
    r: float
    area: tuple[str, ...]
    table: ScheduleTable

    @property
    def steps(self) -> np.ndarray:
        return np.arange(1, self.T + 1)

    def area_of(self, t: int) -> str:
        return self.area[t - 1]

    def area_mask(self, name: str) -> np.ndarray:
        """Boolean mask over ``1..T`` selecting one area."""
        if name not in AREAS:
            raise ValueError(f"unknown area {name!r}")
        return np.array([a == name for a in self.area])


def boundary_ad(profile: IncrementProfile) -> int:
    """Step of fastest variance growth, ``argmax dpsi_hat`` (ties to smaller t)."""
    return int(np.argmax(profile.dpsi_hat)) + 1


def _first_exceeding(r_values: np.ndarray, r: float) -> int:
    above = r_values > r
    if not above.any():
        raise NotReachedError(
            f"r_hat never exceeds r={r} (max {r_values[-1]:.6g}); choose a smaller magnitude"
        )
    return int(np.argmax(above)) + 1


def boundary_dc(profile: IncrementProfile, r: float) -> int:
    """Smallest step whose magnitude ``r_hat`` exceeds ``r``.

    Raises:
        NotReachedError: if ``r_hat(T) <= r``.
    """
    if not r > 1.0:
        raise InvalidParameterError(f"magnitude r must be > 1, got {r}")
    return _first_exceeding(profile.r_hat, r)


def tau_closed_form(table: ScheduleTable, r: float) -> float:
    """Real-valued threshold at which ``r_hat`` crosses ``r``.

    Positive root of ``delta_beta t^2 / 2T + beta0 t = log r``.
    """
    if not r > 1.0:
        raise InvalidParameterError(f"magnitude r must be > 1, got {r}")
    db, b0, T = table.delta_beta, table.beta0, table.T
    if db == 0.0:
        raise InvalidParameterError("tau is undefined for a constant schedule (delta_beta = 0)")
    return math.sqrt(2.0 * T * math.log(r) / db + (T * b0 / db) ** 2) - T * b0 / db


def tau_step(table: ScheduleTable, r: float) -> int:
    """:func:`tau_closed_form` rounded half-up to an integer step in ``[1, T]``."""
    tau = math.floor(tau_closed_form(table, r) + 0.5)
    return min(max(tau, 1), table.T)


def label_areas(T: int, t_ad: int, t_dc: int) -> tuple[str, ...]:
    # convergence wins when a tiny r puts t_dc before t_ad
    labels = []
    for t in range(1, T + 1):
        if t >= t_dc:
            labels.append(CONVERGENCE)
        elif t < t_ad:
            labels.append(ACCELERATION)
        else:
            labels.append(DECELERATION)
    return tuple(labels)


def build_profile(table: ScheduleTable, r: float = DEFAULT_R) -> IncrementProfile:
    """Evaluate every bound curve on ``1..T`` and locate both area boundaries."""
    if not r > 1.0:
        raise InvalidParameterError(f"magnitude r must be > 1, got {r}")
    t = table.steps
    curves = bound_curves(table, t)
    for arr in curves.values():
        arr.setflags(write=False)
    t_ad = int(np.argmax(curves["dpsi_hat"])) + 1
    t_dc = _first_exceeding(curves["r_hat"], r)
    return IncrementProfile(
        T=table.T,
        phi_hat=curves["phi_hat"],
        psi_hat=curves["psi_hat"],
        dpsi_hat=curves["dpsi_hat"],
        r_hat=curves["r_hat"],
        t_ad=t_ad,
        t_dc=t_dc,
        r=float(r),
        area=label_areas(table.T, t_ad, t_dc),
        table=table,
    )
