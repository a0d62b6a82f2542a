"""Process-increment analysis for continuous ``s``-``sigma`` schedules.

A schedule perturbs data as ``x_t = s(t) x0 + s(t) sigma(t) eps``. The
increment between ``t`` and ``t + dt`` has mean ``Delta x0`` with
``Delta = s(t+dt) - s(t)`` and variance ``Sigma = s+^2 sigma+^2 + s^2 sigma^2``.

Rates are carried for ``sigma^2`` rather than ``sigma`` (``d sigma^2 / dt``),
which keeps VE (rate 1) and EDM (rate ``2t``) exact and avoids the
``1 / sigma`` singularity of VP at ``t = 0``.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Literal

import numpy as np

from . import increments
from .errors import InvalidParameterError, NumericError
from .schedule import ScheduleTable

Fn = Callable[[np.ndarray], np.ndarray]
SdeKind = Literal["VP", "VE", "EDM", "custom"]

# continuous-time VP rates matching the DDPM linear schedule 1e-4..0.02 at T=1000
DEFAULT_VP_BETA0 = 0.0801
DEFAULT_VP_DELTA_BETA = 19.9
DEFAULT_T_MAX = {"VP": 1.0, "VE": 80.0**2, "EDM": 80.0}


@dataclasses.dataclass(frozen=True)
class SdeSchedule:
    kind: SdeKind
    s: Fn
    sigma2: Fn
    s_dot: Fn
    sigma2_dot: Fn
    vp_params: dict | None = None

    @property
    def t_max(self) -> float:
        return DEFAULT_T_MAX.get(self.kind, 1.0)


@dataclasses.dataclass(frozen=True)
class GeneralIncrement:
    Delta: float | np.ndarray = math.nan
    Sigma: float | np.ndarray = math.nan
    Delta_dot: float | np.ndarray = math.nan
    Sigma_dot: float | np.ndarray = math.nan


def _vp(delta_beta: float, beta0: float) -> SdeSchedule:
    def log_s(t):
        return -0.25 * delta_beta * t**2 - 0.5 * beta0 * t

    def s(t):
        return np.exp(log_s(np.asarray(t, dtype=np.float64)))

    def sigma2(t):
        t = np.asarray(t, dtype=np.float64)
        return np.expm1(0.5 * delta_beta * t**2 + beta0 * t)

    def s_dot(t):
        t = np.asarray(t, dtype=np.float64)
        return -0.5 * (delta_beta * t + beta0) * s(t)

    def sigma2_dot(t):
        # 2 sigma * sigma_dot with sigma_dot = (1 + sigma^2)(delta_beta t + beta0) / (2 sigma)
        t = np.asarray(t, dtype=np.float64)
        return (1.0 + sigma2(t)) * (delta_beta * t + beta0)

    return SdeSchedule("VP", s, sigma2, s_dot, sigma2_dot, {"delta_beta": delta_beta, "beta0": beta0})


def _ones(t):
    return np.ones_like(np.asarray(t, dtype=np.float64))


def _zeros(t):
    return np.zeros_like(np.asarray(t, dtype=np.float64))


def preset_schedule(kind: str, params: dict | None = None) -> SdeSchedule:
    """Build the VP, VE or EDM schedule.

    VP takes ``params = {"delta_beta": ..., "beta0": ...}`` in continuous
    time on ``[0, 1]``; VE and EDM take no parameters.
    """
    kind = kind.upper()
    params = dict(params or {})
    if kind == "VP":
        db = float(params.pop("delta_beta", DEFAULT_VP_DELTA_BETA))
        b0 = float(params.pop("beta0", DEFAULT_VP_BETA0))
        if params:
            raise InvalidParameterError(f"unknown VP parameters {sorted(params)}")
        if db < 0 or b0 < 0 or db + b0 <= 0:
            raise InvalidParameterError("VP needs delta_beta >= 0, beta0 >= 0, not both zero")
        return _vp(db, b0)
    if params:
        raise InvalidParameterError(f"{kind} takes no parameters, got {sorted(params)}")
    if kind == "VE":
        return SdeSchedule("VE", _ones, lambda t: np.asarray(t, dtype=np.float64), _zeros, _ones)
    if kind == "EDM":
        return SdeSchedule(
            "EDM",
            _ones,
            lambda t: np.asarray(t, dtype=np.float64) ** 2,
            _zeros,
            lambda t: 2.0 * np.asarray(t, dtype=np.float64),
        )
    raise InvalidParameterError(f"unknown SDE schedule {kind!r}; expected VP, VE or EDM")


def vp_from_table(table: ScheduleTable) -> SdeSchedule:
    """VP schedule whose ``s(t/T)^2`` equals the envelope ``exp{-(beta0 t + delta_beta t^2 / 2T)}``."""
    return _vp(table.T * table.delta_beta, table.T * table.beta0)


def central_difference(fn: Fn, t, h: float = 1e-4):
    t = np.asarray(t, dtype=np.float64)
    return (fn(t + h) - fn(t - h)) / (2.0 * h)


def custom_schedule(s: Fn, sigma2: Fn, s_dot: Fn, sigma2_dot: Fn, check_points, rtol: float = 1e-3) -> SdeSchedule:
    """Wrap user-supplied schedule functions after checking their rates.

    ``s_dot``/``sigma2_dot`` are compared with central differences of ``s``
    and ``sigma2`` at ``check_points``.

    Raises:
        InvalidParameterError: if a supplied rate disagrees with the
            finite difference beyond ``rtol`` (absolute floor 1e-8).
    """
    pts = np.asarray(check_points, dtype=np.float64)
    for name, fn, rate in (("s_dot", s, s_dot), ("sigma2_dot", sigma2, sigma2_dot)):
        fd = central_difference(fn, pts)
        got = np.asarray(rate(pts), dtype=np.float64)
        if not np.allclose(got, fd, rtol=rtol, atol=1e-8):
            raise InvalidParameterError(f"{name} disagrees with the finite difference of its function")
    return SdeSchedule("custom", s, sigma2, s_dot, sigma2_dot)


def _eval(fn: Fn, t, what: str):
    with np.errstate(all="ignore"):
        out = np.asarray(fn(t), dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise NumericError(f"{what} is undefined or non-finite at t={t}")
    return out


def _check_args(t, dt):
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise InvalidParameterError("t must be >= 0")
    if not dt > 0:
        raise InvalidParameterError(f"dt must be > 0, got {dt}")
    return t


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def increment_moments_general(sched: SdeSchedule, t, dt: float) -> GeneralIncrement:
    """``Delta`` and ``Sigma`` of the increment from ``t`` to ``t + dt`` (vectorized in ``t``)."""
    t = _check_args(t, dt)
    s, s_p = _eval(sched.s, t, "s"), _eval(sched.s, t + dt, "s")
    v, v_p = _eval(sched.sigma2, t, "sigma2"), _eval(sched.sigma2, t + dt, "sigma2")
    return GeneralIncrement(Delta=_scalar(s_p - s), Sigma=_scalar(s_p**2 * v_p + s**2 * v))


def increment_rates_general(sched: SdeSchedule, t, dt: float) -> GeneralIncrement:
    """Time derivatives ``Delta_dot`` and ``Sigma_dot`` at fixed ``dt``.

    ``Sigma_dot = m . n_dot`` with ``m = [s+^2, sigma+^2, s^2, sigma^2]`` and
    ``n = [sigma+^2, s+^2, sigma^2, s^2]``; every rate is evaluated at the
    same argument as its moment.
    """
    t = _check_args(t, dt)
    tp = t + dt
    s, s_p = _eval(sched.s, t, "s"), _eval(sched.s, tp, "s")
    sd, sd_p = _eval(sched.s_dot, t, "s_dot"), _eval(sched.s_dot, tp, "s_dot")
    v, v_p = _eval(sched.sigma2, t, "sigma2"), _eval(sched.sigma2, tp, "sigma2")
    vd, vd_p = _eval(sched.sigma2_dot, t, "sigma2_dot"), _eval(sched.sigma2_dot, tp, "sigma2_dot")
    m = (s_p**2, v_p, s**2, v)
    n_dot = (vd_p, 2.0 * s_p * sd_p, vd, 2.0 * s * sd)
    sigma_dot = sum(a * b for a, b in zip(m, n_dot))
    return GeneralIncrement(Delta_dot=_scalar(sd_p - sd), Sigma_dot=_scalar(sigma_dot))


@dataclasses.dataclass(frozen=True, eq=False)
class GeneralProfile:
    t: np.ndarray
    dt: float
    s: np.ndarray
    sigma2: np.ndarray
    Delta: np.ndarray
    Sigma: np.ndarray
    Delta_dot: np.ndarray
    Sigma_dot: np.ndarray
    area: tuple[str, ...]
    i_ad: int
    i_dc: int


def area_decomposition_general(sched: SdeSchedule, t_grid, dt: float | None = None, r: float = 10.0) -> GeneralProfile:
    """Label each grid point acceleration / deceleration / convergence.

    The acceleration band ends at the first grid argmax of ``Sigma_dot``;
    convergence starts at the first point where ``Sigma`` reaches
    ``(1 - 1/r)`` of its grid maximum and takes precedence. A constant
    ``Sigma_dot`` therefore has no acceleration band, and a monotone
    increasing one has no deceleration band.

    Raises:
        InvalidParameterError: for fewer than 3 points, a non-increasing
            grid, or ``r <= 1``.
    """
    t = np.asarray(t_grid, dtype=np.float64)
    if t.ndim != 1 or t.size < 3:
        raise InvalidParameterError("area decomposition needs a grid of at least 3 points")
    if np.any(np.diff(t) <= 0):
        raise InvalidParameterError("grid must be strictly increasing")
    if not r > 1.0:
        raise InvalidParameterError(f"magnitude r must be > 1, got {r}")
    if dt is None:
        dt = float(t[1] - t[0])
    mom = increment_moments_general(sched, t, dt)
    rates = increment_rates_general(sched, t, dt)
    sigma = np.asarray(mom.Sigma)
    i_ad = int(np.argmax(rates.Sigma_dot))
    i_dc = int(np.argmax(sigma >= (1.0 - 1.0 / r) * sigma.max()))
    labels = increments.label_areas(t.size, i_ad + 1, i_dc + 1)
    return GeneralProfile(
        t=t,
        dt=dt,
        s=_eval(sched.s, t, "s"),
        sigma2=_eval(sched.sigma2, t, "sigma2"),
        Delta=np.asarray(mom.Delta),
        Sigma=sigma,
        Delta_dot=np.asarray(rates.Delta_dot),
        Sigma_dot=np.asarray(rates.Sigma_dot),
        area=labels,
        i_ad=i_ad,
        i_dc=i_dc,
    )


def default_grid(sched: SdeSchedule, n: int = 1000, t_max: float | None = None) -> np.ndarray:
    return np.linspace(0.0, sched.t_max if t_max is None else t_max, n)
