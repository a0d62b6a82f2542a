"""Time-step aware acceleration for diffusion training.

Asymmetric time-step sampling and change-aware loss weighting built from
closed-form bounds on the forward-process increment, plus a small numpy
denoiser for 2-D experiments.
"""

from .increments import (
    IncrementProfile,
    boundary_ad,
    boundary_dc,
    build_profile,
    exact_increment_moments,
    tau_closed_form,
    tau_step,
)
from .schedule import ScheduleSpec, ScheduleTable, build_schedule, forward_sample
from .strategy import (
    TimeStepSampler,
    WeightTable,
    build_asymmetric,
    build_caw_weights,
    constant_weights,
    uniform_sampler,
)

__version__ = "0.1.0"

__all__ = [
    "IncrementProfile",
    "ScheduleSpec",
    "ScheduleTable",
    "TimeStepSampler",
    "WeightTable",
    "boundary_ad",
    "boundary_dc",
    "build_asymmetric",
    "build_caw_weights",
    "build_profile",
    "build_schedule",
    "constant_weights",
    "exact_increment_moments",
    "forward_sample",
    "tau_closed_form",
    "tau_step",
    "uniform_sampler",
]
