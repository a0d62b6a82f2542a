"""Training loop for the weighted, re-sampled denoising objective.

Every batch element draws its own step ``t`` from the configured sampler,
its own noise, and contributes ``w_t * |eps - eps_theta(x_t, t)|^2`` to the
batch mean. Evaluation always uses the EMA parameters.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import time
from pathlib import Path

import numpy as np

from . import increments
from .config import TrainConfig
from .datasets import sample_dataset
from .denoiser import (
    DenoiserParams,
    EmaState,
    OptimizerState,
    adam_step,
    ema_update,
    init_adam,
    init_ema,
    init_params,
    predict,
    time_embed,
    weighted_loss,
)
from .errors import ConfigError
from .evaluation import ancestral_sample, energy_distance
from .io import write_csv
from .schedule import ScheduleTable, build_schedule, forward_sample
from .strategy import (
    TimeStepSampler,
    WeightTable,
    build_asymmetric,
    build_caw_weights,
    constant_weights,
    uniform_sampler,
)

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

# independent streams derived from the run seed
_TRAIN_STREAM, _EVAL_REF_STREAM, _EVAL_SAMPLE_STREAM, _DATA_STREAM = 0, 1, 2, 3


@dataclasses.dataclass
class RunMetrics:
    losses: np.ndarray
    evals: list[tuple[int, float]]
    wall_clock: float
    config_hash: str
    t_counts: np.ndarray | None = None

    def eval_iterations(self) -> list[int]:
        return [it for it, _ in self.evals]

    def eval_values(self) -> list[float]:
        return [v for _, v in self.evals]


@dataclasses.dataclass
class Strategy:
    """The schedule, sampler and weights one run trains with."""

    table: ScheduleTable
    sampler: TimeStepSampler
    weights: WeightTable
    profile: increments.IncrementProfile | None = None


def build_strategy(cfg: TrainConfig) -> Strategy:
    table = build_schedule(cfg.schedule)
    s, w = cfg.sampler, cfg.weighting
    profile = None
    if s.kind == "asymmetric" or w.kind == "caw":
        profile = increments.build_profile(table, s.r if s.r is not None else increments.DEFAULT_R)
    if s.kind == "uniform":
        sampler = uniform_sampler(table.T)
    else:
        tau = s.tau if s.tau is not None else increments.tau_step(table, profile.r)
        sampler = build_asymmetric(table.T, s.k, tau)
    if w.kind == "caw":
        weights = build_caw_weights(profile, w.lam)
    else:
        weights = constant_weights(table.T, w.c)
    return Strategy(table, sampler, weights, profile)


def training_step(
    params: DenoiserParams,
    opt: OptimizerState,
    ema: EmaState,
    batch: np.ndarray,
    table: ScheduleTable,
    sampler: TimeStepSampler,
    weights: WeightTable,
    rng: np.random.Generator,
):
    """One Adam + EMA update on ``batch``; returns ``(loss, drawn_steps)``."""
    if sampler.T != table.T or weights.T != table.T:
        raise ConfigError(
            f"horizon mismatch: schedule T={table.T}, sampler T={sampler.T}, weights T={weights.T}",
            "sampler",
        )
    n = batch.shape[0]
    t = sampler.sample(rng, size=n)
    eps = rng.standard_normal(batch.shape)
    x_t = forward_sample(table, batch, t, eps)
    loss, _, grads = weighted_loss(
        params, x_t, time_embed(t, table.T, params.embed_dim), eps, weights.weight(t)
    )
    adam_step(params, grads, opt)
    ema_update(ema, params)
    return loss, t


def reference_points(cfg: TrainConfig) -> np.ndarray:
    """Held-out data draw the energy distance is measured against."""
    rng = np.random.default_rng([cfg.seed, _EVAL_REF_STREAM])
    return sample_dataset(cfg.dataset, cfg.eval_samples, rng)


def evaluate(params: DenoiserParams, table: ScheduleTable, cfg: TrainConfig, reference: np.ndarray) -> float:
    # same sampling noise at every checkpoint and across configs sharing a seed
    rng = np.random.default_rng([cfg.seed, _EVAL_SAMPLE_STREAM])
    cloud = ancestral_sample(params, table, cfg.eval_samples, rng)
    return energy_distance(cloud, reference)


def train(cfg: TrainConfig, run_dir=None, progress=None):
    """Run ``cfg.iterations`` steps, evaluating the EMA model every ``eval_every``.

    Evaluation also runs at iteration 0. If ``run_dir`` is given the loss
    history, eval history and final checkpoint are written there.

    Returns:
        ``(RunMetrics, checkpoint)`` where ``checkpoint`` is a JSON-ready dict.
    """
    cfg.validate()
    start = time.perf_counter()
    strategy = build_strategy(cfg)
    table = strategy.table
    data = sample_dataset(cfg.dataset, cfg.n_points, np.random.default_rng([cfg.seed, _DATA_STREAM]))
    reference = reference_points(cfg)
    rng = np.random.default_rng([cfg.seed, _TRAIN_STREAM])
    params = init_params(cfg.model.layer_dims, cfg.seed, cfg.model.activation)
    opt = init_adam(params, lr=cfg.lr)
    ema = init_ema(params, cfg.ema_decay)

    losses = np.empty(cfg.iterations)
    counts = np.zeros(table.T, dtype=np.int64)
    evals = [(0, evaluate(ema.as_params(params), table, cfg, reference))]
    for it in range(1, cfg.iterations + 1):
        batch = data[rng.integers(0, cfg.n_points, size=cfg.batch_size)]
        losses[it - 1], t = training_step(
            params, opt, ema, batch, table, strategy.sampler, strategy.weights, rng
        )
        np.add.at(counts, t - 1, 1)
        if it % cfg.eval_every == 0:
            evals.append((it, evaluate(ema.as_params(params), table, cfg, reference)))
            log.debug("iter %d loss %.5f energy %.5f", it, losses[it - 1], evals[-1][1])
            if progress is not None:
                progress(it, evals[-1][1])

    metrics = RunMetrics(losses, evals, time.perf_counter() - start, cfg.config_hash(), counts)
    checkpoint = make_checkpoint(cfg, params, ema, opt)
    if run_dir is not None:
        write_run(Path(run_dir), metrics, checkpoint)
    return metrics, checkpoint


def probe_area_losses(
    params: DenoiserParams,
    table: ScheduleTable,
    profile: increments.IncrementProfile,
    x0: np.ndarray,
    n_probes: int,
    rng: np.random.Generator,
) -> dict[str, float]:
    """Mean unweighted denoising loss per area over fixed ``(t, eps)`` probes.

    Steps are drawn uniformly, clean points from ``x0``; returns one mean per
    area that received at least one probe.
    """
    t = rng.integers(1, table.T + 1, size=n_probes)
    clean = x0[rng.integers(0, x0.shape[0], size=n_probes)]
    eps = rng.standard_normal(clean.shape)
    x_t = forward_sample(table, clean, t, eps)
    per_element = np.sum((predict(params, x_t, t, table.T) - eps) ** 2, axis=1)
    areas = np.asarray(profile.area)[t - 1]
    return {a: float(per_element[areas == a].mean()) for a in increments.AREAS if np.any(areas == a)}


def _tensors_to_json(tensors: dict[str, np.ndarray]) -> dict:
    return {k: v.tolist() for k, v in tensors.items()}


def make_checkpoint(cfg: TrainConfig, params: DenoiserParams, ema: EmaState, opt: OptimizerState) -> dict:
    return {
        "version": CHECKPOINT_VERSION,
        "config_hash": cfg.config_hash(),
        "config": cfg.to_dict(),
        "schedule": cfg.schedule.to_dict(),
        "layer_dims": list(params.layer_dims),
        "activation": params.activation,
        "params": _tensors_to_json(params.tensors),
        "ema": {"decay": ema.decay, "shadow": _tensors_to_json(ema.shadow)},
        "optimizer": {
            "step": opt.step,
            "lr": opt.lr,
            "betas": list(opt.betas),
            "eps": opt.eps,
            "m": _tensors_to_json(opt.m),
            "v": _tensors_to_json(opt.v),
        },
    }


def load_checkpoint(path) -> dict:
    with open(path) as fh:
        ckpt = json.load(fh)
    if ckpt.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {ckpt.get('version')!r}", "version")
    return ckpt


def checkpoint_params(ckpt: dict, use_ema: bool = True) -> DenoiserParams:
    src = ckpt["ema"]["shadow"] if use_ema else ckpt["params"]
    tensors = {k: np.asarray(v, dtype=np.float64) for k, v in src.items()}
    return DenoiserParams(list(ckpt["layer_dims"]), tensors, ckpt["activation"])


def write_run(run_dir: Path, metrics: RunMetrics, checkpoint: dict) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    its = np.arange(1, len(metrics.losses) + 1)
    write_csv(run_dir / "metrics.csv", ["iteration", "loss"], [its, metrics.losses])
    write_csv(
        run_dir / "eval.csv",
        ["iteration", "energy_distance"],
        [metrics.eval_iterations(), metrics.eval_values()],
    )
    with open(run_dir / "checkpoint.json", "w") as fh:
        json.dump(checkpoint, fh, sort_keys=True)
        fh.write("\n")
