"""Command line entry point: ``analyze``, ``train``, ``compare`` and ``sample``.

Exit codes: 0 success, 2 configuration error, 3 numeric abort, 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import increments, sde
from .config import RunConfig, SamplerConfig, WeightingConfig, load_config
from .errors import ConfigError, InvalidParameterError, NumericError
from .evaluation import ancestral_sample
from .io import write_csv, write_json
from .schedule import ScheduleSpec, build_schedule
from .strategy import DEFAULT_K, DEFAULT_LAMBDA, build_asymmetric, build_caw_weights
from .trainer import RunMetrics, checkpoint_params, load_checkpoint, train

log = logging.getLogger("speed_diffusion")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

# compare: threshold defaults to the first run's metric at this fraction of its run
THRESHOLD_FRACTION = 0.6


def _with_strategy_overrides(cfg: RunConfig, args) -> RunConfig:
    """Apply ``--k/--tau/--r/--lambda``; any sampler flag switches to asymmetric sampling."""
    tc = cfg.train
    s = tc.sampler
    if args.k is not None or args.tau is not None or args.r is not None:
        s = dataclasses.replace(
            s,
            kind="asymmetric",
            k=args.k if args.k is not None else s.k,
            tau=args.tau if args.tau is not None else s.tau,
            r=args.r if args.r is not None else s.r,
        )
    w = tc.weighting
    if args.lam is not None:
        w = dataclasses.replace(w, kind="caw", lam=args.lam)
    tc = dataclasses.replace(tc, sampler=s, weighting=w).validate()
    return dataclasses.replace(cfg, train=tc)


def _resolve_config(args, path=None, strategy_overrides: bool = True) -> RunConfig:
    path = path if path is not None else args.config
    cfg = load_config(path) if path else RunConfig()
    tc = cfg.train
    if args.seed is not None:
        tc = dataclasses.replace(tc, seed=args.seed).validate()
    analysis = cfg.analysis
    if args.r is not None:
        analysis = dataclasses.replace(analysis, r=args.r)
    if getattr(args, "sde", None):
        analysis = dataclasses.replace(analysis, sde=args.sde)
    cfg = dataclasses.replace(
        cfg,
        train=tc,
        out_dir=str(args.out) if args.out is not None else cfg.out_dir,
        analysis=analysis,
    )
    return _with_strategy_overrides(cfg, args) if strategy_overrides else cfg


def unique_dir(parent: Path, name: str) -> Path:
    """``parent/name``, suffixed ``-1``, ``-2``, ... if already taken."""
    candidate = parent / name
    i = 0
    while candidate.exists():
        i += 1
        candidate = parent / f"{name}-{i}"
    return candidate


def cmd_analyze(cfg: RunConfig) -> dict:
    """Write schedule, bound-curve, strategy and (optionally) SDE tables plus a summary."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tc = cfg.train
    table = build_schedule(tc.schedule)
    r = tc.sampler.r if tc.sampler.r is not None else cfg.analysis.r
    profile = increments.build_profile(table, r)
    tau_real = increments.tau_closed_form(table, r)
    tau = tc.sampler.tau if tc.sampler.tau is not None else increments.tau_step(table, r)
    k = tc.sampler.k if tc.sampler.kind == "asymmetric" else DEFAULT_K
    lam = tc.weighting.lam if tc.weighting.kind == "caw" else DEFAULT_LAMBDA
    sampler = build_asymmetric(table.T, k, tau)
    weights = build_caw_weights(profile, lam)
    t = table.steps

    write_csv(out / "schedule.csv", ["t", "beta", "alpha", "alpha_bar"], [t, table.beta, table.alpha, table.alpha_bar])
    write_csv(
        out / "profile.csv",
        ["t", "phi_hat", "psi_hat", "dpsi_hat", "r_hat", "area"],
        [t, cfg.analysis.x0_norm2 * profile.phi_hat, profile.psi_hat, profile.dpsi_hat, profile.r_hat, profile.area],
    )
    write_csv(out / "strategy.csv", ["t", "pmf", "weight"], [t, sampler.pmf_table(), weights.w])
    if cfg.analysis.sde:
        sched = sde.preset_schedule(cfg.analysis.sde)
        grid = sde.default_grid(sched, cfg.analysis.sde_points, cfg.analysis.sde_t_max)
        gp = sde.area_decomposition_general(sched, grid, r=r)
        write_csv(
            out / "sde.csv",
            ["t", "s", "sigma2", "Delta", "Sigma", "Delta_dot", "Sigma_dot", "area"],
            [gp.t, gp.s, gp.sigma2, gp.Delta, gp.Sigma, gp.Delta_dot, gp.Sigma_dot, gp.area],
        )
    summary = {
        "t_ad": profile.t_ad,
        "t_dc": profile.t_dc,
        "tau": tau,
        "tau_closed_form": tau_real,
        "r": r,
        "k": k,
        "lambda": lam,
        "T": table.T,
        "delta_beta": table.delta_beta,
        "beta0": table.beta0,
    }
    write_json(out / "summary.json", summary)
    return summary


def _write_timing(run_dir: Path, metrics: RunMetrics) -> None:
    write_json(run_dir / "timing.json", {"wall_clock_seconds": metrics.wall_clock})


def cmd_train(cfg: RunConfig) -> Path:
    """Train one configuration into ``out_dir/<label>-<config hash>``."""
    tc = cfg.train
    run_dir = unique_dir(Path(cfg.out_dir), f"{cfg.label}-{tc.config_hash()}")
    metrics, _ = train(tc, run_dir, progress=lambda it, v: log.info("iter %d energy %.5f", it, v))
    write_json(
        run_dir / "run.json",
        {
            "label": cfg.label,
            "config_hash": metrics.config_hash,
            "config": tc.to_dict(),
            "final_loss": float(metrics.losses[-1]) if len(metrics.losses) else None,
            "final_energy_distance": metrics.evals[-1][1],
        },
    )
    _write_timing(run_dir, metrics)
    return run_dir


def iterations_to_threshold(evals, threshold: float):
    """First checkpoint iteration whose metric is at or below ``threshold``, else ``None``."""
    for it, value in evals:
        if value <= threshold:
            return it
    return None


def default_threshold(evals, iterations: int, fraction: float = THRESHOLD_FRACTION) -> float:
    """Metric of the checkpoint closest to ``fraction`` of the run (earlier on ties)."""
    target = fraction * iterations
    return min(evals, key=lambda e: (abs(e[0] - target), e[0]))[1]


def compare_verdict(evals_a, evals_b, threshold: float) -> dict:
    ia = iterations_to_threshold(evals_a, threshold)
    ib = iterations_to_threshold(evals_b, threshold)
    for name, it in (("a", ia), ("b", ib)):
        if it is None:
            log.warning("run %s never reached threshold %.6g", name, threshold)
    ratio = None
    if ia is not None and ib is not None:
        ratio = 1.0 if ia == ib else (ia / ib if ib else None)
    return {
        "threshold": threshold,
        "iterations_to_threshold_a": ia,
        "iterations_to_threshold_b": ib,
        "speedup_ratio": ratio,
    }


def speed_variant(cfg: RunConfig) -> RunConfig:
    """The default asymmetric + change-aware counterpart of a run."""
    tc = cfg.train
    tc = dataclasses.replace(
        tc,
        sampler=SamplerConfig("asymmetric", DEFAULT_K, None, increments.DEFAULT_R),
        weighting=WeightingConfig("caw", DEFAULT_LAMBDA),
    ).validate()
    return dataclasses.replace(cfg, train=tc, label=f"{cfg.label}-speed")


def cmd_compare(cfg_a: RunConfig, cfg_b: RunConfig) -> tuple[Path, dict]:
    """Train both configs and report iterations-to-threshold and their ratio (a / b)."""
    a, b = cfg_a.train, cfg_b.train
    for key in ("dataset", "eval_every", "eval_samples", "iterations", "seed"):
        if getattr(a, key) != getattr(b, key):
            raise ConfigError(f"compared configs must share {key!r}", key)
    out = unique_dir(Path(cfg_a.out_dir), f"compare-{a.config_hash()}-{b.config_hash()}")
    out.mkdir(parents=True)
    dir_a = out / f"a-{cfg_a.label}"
    dir_b = out / f"b-{cfg_b.label}"
    metrics_a, _ = train(a, dir_a)
    metrics_b, _ = train(b, dir_b)
    _write_timing(dir_a, metrics_a)
    _write_timing(dir_b, metrics_b)
    threshold = cfg_a.compare.threshold
    if threshold is None:
        threshold = default_threshold(metrics_a.evals, a.iterations)
    write_csv(
        out / "compare.csv",
        ["iteration", "metric_a", "metric_b"],
        [metrics_a.eval_iterations(), metrics_a.eval_values(), metrics_b.eval_values()],
    )
    verdict = compare_verdict(metrics_a.evals, metrics_b.evals, threshold)
    verdict.update(label_a=cfg_a.label, label_b=cfg_b.label)
    write_json(out / "verdict.json", verdict)
    return out, verdict


def cmd_sample(checkpoint: Path, n: int, seed: int, out: Path) -> Path:
    ckpt = load_checkpoint(checkpoint)
    table = build_schedule(ScheduleSpec(**ckpt["schedule"]))
    cloud = ancestral_sample(checkpoint_params(ckpt), table, n, np.random.default_rng(seed))
    out.parent.mkdir(parents=True, exist_ok=True)
    return write_csv(out, ["x", "y"], [cloud.points[:, 0], cloud.points[:, 1]])


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--out", type=Path, help="output directory (overrides out_dir)")
    p.add_argument("--seed", type=int)
    p.add_argument("--r", type=float, help="convergence magnitude used to derive tau")
    p.add_argument("--tau", type=int, help="sampling threshold step")
    p.add_argument("--k", type=float, help="suppression intensity")
    p.add_argument("--lambda", dest="lam", type=float, help="symmetry ceiling for weights")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="speed-diffusion", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="dump schedule, bound curves, pmf and weights")
    _add_common(p)
    p.add_argument("--sde", choices=["vp", "ve", "edm"], help="also dump an s-sigma schedule analysis")

    p = sub.add_parser("train", help="train one configuration")
    _add_common(p)

    p = sub.add_parser("compare", help="train two configurations and compare convergence")
    _add_common(p)
    p.add_argument(
        "--config-b",
        type=Path,
        help="second config; defaults to the asymmetric + change-aware variant of --config",
    )
    p.add_argument("--threshold", type=float, help="metric threshold (default: run a at 60%%)")

    p = sub.add_parser("sample", help="draw points from a trained checkpoint")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("points.csv"))
    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "sample":
        path = cmd_sample(args.checkpoint, args.n, args.seed, args.out)
        print(path)
        return EXIT_OK
    cfg = _resolve_config(args)
    if args.command == "analyze":
        summary = cmd_analyze(cfg)
        print(f"t_ad={summary['t_ad']} t_dc={summary['t_dc']} tau={summary['tau']} -> {cfg.out_dir}")
    elif args.command == "train":
        print(cmd_train(cfg))
    elif args.command == "compare":
        cfg = _resolve_config(args, strategy_overrides=False)
        if args.threshold is not None:
            cfg = dataclasses.replace(cfg, compare=dataclasses.replace(cfg.compare, threshold=args.threshold))
        if args.config_b is not None:
            cfg_b = _resolve_config(args, args.config_b)
        else:
            cfg_b = _with_strategy_overrides(speed_variant(cfg), args)
        out, verdict = cmd_compare(cfg, cfg_b)
        ratio = verdict["speedup_ratio"]
        print(f"speedup={'n/a' if ratio is None else f'{ratio:.3f}'} -> {out}")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        return run(argv)
    except (ConfigError, InvalidParameterError) as exc:
        key = getattr(exc, "key", None)
        print(f"config error{f' [{key}]' if key else ''}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
