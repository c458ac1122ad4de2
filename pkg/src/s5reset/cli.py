"""``s5reset train|verify|bench --config <path> --seed <n> --out <dir> [--set k=v ...]``"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import verify as verify_mod
from .bench import BENCH_COLUMNS, run_bench
from .checkpoint import load_arrays, save_arrays
from .config import ConfigError, RunConfig, dump_config, load_config, parse_pairs
from .envs import MemoryLength, PreviousActionObs, RepeatPrevious, StatelessCartPole, trial_episode_wrapper
from .layer import flatten, init_network, unflatten
from .metrics import CsvWriter
from .rl import METRIC_COLUMNS, init_gru_network, matched_hidden_size, train_iter
from .rng import stream

EXIT_CONFIG = 2
EXIT_DIVERGED = 3


def build_env(cfg: RunConfig):
    env = _base_env(cfg)
    return PreviousActionObs(env) if cfg.previous_action else env


def _base_env(cfg: RunConfig):
    if cfg.env == "memory_length":
        return MemoryLength(cfg.memory_length)
    if cfg.env == "stateless_cartpole":
        return StatelessCartPole(cfg.horizon)
    if cfg.env == "repeat_previous":
        return RepeatPrevious(cfg.repeat_symbols, cfg.repeat_lag, cfg.horizon)
    return trial_episode_wrapper(StatelessCartPole(cfg.horizon), cfg.n_trials,
                                 cfg.obs_size, cfg.act_size)


def build_params(cfg: RunConfig, env, seed: int):
    rng = stream(seed, "params")
    if cfg.arch == "gru":
        width = cfg.gru_hidden or matched_hidden_size(
            env.obs_dim, env.n_actions, cfg.encoder_sizes, cfg.n_layers, cfg.state_size,
            cfg.head_sizes, cfg.s5_activation)
        return init_gru_network(env.obs_dim, env.n_actions, rng, width, cfg.encoder_sizes,
                                cfg.head_sizes, cfg.activation)
    return init_network(env.obs_dim, env.n_actions, rng, cfg.encoder_sizes, cfg.n_layers,
                        cfg.state_size, cfg.head_sizes, cfg.activation, cfg.s5_activation,
                        cfg.delta_min, cfg.delta_max)


def save_checkpoint(path, params, cfg: RunConfig) -> None:
    arrays = {k: np.asarray(v) for k, v in flatten(params).items()}
    save_arrays(path, arrays, {"config": cfg.to_dict(), "config_sha256": cfg.digest()})


def load_checkpoint(path):
    """``(params, cfg)``; the parameter tree is rebuilt from the stored config."""
    arrays, meta = load_arrays(path)
    raw = meta["config"]
    cfg = RunConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()})
    if cfg.digest() != meta["config_sha256"]:
        raise ConfigError(f"{path}: config hash mismatch")
    template = build_params(cfg, build_env(cfg), cfg.seed)
    missing = set(flatten(template)) ^ set(arrays)
    if missing:
        raise ConfigError(f"{path}: parameter names differ from config: {sorted(missing)[:5]}")
    return unflatten(template, arrays), cfg


def cmd_train(cfg: RunConfig, out: Path, echo=print) -> int:
    env = build_env(cfg)
    params = build_params(cfg, env, cfg.seed)
    tcfg = cfg.trainer()
    (out / "config.txt").write_text(dump_config(cfg))
    status = 0
    with CsvWriter(out / "metrics.csv", METRIC_COLUMNS) as sink:
        try:
            for row, params, rs in train_iter(env, params, tcfg, cfg.seed, cfg.window):
                sink.write(row)
                if echo and row["update"] % 50 == 0:
                    echo(f"update {row['update']} step {row['step']} episodes {row['episodes']} "
                         f"mean_return {row['mean_return']:.3f}")
                if (cfg.target_return is not None and len(rs.episode_returns) >= cfg.window
                        and row["mean_return"] >= cfg.target_return):
                    break
        except FloatingPointError as e:
            print(f"training aborted: {e}", file=sys.stderr)
            status = EXIT_DIVERGED
    if status == 0:
        save_checkpoint(out / "checkpoint.s5r", params, cfg)
    return status


def cmd_verify(cfg: RunConfig, out: Path, echo=print) -> int:
    checks = verify_mod.run_all(cfg.verify_fault, cfg.verify_triples, cfg.seed or 0, echo=echo)
    lines = [c.line() for c in checks]
    (out / "verify.txt").write_text("\n".join(lines) + "\n")
    failed = sum(not c.passed for c in checks)
    if echo:
        echo(f"{len(checks) - failed}/{len(checks)} properties passed")
    return 1 if failed else 0


def cmd_bench(cfg: RunConfig, out: Path, echo=print) -> int:
    with CsvWriter(out / "bench.csv", BENCH_COLUMNS) as sink:
        def row(r):
            sink.write(r)
            if echo:
                echo(f"L={r['L']:>6} {r['method']:<15} workers={r['workers']} "
                     f"{r['wallclock_ms']:10.3f} ms  invocations={r['invocations']}")
        run_bench(cfg.bench_lengths, cfg.bench_workers, cfg.bench_reps, cfg.bench_state_size,
                  cfg.bench_width, cfg.bench_attention, cfg.seed, on_row=row)
    return 0


COMMANDS = {"train": cmd_train, "verify": cmd_verify, "bench": cmd_bench}


def parse_args(argv):
    p = argparse.ArgumentParser(prog="s5reset", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return p.parse_args(argv)


def resolve_config(args) -> RunConfig:
    pairs = []
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        pairs.append(tuple(item.split("=", 1)))
    overrides = parse_pairs(pairs)
    overrides["command"] = args.command
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = str(args.out)
    cfg = load_config(args.config, overrides)
    if cfg.seed is None and cfg.command in ("train", "bench"):
        raise ConfigError(f"{cfg.command} needs a seed (--seed or 'seed = ...')")
    return cfg


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        cfg = resolve_config(args)
        cfg.trainer()
    except (ConfigError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return COMMANDS[cfg.command](cfg, out)


if __name__ == "__main__":
    sys.exit(main())
