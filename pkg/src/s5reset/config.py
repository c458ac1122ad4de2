"""Run configuration: a flat ``key = value`` text format with typed parsing.

Lines starting with ``#`` are comments.  Unknown keys are rejected.
Tuples are written comma separated (``encoder_sizes = 256, 256``) and
``none`` clears an optional value.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass
from pathlib import Path

from .rl.updates import TrainerConfig


class ConfigError(ValueError):
    pass


ENVS = ("memory_length", "stateless_cartpole", "repeat_previous", "meta_cartpole")
ARCHS = ("s5", "gru")


@dataclass
class RunConfig:
    command: str = "train"
    seed: int | None = None
    out: str = "runs"

    env: str = "memory_length"
    memory_length: int = 4
    horizon: int = 200
    repeat_symbols: int = 4
    repeat_lag: int = 8
    n_trials: int = 1
    obs_size: int = 12
    act_size: int = 2
    previous_action: bool = False  # append last action one-hot to the agent input

    arch: str = "s5"
    encoder_sizes: tuple[int, ...] = (256, 256)
    head_sizes: tuple[int, ...] = ()
    n_layers: int = 1
    state_size: int = 256
    activation: str = "relu"
    s5_activation: str = "glu"
    delta_min: float = 0.001
    delta_max: float = 0.1
    gru_hidden: int = 0  # 0: match the S5 network's parameter count

    algo: str = "a2c"
    lr: float = 3e-4
    gamma: float = 0.99
    td_lambda: float = 0.9
    ent_coef: float = 0.0
    value_weight: float = 1.0
    unroll_length: int = 32
    n_envs: int = 1
    clip_eps: float = 0.2
    epochs: int = 1
    minibatches: int = 1
    max_grad_norm: float | None = None
    total_steps: int = 10_000_000
    max_episodes: int = 10_000
    normalize_advantages: bool = False
    freeze_ssm: bool = False
    target_return: float | None = None
    window: int = 100

    bench_lengths: tuple[int, ...] = (16, 64, 256, 1024, 4096, 16384)
    bench_workers: tuple[int, ...] = (1, 2, 4)
    bench_reps: int = 10
    bench_state_size: int = 64
    bench_width: int = 16
    bench_attention: bool = True

    verify_fault: str = "none"
    verify_triples: int = 100_000

    def __post_init__(self):
        if self.command not in ("train", "verify", "bench"):
            raise ConfigError(f"unknown command {self.command!r}")
        if self.env not in ENVS:
            raise ConfigError(f"unknown env {self.env!r}; choose from {ENVS}")
        if self.arch not in ARCHS:
            raise ConfigError(f"unknown arch {self.arch!r}; choose from {ARCHS}")
        if self.verify_fault not in ("none", "sign"):
            raise ConfigError(f"unknown verify_fault {self.verify_fault!r}")

    def trainer(self) -> TrainerConfig:
        names = {f.name for f in dataclasses.fields(TrainerConfig)}
        try:
            return TrainerConfig(**{k: getattr(self, k) for k in names})
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """Hash of the settings that determine a run (excludes the output path)."""
        d = {k: v for k, v in self.to_dict().items() if k != "out"}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


_HINTS = typing.get_type_hints(RunConfig)


def _parse_value(key: str, text: str):
    hint = _HINTS[key]
    text = text.strip()
    args = typing.get_args(hint)
    if type(None) in args:
        if text.lower() == "none":
            return None
        hint = next(a for a in args if a is not type(None))
        args = typing.get_args(hint)
    origin = typing.get_origin(hint)
    try:
        if origin is tuple:
            return tuple(args[0](p.strip()) for p in text.split(",") if p.strip())
        if hint is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if hint is int:
            return int(float(text)) if "e" in text.lower() else int(text)
        return hint(text)
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {text!r} as {hint}") from None


def parse_pairs(pairs: typing.Iterable[tuple[str, str]]) -> dict:
    out = {}
    for key, value in pairs:
        key = key.strip()
        if key not in _HINTS:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = _parse_value(key, value)
    return out


def parse_text(text: str) -> dict:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = line.split("=", 1)
        pairs.append((key, value))
    return parse_pairs(pairs)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    values = parse_text(Path(path).read_text()) if path else {}
    values.update(overrides or {})
    return RunConfig(**values)


def dump_config(cfg: RunConfig) -> str:
    lines = []
    for k, v in cfg.to_dict().items():
        if isinstance(v, (tuple, list)):
            v = ", ".join(str(x) for x in v)
        lines.append(f"{k} = {'none' if v is None else v}")
    return "\n".join(lines) + "\n"
