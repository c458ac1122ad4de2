from pathlib import Path

import numpy as np
import pytest

from s5reset import cli
from s5reset.checkpoint import CheckpointError, load_arrays, save_arrays
from s5reset.config import ConfigError, RunConfig, dump_config, load_config, parse_text
from s5reset.layer import HiddenStateStack, flatten
from s5reset.metrics import CsvWriter, read_csv
from s5reset.rl.rollout import initial_hidden, policy_forward

TINY = ["encoder_sizes=16", "state_size=8", "max_episodes=60", "target_return=none"]


def run(tmp_path, *argv):
    return cli.main([*argv])


def sets(*pairs):
    out = []
    for p in pairs:
        out += ["--set", p]
    return out


def test_train_writes_metrics_and_checkpoint(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["train", "--seed", "1", "--out", str(out), *sets(*TINY)]) == 0
    rows = read_csv(out / "metrics.csv")
    assert rows and list(rows[0]) == cli.METRIC_COLUMNS
    steps = [int(r["step"]) for r in rows]
    assert steps == sorted(steps)
    assert (out / "checkpoint.s5r").exists()


def test_train_requires_seed(tmp_path, capsys):
    assert cli.main(["train", "--out", str(tmp_path), *sets(*TINY)]) == cli.EXIT_CONFIG
    assert "seed" in capsys.readouterr().err


def test_bench_requires_seed(tmp_path):
    assert cli.main(["bench", "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_unknown_key_rejected(tmp_path, capsys):
    assert cli.main(["train", "--seed", "0", "--out", str(tmp_path), "--set", "lr_typo=1"]) == 2
    assert "lr_typo" in capsys.readouterr().err


def test_same_seed_same_csv(tmp_path):
    paths = []
    for name in ("a", "b"):
        out = tmp_path / name
        cli.main(["train", "--seed", "4", "--out", str(out), *sets(*TINY)])
        paths.append(out / "metrics.csv")
    a, b = read_csv(paths[0]), read_csv(paths[1])
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wallclock_ms"} for r in rows]
    assert strip(a) == strip(b)


def test_checkpoint_roundtrip_gives_identical_outputs(tmp_path):
    out = tmp_path / "run"
    cli.main(["train", "--seed", "2", "--out", str(out), *sets(*TINY)])
    params, cfg = cli.load_checkpoint(out / "checkpoint.s5r")
    assert cfg.seed == 2 and cfg.state_size == 8
    arrays, meta = load_arrays(out / "checkpoint.s5r")
    for k, v in flatten(params).items():
        np.testing.assert_array_equal(v, arrays[k])
    env = cli.build_env(cfg)
    probe = np.random.default_rng(0).normal(size=(2, 7, env.obs_dim))
    resets = np.zeros((2, 7), bool)
    a = policy_forward(params, probe, initial_hidden(params, 2), resets)[0].value
    again, _ = cli.load_checkpoint(out / "checkpoint.s5r")
    b = policy_forward(again, probe, initial_hidden(again, 2), resets)[0].value
    assert np.array_equal(a, b)


def test_gru_checkpoint_roundtrip(tmp_path):
    out = tmp_path / "gru"
    assert cli.main(["train", "--seed", "0", "--out", str(out),
                     *sets(*TINY, "arch=gru", "max_episodes=10")]) == 0
    params, cfg = cli.load_checkpoint(out / "checkpoint.s5r")
    assert cfg.arch == "gru"


def test_checkpoint_rejects_garbage(tmp_path):
    p = tmp_path / "x.s5r"
    p.write_bytes(b"not a checkpoint at all")
    with pytest.raises(CheckpointError):
        load_arrays(p)


def test_checkpoint_rejects_future_version(tmp_path):
    p = tmp_path / "x.s5r"
    save_arrays(p, {"w": np.ones(2)}, {})
    raw = bytearray(p.read_bytes())
    raw[8] = 99
    p.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError):
        load_arrays(p)


def test_checkpoint_preserves_dtypes_bitwise(tmp_path, rng):
    arrays = {"c": rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2)),
              "r": rng.normal(size=5), "i": np.arange(4), "s": np.float64(2.5)}
    save_arrays(tmp_path / "a.s5r", arrays, {"k": 1})
    back, meta = load_arrays(tmp_path / "a.s5r")
    assert meta == {"k": 1}
    for k, v in arrays.items():
        assert back[k].dtype == np.asarray(v).dtype
        assert np.array_equal(back[k], v)


def test_config_file_parsing(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nenv = stateless_cartpole\nencoder_sizes = 32, 16  # trailing\n"
                 "max_grad_norm = none\nnormalize_advantages = yes\nlr = 1e-3\n")
    cfg = load_config(p, {"seed": 3})
    assert cfg.env == "stateless_cartpole" and cfg.encoder_sizes == (32, 16)
    assert cfg.max_grad_norm is None and cfg.normalize_advantages is True
    assert cfg.lr == 1e-3 and cfg.seed == 3
    assert load_config(None, parse_text(dump_config(cfg))) == cfg


@pytest.mark.parametrize("text", ["nokey\n", "lr = fast\n", "env = atari\n", "arch = lstm\n",
                                  "unknown = 1\n", "verify_fault = other\n"])
def test_config_rejections(text):
    with pytest.raises(ConfigError):
        RunConfig(**parse_text(text))


def test_invalid_trainer_values_exit_nonzero(tmp_path):
    assert cli.main(["train", "--seed", "0", "--out", str(tmp_path), "--set", "gamma=2"]) == 2


def test_digest_ignores_output_dir():
    assert RunConfig(seed=1, out="a").digest() == RunConfig(seed=1, out="b").digest()
    assert RunConfig(seed=1).digest() != RunConfig(seed=2).digest()


def test_divergence_aborts_but_keeps_metrics(tmp_path, monkeypatch):
    calls = {"n": 0}
    real = cli.train_iter

    def exploding(*a, **k):
        for item in real(*a, **k):
            calls["n"] += 1
            if calls["n"] > 2:
                raise FloatingPointError("non-finite loss nan")
            yield item

    monkeypatch.setattr(cli, "train_iter", exploding)
    out = tmp_path / "d"
    assert cli.main(["train", "--seed", "0", "--out", str(out), *sets(*TINY)]) == cli.EXIT_DIVERGED
    assert len(read_csv(out / "metrics.csv")) == 2
    assert not (out / "checkpoint.s5r").exists()


def test_csv_writer_flushes_each_row(tmp_path):
    p = tmp_path / "m.csv"
    with CsvWriter(p, ["a", "b"]) as w:
        assert p.read_text().splitlines() == ["a,b"]
        w.write({"a": 1, "b": 0.5})
        assert p.read_text().splitlines() == ["a,b", "1,0.5"]
        w.write({"a": 2})
        with pytest.raises(KeyError):
            w.write({"c": 1})
    assert p.read_text().splitlines()[-1] == "2,"


def test_verify_command(tmp_path, capsys):
    assert cli.main(["verify", "--out", str(tmp_path), "--set", "verify_triples=8000"]) == 0
    text = capsys.readouterr().out
    assert "FAIL" not in text and "associativity case 3" in text


def test_verify_sign_fault_fails_case_three(tmp_path, capsys):
    code = cli.main(["verify", "--out", str(tmp_path), "--set", "verify_fault=sign",
                     "--set", "verify_triples=8000"])
    assert code == 1
    fails = [l for l in capsys.readouterr().out.splitlines() if l.startswith("[FAIL]")]
    assert len(fails) == 1 and "associativity case 3" in fails[0]


def test_bench_command(tmp_path):
    assert cli.main(["bench", "--seed", "0", "--out", str(tmp_path),
                     *sets("bench_lengths=16,1024", "bench_workers=1,2", "bench_reps=3",
                           "bench_attention=false")]) == 0
    rows = read_csv(tmp_path / "bench.csv")
    assert list(rows[0]) == cli.BENCH_COLUMNS
    scan_1024 = [r for r in rows if r["method"] == "scan" and r["L"] == "1024"]
    assert len(scan_1024) == 2
    assert all(int(r["invocations"]) <= 2 * 1023 for r in scan_1024)


CONFIGS = sorted((Path(__file__).parent.parent / "configs").glob("*.cfg"))


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_build(path):
    cfg = load_config(path, {"seed": 0})
    cfg.trainer()
    if cfg.command == "train":
        env = cli.build_env(cfg)
        params = cli.build_params(cfg, env, 0)
        assert params.encoder[0].w.shape[0] == env.obs_dim


def test_previous_action_key_widens_input():
    plain = cli.build_env(RunConfig(env="meta_cartpole", n_trials=2))
    wide = cli.build_env(RunConfig(env="meta_cartpole", n_trials=2, previous_action=True))
    assert wide.obs_dim == plain.obs_dim + plain.n_actions
