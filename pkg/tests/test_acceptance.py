"""Acceptance criteria.  Each test prints exactly one ``[PASS]``/``[FAIL]`` line.

The two learning criteria (memory length, trial improvement) train agents
from scratch and take most of the suite's runtime.
"""
import time
from pathlib import Path

import numpy as np
import pytest

from s5reset import autodiff as ad
from s5reset.envs import MemoryLength, PreviousActionObs, StatelessCartPole, trial_episode_wrapper
from s5reset.layer import init_network
from s5reset.rl import TrainerConfig, evaluate_trials, init_gru_network, matched_hidden_size, train
from s5reset.rng import stream
from s5reset.scan import CountingOperator, parallel_scan, resettable_state_scan
from s5reset.ssm import apply_sequential, discretize_zoh, init_hippo_diag
from s5reset.verify import (associativity_by_case, cross_boundary_jacobian_max, network_loss_setup,
                            random_dones, random_ssm, split_invariance_error, zoh_error)

RESULTS = Path(__file__).resolve().parent.parent / "results"


@pytest.fixture
def report(capsys):
    def emit(number, title, passed, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {number} ({title}): {detail}")
        assert passed, detail
    return emit


def test_criterion_1_operator_algebra(report):
    t = time.perf_counter()
    by_case, violations = associativity_by_case(n=100_000, seed=11)
    secs = time.perf_counter() - t
    worst = max(by_case.values())
    ok = worst <= 1e-12 and violations == 0 and secs < 10
    cases = ", ".join(f"case {k} {v:.1e}" for k, v in by_case.items())
    report(1, "associativity", ok,
           f"1e5 triples over 8 flag combos, {cases}, flag-rule violations {violations}, "
           f"{secs:.2f}s")


def test_criterion_2_scan_oracle_equivalence(report):
    rng = np.random.default_rng(22)
    t = time.perf_counter()
    worst = 0.0
    kinds = ("none", "one", "dense", "sparse")
    for i in range(200):
        P = 2 * int(rng.integers(1, 9))
        H = int(rng.integers(1, 9))
        L = 2 ** (4 + i % 11)
        dssm = discretize_zoh(init_hippo_diag(P, H, rng))
        u = rng.normal(size=(L, H))
        x0 = rng.normal(size=P) + 1j * rng.normal(size=P)
        dones = random_dones(rng, L, kinds[i % 4])
        ref, _ = apply_sequential(dssm, u, x0, dones)
        worst = max(worst, float(np.abs(resettable_state_scan(dssm, u, x0, dones) - ref).max()))
    secs = time.perf_counter() - t
    report(2, "scan vs sequential", worst <= 1e-10 and secs < 60,
           f"200 instances, L=16..16384, max abs err {worst:.2e}, {secs:.1f}s")


def test_criterion_3_zoh(report):
    rng = np.random.default_rng(33)
    t = time.perf_counter()
    worst = max(zoh_error(random_ssm(rng, int(rng.integers(1, 17)), int(rng.integers(1, 9))))
                for _ in range(100))
    secs = time.perf_counter() - t
    report(3, "ZOH", worst <= 1e-10 and secs < 10,
           f"100 SSMs vs matrix exponential, max abs err {worst:.2e}, {secs:.2f}s")


def test_criterion_4_gradients(report):
    t = time.perf_counter()
    f, g, params = network_loss_setup(seed=44, P=4, H=8, L=8, layers=2)
    rep = ad.gradcheck(f, g, params, tol=1e-3)
    jac = cross_boundary_jacobian_max(seed=44, P=4, H=8, L=8, layers=2)
    secs = time.perf_counter() - t
    report(4, "gradcheck", rep.passed and jac == 0.0 and secs < 60,
           f"max rel err {rep.max_rel_error:.2e} over {rep.n_checked} coords, "
           f"cross-boundary Jacobian max {jac:g}, {secs:.1f}s")


MEMORY_LENGTHS = (4, 16, 32)
SEEDS = range(5)
GRU_EPISODES = 2000


def memory_length_run(length, seed, arch):
    env = MemoryLength(length)
    rng = stream(seed, "params")
    if arch == "s5":
        params = init_network(env.obs_dim, env.n_actions, rng, (256, 256), 1, 256)
        cfg = TrainerConfig.a2c_defaults()
    else:
        width = matched_hidden_size(env.obs_dim, env.n_actions)
        params = init_gru_network(env.obs_dim, env.n_actions, rng, width, (256, 256))
        cfg = TrainerConfig.a2c_defaults(max_episodes=GRU_EPISODES)
    return params, train(env, params, cfg, seed, target_return=0.95)


def test_criterion_5_memory_length(report):
    RESULTS.mkdir(exist_ok=True)
    lines = ["arch,memory_length,seed,episode,mean_return"]
    summary, ok = [], True
    for length in MEMORY_LENGTHS:
        hits = []
        for seed in SEEDS:
            _, res = memory_length_run(length, seed, "s5")
            hits.append(res.reached_target and res.episodes_to_target <= 10_000)
            lines += [f"s5,{length},{seed},{r['episodes']},{r['mean_return']}" for r in res.rows]
        _, gru = memory_length_run(length, 0, "gru")
        lines += [f"gru,{length},0,{r['episodes']},{r['mean_return']}" for r in gru.rows]
        gru_note = (f"gru reached at ep {gru.episodes_to_target}" if gru.reached_target
                    else f"gru {gru.rows[-1]['mean_return']:.2f} after {GRU_EPISODES} ep")
        summary.append(f"N={length}: {sum(hits)}/5 seeds ({gru_note})")
        ok &= sum(hits) >= 3
    (RESULTS / "memory_length_curves.csv").write_text("\n".join(lines) + "\n")
    report(5, "memory length", ok, "; ".join(summary))


def test_criterion_6_work_bound(report):
    t = time.perf_counter()
    worst = 0.0
    for e in range(1, 17):
        L = 2**e
        op = CountingOperator(np.add)
        parallel_scan(np.ones(L), op)
        worst = max(worst, op.calls / (2 * (L - 1)))
    secs = time.perf_counter() - t
    report(6, "work bound", worst <= 1.0 and secs < 10,
           f"max invocations / 2(L-1) = {worst:.4f} for L=2..65536, {secs:.2f}s")


# desk-scale PPO settings for the trial-improvement experiment
META_TRIALS = 8
META_HORIZON = 100
META_STEPS = 6_000_000
META_SEEDS = range(3)


def meta_cartpole_env():
    return PreviousActionObs(trial_episode_wrapper(StatelessCartPole(META_HORIZON), META_TRIALS,
                                                   obs_size=12, act_size=2))


def meta_cartpole_trainer():
    return TrainerConfig.ppo_defaults(lr=3e-4, n_envs=32, unroll_length=256, epochs=4,
                                      minibatches=4, total_steps=META_STEPS, gamma=0.995,
                                      td_lambda=0.95, ent_coef=0.01)


def test_criterion_7_trial_improvement(report):
    RESULTS.mkdir(exist_ok=True)
    rows, wins = ["seed," + ",".join(f"trial_{k + 1}" for k in range(META_TRIALS))], 0
    detail = []
    for seed in META_SEEDS:
        env = meta_cartpole_env()
        params = init_network(env.obs_dim, env.n_actions, stream(seed, "params"), (64,), 1, 32)
        res = train(env, params, meta_cartpole_trainer(), seed)
        per_trial = evaluate_trials(env, res.params, seed + 1000, 32, 512, META_TRIALS)
        gain = per_trial[4:].mean() / per_trial[0]
        wins += gain >= 1.1
        rows.append(f"{seed}," + ",".join(f"{v:.4f}" for v in per_trial))
        detail.append(f"seed {seed}: trial1 {per_trial[0]:.3f}, trials5-8 "
                      f"{per_trial[4:].mean():.3f} (x{gain:.2f})")
    (RESULTS / "trial_improvement.csv").write_text("\n".join(rows) + "\n")
    report(7, "trial improvement", wins >= 2, f"{wins}/3 seeds >= 1.1x; " + "; ".join(detail))


def test_criterion_8_split_invariance(report):
    rng = np.random.default_rng(88)
    t = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        worst = max(worst, split_invariance_error(
            rng, B=int(rng.integers(1, 4)), L=int(rng.integers(2, 40)),
            layers=int(rng.integers(1, 4)), P=2 * int(rng.integers(1, 5)),
            H=int(rng.integers(2, 9))))
    secs = time.perf_counter() - t
    report(8, "split invariance", worst <= 1e-8 and secs < 30,
           f"100 configurations, max abs err {worst:.2e}, {secs:.2f}s")
