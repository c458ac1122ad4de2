"""In-context learning across trials of a randomly projected CartPole.

Each meta-episode draws a random observation projection and a random
action map, then runs several CartPole episodes (trials) on that task
without resetting the agent's hidden state.  An agent that adapts in
context should do better on later trials than on the first.

This demo trains briefly so it finishes in a few minutes; the acceptance
suite runs the full budget.

Run: python3 demos/03_meta_cartpole.py [steps]
"""
import sys

import numpy as np

from s5reset.envs import PreviousActionObs, StatelessCartPole, trial_episode_wrapper
from s5reset.layer import init_network
from s5reset.rl import TrainerConfig, evaluate_trials, train_iter
from s5reset.rng import stream

steps = int(float(sys.argv[1])) if len(sys.argv) > 1 else 300_000
seed, trials = 0, 8

env = PreviousActionObs(trial_episode_wrapper(StatelessCartPole(100), trials,
                                              obs_size=12, act_size=2))
params = init_network(env.obs_dim, env.n_actions, stream(seed, "params"), encoder_sizes=(64,),
                      n_layers=1, state_size=32)
cfg = TrainerConfig.ppo_defaults(lr=3e-4, n_envs=32, unroll_length=256, epochs=4, minibatches=4,
                                 total_steps=steps, gamma=0.995, td_lambda=0.95, ent_coef=0.01)

for row, params, rs in train_iter(env, params, cfg, seed):
    if row["update"] % 10 == 0:
        print(f"  step {row['step']:>8}  mean meta-episode return {row['mean_return']:.3f}")

per_trial = evaluate_trials(env, params, seed + 1000, 32, 128, trials)
print("\nmean return by trial:", np.round(per_trial, 3))
print(f"trials 5-8 / trial 1: {per_trial[4:].mean() / per_trial[0]:.2f}")
