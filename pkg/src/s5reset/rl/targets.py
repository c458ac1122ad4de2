"""Return and advantage targets over ``(B, L)`` rollout arrays.

``dones[:, t]`` marks that the transition at ``t`` ended the episode, so
nothing is bootstrapped across it.  ``bootstrap`` is ``V`` of the state
after the slice.
"""
from __future__ import annotations

import numpy as np


def _check(gamma, lam):
    if not (0.0 <= gamma <= 1.0 and 0.0 <= lam <= 1.0):
        raise ValueError(f"gamma and lambda must lie in [0, 1], got {gamma}, {lam}")


def td_lambda_targets(rewards, values, dones, bootstrap, gamma: float = 0.99,
                      lam: float = 0.9) -> np.ndarray:
    """Recursive TD(lambda) returns
    ``G_t = r_t + gamma (1 - d_t) [(1 - lam) V_{t+1} + lam G_{t+1}]``."""
    _check(gamma, lam)
    rewards = np.asarray(rewards, float)
    values = np.asarray(values, float)
    dones = np.asarray(dones, float)
    if not rewards.shape == values.shape == dones.shape:
        raise ValueError("rewards, values and dones must share a shape")
    G = np.empty_like(rewards)
    next_v = next_g = np.asarray(bootstrap, float)
    for t in range(rewards.shape[-1] - 1, -1, -1):
        disc = gamma * (1.0 - dones[..., t])
        G[..., t] = rewards[..., t] + disc * ((1.0 - lam) * next_v + lam * next_g)
        next_v, next_g = values[..., t], G[..., t]
    return G


def gae(rewards, values, dones, bootstrap, gamma: float = 0.99, lam: float = 1.0):
    """Generalised advantage estimates and the matching value targets."""
    _check(gamma, lam)
    rewards = np.asarray(rewards, float)
    values = np.asarray(values, float)
    dones = np.asarray(dones, float)
    adv = np.empty_like(rewards)
    next_v = np.asarray(bootstrap, float)
    next_a = np.zeros_like(next_v)
    for t in range(rewards.shape[-1] - 1, -1, -1):
        nonterminal = 1.0 - dones[..., t]
        delta = rewards[..., t] + gamma * nonterminal * next_v - values[..., t]
        next_a = delta + gamma * lam * nonterminal * next_a
        adv[..., t] = next_a
        next_v = values[..., t]
    return adv, adv + values
