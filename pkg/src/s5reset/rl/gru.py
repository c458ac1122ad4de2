"""Gated recurrent baseline with the same encoder/head layout as the S5
network, sized to a comparable parameter count."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .. import autodiff as ad
from ..layer import (Affine, HiddenStateStack, _mlp, init_affine, init_mlp, init_network,
                     param_count)


@dataclass(frozen=True)
class GruCell:
    w_x: Any  # (H_in, 3G): update, reset, candidate
    w_h: Any  # (G, 3G)
    b_x: Any  # (3G,)
    b_h: Any  # (3G,)


@dataclass(frozen=True)
class GruBaselineParams:
    encoder: list[Affine]
    cell: GruCell
    policy_head: list[Affine]
    value_head: list[Affine]
    activation: str = "relu"

    @property
    def hidden_size(self) -> int:
        return np.shape(ad.value_of(self.cell.w_h))[0]


def init_gru_network(obs_dim: int, n_actions: int, seed, hidden_size: int,
                     encoder_sizes=(256, 256), head_sizes=(), activation: str = "relu",
                     policy_gain: float = 0.01) -> GruBaselineParams:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sizes = [obs_dim, *encoder_sizes]
    encoder = [init_affine(rng, a, b) for a, b in zip(sizes[:-1], sizes[1:])]
    H, G = sizes[-1], hidden_size
    cell = GruCell(
        rng.normal(0, 1 / np.sqrt(H), (H, 3 * G)),
        rng.normal(0, 1 / np.sqrt(G), (G, 3 * G)),
        np.zeros(3 * G), np.zeros(3 * G),
    )
    policy = init_mlp(rng, [G, *head_sizes, n_actions], final_gain=policy_gain)
    value = init_mlp(rng, [G, *head_sizes, 1], final_gain=1.0)
    return GruBaselineParams(encoder, cell, policy, value, activation)


def matched_hidden_size(obs_dim: int, n_actions: int, encoder_sizes=(256, 256), n_layers=1,
                        state_size=256, head_sizes=(), s5_activation="glu") -> int:
    """GRU width whose network parameter count is closest to the S5 network's."""
    target = param_count(init_network(obs_dim, n_actions, 0, encoder_sizes, n_layers, state_size,
                                      head_sizes, s5_activation=s5_activation))
    H = encoder_sizes[-1]
    widths = [*head_sizes]

    def count(G):
        heads = 0
        for out in (n_actions, 1):
            dims = [G, *widths, out]
            heads += sum(a * b + b for a, b in zip(dims[:-1], dims[1:]))
        enc = sum(a * b + b for a, b in zip([obs_dim, *encoder_sizes][:-1], encoder_sizes))
        return enc + 3 * G * (H + G + 2) + heads

    return min(range(1, 4 * max(H, state_size) + 1), key=lambda G: abs(count(G) - target))


def gru_hidden_init(params: GruBaselineParams, batch: int) -> HiddenStateStack:
    return HiddenStateStack((np.zeros((batch, params.hidden_size)),))


def gru_baseline_forward(params: GruBaselineParams, obs, hidden: HiddenStateStack, resets):
    """Sequential GRU over ``(B, L, obs_dim)`` with the state zeroed at resets."""
    if len(hidden) != 1:
        raise ValueError("GRU baseline takes a single hidden state")
    obs_v = ad.value_of(obs)
    if obs_v.ndim != 3:
        raise ValueError(f"expected (B, L, obs) observations, got shape {obs_v.shape}")
    resets = np.asarray(resets, bool)
    act = ad.ACTIVATIONS[params.activation]
    x = _mlp(params.encoder, obs, act, final_act=True)
    c = params.cell
    G = params.hidden_size
    xw = ad.affine(x, c.w_x, c.b_x)
    h = hidden.states[0]
    outs = []
    for t in range(obs_v.shape[1]):
        keep = (~resets[:, t]).astype(float)[:, None]
        h = ad.mul(h, keep)
        hw = ad.affine(h, c.w_h, c.b_h)
        xt = ad.getitem(xw, (slice(None), t))
        z = ad.sigmoid(ad.add(ad.getitem(xt, (Ellipsis, slice(0, G))),
                              ad.getitem(hw, (Ellipsis, slice(0, G)))))
        r = ad.sigmoid(ad.add(ad.getitem(xt, (Ellipsis, slice(G, 2 * G))),
                              ad.getitem(hw, (Ellipsis, slice(G, 2 * G)))))
        n = ad.tanh(ad.add(ad.getitem(xt, (Ellipsis, slice(2 * G, None))),
                           ad.mul(r, ad.getitem(hw, (Ellipsis, slice(2 * G, None))))))
        h = ad.add(ad.mul(ad.sub(1.0, z), n), ad.mul(z, h))
        outs.append(h)
    seq = ad.stack(outs, axis=1)
    logits = _mlp(params.policy_head, seq, act, final_act=False)
    values = _mlp(params.value_head, seq, act, final_act=False)
    values = ad.reshape(values, np.shape(ad.value_of(values))[:-1])
    return logits, values, HiddenStateStack((np.array(ad.value_of(h)),))
