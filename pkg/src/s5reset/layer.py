"""S5 blocks and the actor-critic network built from them.

Parameter containers are plain dataclasses whose array leaves may be
replaced by ``autodiff.Var`` (see ``lift``) so one forward implementation
serves both inference and differentiation.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import autodiff as ad
from .ssm import DELTA_MAX, DELTA_MIN, ContinuousSsm, init_hippo_diag


@dataclass(frozen=True)
class Affine:
    w: Any
    b: Any


@dataclass(frozen=True)
class S5LayerParams:
    ssm: ContinuousSsm
    norm_scale: Any
    norm_bias: Any
    gate: Affine | None = None
    activation: str = "glu"


@dataclass(frozen=True)
class NetworkParams:
    encoder: list[Affine]
    s5_layers: list[S5LayerParams]
    policy_head: list[Affine]
    value_head: list[Affine]
    activation: str = "relu"


@dataclass(frozen=True)
class HiddenStateStack:
    states: tuple[np.ndarray, ...]

    def __len__(self):
        return len(self.states)


# ---------------------------------------------------------------- pytree helpers

def _is_leaf(x) -> bool:
    return isinstance(x, (np.ndarray, ad.Var))


def flatten(params, prefix: str = "") -> dict[str, Any]:
    """Array leaves keyed by dotted path, in a stable order."""
    out: dict[str, Any] = {}
    if _is_leaf(params):
        out[prefix] = params
    elif dataclasses.is_dataclass(params):
        for f in dataclasses.fields(params):
            out.update(flatten(getattr(params, f.name), f"{prefix}{f.name}."))
    elif isinstance(params, (list, tuple)):
        for i, item in enumerate(params):
            out.update(flatten(item, f"{prefix}{i}."))
    if prefix == "":
        out = {k.rstrip("."): v for k, v in out.items()}
    return out


def unflatten(template, flat: dict[str, Any], prefix: str = ""):
    """Rebuild ``template``'s structure with leaves taken from ``flat``."""
    if _is_leaf(template):
        return flat[prefix.rstrip(".")]
    if dataclasses.is_dataclass(template):
        changes = {
            f.name: unflatten(getattr(template, f.name), flat, f"{prefix}{f.name}.")
            for f in dataclasses.fields(template)
        }
        return dataclasses.replace(template, **changes)
    if isinstance(template, (list, tuple)):
        items = [unflatten(x, flat, f"{prefix}{i}.") for i, x in enumerate(template)]
        return type(template)(items)
    return template


def lift(params, tape: ad.Tape):
    """Copy of ``params`` with every array leaf recorded on ``tape``."""
    flat = flatten(params)
    return unflatten(params, {k: tape.leaf(v) for k, v in flat.items()})


def param_count(params) -> int:
    """Real scalar count; complex entries count twice."""
    return sum(v.size * (2 if np.iscomplexobj(v) else 1) for v in flatten(params).values())


# ---------------------------------------------------------------- init

def init_affine(rng: np.random.Generator, n_in: int, n_out: int, gain: float = np.sqrt(2.0)) -> Affine:
    return Affine(rng.normal(0.0, gain / np.sqrt(n_in), (n_in, n_out)), np.zeros(n_out))


def init_s5_layer(rng, P: int, H: int, activation: str = "glu",
                  delta_min: float = DELTA_MIN, delta_max: float = DELTA_MAX) -> S5LayerParams:
    ssm = init_hippo_diag(P, H, rng, delta_min, delta_max)
    gate = init_affine(rng, H, H, gain=1.0) if activation == "glu" else None
    return S5LayerParams(ssm, np.ones(H), np.zeros(H), gate, activation)


def init_mlp(rng, sizes: list[int], final_gain: float) -> list[Affine]:
    layers = [init_affine(rng, a, b) for a, b in zip(sizes[:-2], sizes[1:-1])]
    layers.append(init_affine(rng, sizes[-2], sizes[-1], final_gain))
    return layers


def init_network(
    obs_dim: int,
    n_actions: int,
    seed: int | np.random.Generator,
    encoder_sizes=(256, 256),
    n_layers: int = 1,
    state_size: int = 256,
    head_sizes=(),
    activation: str = "relu",
    s5_activation: str = "glu",
    delta_min: float = DELTA_MIN,
    delta_max: float = DELTA_MAX,
    policy_gain: float = 0.01,
) -> NetworkParams:
    """Encoder MLP -> ``n_layers`` S5 blocks of width ``encoder_sizes[-1]``
    -> policy and value heads."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sizes = [obs_dim, *encoder_sizes]
    encoder = [init_affine(rng, a, b) for a, b in zip(sizes[:-1], sizes[1:])]
    H = sizes[-1]
    layers = [init_s5_layer(rng, state_size, H, s5_activation, delta_min, delta_max)
              for _ in range(n_layers)]
    policy = init_mlp(rng, [H, *head_sizes, n_actions], final_gain=policy_gain)
    value = init_mlp(rng, [H, *head_sizes, 1], final_gain=1.0)
    return NetworkParams(encoder, layers, policy, value, activation)


def hidden_init(layer_count: int, P: int, batch: int | None = None) -> HiddenStateStack:
    if layer_count <= 0 or P <= 0:
        raise ValueError("layer count and state size must be positive")
    shape = (P,) if batch is None else (batch, P)
    return HiddenStateStack(tuple(np.zeros(shape, complex) for _ in range(layer_count)))


# ---------------------------------------------------------------- forward

def _apply_activation(kind: str, y, gate: Affine | None):
    if kind == "glu":
        return ad.mul(y, ad.sigmoid(ad.affine(y, gate.w, gate.b)))
    try:
        return ad.ACTIVATIONS[kind](y)
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None


def layer_forward(params: S5LayerParams, u, x0, dones, workers: int = 1):
    """Pre-norm S5 block with residual: ``u + act(SSM(norm(u)))``.

    ``u`` is ``(L, H)`` or ``(B, L, H)`` (array or Var); ``dones`` are
    scan-convention reset flags.  Returns ``(y, xL)``.
    """
    uv = ad.value_of(u)
    if not np.all(np.isfinite(uv)):
        raise FloatingPointError("non-finite input to S5 layer")
    single = uv.ndim == 2
    dones = np.asarray(dones, bool)
    x0 = np.asarray(x0, complex)
    if single:
        u = ad.reshape(u, (1, *uv.shape))
        dones = dones[None]
        x0 = x0[None]
    H = np.shape(ad.value_of(params.ssm.d_vec))[0]
    if uv.shape[-1] != H:
        raise ValueError(f"input width {uv.shape[-1]} != layer width {H}")
    z = ad.layer_norm(u, params.norm_scale, params.norm_bias)
    s = params.ssm
    y, xL = ad.ssm_apply(s.lam, s.log_delta, s.b_mat, s.c_mat, s.d_vec, z, x0, dones, workers)
    out = ad.add(u, _apply_activation(params.activation, y, params.gate))
    if single:
        return ad.reshape(out, uv.shape), xL[0]
    return out, xL


def _mlp(layers: list[Affine], x, act, final_act: bool):
    for i, lay in enumerate(layers):
        x = ad.affine(x, lay.w, lay.b)
        if final_act or i < len(layers) - 1:
            x = act(x)
    return x


def network_forward(params: NetworkParams, obs, hidden: HiddenStateStack, dones, workers: int = 1):
    """Encoder -> stacked S5 blocks -> (logits, values).

    ``obs`` is ``(B, L, obs_dim)``; ``hidden`` holds one ``(B, P)`` state per
    block; ``dones`` ``(B, L)`` are scan-convention reset flags.  Returns
    ``(logits Var, values Var, hidden')``.
    """
    if len(hidden) != len(params.s5_layers):
        raise ValueError(f"hidden stack has {len(hidden)} entries for "
                         f"{len(params.s5_layers)} layers")
    act = ad.ACTIVATIONS[params.activation]
    x = _mlp(params.encoder, obs, act, final_act=True)
    new_states = []
    for lay, h in zip(params.s5_layers, hidden.states):
        x, xL = layer_forward(lay, x, h, dones, workers)
        new_states.append(xL)
    logits = _mlp(params.policy_head, x, act, final_act=False)
    values = _mlp(params.value_head, x, act, final_act=False)
    values = ad.reshape(values, np.shape(ad.value_of(values))[:-1])
    return logits, values, HiddenStateStack(tuple(new_states))
