"""Property and oracle checks for the scan, discretization and gradients.

Each check returns a ``Check``; ``run_all`` prints one line per check.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm

from . import autodiff as ad
from .layer import (HiddenStateStack, flatten, init_network, lift, network_forward,
                    unflatten)
from .scan import CountingOperator, ScanElement, op_reset, parallel_scan, resettable_state_scan
from .ssm import ContinuousSsm, apply_sequential, discretize_zoh, init_hippo_diag


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail} ({self.seconds:.2f}s)"


def op_reset_sign_fault(x: ScanElement, y: ScanElement) -> ScanElement:
    """``op_reset`` with a flipped sign on ``y.b``; used as a negative control."""
    keep = np.asarray(y.c, bool)[..., None]
    a = np.where(keep, y.a, y.a * x.a)
    b = np.where(keep, y.b, y.a * x.b - y.b)
    return ScanElement(a, b, np.asarray(x.c, bool) | np.asarray(y.c, bool))


def random_elements(rng, n: int, P: int, flags=None) -> ScanElement:
    a = rng.normal(size=(n, P)) + 1j * rng.normal(size=(n, P))
    a /= np.maximum(1.0, np.abs(a))
    b = rng.normal(size=(n, P)) + 1j * rng.normal(size=(n, P))
    c = rng.random(n) < 0.5 if flags is None else np.full(n, bool(flags))
    return ScanElement(a, b, c)


def associativity_by_case(op=op_reset, n: int = 100_000, P: int = 4, seed: int = 0):
    """Max componentwise ``|(x+y)+z - x+(y+z)|`` for each of the three proof
    cases (``z.c = 1``; ``z.c = 0, y.c = 1``; ``z.c = 0, y.c = 0``) plus the
    count of flag-rule violations (``x + y != y`` when ``y.c = 1``)."""
    rng = np.random.default_rng(seed)
    flags = np.array([[i >> 2 & 1, i >> 1 & 1, i & 1] for i in range(8)], bool)
    combo = np.arange(n) % 8
    x = random_elements(rng, n, P)
    y = random_elements(rng, n, P)
    z = random_elements(rng, n, P)
    x = ScanElement(x.a, x.b, flags[combo, 0])
    y = ScanElement(y.a, y.b, flags[combo, 1])
    z = ScanElement(z.a, z.b, flags[combo, 2])
    left = op(op(x, y), z)
    right = op(x, op(y, z))
    err = np.maximum(np.abs(left.a - right.a).max(axis=1), np.abs(left.b - right.b).max(axis=1))
    err = np.maximum(err, (left.c != right.c).astype(float))
    cases = {
        1: z.c,
        2: ~z.c & y.c,
        3: ~z.c & ~y.c,
    }
    by_case = {k: float(err[m].max()) for k, m in cases.items()}
    xy = op(x, y)
    rule = y.c & ~((xy.a == y.a).all(axis=1) & (xy.b == y.b).all(axis=1) & (xy.c == y.c))
    return by_case, int(rule.sum())


def random_dssm(rng, P: int, H: int):
    ssm = init_hippo_diag(P, H, rng)
    return discretize_zoh(ssm)


def random_dones(rng, L: int, kind: str) -> np.ndarray:
    d = np.zeros(L, bool)
    if kind == "one":
        d[rng.integers(L)] = True
    elif kind == "dense":
        d = rng.random(L) < 0.3
    elif kind == "sparse":
        d = rng.random(L) < 0.02
    return d


def scan_oracle_error(rng, P: int, H: int, L: int, kind: str) -> float:
    dssm = random_dssm(rng, P, H)
    u = rng.normal(size=(L, H))
    x0 = rng.normal(size=P) + 1j * rng.normal(size=P)
    dones = random_dones(rng, L, kind)
    xs_ref, _ = apply_sequential(dssm, u, x0, dones)
    xs = resettable_state_scan(dssm, u, x0, dones)
    return float(np.abs(xs - xs_ref).max())


def zoh_dense_oracle(ssm: ContinuousSsm) -> tuple[np.ndarray, np.ndarray]:
    """Dense ZOH via the block matrix exponential
    ``expm([[D A, D B], [0, 0]]) = [[A_bar, B_bar], [0, I]]`` with ``D = diag(delta)``."""
    P, H = ssm.b_mat.shape
    delta = np.exp(ssm.log_delta)
    M = np.zeros((P + H, P + H), complex)
    M[:P, :P] = np.diag(delta * ssm.lam)
    M[:P, P:] = delta[:, None] * ssm.b_mat
    E = expm(M)
    return E[:P, :P], E[:P, P:]


def zoh_error(ssm: ContinuousSsm) -> float:
    d = discretize_zoh(ssm)
    a_dense, b_dense = zoh_dense_oracle(ssm)
    return float(max(np.abs(np.diag(d.a_bar) - a_dense).max(), np.abs(d.b_bar - b_dense).max()))


def random_ssm(rng, P: int, H: int) -> ContinuousSsm:
    lam = -rng.uniform(0.05, 2.0, P) + 1j * rng.normal(0, 3, P)
    return ContinuousSsm(lam, rng.normal(size=(P, H)) + 1j * rng.normal(size=(P, H)),
                         rng.normal(size=(H, P)) + 1j * rng.normal(size=(H, P)),
                         rng.normal(size=H), rng.uniform(np.log(1e-3), np.log(1.0), P))


def network_loss_setup(seed: int = 0, P: int = 4, H: int = 8, L: int = 8, layers: int = 2,
                       B: int = 2, obs_dim: int = 5, n_actions: int = 3):
    """A scalar loss over a random rollout-shaped batch for gradchecking.

    Returns ``(f, grad, flat_params)`` where ``f`` and ``grad`` take a flat
    parameter dict.
    """
    rng = np.random.default_rng(seed)
    net = init_network(obs_dim, n_actions, rng, encoder_sizes=(H,), n_layers=layers,
                       state_size=P, activation="leaky_relu")
    obs = rng.normal(size=(B, L, obs_dim))
    resets = rng.random((B, L)) < 0.25
    hidden = HiddenStateStack(tuple(rng.normal(size=(B, P)) + 1j * rng.normal(size=(B, P))
                                    for _ in range(layers)))
    actions = rng.integers(0, n_actions, (B, L))
    adv = rng.normal(size=(B, L))
    targets = rng.normal(size=(B, L))

    def loss(p):
        logits, values, _ = network_forward(p, obs, hidden, resets)
        pg = ad.mean(ad.mul(ad.pick(ad.log_softmax(logits), actions), adv))
        return ad.sub(ad.mean(ad.square(ad.sub(values, targets))), pg)

    def f(flat):
        return float(loss(unflatten(net, flat)).value)

    def grad(flat):
        tape = ad.Tape()
        lp = lift(unflatten(net, flat), tape)
        g = tape.backward(loss(lp))
        return {k: g.get(v.id, np.zeros_like(v.value)) for k, v in flatten(lp).items()}

    return f, grad, flatten(net)


def cross_boundary_jacobian_max(seed: int = 0, P: int = 4, H: int = 8, L: int = 8,
                                layers: int = 2) -> float:
    """Largest ``|dy_j / d obs_i|`` over ``i < k <= j`` for a reset at ``k``."""
    rng = np.random.default_rng(seed)
    net = init_network(5, 3, rng, encoder_sizes=(H,), n_layers=layers, state_size=P)
    obs = rng.normal(size=(1, L, 5))
    k = L // 2
    resets = np.zeros((1, L), bool)
    resets[0, k] = True
    hidden = HiddenStateStack(tuple(np.zeros((1, P), complex) for _ in range(layers)))
    worst = 0.0
    for j in range(k, L):
        for out in range(3):
            tape = ad.Tape()
            ov = tape.leaf(obs)
            logits, _, _ = network_forward(net, ov, hidden, resets)
            seed_g = np.zeros_like(logits.value)
            seed_g[0, j, out] = 1.0
            g = tape.backward(logits, seed_g).get(ov.id)
            worst = max(worst, float(np.abs(g[0, :k]).max()))
    return worst


def split_invariance_error(rng, B: int = 2, L: int = 24, layers: int = 2, P: int = 4,
                           H: int = 6) -> float:
    net = init_network(5, 3, rng, encoder_sizes=(H,), n_layers=layers, state_size=P)
    obs = rng.normal(size=(B, L, 5))
    resets = rng.random((B, L)) < 0.15
    hidden = HiddenStateStack(tuple(rng.normal(size=(B, P)) + 1j * rng.normal(size=(B, P))
                                    for _ in range(layers)))
    full, vfull, _ = network_forward(net, obs, hidden, resets)
    cuts = np.sort(rng.choice(np.arange(1, L), size=min(int(rng.integers(1, 5)), L - 1), replace=False))
    h = hidden
    parts, vparts = [], []
    for lo, hi in zip([0, *cuts], [*cuts, L]):
        lg, v, h = network_forward(net, obs[:, lo:hi], h, resets[:, lo:hi])
        parts.append(lg.value)
        vparts.append(v.value)
    return float(max(np.abs(np.concatenate(parts, 1) - full.value).max(),
                     np.abs(np.concatenate(vparts, 1) - vfull.value).max()))


def work_count(L: int) -> int:
    op = CountingOperator(lambda x, y: x + y)
    parallel_scan(np.ones(L), op)
    return op.calls


def _timed(name: str, fn: Callable[[], tuple[bool, str]]) -> Check:
    t = time.perf_counter()
    ok, detail = fn()
    return Check(name, ok, detail, time.perf_counter() - t)


def run_all(fault: str = "none", triples: int = 100_000, seed: int = 0, echo=print) -> list[Check]:
    op = op_reset_sign_fault if fault == "sign" else op_reset
    checks: list[Check] = []

    def record(c: Check):
        checks.append(c)
        if echo:
            echo(c.line())

    by_case, rule = associativity_by_case(op, triples, seed=seed)
    for case, err in by_case.items():
        record(Check(f"associativity case {case}", err <= 1e-12, f"max err {err:.2e}"))
    record(Check("reset flag rule", rule == 0, f"{rule} violations"))

    def oracle():
        rng = np.random.default_rng(seed)
        worst = {}
        for e in range(4, 15):
            for kind in ("none", "one", "dense"):
                worst[2**e] = max(worst.get(2**e, 0.0), scan_oracle_error(rng, 8, 4, 2**e, kind))
        bad = {L: v for L, v in worst.items() if v > 1e-10}
        return not bad, f"max err {max(worst.values()):.2e} over L=16..16384"
    record(_timed("scan vs sequential oracle", oracle))

    def zoh():
        rng = np.random.default_rng(seed)
        err = max(zoh_error(random_ssm(rng, int(rng.integers(1, 17)), int(rng.integers(1, 9))))
                  for _ in range(100))
        return err <= 1e-10, f"max err {err:.2e} over 100 SSMs"
    record(_timed("ZOH vs matrix exponential", zoh))

    def grads():
        f, g, flat = network_loss_setup(seed)
        rep = ad.gradcheck(f, g, flat, tol=1e-3)
        jac = cross_boundary_jacobian_max(seed)
        return rep.passed and jac == 0.0, f"{rep}; cross-boundary |J| max {jac:g}"
    record(_timed("network gradcheck", grads))

    def split():
        rng = np.random.default_rng(seed)
        err = max(split_invariance_error(rng) for _ in range(20))
        return err <= 1e-8, f"max err {err:.2e}"
    record(_timed("split invariance", split))

    def work():
        bad = [L for L in (2**e for e in range(1, 17)) if work_count(L) > 2 * (L - 1)]
        return not bad, f"<= 2(L-1) invocations for L=2..65536" if not bad else f"violated at {bad}"
    record(_timed("work bound", work))
    return checks
