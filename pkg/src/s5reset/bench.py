"""Wallclock and work measurements: sequential recurrence vs parallel scan."""
from __future__ import annotations

import time

import numpy as np

from .rng import stream
from .scan import CountingOperator, ScanElement, op_reset, parallel_scan, resettable_state_scan
from .ssm import apply_sequential, discretize_zoh, init_hippo_diag

BENCH_COLUMNS = ["L", "method", "workers", "wallclock_ms", "invocations"]


def median_ms(fn, reps: int) -> float:
    times = []
    for _ in range(reps):
        t = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t) * 1000.0)
    return float(np.median(times))


def scan_invocations(L: int) -> int:
    op = CountingOperator(op_reset)
    a = np.ones((L, 1), complex)
    parallel_scan(ScanElement(a, a, np.zeros(L, bool)), op)
    return op.calls


def attention_step_probe(u: np.ndarray, rng) -> None:
    """Naive causal self-attention run one step at a time with a growing cache,
    the way a transformer policy acts online."""
    L, H = u.shape
    wq, wk, wv = (rng.normal(size=(H, H)) / np.sqrt(H) for _ in range(3))
    k_cache = np.empty((L, H))
    v_cache = np.empty((L, H))
    for t in range(L):
        q = u[t] @ wq
        k_cache[t] = u[t] @ wk
        v_cache[t] = u[t] @ wv
        s = k_cache[:t + 1] @ q / np.sqrt(H)
        w = np.exp(s - s.max())
        _ = (w / w.sum()) @ v_cache[:t + 1]


def run_bench(lengths, workers=(1,), reps: int = 10, P: int = 64, H: int = 16,
              attention: bool = True, seed: int = 0, on_row=None) -> list[dict]:
    """One row per (L, method, workers).  Sequential and attention rows have
    ``workers = 1``; ``invocations`` is the operator call count (``L`` for
    the sequential loop, empty for attention)."""
    if reps < 1:
        raise ValueError("reps must be positive")
    rng = stream(seed, "bench")
    dssm = discretize_zoh(init_hippo_diag(P, H, rng))
    rows = []

    def emit(row):
        rows.append(row)
        if on_row is not None:
            on_row(row)

    for L in lengths:
        u = rng.normal(size=(L, H))
        dones = rng.random(L) < 0.01
        emit({"L": L, "method": "sequential", "workers": 1,
              "wallclock_ms": median_ms(lambda: apply_sequential(dssm, u, None, dones), reps),
              "invocations": L})
        calls = scan_invocations(L)
        for w in workers:
            emit({"L": L, "method": "scan", "workers": w,
                  "wallclock_ms": median_ms(
                      lambda: resettable_state_scan(dssm, u, None, dones, workers=w), reps),
                  "invocations": calls})
        if attention:
            emit({"L": L, "method": "attention_step", "workers": 1,
                  "wallclock_ms": median_ms(lambda: attention_step_probe(u, rng), max(1, reps // 5)),
                  "invocations": ""})
    return rows
