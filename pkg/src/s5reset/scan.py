"""Work-efficient inclusive scans over associative operators.

Elements are stored structure-of-arrays: a ``ScanElement`` (or a plain
ndarray) whose leading axis is the sequence axis.  Operators receive two
such batches of equal length and combine them pairwise, so one call to
``op`` with ``k`` pairs counts as ``k`` operator invocations.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .ssm import DiscreteSsm


@dataclass(frozen=True)
class ScanElement:
    a: np.ndarray  # (..., P) diagonal transition
    b: np.ndarray  # (..., P) accumulated state
    c: np.ndarray | None = None  # (...,) reset flag, bool

    def __getitem__(self, idx) -> "ScanElement":
        return ScanElement(self.a[idx], self.b[idx], None if self.c is None else self.c[idx])

    def __len__(self) -> int:
        return self.a.shape[0]


Elems = Union[ScanElement, np.ndarray]
Operator = Callable[[Elems, Elems], Elems]


def _check(x: ScanElement, y: ScanElement) -> None:
    if x.a.shape[-1] != y.a.shape[-1] or x.b.shape[-1] != y.b.shape[-1]:
        raise ValueError(
            f"dimension mismatch: {x.a.shape[-1]} vs {y.a.shape[-1]}"
        )
    if x.a.shape != x.b.shape or y.a.shape != y.b.shape:
        raise ValueError("a and b parts must share a shape")


def op_s5(x: ScanElement, y: ScanElement) -> ScanElement:
    """Plain S5 combine: ``(y.a * x.a, y.a * x.b + y.b)``; flags ignored."""
    _check(x, y)
    return ScanElement(y.a * x.a, y.a * x.b + y.b, None)


def op_reset(x: ScanElement, y: ScanElement) -> ScanElement:
    """Resettable combine: ``y`` itself when ``y.c`` is set, else the S5
    combine carrying ``x.c``."""
    _check(x, y)
    yc = np.asarray(y.c, bool)
    xc = np.asarray(x.c, bool)
    keep = yc[..., None]
    a = np.where(keep, y.a, y.a * x.a)
    b = np.where(keep, y.b, y.a * x.b + y.b)
    return ScanElement(a, b, xc | yc)


class CountingOperator:
    """Wraps an operator and counts pairwise invocations."""

    def __init__(self, op: Operator):
        self.op = op
        self.calls = 0

    def __call__(self, x, y):
        self.calls += len(x)
        return self.op(x, y)


def _take(elems: Elems, idx: np.ndarray) -> Elems:
    return elems[idx]


def _put(elems: Elems, idx: np.ndarray, val: Elems) -> None:
    if isinstance(elems, ScanElement):
        elems.a[idx] = val.a
        elems.b[idx] = val.b
        if elems.c is not None:
            elems.c[idx] = val.c
    else:
        elems[idx] = val


def _copy(elems: Elems) -> Elems:
    if isinstance(elems, ScanElement):
        c = None if elems.c is None else np.array(elems.c, bool)
        return ScanElement(np.array(elems.a), np.array(elems.b), c)
    return np.array(elems)


def _stack(seq: Sequence[ScanElement]) -> ScanElement:
    c = None if seq[0].c is None else np.array([e.c for e in seq], bool)
    return ScanElement(np.stack([e.a for e in seq]), np.stack([e.b for e in seq]), c)


def _combine(buf: Elems, idx: np.ndarray, d: int, op: Operator, pool) -> None:
    if pool is None or len(idx) < 2:
        # strided views instead of fancy indexing: same pairs, no gather copies
        right = slice(int(idx[0]), int(idx[-1]) + 1, 2 * d)
        left = slice(int(idx[0]) - d, int(idx[-1]) + 1 - d, 2 * d)
        _put(buf, right, op(_take(buf, left), _take(buf, right)))
        return
    chunks = np.array_split(idx, min(pool._max_workers, len(idx)))
    results = list(pool.map(lambda ch: op(_take(buf, ch - d), _take(buf, ch)), chunks))
    for ch, res in zip(chunks, results):
        _put(buf, ch, res)


def parallel_scan(elems, op: Operator, workers: int = 1):
    """Inclusive scan ``[e1, e1∘e2, ..., e1∘...∘eL]``.

    Two-phase (up-sweep then down-sweep) tree scan: at most ``2(L-1)``
    operator invocations and ``O(log L)`` dependent levels.  Each level's
    independent combines may be spread over ``workers`` threads; the tree
    order, and hence the result, does not depend on ``workers``.

    ``elems`` may be a ScanElement/ndarray with a leading sequence axis or a
    list of per-position ScanElements (a list comes back as a list).
    """
    as_list = isinstance(elems, (list, tuple))
    if as_list:
        if not elems:
            raise ValueError("cannot scan an empty sequence")
        elems = _stack(elems)
    L = len(elems)
    if L == 0:
        raise ValueError("cannot scan an empty sequence")
    buf = _copy(elems)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        d = 1
        while d < L:
            idx = np.arange(2 * d - 1, L, 2 * d)
            if len(idx):
                _combine(buf, idx, d, op, pool)
            d *= 2
        d //= 2
        while d >= 1:
            idx = np.arange(3 * d - 1, L, 2 * d)
            if len(idx):
                _combine(buf, idx, d, op, pool)
            d //= 2
    finally:
        if pool is not None:
            pool.shutdown()
    if as_list:
        return [buf[i] for i in range(L)]
    return buf


def sequential_scan(elems, op: Operator):
    """Left-to-right fold, the O(L) reference for ``parallel_scan``."""
    as_list = isinstance(elems, (list, tuple))
    if as_list:
        elems = _stack(elems)
    buf = _copy(elems)
    for i in range(1, len(buf)):
        _put(buf, np.array([i]), op(_take(buf, np.array([i - 1])), _take(buf, np.array([i]))))
    if as_list:
        return [buf[i] for i in range(len(buf))]
    return buf


def _batch_inputs(u, dones, x0, P):
    """Normalise to time-major ``(L, B, ...)`` arrays."""
    u = np.asarray(u)
    batched = u.ndim == 3
    if not batched:
        u = u[None]
    Bsz, L, _ = u.shape
    if dones is None:
        dones = np.zeros((Bsz, L), bool)
    else:
        dones = np.asarray(dones, bool)
        if not batched:
            dones = dones[None]
    if dones.shape != (Bsz, L):
        raise ValueError(f"dones shape {dones.shape} does not match input {(Bsz, L)}")
    if x0 is None:
        x0 = np.zeros((Bsz, P), complex)
    else:
        x0 = np.asarray(x0, complex)
        if not batched:
            x0 = x0[None]
        if x0.shape != (Bsz, P):
            raise ValueError(f"x0 shape {x0.shape} does not match {(Bsz, P)}")
    return u, dones, x0, batched


def scan_linear_recurrence(a, bu, x0, resets, workers: int = 1) -> np.ndarray:
    """Solve ``x_n = (1 - r_n) a_n x_{n-1} + bu_n`` for all n with ``op_reset``.

    ``a`` broadcasts against ``bu`` of shape ``(L, B, P)``; ``x0`` is ``(B, P)``
    and ``resets`` ``(L, B)``.  A virtual element ``(1, x0, 0)`` is prepended
    so a carried initial state enters the scan like any other element.
    """
    L, Bsz, P = bu.shape
    a_full = np.empty((L + 1, Bsz, P), complex)
    a_full[0] = 1.0
    a_full[1:] = a
    b_full = np.empty((L + 1, Bsz, P), complex)
    b_full[0] = x0
    b_full[1:] = bu
    c_full = np.zeros((L + 1, Bsz), bool)
    c_full[1:] = resets
    out = parallel_scan(ScanElement(a_full, b_full, c_full), op_reset, workers)
    return out.b[1:]


def resettable_state_scan(
    dssm: DiscreteSsm,
    u: np.ndarray,
    x0: np.ndarray | None = None,
    dones: np.ndarray | None = None,
    workers: int = 1,
) -> np.ndarray:
    """States of the discretized SSM with in-sequence resets.

    ``u`` is ``(L, H)`` or batched ``(B, L, H)``; returns ``(L, P)`` or
    ``(B, L, P)`` matching ``apply_sequential``.
    """
    P = dssm.a_bar.shape[0]
    u, dones, x0, batched = _batch_inputs(u, dones, x0, P)
    bu = np.einsum("blh,ph->lbp", u, dssm.b_bar)
    xs = scan_linear_recurrence(dssm.a_bar, bu, x0, dones.T, workers)
    xs = xs.transpose(1, 0, 2)
    return xs if batched else xs[0]
