from __future__ import annotations

from typing import Callable

import numpy as np


def _real(a: np.ndarray) -> np.ndarray:
    """Real view; complex entries become (re, im) pairs."""
    a = np.ascontiguousarray(a)
    return a.view(np.float64) if np.iscomplexobj(a) else a


def global_norm(grads: dict) -> float:
    return float(np.sqrt(sum(np.sum(_real(g) ** 2) for g in grads.values())))


def clip_by_global_norm(grads: dict, max_norm: float | None) -> tuple[dict, float]:
    norm = global_norm(grads)
    if max_norm is None or norm <= max_norm:
        return grads, norm
    scale = max_norm / (norm + 1e-12)
    return {k: g * scale for k, g in grads.items()}, norm


class Adam:
    """Adam over a flat ``name -> array`` dict.

    Complex parameters are updated as independent real and imaginary parts.
    Names for which ``frozen(name)`` is true are left untouched.
    """

    def __init__(self, lr: float = 3e-4, b1: float = 0.9, b2: float = 0.999,
                 eps: float = 1e-8, frozen: Callable[[str], bool] | None = None):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.frozen = frozen or (lambda name: False)
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict, grads: dict) -> dict:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        out = {}
        for name, p in params.items():
            g = grads.get(name)
            if g is None or self.frozen(name):
                out[name] = p
                continue
            gr = _real(g)
            m = self.m.get(name, np.zeros_like(gr))
            v = self.v.get(name, np.zeros_like(gr))
            m = self.b1 * m + (1 - self.b1) * gr
            v = self.b2 * v + (1 - self.b2) * gr * gr
            self.m[name], self.v[name] = m, v
            upd = self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            new = _real(p.copy()) - upd
            out[name] = new.view(np.complex128) if np.iscomplexobj(p) else new
        return out
