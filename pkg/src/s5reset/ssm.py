"""Diagonal continuous-time SSM parameters, ZOH discretization and the
sequential reference recurrence.

Shapes follow the convention ``P`` = state size, ``H`` = model width.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DELTA_MIN = 0.001
DELTA_MAX = 0.1
DEGENERATE_EIG = 1e-12


class DegenerateEigenvalueError(ValueError):
    pass


@dataclass(frozen=True)
class ContinuousSsm:
    lam: np.ndarray  # (P,) complex, diagonal of A
    b_mat: np.ndarray  # (P, H) complex
    c_mat: np.ndarray  # (H, P) complex
    d_vec: np.ndarray  # (H,) real
    log_delta: np.ndarray  # (P,) real

    @property
    def state_size(self) -> int:
        return self.lam.shape[0]

    @property
    def width(self) -> int:
        return self.d_vec.shape[0]


@dataclass(frozen=True)
class DiscreteSsm:
    a_bar: np.ndarray  # (P,) complex
    b_bar: np.ndarray  # (P, H) complex
    c_bar: np.ndarray  # (H, P) complex
    d_bar: np.ndarray  # (H,) real


def hippo_n(P: int) -> np.ndarray:
    """Normal part of the HiPPO-LegS matrix, ``A + p p^T``."""
    q = np.sqrt(1.0 + 2.0 * np.arange(P))
    legs = -(np.tril(np.outer(q, q)) - np.diag(np.arange(P)))
    p = np.sqrt(np.arange(P) + 0.5)
    return legs + np.outer(p, p)


def hippo_n_eig(P: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and unitary eigenvectors of HiPPO-N.

    HiPPO-N is ``-I/2`` plus a skew-symmetric matrix, so the real parts are
    exactly -1/2 and the imaginary parts come in +/- pairs.
    """
    s = hippo_n(P)
    re = np.mean(np.diag(s))
    im, v = np.linalg.eigh(-1j * (s - re * np.eye(P)))
    return re + 1j * im, v


def init_hippo_diag(
    P: int,
    H: int,
    seed: int | np.random.Generator,
    delta_min: float = DELTA_MIN,
    delta_max: float = DELTA_MAX,
) -> ContinuousSsm:
    if P <= 0 or H <= 0:
        raise ValueError(f"state size and width must be positive, got P={P}, H={H}")
    if P % 2:
        raise ValueError(f"state size must be even for conjugate pairs, got P={P}")
    if not 0 < delta_min <= delta_max:
        raise ValueError("need 0 < delta_min <= delta_max")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lam, v = hippo_n_eig(P)
    b_dense = rng.normal(0.0, 1.0 / np.sqrt(H), size=(P, H))
    c_dense = rng.normal(0.0, 1.0 / np.sqrt(P), size=(H, P))
    b_mat = v.conj().T @ b_dense
    c_mat = c_dense @ v
    d_vec = rng.standard_normal(H)
    log_delta = rng.uniform(np.log(delta_min), np.log(delta_max), size=P)
    return ContinuousSsm(lam, b_mat, c_mat, d_vec, log_delta)


def discretize_zoh(ssm: ContinuousSsm) -> DiscreteSsm:
    lam = ssm.lam
    if np.any(np.abs(lam) < DEGENERATE_EIG):
        raise DegenerateEigenvalueError("eigenvalue too close to zero for ZOH")
    delta = np.exp(ssm.log_delta)
    if not np.all(np.isfinite(delta)) or np.any(delta <= 0):
        raise ValueError("step sizes must be finite and positive")
    a_bar = np.exp(delta * lam)
    b_bar = ((a_bar - 1.0) / lam)[:, None] * ssm.b_mat
    return DiscreteSsm(a_bar, b_bar, ssm.c_mat, ssm.d_vec)


def apply_sequential(
    dssm: DiscreteSsm,
    u: np.ndarray,
    x0: np.ndarray | None = None,
    dones: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Step the recurrence one element at a time.

    ``u`` is ``(L, H)`` and ``dones`` ``(L,)``; ``dones[n] = 1`` drops the
    incoming state before step ``n``.  Returns states ``(L, P)`` and
    outputs ``(L, H)``.  This is the O(L) oracle the scan is checked against.
    """
    u = np.asarray(u, dtype=float)
    L = u.shape[0]
    P = dssm.a_bar.shape[0]
    if dones is None:
        dones = np.zeros(L)
    dones = np.asarray(dones)
    if dones.shape[0] != L:
        raise ValueError(f"u has length {L} but dones has length {dones.shape[0]}")
    x = np.zeros(P, complex) if x0 is None else np.asarray(x0, complex)
    if x.shape != (P,):
        raise ValueError(f"x0 must have shape ({P},)")
    xs = np.empty((L, P), complex)
    for n in range(L):
        if dones[n]:
            x = np.zeros(P, complex)
        x = dssm.a_bar * x + dssm.b_bar @ u[n]
        xs[n] = x
    ys = (xs @ dssm.c_bar.T).real + dssm.d_bar * u
    return xs, ys
