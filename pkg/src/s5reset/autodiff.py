"""Minimal reverse-mode differentiation for the ops used by the networks.

A ``Tape`` is a Wengert list: every op applied to a recorded ``Var`` appends
its vector-Jacobian product, and ``Tape.backward`` replays the list in exact
reverse order.  Vars with ``tape=None`` skip recording, so the same op code
serves inference.

Complex arrays use the gradient convention ``dL/dRe(z) + i dL/dIm(z)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .scan import scan_linear_recurrence
from .ssm import ContinuousSsm, DiscreteSsm, discretize_zoh

MAX_REAL_EIG = -1e-4


class Var:
    __slots__ = ("value", "tape", "id")

    def __init__(self, value, tape: "Tape | None" = None, id: int = -1):
        self.value = value
        self.tape = tape
        self.id = id

    @property
    def shape(self):
        return np.shape(self.value)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __repr__(self):
        return f"Var(shape={self.shape}, id={self.id})"


@dataclass
class _Record:
    out: int
    parents: tuple[int, ...]
    vjp: Callable


@dataclass
class Tape:
    records: list[_Record] = field(default_factory=list)
    _next: int = 0

    def leaf(self, value) -> Var:
        v = Var(value, self, self._next)
        self._next += 1
        return v

    def _push(self, value, parents: tuple[Var, ...], vjp) -> Var:
        out = self.leaf(value)
        self.records.append(_Record(out.id, tuple(p.id for p in parents), vjp))
        return out

    def backward(self, out: Var, seed=None) -> dict[int, np.ndarray]:
        """Cotangents of every Var reachable from ``out``, keyed by Var id."""
        if seed is None:
            seed = np.ones_like(out.value)
        grads: dict[int, np.ndarray] = {out.id: seed}
        for rec in reversed(self.records):
            g = grads.get(rec.out)
            if g is None:
                continue
            for pid, pg in zip(rec.parents, rec.vjp(g)):
                if pg is None:
                    continue
                if pid in grads:
                    grads[pid] = grads[pid] + pg
                else:
                    grads[pid] = pg
        return grads

    def grad(self, out: Var, wrt, seed=None):
        grads = self.backward(out, seed)
        return [grads.get(v.id, np.zeros_like(v.value)) for v in wrt]


def _tape_of(*xs) -> Tape | None:
    for x in xs:
        if isinstance(x, Var) and x.tape is not None:
            return x.tape
    return None


def _val(x):
    return x.value if isinstance(x, Var) else x


value_of = _val


def _record(value, inputs, vjp) -> Var:
    """Record ``value`` on the inputs' tape; constants get no cotangent."""
    tape = _tape_of(*inputs)
    if tape is None:
        return Var(value)
    mask = [isinstance(x, Var) and x.tape is tape for x in inputs]
    parents = tuple(x for x, m in zip(inputs, mask) if m)

    def masked(g):
        return [pg for pg, m in zip(vjp(g), mask) if m]

    return tape._push(value, parents, masked)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _shape(x):
    return np.shape(_val(x))


# ---------------------------------------------------------------- elementwise

def add(x, y) -> Var:
    sx, sy = _shape(x), _shape(y)
    return _record(_val(x) + _val(y), (x, y),
                   lambda g: (_unbroadcast(g, sx), _unbroadcast(g, sy)))


def sub(x, y) -> Var:
    sx, sy = _shape(x), _shape(y)
    return _record(_val(x) - _val(y), (x, y),
                   lambda g: (_unbroadcast(g, sx), -_unbroadcast(g, sy)))


def mul(x, y) -> Var:
    xv, yv = _val(x), _val(y)
    return _record(xv * yv, (x, y), lambda g: (
        _unbroadcast(g * np.conj(yv), np.shape(xv)),
        _unbroadcast(g * np.conj(xv), np.shape(yv)),
    ))


def relu(x) -> Var:
    xv = _val(x)
    return _record(np.maximum(xv, 0.0), (x,), lambda g: (g * (xv > 0),))


def leaky_relu(x, slope: float = 0.01) -> Var:
    xv = _val(x)
    scale = np.where(xv > 0, 1.0, slope)
    return _record(xv * scale, (x,), lambda g: (g * scale,))


def sigmoid(x) -> Var:
    s = 1.0 / (1.0 + np.exp(-_val(x)))
    return _record(s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x) -> Var:
    t = np.tanh(_val(x))
    return _record(t, (x,), lambda g: (g * (1.0 - t * t),))


def exp(x) -> Var:
    e = np.exp(_val(x))
    return _record(e, (x,), lambda g: (g * e,))


def square(x) -> Var:
    xv = _val(x)
    return _record(xv * xv, (x,), lambda g: (2.0 * g * xv,))


def minimum(x, y) -> Var:
    xv, yv = _val(x), _val(y)
    pick_x = xv <= yv
    return _record(np.where(pick_x, xv, yv), (x, y), lambda g: (
        _unbroadcast(g * pick_x, np.shape(xv)),
        _unbroadcast(g * ~pick_x, np.shape(yv)),
    ))


def clip(x, lo: float, hi: float) -> Var:
    xv = _val(x)
    inside = (xv >= lo) & (xv <= hi)
    return _record(np.clip(xv, lo, hi), (x,), lambda g: (g * inside,))


ACTIVATIONS = {"relu": relu, "leaky_relu": leaky_relu, "tanh": tanh}


def reshape(x, shape) -> Var:
    xv = _val(x)
    return _record(np.reshape(xv, shape), (x,), lambda g: (np.reshape(g, np.shape(xv)),))


def getitem(x, idx) -> Var:
    xv = _val(x)

    def vjp(g):
        gx = np.zeros_like(xv)
        gx[idx] = g
        return (gx,)

    return _record(xv[idx], (x,), vjp)


def stack(xs, axis: int = 0) -> Var:
    vals = [_val(x) for x in xs]
    n = len(vals)
    return _record(np.stack(vals, axis=axis), tuple(xs),
                   lambda g: tuple(np.take(g, i, axis=axis) for i in range(n)))


# ---------------------------------------------------------------- reductions

def total(x) -> Var:
    xv = _val(x)
    return _record(np.sum(xv), (x,), lambda g: (np.broadcast_to(g, np.shape(xv)).copy(),))


def mean(x) -> Var:
    xv = _val(x)
    n = np.size(xv)
    return _record(np.mean(xv), (x,),
                   lambda g: (np.broadcast_to(g / n, np.shape(xv)).copy(),))


# ---------------------------------------------------------------- dense layers

def affine(x, w, b) -> Var:
    """``x @ w + b`` over the last axis of ``x``."""
    xv, wv, bv = _val(x), _val(w), _val(b)
    out = xv @ wv + bv

    def vjp(g):
        gx = g @ wv.T
        gw = xv.reshape(-1, xv.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        gb = g.reshape(-1, g.shape[-1]).sum(axis=0)
        return gx, gw, gb

    return _record(out, (x, w, b), vjp)


def layer_norm(x, scale, bias, eps: float = 1e-5) -> Var:
    xv, sv, bv = _val(x), _val(scale), _val(bias)
    mu = xv.mean(axis=-1, keepdims=True)
    xc = xv - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    n = xv.shape[-1]

    def vjp(g):
        gs = (g * xhat).reshape(-1, n).sum(axis=0)
        gb = g.reshape(-1, n).sum(axis=0)
        gh = g * sv
        gx = inv * (gh - gh.mean(axis=-1, keepdims=True)
                    - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        return gx, gs, gb

    return _record(xhat * sv + bv, (x, scale, bias), vjp)


def log_softmax(x) -> Var:
    xv = _val(x)
    z = xv - xv.max(axis=-1, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    p = np.exp(out)
    return _record(out, (x,), lambda g: (g - p * g.sum(axis=-1, keepdims=True),))


def pick(x, index: np.ndarray) -> Var:
    """``x[..., index]`` elementwise along the last axis."""
    xv = _val(x)
    index = np.asarray(index)
    out = np.take_along_axis(xv, index[..., None], axis=-1)[..., 0]

    def vjp(g):
        gx = np.zeros_like(xv)
        np.put_along_axis(gx, index[..., None], g[..., None], axis=-1)
        return (gx,)

    return _record(out, (x,), vjp)


def sum_last(x) -> Var:
    xv = _val(x)
    return _record(xv.sum(axis=-1), (x,),
                   lambda g: (np.broadcast_to(g[..., None], xv.shape).copy(),))


# ---------------------------------------------------------------- SSM primitive

@dataclass
class ScanRecord:
    """Forward intermediates needed by ``scan_backward``."""
    dssm: DiscreteSsm
    u: np.ndarray  # (B, L, H)
    x0: np.ndarray  # (B, P)
    resets: np.ndarray  # (B, L) bool
    xs: np.ndarray  # (B, L, P)


def ssm_forward(dssm: DiscreteSsm, u, x0, resets, workers: int = 1):
    """Batched resettable SSM; returns ``(y, xs)`` with ``y`` ``(B, L, H)``."""
    bu = np.einsum("blh,ph->lbp", u, dssm.b_bar)
    xs = scan_linear_recurrence(dssm.a_bar, bu, x0, resets.T, workers).transpose(1, 0, 2)
    y = np.einsum("blp,hp->blh", xs, dssm.c_bar).real + dssm.d_bar * u
    return y, xs


def scan_backward(rec: ScanRecord, grad_y: np.ndarray, workers: int = 1):
    """Adjoint of the resettable recurrence.

    State cotangents solve ``g_n = C^H dy_n + conj(A) (1 - r_{n+1}) g_{n+1}``,
    itself a resettable linear recurrence run backwards in time with flags
    shifted by one, so it reuses the forward scan engine.

    Returns ``(grad_u, grads, grad_x0)`` where ``grads`` holds cotangents
    for ``a_bar``, ``b_bar``, ``c_bar`` and ``d_bar``.
    """
    d = rec.dssm
    if grad_y.shape != rec.u.shape:
        raise ValueError(f"grad_y shape {grad_y.shape} != forward output {rec.u.shape}")
    Bsz, L, _ = rec.u.shape
    g_direct = np.einsum("blh,hp->lbp", grad_y, np.conj(d.c_bar))
    r = rec.resets.T
    r_next = np.zeros_like(r)
    r_next[:-1] = r[1:]
    a_rev = np.conj(d.a_bar)
    zero = np.zeros((Bsz, d.a_bar.shape[0]), complex)
    lam = scan_linear_recurrence(a_rev, g_direct[::-1], zero, r_next[::-1], workers)[::-1]

    xs_tm = rec.xs.transpose(1, 0, 2)
    x_prev = np.concatenate([rec.x0[None], xs_tm[:-1]], axis=0)
    keep = ~r[..., None]
    grad_a = np.sum(np.where(keep, lam * np.conj(x_prev), 0.0), axis=(0, 1))
    grad_b = np.einsum("lbp,blh->ph", lam, rec.u)
    grad_c = np.einsum("blh,blp->hp", grad_y, np.conj(rec.xs))
    grad_d = np.sum(grad_y * rec.u, axis=(0, 1))
    grad_u = np.einsum("lbp,ph->blh", lam, np.conj(d.b_bar)).real + d.d_bar * grad_y
    grad_x0 = np.where(keep[0], np.conj(d.a_bar) * lam[0], 0.0)
    grads = {"a_bar": grad_a, "b_bar": grad_b, "c_bar": grad_c, "d_bar": grad_d}
    return grad_u, grads, grad_x0


def zoh_backward(ssm: ContinuousSsm, dssm: DiscreteSsm, grads: dict) -> dict:
    """Chain discrete-parameter cotangents back through ``discretize_zoh``."""
    lam = ssm.lam
    delta = np.exp(ssm.log_delta)
    abar = dssm.a_bar
    s = (abar - 1.0) / lam
    g_abar = grads["a_bar"]
    g_s = np.sum(grads["b_bar"] * np.conj(ssm.b_mat), axis=1)
    ds_dlam = (lam * delta * abar - (abar - 1.0)) / lam**2
    g_lam = g_abar * np.conj(delta * abar) + g_s * np.conj(ds_dlam)
    g_delta = np.real(np.conj(g_abar) * lam * abar) + np.real(np.conj(g_s) * abar)
    return {
        "lam": g_lam,
        "log_delta": g_delta * delta,
        "b_mat": np.conj(s)[:, None] * grads["b_bar"],
        "c_mat": grads["c_bar"],
        "d_vec": grads["d_bar"],
    }


def ssm_apply(lam, log_delta, b_mat, c_mat, d_vec, u, x0, resets, workers: int = 1):
    """Differentiable resettable SSM over a ``(B, L, H)`` input.

    Returns ``(y, xL)``: ``y`` is a Var, ``xL`` the final states ``(B, P)``
    for carrying into the next slice.  Gradients do not flow through ``x0``
    or ``xL`` (truncated BPTT with stored state).  Eigenvalue real parts are
    clamped at ``MAX_REAL_EIG`` so optimisation cannot leave the stable half
    plane.
    """
    lam_v = _val(lam)
    clamped = lam_v.real > MAX_REAL_EIG
    lam_eff = np.where(clamped, MAX_REAL_EIG + 1j * lam_v.imag, lam_v)
    ssm = ContinuousSsm(lam_eff, _val(b_mat), _val(c_mat), _val(d_vec), _val(log_delta))
    dssm = discretize_zoh(ssm)
    uv = _val(u)
    resets = np.asarray(resets, bool)
    y, xs = ssm_forward(dssm, uv, x0, resets, workers)
    rec = ScanRecord(dssm, uv, x0, resets, xs)

    def vjp(g):
        grad_u, grads, _ = scan_backward(rec, g, workers)
        gp = zoh_backward(ssm, dssm, grads)
        g_lam = np.where(clamped, 1j * gp["lam"].imag, gp["lam"])
        return g_lam, gp["log_delta"], gp["b_mat"], gp["c_mat"], gp["d_vec"], grad_u

    out = _record(y, (lam, log_delta, b_mat, c_mat, d_vec, u), vjp)
    return out, xs[:, -1]


# ---------------------------------------------------------------- gradcheck

@dataclass
class GradcheckReport:
    max_rel_error: float
    worst: str
    tol: float
    n_checked: int

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol

    def __str__(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"gradcheck {verdict}: max rel err {self.max_rel_error:.3e} "
                f"at {self.worst} over {self.n_checked} coords (tol {self.tol:g})")


def gradcheck(
    fn: Callable[[dict], float],
    grad_fn: Callable[[dict], dict],
    params: dict,
    tol: float = 1e-4,
    h: float = 1e-5,
    floor: float = 1e-7,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradcheckReport:
    """Compare ``grad_fn(params)`` with central finite differences of ``fn``.

    Complex entries are perturbed along the real and imaginary axes
    separately.  Relative error per coordinate is
    ``|a - f| / max(|a|, |f|, floor)``.  ``max_coords`` subsamples
    coordinates per array.
    """
    analytic = grad_fn(params)
    worst, worst_name, n = 0.0, "", 0
    for name, arr in params.items():
        arr = np.asarray(arr)
        g = np.asarray(analytic[name])
        parts = [(1.0, "re")] + ([(1j, "im")] if np.iscomplexobj(arr) else [])
        coords = list(np.ndindex(arr.shape))
        if max_coords is not None and len(coords) > max_coords:
            pick_idx = (rng or np.random.default_rng(0)).choice(len(coords), max_coords, replace=False)
            coords = [coords[i] for i in pick_idx]
        for unit, tag in parts:
            for idx in coords:
                plus, minus = arr.copy(), arr.copy()
                plus[idx] += unit * h
                minus[idx] -= unit * h
                fp = fn({**params, name: plus})
                fm = fn({**params, name: minus})
                if not (np.isfinite(fp) and np.isfinite(fm)):
                    raise FloatingPointError(f"non-finite loss perturbing {name}{idx}")
                fd = (fp - fm) / (2 * h)
                a = g[idx].real if tag == "re" else g[idx].imag
                err = abs(a - fd) / max(abs(a), abs(fd), floor)
                n += 1
                if err > worst:
                    worst, worst_name = err, f"{name}{list(idx)}.{tag}"
    return GradcheckReport(worst, worst_name, tol, n)
