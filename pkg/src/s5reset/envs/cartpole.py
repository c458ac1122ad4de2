from __future__ import annotations

import numpy as np

from .base import Env

GRAVITY = 9.8
MASS_CART = 1.0
MASS_POLE = 0.1
TOTAL_MASS = MASS_CART + MASS_POLE
HALF_LENGTH = 0.5
POLEMASS_LENGTH = MASS_POLE * HALF_LENGTH
FORCE_MAG = 10.0
TAU = 0.02
THETA_LIMIT = 12 * 2 * np.pi / 360
X_LIMIT = 2.4


class StatelessCartPole(Env):
    """Classic cart-pole with velocities hidden from the observation.

    Observation is ``[x, theta]``.  Each surviving step pays ``1/horizon`` so
    a full-length episode returns 1.0.  The full physical state is kept in
    ``state.data["s"]`` as ``[x, x_dot, theta, theta_dot]``.
    """

    obs_dim = 2
    n_actions = 2

    def __init__(self, horizon: int = 200):
        self.horizon = horizon

    def _initial(self, rng):
        return {"s": rng.uniform(-0.05, 0.05, size=4)}

    def _observe(self, data, t):
        return data["s"][:, [0, 2]].copy()

    def _dynamics(self, data, t, action):
        x, x_dot, theta, theta_dot = data["s"].T
        force = np.where(action == 1, FORCE_MAG, -FORCE_MAG)
        cos, sin = np.cos(theta), np.sin(theta)
        temp = (force + POLEMASS_LENGTH * theta_dot**2 * sin) / TOTAL_MASS
        theta_acc = (GRAVITY * sin - cos * temp) / (
            HALF_LENGTH * (4.0 / 3.0 - MASS_POLE * cos**2 / TOTAL_MASS))
        x_acc = temp - POLEMASS_LENGTH * theta_acc * cos / TOTAL_MASS
        s = np.stack([
            x + TAU * x_dot,
            x_dot + TAU * x_acc,
            theta + TAU * theta_dot,
            theta_dot + TAU * theta_acc,
        ], axis=1)
        fell = (np.abs(s[:, 0]) > X_LIMIT) | (np.abs(s[:, 2]) > THETA_LIMIT)
        done = fell | (t + 1 >= self.horizon)
        reward = np.full(t.shape, 1.0 / self.horizon)
        return {"s": s}, reward, done
