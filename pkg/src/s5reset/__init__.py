"""Resettable S5: a diagonal state-space layer whose parallel scan restarts
the hidden state at episode boundaries, plus small RL tooling around it."""
from .scan import ScanElement, op_reset, op_s5, parallel_scan, resettable_state_scan, sequential_scan
from .ssm import (ContinuousSsm, DegenerateEigenvalueError, DiscreteSsm, apply_sequential,
                  discretize_zoh, init_hippo_diag)

__version__ = "0.1.0"

__all__ = [
    "ContinuousSsm", "DegenerateEigenvalueError", "DiscreteSsm", "ScanElement",
    "apply_sequential", "discretize_zoh", "init_hippo_diag", "op_reset", "op_s5",
    "parallel_scan", "resettable_state_scan", "sequential_scan",
]
