"""Run reports and solver failure types shared by both ADMM solvers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


class NonFiniteIterateError(RuntimeError):
    """A solver iterate went non-finite; carries a diagnostic snapshot."""

    def __init__(self, message: str, iteration: int, snapshot: dict[str, Any]):
        super().__init__(f"{message} at iteration {iteration}")
        self.iteration = iteration
        self.snapshot = snapshot


@dataclass
class RunReport:
    """Per-iteration telemetry plus the final solution of one solver run.

    ``history`` maps series names (residuals, objectives, block changes,
    per-iteration wall time, norm telemetry) to equal-length lists, one entry
    per iteration.  ``objective`` is the exact final figure of merit computed
    through the reconstructed scattering matrix: sum rate in nats for the
    rate solver, transmit power in watts for the power solver.
    """

    mode: str
    iterations: int
    converged: bool
    status: str
    history: dict[str, list[float]]
    final_state: Any
    theta: np.ndarray
    objective: float
    sinr: np.ndarray
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def history_array(self, key: str) -> np.ndarray:
        return np.asarray(self.history[key])


def check_finite(iteration: int, **blocks) -> None:
    for name, arr in blocks.items():
        if not np.all(np.isfinite(arr)):
            snapshot = {k: np.array(v, copy=True) for k, v in blocks.items()}
            raise NonFiniteIterateError(f"non-finite values in block {name!r}",
                                        iteration, snapshot)
