"""Shared solver configuration and RNG conventions."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

CONSISTENT_LOCK = "consistent-lock"
INCONSISTENT_LOCK = "inconsistent-lock"
LOCK_FREE = "lock-free"
SCHEMES = (CONSISTENT_LOCK, INCONSISTENT_LOCK, LOCK_FREE)

OPTION_CURRENT = 1   # next snapshot = current shared iterate
OPTION_AVERAGE = 2   # next snapshot = average of all inner iterates


@dataclass
class SolverConfig:
    """Configuration for the variance-reduced solvers (live and simulated)."""

    eta: float
    scheme: str = INCONSISTENT_LOCK
    inner_steps: int = None  # M per worker; None means 2n/p
    workers: int = 1
    option: int = OPTION_CURRENT
    epochs: int = 10
    seed: int = 0
    lam: float = 1e-4

    def __post_init__(self):
        if self.eta is None or self.eta < 0:
            raise ValueError("step size must be >= 0")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if self.workers < 1:
            raise ValueError("need at least one worker")
        if self.inner_steps is not None and self.inner_steps < 0:
            raise ValueError("inner_steps must be >= 0")
        if self.option not in (OPTION_CURRENT, OPTION_AVERAGE):
            raise ValueError("option must be 1 (current iterate) or 2 (average iterate)")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")

    def resolved_inner_steps(self, n: int) -> int:
        """M per worker; the default 2n/p keeps p*M = 2n samples per epoch."""
        if self.inner_steps is not None:
            return self.inner_steps
        return max(1, (2 * n) // self.workers)

    def with_(self, **kwargs) -> "SolverConfig":
        return replace(self, **kwargs)


def worker_rng(seed: int, worker: int, epoch: int) -> np.random.Generator:
    """Independent per-(worker, epoch) sample stream, reproducible from seed."""
    return np.random.default_rng([seed, worker, epoch])
