"""Sequential variance-reduced baseline and the lock/lock-free SGD baseline.

The sequential solver is the zero-delay oracle: the deterministic simulator
with a single alternating worker and the live engine at p=1 must reproduce
it bitwise.  The SGD baseline ("hogwild" style) updates the full dense
gradient per step with a per-epoch decaying step size.
"""

from __future__ import annotations

import ctypes
import multiprocessing as mp
import time
import traceback
from dataclasses import dataclass, field

import numpy as np

from . import _atomic
from .common import OPTION_AVERAGE, OPTION_CURRENT, SolverConfig, worker_rng
from .engine import (DivergenceError, _BARRIER_TIMEOUT, _ctx,
                     checked_objective)
from .metrics import MetricRow
from .model import Dataset, full_gradient, gradient_example, objective


@dataclass
class Trajectory:
    snapshots: list            # w_0 .. w_T
    objectives: list           # f(w_t) for each snapshot
    rows: list = field(default_factory=list)  # MetricRow per epoch boundary

    @property
    def final_point(self):
        return self.snapshots[-1]


def svrg_sequential(data: Dataset, w0: np.ndarray, eta: float, inner_steps: int,
                    epochs: int, seed: int, lam: float,
                    option: int = OPTION_CURRENT, f_star: float = None,
                    tol: float = None) -> Trajectory:
    """Single-worker variance-reduced run: anchor, M corrected steps, repeat.

    Every read is the current iterate (delay zero).  Aborts with
    DivergenceError when the objective exceeds 1e3 x its initial value.
    """
    w = np.asarray(w0, dtype=np.float64).copy()
    f0 = objective(data, w, lam)
    traj = Trajectory(snapshots=[w.copy()], objectives=[f0])
    traj.rows.append(MetricRow(0, 0.0, f0, f0 - f_star if f_star is not None else float("nan"),
                               0.0, 0, 0))
    passes_per_epoch = 1.0 + inner_steps / data.n
    start = time.monotonic()
    for epoch in range(epochs):
        u0 = w.copy()
        g0 = full_gradient(data, u0, lam)
        u = u0.copy()
        rng = worker_rng(seed, 0, epoch)
        running_sum = np.zeros(data.dim)
        for _ in range(inner_steps):
            i = int(rng.integers(data.n))
            v = gradient_example(data, i, u, lam) - gradient_example(data, i, u0, lam) + g0
            if option == OPTION_AVERAGE:
                running_sum += u
            u = u - eta * v
        if option == OPTION_AVERAGE and inner_steps > 0:
            w = running_sum / inner_steps
        else:
            w = u.copy()
        f_val = checked_objective(data, w, lam, f0)
        traj.snapshots.append(w.copy())
        traj.objectives.append(f_val)
        gap = f_val - f_star if f_star is not None else float("nan")
        traj.rows.append(MetricRow(epoch + 1, passes_per_epoch * (epoch + 1), f_val, gap,
                                   time.monotonic() - start, inner_steps * (epoch + 1), 0))
        if tol is not None and f_star is not None and gap < tol:
            break
    return traj


@dataclass
class HogwildConfig:
    """Decaying-step parallel SGD configuration."""

    step_size: float          # initial gamma
    decay: float = 0.9        # gamma <- decay * gamma after every epoch
    workers: int = 1
    epochs: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.step_size < 0:
            raise ValueError("step size must be >= 0")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must be in (0, 1]")
        if self.workers < 1 or self.epochs < 0:
            raise ValueError("need workers >= 1 and epochs >= 0")


def _hogwild_worker(worker_id, data, cfg, lam, lock_writes, u_raw, u, gamma_val,
                    barrier, stop):
    steps = data.n // cfg.workers
    lock = lock_writes
    epoch = 0
    try:
        while True:
            barrier.wait(_BARRIER_TIMEOUT)
            if stop.value:
                break
            gamma = gamma_val.value
            rng = worker_rng(cfg.seed, worker_id, epoch)
            for _ in range(steps):
                i = int(rng.integers(data.n))
                snap = u.copy()
                g = gradient_example(data, i, snap, lam)
                if lock is not None:
                    with lock:
                        u -= gamma * g
                else:
                    _atomic.axpy_atomic(u_raw, -gamma, g)
            barrier.wait(_BARRIER_TIMEOUT)
            epoch += 1
    except Exception:
        traceback.print_exc()
        barrier.abort()


def hogwild_run(data: Dataset, cfg: HogwildConfig, lock: bool, lam: float,
                w0: np.ndarray = None, f_star: float = None,
                tol: float = None) -> Trajectory:
    """Parallel SGD baseline: each worker runs n/p uncoordinated steps per epoch.

    Reads are never locked; writes go through the exclusive lock when
    ``lock`` is true and element-atomic adds otherwise.  The step size
    decays once per epoch at the barrier.  One effective pass per epoch.
    """
    w = np.zeros(data.dim) if w0 is None else np.asarray(w0, dtype=np.float64).copy()
    f0 = objective(data, w, lam)
    traj = Trajectory(snapshots=[w.copy()], objectives=[f0])
    traj.rows.append(MetricRow(0, 0.0, f0, f0 - f_star if f_star is not None else float("nan"),
                               0.0, 0, 0))
    gamma = cfg.step_size
    steps = data.n // cfg.workers

    if cfg.workers == 1:
        start = time.monotonic()
        for epoch in range(cfg.epochs):
            rng = worker_rng(cfg.seed, 0, epoch)
            for _ in range(steps):
                i = int(rng.integers(data.n))
                g = gradient_example(data, i, w, lam)
                w = w - gamma * g
            gamma *= cfg.decay
            f_val = checked_objective(data, w, lam, f0)
            traj.snapshots.append(w.copy())
            traj.objectives.append(f_val)
            gap = f_val - f_star if f_star is not None else float("nan")
            traj.rows.append(MetricRow(epoch + 1, float(epoch + 1), f_val, gap,
                                       time.monotonic() - start, steps * (epoch + 1), 0))
            if tol is not None and f_star is not None and gap < tol:
                break
        return traj

    u_raw = mp.RawArray(ctypes.c_double, data.dim)
    u = np.frombuffer(u_raw, dtype=np.float64)
    u[:] = w
    gamma_val = _ctx.RawValue(ctypes.c_double, gamma)
    write_lock = _ctx.Lock() if lock else None
    barrier = _ctx.Barrier(cfg.workers + 1)
    stop = _ctx.RawValue(ctypes.c_int, 0)
    procs = [
        _ctx.Process(target=_hogwild_worker,
                     args=(k, data, cfg, lam, write_lock, u_raw, u, gamma_val,
                           barrier, stop),
                     daemon=True)
        for k in range(cfg.workers)
    ]
    for p in procs:
        p.start()
    try:
        start = time.monotonic()
        for epoch in range(cfg.epochs):
            barrier.wait(_BARRIER_TIMEOUT)   # epoch start
            barrier.wait(_BARRIER_TIMEOUT)   # epoch done
            gamma_val.value *= cfg.decay
            w = u.copy()
            f_val = checked_objective(data, w, lam, f0)
            traj.snapshots.append(w.copy())
            traj.objectives.append(f_val)
            gap = f_val - f_star if f_star is not None else float("nan")
            traj.rows.append(MetricRow(epoch + 1, float(epoch + 1), f_val, gap,
                                       time.monotonic() - start,
                                       steps * cfg.workers * (epoch + 1), 0))
            if tol is not None and f_star is not None and gap < tol:
                break
    finally:
        stop.value = 1
        try:
            barrier.wait(5.0)
        except Exception:
            barrier.abort()
        for p in procs:
            p.join(timeout=10.0)
            if p.is_alive():
                p.terminate()
    return traj
