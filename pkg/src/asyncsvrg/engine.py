"""Live shared-memory parallel engine for the variance-reduced inner loop.

Workers are OS processes sharing the parameter vector through anonymous
shared memory (fork start method).  Three synchronization schemes:

  * consistent-lock:   one exclusive lock guards snapshot reads and writes;
  * inconsistent-lock: writes are locked, reads are uncoordinated copies;
  * lock-free:         no locks; writes are element-atomic CAS adds.

The update counter is always incremented atomically, so the applied-update
count is exact even in lock-free mode; what races there is the vector add
itself (mixed-age reads, possible lost element add-backs under concurrent
CAS retries are prevented, but interleaved vectors are the contract).
"""

from __future__ import annotations

import ctypes
import multiprocessing as mp
import time
import traceback
from dataclasses import dataclass

import numpy as np

from . import _atomic
from .common import (CONSISTENT_LOCK, INCONSISTENT_LOCK, LOCK_FREE,
                     OPTION_AVERAGE, SolverConfig, worker_rng)
from .metrics import MetricRow
from .model import Dataset, gradient_example, gradient_partial, objective

_ctx = mp.get_context("fork")

DIVERGENCE_FACTOR = 1e3
_BARRIER_TIMEOUT = 600.0


class DivergenceError(RuntimeError):
    pass


def checked_objective(data, w, lam, f0):
    """Objective value, raising DivergenceError on blow-up.

    Divergence means a non-finite value or exceeding DIVERGENCE_FACTOR times
    the initial objective (clamped below at 1).
    """
    try:
        f_val = objective(data, w, lam)
    except ValueError:
        raise DivergenceError("objective overflowed to a non-finite value") from None
    if f_val > DIVERGENCE_FACTOR * max(f0, 1.0):
        raise DivergenceError(
            f"objective {f_val:.3e} exceeds {DIVERGENCE_FACTOR:g} x initial {f0:.3e}")
    return f_val


class SharedState:
    """Cross-worker mutable state: iterate, counter, anchor, running sum."""

    def __init__(self, dim: int, workers: int = 1):
        self.dim = dim
        self.workers = workers
        self._u_raw = mp.RawArray(ctypes.c_double, dim)
        self._u0_raw = mp.RawArray(ctypes.c_double, dim)
        self._g0_raw = mp.RawArray(ctypes.c_double, dim)
        self._sum_raw = mp.RawArray(ctypes.c_double, dim)
        self._partials_raw = mp.RawArray(ctypes.c_double, dim * workers)
        self._counter_raw = mp.RawArray(ctypes.c_int64, 1)
        # per-worker (applied updates, max delay) merged at epoch end
        self._stats_raw = mp.RawArray(ctypes.c_int64, 2 * workers)
        self.u = np.frombuffer(self._u_raw, dtype=np.float64)
        self.u0 = np.frombuffer(self._u0_raw, dtype=np.float64)
        self.g0 = np.frombuffer(self._g0_raw, dtype=np.float64)
        self.running_sum = np.frombuffer(self._sum_raw, dtype=np.float64)
        self.partials = np.frombuffer(self._partials_raw, dtype=np.float64).reshape(workers, dim)
        self.stats = np.frombuffer(self._stats_raw, dtype=np.int64).reshape(workers, 2)
        self.lock = _ctx.Lock()

    @property
    def update_count(self) -> int:
        return _atomic.load_i64(self._counter_raw, 0)

    def reset_epoch(self, w: np.ndarray) -> None:
        self.u[:] = w
        self.u0[:] = w
        self.running_sum[:] = 0.0
        self.stats[:] = 0
        self._counter_raw[0] = 0


def read_scheme(state: SharedState, scheme: str):
    """Snapshot the shared iterate per the scheme's read contract.

    Returns (snapshot, stamp) where stamp is the update-counter value the
    read observed.  Consistent-lock reads are coherent (taken under the
    write lock); the other schemes copy element-by-element without
    coordination, so the snapshot may mix ages.
    """
    if scheme == CONSISTENT_LOCK:
        with state.lock:
            return state.u.copy(), _atomic.load_i64(state._counter_raw, 0)
    stamp = _atomic.load_i64(state._counter_raw, 0)
    return state.u.copy(), stamp


def write_scheme(state: SharedState, delta: np.ndarray, scheme: str,
                 accumulate_average: bool = False) -> int:
    """Apply u += delta per the scheme's write contract; returns new counter.

    Locked schemes serialize the add and the counter bump; lock-free applies
    an element-atomic CAS add per coordinate, then bumps the counter with an
    atomic fetch-add.
    """
    if scheme in (CONSISTENT_LOCK, INCONSISTENT_LOCK):
        with state.lock:
            if accumulate_average:
                state.running_sum += state.u
            state.u += delta
            state._counter_raw[0] += 1
            return state._counter_raw[0]
    if accumulate_average:
        # meaningful only single-threaded; live lock-free runs reject the
        # average-iterate option upstream
        state.running_sum += state.u
    _atomic.axpy_atomic(state._u_raw, 1.0, np.ascontiguousarray(delta))
    return _atomic.fetch_add_i64(state._counter_raw, 0, 1) + 1


def inner_step(state: SharedState, data: Dataset, cfg: SolverConfig,
               rng: np.random.Generator):
    """One stochastic update: sample, read, variance-reduce, write.

    Returns (sample index, read stamp, observed delay).
    """
    i = int(rng.integers(data.n))
    snap, stamp = read_scheme(state, cfg.scheme)
    v = (gradient_example(data, i, snap, cfg.lam)
         - gradient_example(data, i, state.u0, cfg.lam) + state.g0)
    m_after = write_scheme(state, -cfg.eta * v, cfg.scheme,
                           accumulate_average=cfg.option == OPTION_AVERAGE)
    return i, stamp, max(0, m_after - 1 - stamp)


def run_outer_epoch(state: SharedState, data: Dataset, cfg: SolverConfig,
                    epoch: int, worker: int = 0):
    """Single-process outer epoch (the p=1 reduction; also the unit under test).

    Assumes state.reset_epoch(w_t) was called; computes the anchor gradient,
    runs M inner steps and returns (w_next, updates, max_delay).
    """
    state.g0[:] = np.zeros(data.dim)
    state.g0[:] += gradient_partial(data, state.u0, np.arange(data.n))
    state.g0[:] = state.g0 / data.n + cfg.lam * state.u0
    rng = worker_rng(cfg.seed, worker, epoch)
    max_delay = 0
    steps = cfg.resolved_inner_steps(data.n)
    for _ in range(steps):
        _, _, delay = inner_step(state, data, cfg, rng)
        max_delay = max(max_delay, delay)
    updates = state.update_count
    if cfg.option == OPTION_AVERAGE:
        w_next = state.running_sum / updates
    else:
        w_next = state.u.copy()
    return w_next, updates, max_delay


def _worker_main(worker_id, data, cfg, state, barrier, stop, block):
    steps = cfg.resolved_inner_steps(data.n)
    epoch = 0
    try:
        while True:
            barrier.wait(_BARRIER_TIMEOUT)
            if stop.value:
                break
            state.partials[worker_id] = gradient_partial(data, state.u0, block)
            barrier.wait(_BARRIER_TIMEOUT)
            barrier.wait(_BARRIER_TIMEOUT)  # parent published g0
            rng = worker_rng(cfg.seed, worker_id, epoch)
            applied = 0
            max_delay = 0
            for _ in range(steps):
                _, _, delay = inner_step(state, data, cfg, rng)
                applied += 1
                max_delay = max(max_delay, delay)
            state.stats[worker_id, 0] = applied
            state.stats[worker_id, 1] = max_delay
            barrier.wait(_BARRIER_TIMEOUT)
            epoch += 1
    except Exception:
        traceback.print_exc()
        barrier.abort()


@dataclass
class RunResult:
    rows: list
    final_point: np.ndarray
    converged: bool


def run_solver(data: Dataset, cfg: SolverConfig, w0: np.ndarray = None,
               f_star: float = None, tol: float = None) -> RunResult:
    """Full multi-epoch solve; per-epoch metrics, optional gap-based stopping.

    With one worker this runs inline and reproduces the sequential baseline
    bitwise; with p > 1 it forks p persistent worker processes that share
    the iterate.  Wall time covers the optimization loop only.
    """
    if cfg.workers > 1 and cfg.scheme == LOCK_FREE and cfg.option == OPTION_AVERAGE:
        raise ValueError("average-iterate output needs locked writes in live mode")
    w = np.zeros(data.dim) if w0 is None else np.asarray(w0, dtype=np.float64).copy()
    rows = []
    f0 = objective(data, w, cfg.lam)
    n = data.n
    passes_per_epoch = 1.0 + cfg.workers * cfg.resolved_inner_steps(n) / n
    state = SharedState(data.dim, cfg.workers)
    converged = False
    total_updates = 0
    max_delay_seen = 0

    def record(epoch, wall, updates, max_delay, f_val):
        gap = f_val - f_star if f_star is not None else float("nan")
        rows.append(MetricRow(
            epoch=epoch,
            effective_passes=passes_per_epoch * epoch,
            objective=f_val,
            gap=gap,
            wall_seconds=wall,
            updates=updates,
            max_delay=max_delay,
        ))

    record(0, 0.0, 0, 0, f0)
    if tol is not None and f_star is not None and f0 - f_star < tol:
        return RunResult(rows, w, True)

    if cfg.workers == 1:
        start = time.monotonic()
        for epoch in range(cfg.epochs):
            state.reset_epoch(w)
            w, updates, max_delay = run_outer_epoch(state, data, cfg, epoch)
            total_updates += updates
            max_delay_seen = max(max_delay_seen, max_delay)
            f_val = checked_objective(data, w, cfg.lam, f0)
            record(epoch + 1, time.monotonic() - start, total_updates, max_delay_seen, f_val)
            if tol is not None and f_star is not None and f_val - f_star < tol:
                converged = True
                break
        return RunResult(rows, w, converged)

    barrier = _ctx.Barrier(cfg.workers + 1)
    stop = _ctx.RawValue(ctypes.c_int, 0)
    blocks = np.array_split(np.arange(n), cfg.workers)
    procs = [
        _ctx.Process(target=_worker_main,
                     args=(k, data, cfg, state, barrier, stop, blocks[k]),
                     daemon=True)
        for k in range(cfg.workers)
    ]
    for p in procs:
        p.start()
    try:
        start = time.monotonic()
        for epoch in range(cfg.epochs):
            state.reset_epoch(w)
            barrier.wait(_BARRIER_TIMEOUT)   # epoch start
            barrier.wait(_BARRIER_TIMEOUT)   # partial gradients ready
            g0 = np.zeros(data.dim)
            for k in range(cfg.workers):
                g0 += state.partials[k]
            state.g0[:] = g0 / n + cfg.lam * state.u0
            barrier.wait(_BARRIER_TIMEOUT)   # g0 published
            barrier.wait(_BARRIER_TIMEOUT)   # inner loops done
            updates = state.update_count
            total_updates += updates
            max_delay_seen = max(max_delay_seen, int(state.stats[:, 1].max()))
            if cfg.option == OPTION_AVERAGE:
                w = state.running_sum / updates
            else:
                w = state.u.copy()
            f_val = checked_objective(data, w, cfg.lam, f0)
            record(epoch + 1, time.monotonic() - start, total_updates, max_delay_seen, f_val)
            if tol is not None and f_star is not None and f_val - f_star < tol:
                converged = True
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
    return RunResult(rows, w, converged)
