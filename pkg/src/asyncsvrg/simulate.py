"""Deterministic single-threaded simulator of the asynchronous inner loop.

Virtual workers are driven by an explicit interleaving schedule: a sequence
of ``snapshot`` / ``apply`` events with a declared delay bound tau.  A
snapshot captures the read point a worker will later use; an apply consumes
it, computes the variance-reduced direction and updates the iterate.  Reads
under the unlocked schemes may mix exactly two consecutive iterate ages,
expressed by a coordinate mask: the masked coordinates come from the iterate
one update newer than the snapshot's stamp.

Everything is replayed in program order, so identical (data, config,
schedule, seed) inputs give bitwise identical trajectories.  This is the
reference against which the live parallel engine and the rate certificates
are checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import theory
from .common import (CONSISTENT_LOCK, OPTION_AVERAGE, OPTION_CURRENT, SCHEMES,
                     SolverConfig, worker_rng)
from .model import Dataset, full_gradient, gradient_example, mean_sq_update_norm, objective

SNAPSHOT = "snapshot"
APPLY = "apply"


class ScheduleError(ValueError):
    """Schedule rejected before execution; carries the offending event index."""

    def __init__(self, event: int, reason: str):
        super().__init__(f"event {event}: {reason}")
        self.event = event
        self.reason = reason


@dataclass(frozen=True)
class ScheduleEvent:
    worker: int
    action: str
    newer_coords: tuple = None  # mask: coordinates read one update newer


@dataclass
class Schedule:
    events: list
    tau: int

    @property
    def workers(self) -> int:
        return 1 + max((ev.worker for ev in self.events), default=0)

    @property
    def total_updates(self) -> int:
        return sum(1 for ev in self.events if ev.action == APPLY)


def validate_schedule(schedule: Schedule, dim: int = None, allow_masks: bool = True) -> int:
    """Check schedule well-formedness and the declared delay bound.

    Returns the total number of applies.  Raises ScheduleError on: apply
    without a pending snapshot, double snapshot, realized delay exceeding
    tau, a masked snapshot with no intervening update before its apply, or
    mask coordinates out of range.
    """
    pending = {}  # worker -> (stamp, masked)
    applied = 0
    for k, ev in enumerate(schedule.events):
        if ev.action == SNAPSHOT:
            if ev.worker in pending:
                raise ScheduleError(k, f"worker {ev.worker} snapshots twice without applying")
            if ev.newer_coords is not None:
                if not allow_masks:
                    raise ScheduleError(k, "masked snapshot not allowed for this scheme")
                coords = np.asarray(ev.newer_coords, dtype=np.int64)
                if coords.size == 0:
                    raise ScheduleError(k, "mask must name at least one coordinate")
                if len(np.unique(coords)) != coords.size or coords.min() < 0:
                    raise ScheduleError(k, "mask coordinates must be unique and non-negative")
                if dim is not None and coords.max() >= dim:
                    raise ScheduleError(k, f"mask coordinate {coords.max()} out of range")
            pending[ev.worker] = (applied, ev.newer_coords is not None)
        elif ev.action == APPLY:
            if ev.worker not in pending:
                raise ScheduleError(k, f"worker {ev.worker} applies without a snapshot")
            stamp, masked = pending.pop(ev.worker)
            delay = applied - stamp
            if delay > schedule.tau:
                raise ScheduleError(
                    k, f"realized delay {delay} exceeds declared bound {schedule.tau}")
            if masked and stamp == applied:
                raise ScheduleError(
                    k, "masked snapshot needs an intervening update before its apply")
            applied += 1
        else:
            raise ScheduleError(k, f"unknown action {ev.action!r}")
    return applied


def alternating_schedule(steps: int, tau: int = 0, worker: int = 0) -> Schedule:
    """Single-worker strict snapshot/apply alternation: the tau=0 reduction."""
    events = []
    for _ in range(steps):
        events.append(ScheduleEvent(worker, SNAPSHOT))
        events.append(ScheduleEvent(worker, APPLY))
    return Schedule(events=events, tau=tau)


def random_schedule(workers: int, total_updates: int, tau: int, seed: int,
                    dim: int = None, masked_prob: float = 0.0) -> Schedule:
    """Seeded random interleaving that respects the delay bound by construction.

    The apply order is drawn first; each apply at global position m then
    draws its read stamp uniformly from the window allowed by tau and by the
    owner's previous apply.  Stale reads are optionally masked (mixing two
    consecutive ages) with probability ``masked_prob``.
    """
    if masked_prob > 0 and dim is None:
        raise ValueError("masked schedules need the parameter dimension")
    rng = np.random.default_rng([seed, 0xA5])
    owners = rng.integers(0, workers, size=total_updates)
    last_apply = {w: -1 for w in range(workers)}
    snaps_at = {}  # stamp -> list of (worker, mask)
    for m in range(total_updates):
        w = int(owners[m])
        lo = max(0, m - tau, last_apply[w] + 1)
        stamp = int(rng.integers(lo, m + 1))
        mask = None
        if stamp < m and masked_prob > 0 and rng.random() < masked_prob:
            size = int(rng.integers(1, dim))
            mask = tuple(int(c) for c in rng.choice(dim, size=size, replace=False))
        snaps_at.setdefault(stamp, []).append((w, mask))
        last_apply[w] = m
    events = []
    for m in range(total_updates):
        for w, mask in snaps_at.get(m, ()):
            events.append(ScheduleEvent(w, SNAPSHOT, mask))
        events.append(ScheduleEvent(int(owners[m]), APPLY))
    return Schedule(events=events, tau=tau)


# ---------------------------------------------------------------------------
# schedule file format: line-oriented text `worker action [mask=i,j,k]`,
# optional `tau <int>` header, `#` comments.

def dump_schedule(schedule: Schedule, target) -> None:
    stream, owned = (target, False) if hasattr(target, "write") else (open(target, "w"), True)
    try:
        stream.write(f"tau {schedule.tau}\n")
        for ev in schedule.events:
            if ev.newer_coords is not None:
                mask = ",".join(str(c) for c in ev.newer_coords)
                stream.write(f"{ev.worker} {ev.action} mask={mask}\n")
            else:
                stream.write(f"{ev.worker} {ev.action}\n")
    finally:
        if owned:
            stream.close()


def load_schedule(source) -> Schedule:
    stream, owned = (source, False) if hasattr(source, "read") else (open(source, "r"), True)
    events = []
    tau = 0
    try:
        for lineno, raw in enumerate(stream, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "tau":
                if len(parts) != 2 or not parts[1].lstrip("-").isdigit():
                    raise ScheduleError(lineno, "tau header must be `tau <int>`")
                tau = int(parts[1])
                continue
            if len(parts) not in (2, 3) or not parts[0].isdigit():
                raise ScheduleError(lineno, f"expected `worker action [mask=...]`, got {line!r}")
            worker = int(parts[0])
            action = parts[1]
            if action not in (SNAPSHOT, APPLY):
                raise ScheduleError(lineno, f"unknown action {action!r}")
            mask = None
            if len(parts) == 3:
                key, _, value = parts[2].partition("=")
                if key != "mask" or not value:
                    raise ScheduleError(lineno, f"bad mask spec {parts[2]!r}")
                try:
                    mask = tuple(int(c) for c in value.split(","))
                except ValueError:
                    raise ScheduleError(lineno, f"bad mask spec {parts[2]!r}") from None
            events.append(ScheduleEvent(worker, action, mask))
    finally:
        if owned:
            stream.close()
    return Schedule(events=events, tau=tau)


# ---------------------------------------------------------------------------
# trajectory logging

@dataclass
class EpochLog:
    """Complete record of one simulated outer epoch."""

    start: np.ndarray                      # w_t  (= u_0 of this epoch)
    anchor_gradient: np.ndarray            # full gradient at u_0
    iterates: list = field(default_factory=list)      # u_0 .. u_M (step logging only)
    read_points: list = field(default_factory=list)   # u-hat per update
    sample_indices: list = field(default_factory=list)
    read_stamps: list = field(default_factory=list)
    workers: list = field(default_factory=list)
    updates: int = 0
    end: np.ndarray = None                 # w_{t+1}
    objective_end: float = float("nan")


@dataclass
class TrajectoryLog:
    config: SolverConfig
    tau: int
    epochs: list = field(default_factory=list)
    max_delay: int = 0

    @property
    def final_point(self):
        return self.epochs[-1].end

    def epoch_objectives(self):
        return np.array([e.objective_end for e in self.epochs])


def simulate(data: Dataset, cfg: SolverConfig, schedule: Schedule,
             w0: np.ndarray = None, log_steps: bool = True) -> TrajectoryLog:
    """Replay ``schedule`` for ``cfg.epochs`` outer epochs, deterministically.

    Each epoch recomputes the anchor full gradient, re-derives per-worker
    sample streams from (seed, worker, epoch) and replays the same event
    sequence.  With ``log_steps`` every iterate and read point is kept (for
    the q-sequence and bound checks); without it only per-epoch summaries
    survive, which is what the Monte-Carlo certificate validation uses.
    """
    allow_masks = cfg.scheme != CONSISTENT_LOCK
    validate_schedule(schedule, dim=data.dim, allow_masks=allow_masks)
    workers = max(schedule.workers, cfg.workers)
    w = np.zeros(data.dim) if w0 is None else np.asarray(w0, dtype=np.float64).copy()
    log = TrajectoryLog(config=cfg, tau=schedule.tau)
    lam, eta = cfg.lam, cfg.eta

    for epoch in range(cfg.epochs):
        u0 = w.copy()
        g0 = full_gradient(data, u0, lam)
        u = u0.copy()
        prev_u = None  # iterate one update older than u (mask materialization)
        elog = EpochLog(start=u0, anchor_gradient=g0)
        if log_steps:
            elog.iterates.append(u.copy())
        rngs = [worker_rng(cfg.seed, wk, epoch) for wk in range(workers)]
        pending = {}  # worker -> [index, stamp, mask, read_point or None]
        running_sum = np.zeros(data.dim)
        applied = 0

        for ev in schedule.events:
            if ev.action == SNAPSHOT:
                i = int(rngs[ev.worker].integers(data.n))
                if ev.newer_coords is None:
                    pending[ev.worker] = [i, applied, None, u.copy()]
                else:
                    pending[ev.worker] = [i, applied, np.asarray(ev.newer_coords), None]
                continue
            # apply
            i, stamp, mask, u_hat = pending.pop(ev.worker)
            if u_hat is None:
                raise ScheduleError(
                    -1, "masked snapshot never materialized (no intervening update)")
            v = gradient_example(data, i, u_hat, lam) - gradient_example(data, i, u0, lam) + g0
            if cfg.option == OPTION_AVERAGE:
                running_sum += u
            prev_u = u
            u = u - eta * v
            applied += 1
            log.max_delay = max(log.max_delay, applied - 1 - stamp)
            if log_steps:
                elog.iterates.append(u.copy())
                elog.read_points.append(u_hat)
                elog.sample_indices.append(i)
                elog.read_stamps.append(stamp)
                elog.workers.append(ev.worker)
            # materialize masked snapshots taken just before this update
            for slot in pending.values():
                if slot[3] is None and slot[1] == applied - 1:
                    point = prev_u.copy()
                    point[slot[2]] = u[slot[2]]
                    slot[3] = point

        elog.updates = applied
        if cfg.option == OPTION_AVERAGE:
            if applied == 0:
                raise ScheduleError(-1, "average-iterate option needs at least one update")
            w = running_sum / applied
        else:
            w = u.copy()
        elog.end = w.copy()
        elog.objective_end = objective(data, w, lam)
        log.epochs.append(elog)
    return log


# ---------------------------------------------------------------------------
# derived quantities and inequality checks

def measure_q_sequence(log: TrajectoryLog, data: Dataset, lam: float):
    """Exact mean squared update norms along the trajectory.

    For each epoch returns (q, q_hat): q[m] enumerates all instances at the
    true iterate u_m (m = 0..M), q_hat[m] at the read point of update m
    (m = 0..M-1).  Requires a step-logged trajectory.
    """
    out = []
    for elog in log.epochs:
        if not elog.iterates:
            raise ValueError("q sequence needs a step-logged trajectory")
        u0, g0 = elog.start, elog.anchor_gradient
        q = np.array([mean_sq_update_norm(data, u, u0, g0, lam) for u in elog.iterates])
        q_hat = np.array(
            [mean_sq_update_norm(data, u_hat, u0, g0, lam) for u_hat in elog.read_points])
        out.append((q, q_hat))
    return out


def check_variance_bound(log: TrajectoryLog, data: Dataset, lam: float,
                         L: float, f_star: float):
    """Check q(x) <= 4L*(f(x) - f* + f(u_0) - f*) at every logged point.

    The bound is deterministic (q is already the exact average over
    instances), so any violation is a hard failure.  Checks both the true
    iterates and the read points.  Returns a summary dict.
    """
    checked = 0
    violations = 0
    worst_margin = -np.inf
    for elog, (q, q_hat) in zip(log.epochs, measure_q_sequence(log, data, lam)):
        gap0 = objective(data, elog.start, lam) - f_star
        for series, points in ((q, elog.iterates), (q_hat, elog.read_points)):
            for val, point in zip(series, points):
                bound = 4.0 * L * ((objective(data, point, lam) - f_star) + gap0)
                checked += 1
                margin = val - bound
                worst_margin = max(worst_margin, margin)
                if margin > 0:
                    violations += 1
    return {"checked": checked, "violations": violations, "worst_margin": worst_margin}


def check_read_gap_bound(log: TrajectoryLog):
    """Check the step-expansion bound relating each read point to its iterate.

    For a read with staleness d = m - stamp the provable per-step bound is

        ||u_hat_m - u_m||^2 <= max(4, 2 d) * sum_{l=stamp..m-1} ||u_l - u_{l+1}||^2.

    A mixed-age read splits into disjoint coordinate projections of the two
    ages, each bounded via Cauchy-Schwarz over at most d intermediate steps;
    for d <= 2 this reduces to the constant-4 form used in the rate
    analysis.  Fresh reads (d == 0) require exact equality.
    """
    checked = 0
    violations = 0
    for elog in log.epochs:
        if not elog.iterates:
            raise ValueError("read-gap check needs a step-logged trajectory")
        steps = [elog.iterates[l + 1] - elog.iterates[l] for l in range(elog.updates)]
        step_sq = np.array([float(s @ s) for s in steps])
        for m, (u_hat, stamp) in enumerate(zip(elog.read_points, elog.read_stamps)):
            diff = u_hat - elog.iterates[m]
            lhs = float(diff @ diff)
            factor = max(4.0, 2.0 * (m - stamp))
            rhs = factor * float(np.sum(step_sq[stamp:m]))
            checked += 1
            if lhs > rhs + 1e-30:
                violations += 1
    return {"checked": checked, "violations": violations}


@dataclass
class ValidationReport:
    """Empirical per-epoch contraction versus a certificate's rate factor."""

    rate_factor: float
    seeds: int
    mean_gaps: np.ndarray      # Monte-Carlo mean gap per epoch boundary
    epoch_ratios: np.ndarray   # consecutive ratios of the mean gaps
    max_ratio: float
    diverged: bool = False

    def within(self, slack: float) -> bool:
        return (not self.diverged) and bool(self.max_ratio <= self.rate_factor + slack)


def validate_certificate(data: Dataset, cfg: SolverConfig,
                         cert: "theory.ConvergenceCertificate", n_seeds: int,
                         f_star: float, gap_floor: float = 1e-13,
                         masked_prob: float = 0.25) -> ValidationReport:
    """Monte-Carlo check of a certified rate against simulated trajectories.

    Runs ``n_seeds`` random delay-bounded schedules with average-iterate
    epoch outputs, and compares the per-epoch ratio of Monte-Carlo mean gaps
    against the certificate's rate factor.  Epochs whose mean gap falls
    below ``gap_floor`` are excluded (float noise dominates there).
    """
    if not cert.valid:
        raise ValueError("certificate is not valid; nothing to validate")
    scheme = CONSISTENT_LOCK if cert.scheme == theory.CONSISTENT else cfg.scheme
    if scheme == CONSISTENT_LOCK:
        masked_prob = 0.0
    total = cfg.resolved_inner_steps(data.n) * cfg.workers
    run_cfg = cfg.with_(scheme=scheme, eta=cert.step_size, option=OPTION_AVERAGE)
    gaps = np.full((n_seeds, cfg.epochs + 1), np.nan)
    for s in range(n_seeds):
        schedule = random_schedule(cfg.workers, total, cert.delay_bound,
                                   seed=cfg.seed + 7919 * (s + 1), dim=data.dim,
                                   masked_prob=masked_prob)
        w = np.zeros(data.dim)
        gaps[s, 0] = objective(data, w, cfg.lam) - f_star
        seed_cfg = run_cfg.with_(seed=cfg.seed + 7919 * (s + 1), epochs=1)
        for t in range(cfg.epochs):
            log = simulate(data, seed_cfg.with_(seed=seed_cfg.seed + t), schedule,
                           w0=w, log_steps=False)
            w = log.final_point
            gaps[s, t + 1] = log.epochs[-1].objective_end - f_star
            if gaps[s, t + 1] < gap_floor:
                break
    counts = np.sum(~np.isnan(gaps), axis=0)
    mean_gaps = np.where(counts > 0, np.nansum(gaps, axis=0) / np.maximum(counts, 1),
                         np.nan)
    valid = ~np.isnan(mean_gaps) & (mean_gaps > gap_floor)
    ratios = []
    for t in range(cfg.epochs):
        if valid[t] and not np.isnan(mean_gaps[t + 1]):
            ratios.append(mean_gaps[t + 1] / mean_gaps[t])
    ratios = np.array(ratios)
    # no usable ratios means the gap fell under the floor immediately
    max_ratio = float(np.max(ratios)) if ratios.size else 0.0
    return ValidationReport(
        rate_factor=cert.rate_factor,
        seeds=n_seeds,
        mean_gaps=mean_gaps,
        epoch_ratios=ratios,
        max_ratio=max_ratio,
        diverged=bool(np.any(mean_gaps[~np.isnan(mean_gaps)] > 1e3 * max(mean_gaps[0], 1.0))),
    )
