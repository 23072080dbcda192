"""Benchmark command line: run, compare, speedup, certify, simulate, gen-data.

Exit codes: 0 success, 2 invalid certificate, 3 divergence, 1 bad input.
"""

from __future__ import annotations

import argparse
import math
import os
import statistics
import sys
from pathlib import Path

import numpy as np

from . import baselines, engine, metrics, simulate as sim, theory
from .common import (CONSISTENT_LOCK, INCONSISTENT_LOCK, LOCK_FREE,
                     OPTION_AVERAGE, SCHEMES, SolverConfig)
from .data import (dataset_stats, generate_synthetic, parse_libsvm,
                   parse_synthetic_descriptor, serialize_libsvm,
                   synthetic_descriptor)
from .model import smoothness_constant, strong_convexity_constant
from .reference import get_reference

AUTO_ETA_FRACTION = 0.3    # eta = 0.3/L when --eta auto
AUTO_GAMMA_FRACTION = 0.5  # gamma = 0.5/L when --gamma auto
STEP_GRID = (1.0, 0.5, 0.1, 0.05)  # grid of fractions of 1/L for tuning


class BadInput(Exception):
    pass


def load_dataset(path: str):
    """LibSVM file, or a synthetic key=value descriptor (kind=synthetic)."""
    p = Path(path)
    if not p.exists():
        raise BadInput(f"dataset {path} does not exist")
    head = p.read_text().splitlines()[0] if p.suffix != ".gz" else ""
    if head.strip().startswith("kind=synthetic"):
        return parse_synthetic_descriptor(p.read_text()), str(p)
    return parse_libsvm(p), str(p)


def _parse_tol(text: str):
    if text in ("inf", "none"):
        return None
    return float(text)


def _resolve_eta(spec: str, data, lam: float) -> float:
    if spec == "auto":
        return AUTO_ETA_FRACTION / smoothness_constant(data, lam)
    return float(spec)


def _resolve_gamma(spec: str, data, lam: float) -> float:
    if spec == "auto":
        return AUTO_GAMMA_FRACTION / smoothness_constant(data, lam)
    return float(spec)


def _run_one(data, source, args, eta, tol, seed, out_stream=None):
    """Single optimization run; returns (rows, header, converged)."""
    lam = args.lam
    w_star, f_star = get_reference(data, lam)
    stats = dataset_stats(data, source)
    header = {
        "algorithm": args.algorithm,
        "scheme": args.scheme,
        "workers": args.workers,
        "eta": eta,
        "lam": lam,
        "epochs": args.epochs,
        "seed": seed,
        "tol": "inf" if tol is None else tol,
        "n": stats.n,
        "d": stats.d,
        "nnz": stats.nnz,
        "dataset": stats.source,
        "f_star": repr(f_star),
        "deterministic": not (args.scheme == LOCK_FREE and args.workers > 1),
    }
    if args.algorithm == "svrg" or (args.algorithm == "asysvrg" and args.workers == 1):
        cfg = SolverConfig(eta=eta, scheme=args.scheme, workers=1, epochs=args.epochs,
                           seed=seed, lam=lam, option=args.option)
        result = engine.run_solver(data, cfg, f_star=f_star, tol=tol)
        rows, converged = result.rows, result.converged
    elif args.algorithm == "asysvrg":
        cfg = SolverConfig(eta=eta, scheme=args.scheme, workers=args.workers,
                           epochs=args.epochs, seed=seed, lam=lam, option=args.option)
        result = engine.run_solver(data, cfg, f_star=f_star, tol=tol)
        rows, converged = result.rows, result.converged
    elif args.algorithm == "hogwild":
        if args.scheme == CONSISTENT_LOCK:
            raise BadInput("hogwild supports inconsistent-lock (locked writes) "
                           "or lock-free only")
        hcfg = baselines.HogwildConfig(step_size=eta, decay=args.decay,
                                       workers=args.workers, epochs=args.epochs,
                                       seed=seed)
        traj = baselines.hogwild_run(data, hcfg, lock=args.scheme == INCONSISTENT_LOCK,
                                     lam=lam, f_star=f_star, tol=tol)
        rows = traj.rows
        converged = tol is not None and rows[-1].gap < tol
    else:
        raise BadInput(f"unknown algorithm {args.algorithm!r}")
    return rows, header, converged


def cmd_run(args) -> int:
    data, source = load_dataset(args.data)
    tol = _parse_tol(args.tol)
    eta = (_resolve_gamma(args.eta, data, args.lam) if args.algorithm == "hogwild"
           else _resolve_eta(args.eta, data, args.lam))
    try:
        rows, header, converged = _run_one(data, source, args, eta, tol, args.seed)
    except engine.DivergenceError as err:
        print(f"divergence: {err}", file=sys.stderr)
        return 3
    header["converged"] = converged
    metrics.write_metrics(args.out, rows, header)
    print(f"wrote {len(rows)} epochs to {args.out} "
          f"(final gap {rows[-1].gap:.3e}, converged={converged})")
    return 0


def cmd_speedup(args) -> int:
    data, source = load_dataset(args.data)
    tol = _parse_tol(args.tol)
    if tol is None:
        raise BadInput("speedup needs a finite --tol")
    eta = _resolve_eta(args.eta, data, args.lam)
    thread_list = [int(t) for t in args.threads.split(",")]
    w_star, f_star = get_reference(data, args.lam)
    results = []
    for p in thread_list:
        times = []
        converged_runs = 0
        for s in range(args.seeds):
            cfg = SolverConfig(eta=eta, scheme=args.scheme, workers=p,
                               epochs=args.epochs, seed=args.seed + s, lam=args.lam)
            try:
                res = engine.run_solver(data, cfg, f_star=f_star, tol=tol)
            except engine.DivergenceError:
                continue
            if res.converged:
                converged_runs += 1
                times.append(res.rows[-1].wall_seconds)
        median = statistics.median(times) if times else math.nan
        results.append((p, median, converged_runs))
    base = next((m for p, m, c in results if p == 1 and c > 0), math.nan)
    with open(args.out, "w") as out:
        out.write(f"# cpu_count={os.cpu_count()}\n")
        out.write(f"# dataset={source}\n# scheme={args.scheme}\n# eta={eta}\n"
                  f"# lam={args.lam}\n# tol={tol}\n# seeds={args.seeds}\n")
        out.write("workers,median_seconds,speedup,converged_runs,flag\n")
        for p, median, c in results:
            flagged = c < args.seeds or math.isnan(median)
            speedup = base / median if not flagged and base == base else math.nan
            out.write(f"{p},{median!r},{speedup!r},{c},{'excluded' if flagged else 'ok'}\n")
    print(f"wrote speedup table to {args.out}")
    return 0


def _parse_config_spec(spec: str) -> dict:
    # semicolon-separated so the label stays a single CSV field
    out = {}
    for item in spec.split(";"):
        key, _, value = item.partition("=")
        if not _:
            raise BadInput(f"bad --config item {item!r}")
        out[key.strip()] = value.strip()
    if "algo" not in out:
        raise BadInput(f"--config needs algo=...: {spec!r}")
    return out


def cmd_compare(args) -> int:
    data, source = load_dataset(args.data)
    w_star, f_star = get_reference(data, args.lam)
    with open(args.out, "w") as out:
        out.write(f"# dataset={source}\n# lam={args.lam}\n# budget={args.budget}\n"
                  f"# f_star={f_star!r}\n")
        out.write("config,epoch,effective_passes,objective,gap\n")
        for spec in args.config or []:
            kv = _parse_config_spec(spec)
            algo = kv["algo"]
            scheme = kv.get("scheme", INCONSISTENT_LOCK)
            workers = int(kv.get("workers", 1))
            lam = args.lam
            if algo == "hogwild":
                gamma = _resolve_gamma(kv.get("gamma", kv.get("eta", "auto")), data, lam)
                passes_per_epoch = 1.0
                epochs = int(math.floor(args.budget / passes_per_epoch))
                if epochs > 0:
                    hcfg = baselines.HogwildConfig(
                        step_size=gamma, decay=float(kv.get("decay", 0.9)),
                        workers=workers, epochs=epochs, seed=args.seed)
                    traj = baselines.hogwild_run(
                        data, hcfg, lock=scheme == INCONSISTENT_LOCK, lam=lam,
                        f_star=f_star)
                    rows = traj.rows
                else:
                    rows = []
            else:
                eta = _resolve_eta(kv.get("eta", "auto"), data, lam)
                cfg = SolverConfig(eta=eta, scheme=scheme, workers=workers,
                                   epochs=1, seed=args.seed, lam=lam)
                passes_per_epoch = 1.0 + workers * cfg.resolved_inner_steps(data.n) / data.n
                epochs = int(math.floor(args.budget / passes_per_epoch))
                if epochs > 0:
                    cfg = cfg.with_(epochs=epochs)
                    rows = engine.run_solver(data, cfg, f_star=f_star).rows
                else:
                    rows = []
            for row in rows:
                out.write(f"{spec},{row.epoch},{row.effective_passes!r},"
                          f"{row.objective!r},{row.gap!r}\n")
    print(f"wrote comparison to {args.out}")
    return 0


def cmd_certify(args) -> int:
    if args.sweep:
        try:
            eta = theory.max_certified_step(args.smoothness, args.strong_convexity,
                                            args.tau, args.updates, args.scheme)
        except theory.Infeasible as inf:
            print("infeasible: " + "; ".join(inf.conditions))
            return 2
        print(f"max_certified_step={eta!r}")
    else:
        if args.eta is None:
            raise BadInput("certify needs --eta or --sweep")
        eta = args.eta
    cert = theory.certify(args.scheme, args.smoothness, args.strong_convexity,
                          eta, args.tau, args.updates)
    sys.stdout.write(theory.certificate_to_text(cert))
    return 0 if cert.valid else 2


def cmd_simulate(args) -> int:
    data, source = load_dataset(args.data)
    schedule = sim.load_schedule(args.schedule)
    cfg = SolverConfig(eta=args.eta, scheme=args.scheme,
                       workers=max(1, schedule.workers), epochs=args.epochs,
                       seed=args.seed, lam=args.lam, option=args.option)
    log = sim.simulate(data, cfg, schedule, log_steps=True)
    w_star, f_star = get_reference(data, args.lam)
    L = smoothness_constant(data, args.lam)

    with open(args.out, "w") as out:
        out.write(f"# dataset={source}\n# schedule={args.schedule}\n"
                  f"# tau={schedule.tau}\n# eta={args.eta}\n# lam={args.lam}\n"
                  f"# scheme={args.scheme}\n# option={args.option}\n")
        for t, elog in enumerate(log.epochs):
            out.write(f"# epoch_{t}_objective={elog.objective_end!r}\n")
        out.write("epoch,step,worker,sample_index,read_stamp,delay\n")
        for t, elog in enumerate(log.epochs):
            for m in range(elog.updates):
                out.write(f"{t},{m},{elog.workers[m]},{elog.sample_indices[m]},"
                          f"{elog.read_stamps[m]},{m - elog.read_stamps[m]}\n")

    ok = True
    vb = sim.check_variance_bound(log, data, args.lam, L, f_star)
    print(f"variance bound: {vb['checked']} checks, {vb['violations']} violations "
          f"-> {'pass' if vb['violations'] == 0 else 'FAIL'}")
    ok &= vb["violations"] == 0
    rg = sim.check_read_gap_bound(log)
    print(f"read-gap bound: {rg['checked']} checks, {rg['violations']} violations "
          f"-> {'pass' if rg['violations'] == 0 else 'FAIL'}")
    ok &= rg["violations"] == 0
    if schedule.tau == 0 and schedule.workers == 1:
        traj = baselines.svrg_sequential(
            data, np.zeros(data.dim), args.eta, schedule.total_updates,
            args.epochs, args.seed, args.lam, option=args.option)
        match = all(np.array_equal(a.end, b)
                    for a, b in zip(log.epochs, traj.snapshots[1:]))
        print(f"zero-delay sequential match: {'bitwise pass' if match else 'FAIL'}")
        ok &= match
    print(f"max observed delay: {log.max_delay} (bound {schedule.tau})")
    print(f"wrote trajectory to {args.out}")
    return 0 if ok else 2


def cmd_gen_data(args) -> int:
    data = generate_synthetic(args.n, args.d, args.seed, args.separation)
    serialize_libsvm(data, args.out)
    Path(args.out + ".meta").write_text(
        synthetic_descriptor(args.n, args.d, args.seed, args.separation))
    stats = dataset_stats(data, args.out)
    print(f"wrote {stats.n} x {stats.d} dataset ({stats.nnz} nonzeros) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="asyncsvrg-bench",
        description="Benchmark harness for asynchronous variance-reduced SGD")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one optimization run -> metrics CSV")
    run.add_argument("--data", required=True)
    run.add_argument("--algorithm", choices=("asysvrg", "svrg", "hogwild"),
                     default="asysvrg")
    run.add_argument("--scheme", choices=SCHEMES, default=INCONSISTENT_LOCK)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--eta", default="auto", help="step size, or 'auto'")
    run.add_argument("--decay", type=float, default=0.9,
                     help="per-epoch step decay (hogwild only)")
    run.add_argument("--lam", type=float, default=1e-4)
    run.add_argument("--epochs", type=int, default=50)
    run.add_argument("--tol", default="1e-4", help="gap stopping rule, or 'inf'")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--option", type=int, choices=(1, 2), default=1)
    run.add_argument("--out", required=True)
    run.set_defaults(func=cmd_run)

    sp = sub.add_parser("speedup", help="wall-time-to-gap sweep over thread counts")
    sp.add_argument("--data", required=True)
    sp.add_argument("--scheme", choices=SCHEMES, default=LOCK_FREE)
    sp.add_argument("--threads", default="1,2,4")
    sp.add_argument("--eta", default="auto")
    sp.add_argument("--lam", type=float, default=1e-4)
    sp.add_argument("--tol", default="1e-4")
    sp.add_argument("--seeds", type=int, default=3)
    sp.add_argument("--epochs", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_speedup)

    cp = sub.add_parser("compare", help="aligned convergence curves at a pass budget")
    cp.add_argument("--data", required=True)
    cp.add_argument("--budget", type=float, required=True,
                    help="effective-pass budget per config")
    cp.add_argument("--lam", type=float, default=1e-4)
    cp.add_argument("--seed", type=int, default=0)
    cp.add_argument("--config", action="append",
                    help="algo=...;scheme=...;workers=...;eta=... (repeatable)")
    cp.add_argument("--out", required=True)
    cp.set_defaults(func=cmd_compare)

    ct = sub.add_parser("certify", help="convergence certificate for given constants")
    ct.add_argument("--scheme", choices=theory.SCHEMES, required=True)
    ct.add_argument("--smoothness", type=float, required=True)
    ct.add_argument("--strong-convexity", type=float, required=True)
    ct.add_argument("--tau", type=int, default=0)
    ct.add_argument("--updates", type=int, required=True)
    ct.add_argument("--eta", type=float)
    ct.add_argument("--sweep", action="store_true",
                    help="find the largest certified step size")
    ct.set_defaults(func=cmd_certify)

    sm = sub.add_parser("simulate", help="replay a schedule file deterministically")
    sm.add_argument("--data", required=True)
    sm.add_argument("--schedule", required=True)
    sm.add_argument("--eta", type=float, required=True)
    sm.add_argument("--lam", type=float, default=1e-4)
    sm.add_argument("--scheme", choices=SCHEMES, default=INCONSISTENT_LOCK)
    sm.add_argument("--epochs", type=int, default=1)
    sm.add_argument("--seed", type=int, default=0)
    sm.add_argument("--option", type=int, choices=(1, 2), default=2)
    sm.add_argument("--out", required=True)
    sm.set_defaults(func=cmd_simulate)

    gd = sub.add_parser("gen-data", help="write a seeded synthetic dataset")
    gd.add_argument("--n", type=int, required=True)
    gd.add_argument("--d", type=int, required=True)
    gd.add_argument("--seed", type=int, default=0)
    gd.add_argument("--separation", type=float, default=5.0)
    gd.add_argument("--out", required=True)
    gd.set_defaults(func=cmd_gen_data)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BadInput, sim.ScheduleError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
