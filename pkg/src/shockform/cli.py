"""
Command-line front end.

    shockform simulate    --config scenario.json --out DIR [--plot]
    shockform certify     --config scenario.json --out DIR
    shockform trace       --config scenario.json --out DIR --x0 X [--t0 T] [--family F] [--plot]
    shockform convergence --config scenario.json --out DIR [--levels L] [--plot]

Exit codes: 0 success, 2 configuration or usage error, 3 numerical abort
(the status is still written to the report).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import runner
from .config import ConfigError, load
from .solver import BLOWUP, SMOOTH, Trajectory

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("shockform")


def fmt(v):
    """Shortest round-trip text for floats (at most 17 significant digits)."""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if v is None:
        return ""
    return str(v)


def write_csv(path, names, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(names)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return str(path)


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else fmt(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return str(path)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _save_trajectory(path, traj):
    np.savez(path, times=traj.times, levels=traj.levels,
             snapshot_index=np.array(traj.snapshot_index), status=np.array(traj.status),
             t_stop=np.array(traj.t_stop), grad0=np.array(traj.grad0))


def _load_trajectory(path, system):
    with np.load(path) as d:
        return Trajectory(system=system, times=d["times"], levels=d["levels"],
                          snapshot_index=[int(k) for k in d["snapshot_index"]],
                          status=str(d["status"]), t_stop=float(d["t_stop"]),
                          grad0=float(d["grad0"]))


def cmd_simulate(args, cfg):
    out = _out_dir(args)
    sc = runner.build(cfg)
    t0 = time.perf_counter()
    traj, report = runner.simulate(sc)
    elapsed = time.perf_counter() - t0
    names, data = runner.series_rows(sc, traj)
    files = [write_csv(out / "series.csv", names, data)]
    _save_trajectory(out / "trajectory.npz", traj)
    files.append(str(out / "trajectory.npz"))
    if args.plot:
        from .plotting import plot_series
        files.append(plot_series(names, data, out / "series.png", fields=runner.PLOT_FIELDS[sc.kind]))
    files.append(write_json(out / "timings.json", {"simulate_seconds": elapsed}))
    report["series_paths"] = files
    write_json(out / "report.json", report)
    print(f"{cfg.name}: {traj.status} at t={traj.t_stop:.6g}")
    return EXIT_OK if traj.status in (SMOOTH, BLOWUP) else EXIT_NUMERIC


def cmd_certify(args, cfg):
    out = _out_dir(args)
    sc = runner.build(cfg)
    cert, _ = runner.certify(sc)
    write_json(out / "certificate.json", cert)
    thr = cert.get("N", cert.get("threshold"))
    mn = cert.get("min_y0_q0", cert.get("min_initial"))
    print(f"{cfg.name}: threshold {thr:.6g}, min initial gradient {mn:.6g}, {cert['verdict']}")
    return EXIT_OK


def cmd_trace(args, cfg):
    out = Path(args.out)
    store = out / "trajectory.npz"
    if not store.exists():
        raise ConfigError(f"trace window unavailable: no trajectory store at {store}; run simulate first")
    if args.x0 is None:
        raise ConfigError("--x0 is required for trace")
    sc = runner.build(cfg)
    traj = _load_trajectory(store, sc.system)
    if not traj.times[0] <= args.t0 <= traj.times[-1]:
        raise ConfigError(f"trace window unavailable: t0={args.t0} outside "
                          f"[{traj.times[0]}, {traj.times[-1]}]")
    try:
        names, data, info = runner.trace_overlay(sc, traj, args.x0, args.t0, args.family)
    except ValueError as exc:
        raise ConfigError(f"trace window unavailable: {exc}") from None
    stem = f"trace_{info['family']}"
    files = [write_csv(out / f"{stem}.csv", names, data)]
    if args.plot:
        from .plotting import plot_trace
        files.append(plot_trace(names, data, out / f"{stem}.png", info["variable"]))
    info["paths"] = files
    write_json(out / f"{stem}.json", info)
    print(f"{cfg.name}: {info['samples']} samples, max |PDE - ODE| = {info['max_abs_difference']:.3g}")
    return EXIT_OK


def cmd_convergence(args, cfg):
    out = _out_dir(args)
    rows = runner.convergence(cfg, args.levels)
    names = list(rows[0].keys())
    files = [write_csv(out / "convergence.csv", names, [[r[k] for k in names] for r in rows])]
    if args.plot:
        from .plotting import plot_convergence
        files.append(plot_convergence(rows, out / "convergence.png"))
    write_json(out / "convergence.json", {"name": cfg.name, "rows": rows, "paths": files})
    for r in rows:
        print(" ".join(f"{k}={fmt(r[k])}" for k in names))
    return EXIT_OK if all(r["status"] == SMOOTH for r in rows) else EXIT_NUMERIC


COMMANDS = {"simulate": cmd_simulate, "certify": cmd_certify, "trace": cmd_trace,
            "convergence": cmd_convergence}


def build_parser():
    p = argparse.ArgumentParser(prog="shockform", description="Shock-formation toolkit for 1-D "
                                "Lagrangian gas dynamics, orthogonal MHD and duct flow.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("simulate", "run the solver and write series.csv + report.json"),
                           ("certify", "bounds and blowup threshold from the initial data"),
                           ("trace", "characteristic samples with a Riccati ODE overlay"),
                           ("convergence", "self-convergence table over halved dx")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True, help="scenario JSON file")
        s.add_argument("--out", required=True, help="output directory")
        if name in ("simulate", "trace", "convergence"):
            s.add_argument("--plot", action="store_true", help="also render PNG figures")
        if name == "trace":
            s.add_argument("--x0", type=float, help="starting material coordinate")
            s.add_argument("--t0", type=float, default=0.0, help="starting time")
            s.add_argument("--family", choices=("forward", "backward"), default="forward")
        if name == "convergence":
            s.add_argument("--levels", type=int, default=3, help="number of resolutions (>= 3)")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                         format="%(levelname)s %(name)s: %(message)s")
    if args.command == "convergence" and args.levels < 3:
        print("error: --levels must be at least 3", file=sys.stderr)
        return EXIT_CONFIG
    try:
        runner.thread_count()
        cfg = load(args.config)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # profile, geometry and box problems found while building the scenario
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, RuntimeError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
