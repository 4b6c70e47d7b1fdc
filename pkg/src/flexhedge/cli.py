"""Command-line front end.

Exit codes: 0 success, 2 unreadable or invalid scenario, 3 infeasible hour.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import lp_core
from .market import compute_flex_required
from .mpc import InfeasibleStep, cost_per_mwh, run_baseline, run_receding, savings
from .scenario_io import ParseError, ValidationError, load_scenario, resolve_scenario

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
CAP_TOL = 1e-6


def _csv_list(kind):
    def parse(text):
        try:
            values = [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a comma-separated list of {kind.__name__}: {text!r}")
        if not values:
            raise argparse.ArgumentTypeError("empty list")
        return values
    return parse


def _horizons(text):
    values = _csv_list(int)(text)
    if any(h < 1 for h in values):
        raise argparse.ArgumentTypeError("horizons must be >= 1")
    return values


def write_atomic(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, (int, str)) else repr(float(v)) for v in row])
    return buf.getvalue()


def _load(args):
    scenario = load_scenario(resolve_scenario(args.scenario), strict=args.strict)
    return scenario.with_overrides(
        pi_des=args.pi_des, capacity=args.ess_capacity, initial_soc=args.ess_soc,
        power_bound=args.ess_power, loss=args.ess_loss,
    ).check(strict=args.strict)


def cap_violations(traj, scenario):
    """Hours in which a constrained bus pays more than its cap."""
    hours = []
    for i, hour in enumerate(traj.hours):
        for k in traj.constrained:
            if traj.lmp[i][traj.bus_ids.index(k)] > scenario.pi_des[hour - 1] + CAP_TOL:
                hours.append(hour)
                break
    return hours


def cmd_run(args):
    scenario = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    baseline = run_baseline(scenario)
    write_atomic(out / "baseline.csv", baseline.to_csv_text())
    trajectories = {}
    for h in args.horizons:
        traj = run_receding(scenario, h)
        trajectories[h] = traj
        write_atomic(out / f"trajectory_H{h}.csv", traj.to_csv_text())
    report = savings(trajectories, baseline)
    summary = report.as_dict()
    summary["scenario"] = scenario.name
    summary["pi_des"] = float(scenario.pi_des[0]) if np.all(scenario.pi_des == scenario.pi_des[0]) else None
    for h, traj in trajectories.items():
        summary["horizons"][str(h)]["cap_violated_hours"] = cap_violations(traj, scenario)
    if args.emit == "json":
        write_atomic(out / "summary.json", json.dumps(summary, indent=2) + "\n")
    else:
        rows = [[h, report.cost_per_mwh[h], report.saving_vs_baseline[h],
                 report.forecast_gain.get(h, float("nan")),
                 report.forecast_gain_pct.get(h, float("nan"))] for h in trajectories]
        write_atomic(out / "summary.csv", _csv_text(
            ["horizon", "cost_per_mwh", "saving_vs_baseline", "forecast_gain", "forecast_gain_pct"], rows))
    print(f"{scenario.name} ({report.label}): baseline {report.baseline_cost_per_mwh:.2f} EUR/MWh")
    for h in trajectories:
        print(f"  H={h}: {report.cost_per_mwh[h]:.2f} EUR/MWh, "
              f"saving {report.saving_vs_baseline[h]:.2f}")
    return EXIT_OK


def cmd_quantify(args):
    scenario = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    net = scenario.network
    constrained = net.price_constrained
    rows = []
    for hour in range(1, scenario.n_hours + 1):
        try:
            res = compute_flex_required(net, scenario.inputs(hour), hour)
        except lp_core.Infeasible as exc:
            raise InfeasibleStep(hour, None) from exc
        rows.append([hour, *(res.flex_required[k] for k in constrained),
                     *(res.lmp[b] for b in net.bus_ids)])
    header = (["hour"] + [f"flexreq_bus{k}" for k in constrained]
              + [f"lmp_bus{b}" for b in net.bus_ids])
    write_atomic(out / "flex_required.csv", _csv_text(header, rows))
    hours = [r[0] for r in rows if any(v > CAP_TOL for v in r[1:1 + len(constrained)])]
    print(f"flexibility required in hours {hours}")
    return EXIT_OK


def sweep_point(scenario, parameter, value, horizon):
    """One grid point of a sweep: ``(total_cost, cost_per_mwh, violated_hours)``."""
    if parameter == "ess-capacity":
        scenario = scenario.with_overrides(capacity=value)
    elif parameter == "pi-des":
        scenario = scenario.with_overrides(pi_des=value)
    elif parameter == "horizon":
        horizon = int(value)
    else:
        raise ValueError(f"unknown sweep parameter {parameter!r}")
    traj = run_receding(scenario, horizon)
    return sum(traj.step_cost), cost_per_mwh(traj), len(cap_violations(traj, scenario))


def cmd_sweep(args):
    scenario = _load(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = cost_per_mwh(run_baseline(scenario))
    grid = args.grid
    tasks = [(scenario, args.parameter, v, args.horizon) for v in grid]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(sweep_point, *zip(*tasks)))
    else:
        results = [sweep_point(*t) for t in tasks]
    rows = []
    for value, (total, per_mwh, violated) in zip(grid, results):
        h = int(value) if args.parameter == "horizon" else args.horizon
        rows.append([repr(float(value)) if args.parameter != "horizon" else int(value),
                     h, total, per_mwh, base - per_mwh, violated])
    name = f"sweep_{args.parameter.replace('-', '_')}.csv"
    write_atomic(out / name, _csv_text(
        ["value", "horizon", "total_cost", "cost_per_mwh", "saving_vs_baseline",
         "cap_violated_hours"], rows))
    for row in rows:
        print(f"  {args.parameter}={row[0]}: {row[3]:.3f} EUR/MWh, {row[5]} capped hour(s) violated")
    return EXIT_OK


def cmd_validate(args):
    scenario = _load(args)
    run_baseline(scenario)
    print(f"{scenario.name}: ok ({scenario.n_hours} hours, "
          f"{len(scenario.network.buses)} buses, {len(scenario.storage)} storage unit(s))")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="flexhedge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", default="bundled",
                       help="scenario directory, name under $FLEXHEDGE_SCENARIO_DIR, or 'bundled'")
        p.add_argument("--pi-des", type=float, help="override the price cap (EUR/MWh)")
        p.add_argument("--ess-capacity", type=float, help="storage capacity (MWh)")
        p.add_argument("--ess-soc", type=float, help="initial state of charge (fraction)")
        p.add_argument("--ess-power", type=float, help="charge/discharge bound (MW)")
        p.add_argument("--ess-loss", type=float, help="standing loss (MWh per hour)")
        p.add_argument("--strict", action="store_true", help="reject merit-order violations")
        p.add_argument("--out", default="results", help="output directory")

    p = sub.add_parser("run", help="receding-horizon runs plus no-storage baseline")
    common(p)
    p.add_argument("--horizons", type=_horizons, default=[1, 6, 8])
    p.add_argument("--emit", choices=("csv", "json"), default="json")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("quantify", help="hourly flexibility required to hold the cap")
    common(p)
    p.set_defaults(func=cmd_quantify)

    p = sub.add_parser("sweep", help="summary rows over a parameter grid")
    common(p)
    p.add_argument("--parameter", required=True, choices=("ess-capacity", "horizon", "pi-des"))
    p.add_argument("--grid", type=_csv_list(float), required=True)
    p.add_argument("--horizon", type=int, default=1, help="lookahead for non-horizon sweeps")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="check a scenario and its no-storage baseline")
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "sweep" and args.parameter == "horizon":
        if any(v < 1 or v != int(v) for v in args.grid):
            print("error: horizon grid values must be integers >= 1", file=sys.stderr)
            return EXIT_INPUT
    try:
        return args.func(args)
    except (ParseError, ValidationError, FileNotFoundError, ValueError) as exc:
        if isinstance(exc, lp_core.LpError):
            raise
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleStep as exc:
        print(f"error: infeasible at hour {exc.hour}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except lp_core.Infeasible as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
