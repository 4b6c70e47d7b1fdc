"""Receding-horizon operation of storage under the hedged DC-OPF, and savings metrics.

At every hour the controller solves the hedged horizon program over the next
``H`` hours (truncated at the end of the day), commits the first step's
flexibility, advances the state of charge and moves on. Prices recorded for an
hour are the nodal duals of that committed first step.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import lp_core
from .market import (
    build_hedged_opf_horizon,
    build_opf_single,
    extract_lmp,
    flex_value,
    gen_var,
    load_var,
)
from .storage import StorageState, step_soc

__all__ = [
    "EPSILON",
    "Plan",
    "Trajectory",
    "SavingsReport",
    "InfeasibleStep",
    "IncompleteTrajectory",
    "plan",
    "run_receding",
    "run_baseline",
    "cost_per_mwh",
    "gain_percent",
    "savings",
]

# tie-break cost on |flex|, far below every reporting tolerance
EPSILON = 1e-7


class InfeasibleStep(lp_core.Infeasible):
    def __init__(self, hour, trajectory):
        super().__init__(f"hedged OPF infeasible at hour {hour}")
        self.hour = hour
        self.trajectory = trajectory


class IncompleteTrajectory(ValueError):
    pass


@dataclass
class Plan:
    start: int
    flex: np.ndarray  # (steps, units)
    lp: lp_core.LinearProgram = field(repr=False)
    solution: lp_core.LpSolution = field(repr=False)


@dataclass
class Trajectory:
    """Per-hour record of one simulated day.

    ``flex`` and ``soc`` have one column per storage unit; ``soc`` is the energy
    (MWh) left after the hour. ``load`` and ``step_cost`` refer to loads at the
    price-constrained buses, ``step_cost`` being what they pay at the nodal price.
    """

    horizon: int | None
    bus_ids: list
    constrained: list
    hosts: list
    n_hours: int
    hours: list = field(default_factory=list)
    lmp: list = field(default_factory=list)
    flex: list = field(default_factory=list)
    soc: list = field(default_factory=list)
    imports: list = field(default_factory=list)
    dist_gen: list = field(default_factory=list)
    load: list = field(default_factory=list)
    step_cost: list = field(default_factory=list)

    @property
    def complete(self):
        return len(self.hours) == self.n_hours

    def lmp_at(self, bus):
        return np.array([row[self.bus_ids.index(bus)] for row in self.lmp])

    def as_arrays(self):
        return {
            "hour": np.array(self.hours),
            "lmp": np.array(self.lmp).reshape(len(self.hours), len(self.bus_ids)),
            "flex": np.array(self.flex).reshape(len(self.hours), len(self.hosts)),
            "soc": np.array(self.soc).reshape(len(self.hours), len(self.hosts)),
            "imports": np.array(self.imports),
            "dist_gen": np.array(self.dist_gen),
            "load": np.array(self.load),
            "step_cost": np.array(self.step_cost),
        }

    def columns(self):
        cols = ["hour"] + [f"lmp_bus{b}" for b in self.bus_ids]
        if len(self.hosts) == 1:
            cols += ["flex", "soc"]
        else:
            cols += [f"flex_bus{k}" for k in self.hosts] + [f"soc_bus{k}" for k in self.hosts]
        return cols + ["import_trans", "gen_dist", "load", "step_cost"]

    def rows(self):
        for i, hour in enumerate(self.hours):
            yield [hour, *self.lmp[i], *self.flex[i], *self.soc[i],
                   self.imports[i], self.dist_gen[i], self.load[i], self.step_cost[i]]

    def to_csv_text(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns())
        for row in self.rows():
            writer.writerow([row[0], *(repr(float(v)) for v in row[1:])])
        return buf.getvalue()

    def write_csv(self, path):
        Path(path).write_text(self.to_csv_text())

    @classmethod
    def read_csv(cls, path, bus_ids, constrained, hosts, horizon=None, n_hours=24):
        traj = cls(horizon, list(bus_ids), list(constrained), list(hosts), n_hours)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != traj.columns():
                raise ValueError(f"unexpected columns {header}")
            nb, nu = len(traj.bus_ids), len(traj.hosts)
            for row in reader:
                vals = [float(v) for v in row[1:]]
                traj.hours.append(int(row[0]))
                traj.lmp.append(vals[:nb])
                traj.flex.append(vals[nb:nb + nu])
                traj.soc.append(vals[nb + nu:nb + 2 * nu])
                rest = vals[nb + 2 * nu:]
                traj.imports.append(rest[0])
                traj.dist_gen.append(rest[1])
                traj.load.append(rest[2])
                traj.step_cost.append(rest[3])
        return traj


def _initial_states(scenario, storage):
    specs = scenario.storage if storage is None else storage
    out = []
    for s in specs:
        out.append(s if isinstance(s, StorageState) else s.initial_state())
    return out


def plan(scenario, states: Sequence[StorageState], hour: int, horizon: int,
         network=None, epsilon=EPSILON) -> Plan:
    """Optimal flexibility schedule for hours ``hour .. hour + horizon - 1`` (clamped to the day)."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    network = scenario.network if network is None else network
    last = min(hour + horizon - 1, scenario.n_hours)
    window = [scenario.inputs(h) for h in range(hour, last + 1)]
    lp = build_hedged_opf_horizon(network, window, states, start=hour, epsilon=epsilon)
    sol = lp_core.solve(lp)
    flex = np.array([
        [flex_value(sol, s.spec.host_bus, h) for s in states]
        for h in range(hour, last + 1)
    ]).reshape(last - hour + 1, len(states))
    return Plan(hour, flex, lp, sol)


def _record(traj, scenario, network, lp, sol, hour, flex, soc):
    inputs = scenario.inputs(hour)
    slack = network.slack
    constrained = set(traj.constrained)
    lmp = [extract_lmp(lp, sol, b, hour) for b in traj.bus_ids]
    imports = sum(sol.primal[gen_var(g, hour)] for g in inputs.generators if g.bus == slack)
    dist = sum(sol.primal[gen_var(g, hour)] for g in inputs.generators if g.bus != slack)
    cost = 0.0
    served = 0.0
    for d in inputs.loads:
        if d.bus in constrained:
            mw = sol.primal[load_var(d, hour)]
            served += mw
            cost += lmp[traj.bus_ids.index(d.bus)] * mw
    traj.hours.append(hour)
    traj.lmp.append(lmp)
    traj.flex.append(list(flex))
    traj.soc.append(list(soc))
    traj.imports.append(imports)
    traj.dist_gen.append(dist)
    traj.load.append(served)
    traj.step_cost.append(cost)


def run_receding(scenario, horizon: int, storage=None, network=None,
                 epsilon=EPSILON) -> Trajectory:
    """Simulate the day under receding-horizon control with lookahead ``horizon``.

    ``storage`` defaults to the scenario's units; pass specs or states to override.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    network = scenario.network if network is None else network
    states = _initial_states(scenario, storage)
    traj = Trajectory(horizon, network.bus_ids, network.price_constrained,
                      [s.spec.host_bus for s in states], scenario.n_hours)
    for hour in range(1, scenario.n_hours + 1):
        try:
            p = plan(scenario, states, hour, horizon, network, epsilon)
        except lp_core.Infeasible as exc:
            raise InfeasibleStep(hour, traj) from exc
        committed = p.flex[0]
        states = [step_soc(s, float(f)) for s, f in zip(states, committed)]
        _record(traj, scenario, network, p.lp, p.solution, hour, committed,
                [s.energy for s in states])
    return traj


def run_baseline(scenario, network=None) -> Trajectory:
    """The day without storage or price caps: one plain DC-OPF per hour."""
    network = scenario.network if network is None else network
    traj = Trajectory(None, network.bus_ids, network.price_constrained, [], scenario.n_hours)
    for hour in range(1, scenario.n_hours + 1):
        lp = build_opf_single(network, scenario.inputs(hour), hour)
        try:
            sol = lp_core.solve(lp)
        except lp_core.Infeasible as exc:
            raise InfeasibleStep(hour, traj) from exc
        _record(traj, scenario, network, lp, sol, hour, [], [])
    return traj


def cost_per_mwh(traj: Trajectory) -> float:
    """Energy-weighted price paid by the price-constrained loads over the day (€/MWh)."""
    if not traj.complete:
        raise IncompleteTrajectory(f"{len(traj.hours)} of {traj.n_hours} hours simulated")
    energy = math.fsum(traj.load)
    if energy <= 0:
        return 0.0
    return math.fsum(traj.step_cost) / energy


def gain_percent(gain, reference_saving):
    """Forecast gain as a percentage of the no-forecast saving."""
    if reference_saving == 0:
        return math.nan
    return 100.0 * gain / reference_saving


@dataclass
class SavingsReport:
    """Costs in €/MWh of energy served at the price-constrained buses.

    ``saving_vs_baseline[H]`` is baseline cost minus cost under horizon ``H``;
    ``forecast_gain[H]`` is the extra saving over the no-forecast run (``H=1``)
    and ``forecast_gain_pct[H]`` expresses it relative to the ``H=1`` saving.
    """

    baseline_cost_per_mwh: float
    cost_per_mwh: dict
    saving_vs_baseline: dict
    forecast_gain: dict
    forecast_gain_pct: dict
    label: str = "calibrated reconstruction"

    def as_dict(self):
        """JSON-ready form; undefined percentages become ``None``."""
        def num(x):
            return None if x is None or math.isnan(x) else x

        return {
            "label": self.label,
            "baseline_cost_per_mwh": self.baseline_cost_per_mwh,
            "horizons": {
                str(h): {
                    "cost_per_mwh": self.cost_per_mwh[h],
                    "saving_vs_baseline": self.saving_vs_baseline[h],
                    "forecast_gain": num(self.forecast_gain.get(h)),
                    "forecast_gain_pct": num(self.forecast_gain_pct.get(h)),
                }
                for h in self.cost_per_mwh
            },
        }


def savings(trajectories: Mapping, baseline: Trajectory) -> SavingsReport:
    base = cost_per_mwh(baseline)
    cost = {h: cost_per_mwh(t) for h, t in trajectories.items()}
    saving = {h: base - c for h, c in cost.items()}
    gain, pct = {}, {}
    if 1 in cost:
        for h, c in cost.items():
            gain[h] = cost[1] - c
            pct[h] = gain_percent(gain[h], saving[1])
    return SavingsReport(base, cost, saving, gain, pct)
