"""Dispatch, hedged dispatch and hedged DC-OPF programs.

Every program is a welfare maximization. Nodal balance rows are written as
``generation - load + flexibility - net outflow = -exogenous injection`` and the
locational marginal price is minus the dual of that row, so that loads pay a
positive price (see :func:`extract_lmp`).

The price cap of a constrained bus enters the primal as a flexibility variable
priced at the cap. Its reduced cost ``lmp - cap`` can never be positive at an
optimum, which is what keeps the nodal price at or below the cap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

from . import lp_core
from .grid import Network, check
from .lp_core import LinearProgram, LpSolution
from .storage import StorageState

__all__ = [
    "Generator",
    "Load",
    "DispatchInputs",
    "HedgeResult",
    "EmptyMarket",
    "MissingPriceCap",
    "MissingStorageHost",
    "NoSuchRow",
    "build_economic_dispatch",
    "build_hedged_dispatch",
    "build_opf_single",
    "build_hedged_opf_single",
    "build_hedged_opf_horizon",
    "extract_lmp",
    "compute_flex_required",
]


class EmptyMarket(ValueError):
    pass


class MissingPriceCap(ValueError):
    pass


class MissingStorageHost(ValueError):
    pass


class NoSuchRow(KeyError):
    pass


@dataclass(frozen=True)
class Generator:
    name: str
    bus: Hashable
    capacity: float
    cost: float


@dataclass(frozen=True)
class Load:
    name: str
    bus: Hashable
    lower: float
    upper: float
    utility: float

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"load {self.name}: lower {self.lower} > upper {self.upper}")


@dataclass(frozen=True)
class DispatchInputs:
    generators: tuple[Generator, ...]
    loads: tuple[Load, ...]
    price_caps: Mapping[Hashable, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        object.__setattr__(self, "loads", tuple(self.loads))
        object.__setattr__(self, "price_caps", dict(self.price_caps))
        for g in self.generators:
            if g.capacity < 0:
                raise ValueError(f"generator {g.name}: negative capacity")
        for bus, cap in self.price_caps.items():
            if not cap > 0:
                raise ValueError(f"price cap at bus {bus} must be positive, got {cap}")


@dataclass
class HedgeResult:
    flex_required: dict
    lmp: dict
    dispatch: dict
    consumption: dict
    objective: float
    solution: LpSolution = field(repr=False, default=None)


def _tag(kind, *parts):
    parts = [str(p) for p in parts if p is not None]
    return f"{kind}[{','.join(parts)}]" if parts else kind


def balance_row(bus=None, step=None):
    return _tag("balance", bus, step)


def gen_var(gen, step=None):
    return _tag("pg", gen.name, step)


def load_var(load, step=None):
    return _tag("pl", load.name, step)


def theta_var(bus, step=None):
    return _tag("theta", bus, step)


def flexreq_var(bus, step=None):
    return _tag("flexreq", bus, step)


def discharge_var(bus, step):
    return _tag("discharge", bus, step)


def charge_var(bus, step):
    return _tag("charge", bus, step)


def soc_var(bus, step):
    return _tag("soc", bus, step)


def _require_market(inputs):
    if not inputs.generators or not inputs.loads:
        raise EmptyMarket("need at least one generator and one load")


def _add_market_columns(lp, inputs, step, bus_of):
    """Generator and load columns; returns ``{row_key: {var: coeff}}`` injections."""
    terms: dict = {}
    for g in inputs.generators:
        name = lp.add_variable(gen_var(g, step), 0.0, g.capacity, -g.cost)
        terms.setdefault(bus_of(g.bus), {})[name] = 1.0
    for d in inputs.loads:
        name = lp.add_variable(load_var(d, step), d.lower, d.upper, d.utility)
        terms.setdefault(bus_of(d.bus), {})[name] = -1.0
    return terms


def _caps_for(inputs, buses):
    missing = [k for k in buses if k not in inputs.price_caps]
    if missing:
        raise MissingPriceCap(f"no price cap for constrained bus(es) {missing}")
    return {k: inputs.price_caps[k] for k in buses}


def build_economic_dispatch(inputs: DispatchInputs) -> LinearProgram:
    """Single-node welfare maximization; the balance row's dual gives the price."""
    _require_market(inputs)
    lp = LinearProgram("maximize")
    terms = _add_market_columns(lp, inputs, None, lambda bus: None)
    lp.add_constraint(balance_row(), terms.get(None, {}), "==", 0.0)
    return lp


def build_hedged_dispatch(inputs: DispatchInputs, constrained=None) -> LinearProgram:
    """Single-node dispatch plus a non-negative flexibility column per capped bus.

    Each flexibility column enters the balance with +1 and the objective with
    minus the bus's price cap.
    """
    _require_market(inputs)
    buses = list(inputs.price_caps) if constrained is None else list(constrained)
    if not buses:
        raise MissingPriceCap("no price-constrained bus given")
    caps = _caps_for(inputs, buses)
    lp = build_economic_dispatch(inputs)
    row = lp.constraints[balance_row()]
    coeffs = dict(row.coeffs)
    for k, cap in caps.items():
        if math.isinf(cap):
            continue
        coeffs[lp.add_variable(flexreq_var(k), 0.0, math.inf, -cap)] = 1.0
    lp.constraints[row.name] = lp_core.Constraint(row.name, coeffs, row.relation, row.rhs)
    return lp


def _add_network_period(lp, network, inputs, step, extra_terms=None, injections=None):
    for item in (*inputs.generators, *inputs.loads):
        if item.bus not in network:
            raise ValueError(f"{item.name} sits at unknown bus {item.bus!r}")
    terms = _add_market_columns(lp, inputs, step, lambda bus: bus)
    for bus, vars_ in (extra_terms or {}).items():
        terms.setdefault(bus, {}).update(vars_)
    base = network.base_mva
    for bus in network.bus_ids:
        lp.add_variable(theta_var(bus, step), -math.inf, math.inf, 0.0)
    for bus in network.bus_ids:
        coeffs = dict(terms.get(bus, {}))
        for line, sign in network.incident(bus):
            other = line.to_bus if sign > 0 else line.from_bus
            k = base / line.reactance
            coeffs[theta_var(bus, step)] = coeffs.get(theta_var(bus, step), 0.0) - k
            coeffs[theta_var(other, step)] = coeffs.get(theta_var(other, step), 0.0) + k
        rhs = -float((injections or {}).get(bus, 0.0))
        lp.add_constraint(balance_row(bus, step), coeffs, "==", rhs)
    lp.add_constraint(_tag("slack_angle", step), {theta_var(network.slack, step): 1.0}, "==", 0.0)
    for line in network.lines:
        if math.isinf(line.flow_limit):
            continue
        k = base / line.reactance
        flow = {theta_var(line.from_bus, step): k, theta_var(line.to_bus, step): -k}
        label = f"{line.from_bus}-{line.to_bus}"
        lp.add_constraint(_tag("flow_max", label, step), flow, "<=", line.flow_limit)
        lp.add_constraint(_tag("flow_min", label, step), flow, ">=", -line.flow_limit)


def build_opf_single(network: Network, inputs: DispatchInputs, t=0, injections=None):
    """Plain single-period DC-OPF, optionally with fixed exogenous injections (MW)."""
    check(network)
    _require_market(inputs)
    lp = LinearProgram("maximize")
    _add_network_period(lp, network, inputs, t, injections=injections)
    return lp


def build_hedged_opf_single(network: Network, inputs: DispatchInputs, t=0) -> LinearProgram:
    """Single-period DC-OPF with unbounded required flexibility at every capped bus."""
    check(network)
    _require_market(inputs)
    caps = _caps_for(inputs, network.price_constrained)
    lp = LinearProgram("maximize")
    extra = {}
    for k, cap in caps.items():
        if math.isinf(cap):
            continue
        extra[k] = {lp.add_variable(flexreq_var(k, t), 0.0, math.inf, -cap): 1.0}
    _add_network_period(lp, network, inputs, t, extra_terms=extra)
    return lp


def build_hedged_opf_horizon(
    network: Network,
    window: Sequence[DispatchInputs],
    storage,
    start=0,
    epsilon=0.0,
) -> LinearProgram:
    """Multi-period hedged DC-OPF with storage-backed flexibility.

    ``window`` holds one :class:`DispatchInputs` per step, labelled
    ``start, start + 1, ...`` in row and variable names. ``storage`` is a
    :class:`StorageState` or a sequence of them (one per host bus). Flexibility at
    a host is ``discharge - charge``, each leg bounded by the power rating, and is
    priced at the bus's cap. ``epsilon`` adds a small cost on ``|flex|`` so that
    ties between idle and cycling schedules resolve to idle.
    """
    check(network)
    if not window:
        raise ValueError("horizon window must contain at least one step")
    states = [storage] if isinstance(storage, StorageState) else list(storage)
    constrained = set(network.price_constrained)
    hosts = [s.spec.host_bus for s in states]
    for host in hosts:
        if host not in constrained:
            raise MissingStorageHost(f"storage host {host!r} is not a price-constrained bus")
    if len(set(hosts)) != len(hosts):
        raise ValueError("at most one storage unit per bus")

    lp = LinearProgram("maximize")
    for h, inputs in enumerate(window):
        step = start + h
        _require_market(inputs)
        caps = _caps_for(inputs, hosts)
        extra = {}
        for state in states:
            spec = state.spec
            k = spec.host_bus
            leg = min(spec.power_bound, spec.capacity)
            dis = lp.add_variable(discharge_var(k, step), 0.0, leg, -caps[k] - epsilon)
            ch = lp.add_variable(charge_var(k, step), 0.0, leg, caps[k] - epsilon)
            soc = lp.add_variable(soc_var(k, step), 0.0, spec.capacity, 0.0)
            extra[k] = {dis: 1.0, ch: -1.0}
            coeffs = {soc: 1.0, dis: 1.0, ch: -1.0}
            rhs = -spec.loss
            if h == 0:
                rhs += state.energy
            else:
                coeffs[soc_var(k, step - 1)] = -1.0
            lp.add_constraint(_tag("soc_balance", k, step), coeffs, "==", rhs)
        _add_network_period(lp, network, inputs, step, extra_terms=extra)
    return lp


def extract_lmp(lp: LinearProgram, sol: LpSolution, bus=None, step=None) -> float:
    """Nodal price (positive when loads pay) from the balance row of ``bus`` at ``step``."""
    if not sol.optimal:
        raise lp_core.NotOptimal(f"solution status is {sol.status!r}")
    row = balance_row(bus, step)
    if row not in lp.constraints or row not in sol.duals:
        raise NoSuchRow(row)
    return -sol.duals[row]


def flex_value(sol: LpSolution, bus, step) -> float:
    return sol.primal[discharge_var(bus, step)] - sol.primal[charge_var(bus, step)]


def compute_flex_required(network: Network, inputs: DispatchInputs, t=0) -> HedgeResult:
    """Flexibility needed at each capped bus to hold its price at or below the cap."""
    lp = build_hedged_opf_single(network, inputs, t)
    sol = lp_core.solve(lp)
    flex = {}
    for k in network.price_constrained:
        name = flexreq_var(k, t)
        flex[k] = sol.primal[name] if name in sol.primal else 0.0
    return HedgeResult(
        flex_required=flex,
        lmp={b: extract_lmp(lp, sol, b, t) for b in network.bus_ids},
        dispatch={g.name: sol.primal[gen_var(g, t)] for g in inputs.generators},
        consumption={d.name: sol.primal[load_var(d, t)] for d in inputs.loads},
        objective=sol.objective,
        solution=sol,
    )
