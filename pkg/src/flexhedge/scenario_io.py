"""Scenario definition, file format and the synthetic APX-like day.

A scenario on disk is a directory with two files:

``scenario.json``
    topology, generator placement and ratings, storage units and the price cap.
``series.csv``
    one row per hour with columns ``hour, a_trans, a_dist, b_load, demand_lo,
    demand_hi`` and optionally ``pi_des`` (overrides the scalar cap).

Hours are numbered from 1.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .grid import Bus, Line, Network, validate
from .market import DispatchInputs, Generator, Load
from .storage import StorageSpec

__all__ = [
    "Scenario",
    "ParseError",
    "ValidationError",
    "CalibrationFailed",
    "SERIES_COLUMNS",
    "SCENARIO_DIR_ENV",
    "load_scenario",
    "save_scenario",
    "resolve_scenario",
    "bundled_path",
    "synthesize_apx_like",
]

SERIES_COLUMNS = ("hour", "a_trans", "a_dist", "b_load", "demand_lo", "demand_hi")
SCENARIO_DIR_ENV = "FLEXHEDGE_SCENARIO_DIR"
CONFIG_NAME = "scenario.json"
SERIES_NAME = "series.csv"


class ParseError(ValueError):
    def __init__(self, message, path=None, line=None, column=None):
        where = ":".join(str(p) for p in (path, line, column) if p is not None)
        super().__init__(f"{where}: {message}" if where else message)
        self.path, self.line, self.column = path, line, column


class ValidationError(ValueError):
    def __init__(self, invariant, detail=""):
        super().__init__(f"{invariant}: {detail}" if detail else invariant)
        self.invariant = invariant


class CalibrationFailed(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    network: Network
    a_trans: np.ndarray
    a_dist: np.ndarray
    b_load: np.ndarray
    demand_lo: np.ndarray
    demand_hi: np.ndarray
    pi_des: np.ndarray
    transmission_bus: str
    transmission_capacity: float
    dist_bus: str
    dist_capacity: float
    load_bus: str
    storage: tuple[StorageSpec, ...] = ()
    name: str = "scenario"
    description: str = ""

    def __post_init__(self):
        for key in ("a_trans", "a_dist", "b_load", "demand_lo", "demand_hi"):
            object.__setattr__(self, key, np.asarray(getattr(self, key), dtype=float))
        pi = np.asarray(self.pi_des, dtype=float)
        if pi.ndim == 0:
            pi = np.full(len(self.a_trans), float(pi))
        object.__setattr__(self, "pi_des", pi)
        object.__setattr__(self, "storage", tuple(self.storage))

    @property
    def n_hours(self):
        return len(self.a_trans)

    def inputs(self, hour) -> DispatchInputs:
        """Market data for ``hour`` (1-based)."""
        i = hour - 1
        if not 0 <= i < self.n_hours:
            raise IndexError(f"hour {hour} outside 1..{self.n_hours}")
        gens = (
            Generator("trans", self.transmission_bus, self.transmission_capacity, self.a_trans[i]),
            Generator("dist", self.dist_bus, self.dist_capacity, self.a_dist[i]),
        )
        loads = (Load("prl", self.load_bus, self.demand_lo[i], self.demand_hi[i], self.b_load[i]),)
        caps = {k: float(self.pi_des[i]) for k in self.network.price_constrained}
        return DispatchInputs(gens, loads, caps)

    def with_overrides(self, pi_des=None, capacity=None, initial_soc=None,
                       power_bound=None, loss=None) -> "Scenario":
        changes = {}
        if pi_des is not None:
            changes["pi_des"] = np.full(self.n_hours, float(pi_des))
        spec_changes = {
            k: v for k, v in dict(capacity=capacity, initial_soc=initial_soc,
                                  power_bound=power_bound, loss=loss).items()
            if v is not None
        }
        if spec_changes:
            changes["storage"] = tuple(replace(s, **spec_changes) for s in self.storage)
        return replace(self, **changes) if changes else self

    def check(self, strict=False):
        """Raise :class:`ValidationError` for the first broken invariant.

        ``strict`` also rejects hours where distributed generation is not cheaper
        than transmission imports, or where the cap reaches the load's utility
        (otherwise only warnings).
        """
        issues = validate(self.network)
        if issues:
            raise ValidationError("network", "; ".join(map(str, issues)))
        T = self.n_hours
        for key in ("a_dist", "b_load", "demand_lo", "demand_hi", "pi_des"):
            if len(getattr(self, key)) != T:
                raise ValidationError("series length", f"{key} has {len(getattr(self, key))} values, expected {T}")
        for key in ("a_trans", "a_dist", "b_load", "demand_lo", "demand_hi", "pi_des"):
            if not np.all(np.isfinite(getattr(self, key))):
                raise ValidationError("finite series", key)
        if np.any(self.demand_lo > self.demand_hi):
            raise ValidationError("demand bounds", "demand_lo exceeds demand_hi")
        if np.any(self.demand_lo < 0):
            raise ValidationError("demand bounds", "negative demand")
        if np.any(self.pi_des <= 0):
            raise ValidationError("price cap", "pi_des must be positive")
        bad = np.flatnonzero(self.b_load <= self.pi_des) + 1
        if bad.size:
            # a cap at or above the load's own utility never binds; legal but pointless
            msg = f"b_load <= pi_des at hours {bad.tolist()}"
            if strict:
                raise ValidationError("utility above cap", msg)
            warnings.warn(msg, stacklevel=2)
        bad = np.flatnonzero(self.a_dist >= self.a_trans) + 1
        if bad.size:
            msg = f"a_dist >= a_trans at hours {bad.tolist()}"
            if strict:
                raise ValidationError("merit order", msg)
            warnings.warn(msg, stacklevel=2)
        for bus in (self.transmission_bus, self.dist_bus, self.load_bus):
            if bus not in self.network:
                raise ValidationError("placement", f"unknown bus {bus!r}")
        if self.transmission_bus != self.network.slack:
            raise ValidationError("placement", "transmission must connect at the slack bus")
        if self.transmission_capacity < 0 or self.dist_capacity < 0:
            raise ValidationError("placement", "negative generator capacity")
        constrained = set(self.network.price_constrained)
        hosts = [s.host_bus for s in self.storage]
        for host in hosts:
            if host not in constrained:
                raise ValidationError("storage host", f"bus {host!r} is not price constrained")
        if len(set(hosts)) != len(hosts):
            raise ValidationError("storage host", "more than one unit on a bus")
        return self


def bundled_path() -> Path:
    return Path(str(resources.files("flexhedge") / "data" / "bundled"))


def resolve_scenario(ref) -> Path:
    """Map ``bundled``, a name under ``$FLEXHEDGE_SCENARIO_DIR`` or a path to a scenario path."""
    ref = str(ref)
    path = Path(ref)
    if path.exists():
        return path
    env = os.environ.get(SCENARIO_DIR_ENV)
    if env and (Path(env) / ref).exists():
        return Path(env) / ref
    if ref == "bundled":
        return bundled_path()
    raise FileNotFoundError(f"scenario {ref!r} not found")


def _config_path(path: Path) -> Path:
    return path / CONFIG_NAME if path.is_dir() else path


def _number(value, key):
    if value is None:
        return math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError("config type", f"{key} must be a number, got {value!r}")
    return float(value)


def _parse_series(text, path):
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty series file", path, 1) from None
    missing = [c for c in SERIES_COLUMNS if c not in header]
    if missing:
        raise ParseError(f"missing column(s) {missing}", path, 1)
    cols = {name: [] for name in header}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, lineno)
        for colno, (name, cell) in enumerate(zip(header, row), start=1):
            try:
                cols[name].append(float(cell))
            except ValueError:
                raise ParseError(f"bad number {cell!r} in column {name}", path, lineno, colno) from None
    hours = cols["hour"]
    if hours != [float(h) for h in range(1, len(hours) + 1)]:
        raise ValidationError("hour index", "hours must run 1, 2, ... without gaps")
    return cols


def load_scenario(path, strict=False, n_hours=24) -> Scenario:
    """Read and validate a scenario directory (or its ``scenario.json``)."""
    cfg_path = _config_path(Path(path))
    try:
        text = cfg_path.read_text()
    except FileNotFoundError:
        raise
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, cfg_path, exc.lineno, exc.colno) from None
    try:
        buses = [Bus(str(b["id"]), b.get("kind", "load"), bool(b.get("price_constrained", False)))
                 for b in cfg["buses"]]
        lines = [Line(str(l["from"]), str(l["to"]), _number(l["reactance"], "reactance"),
                      _number(l.get("flow_limit"), "flow_limit"))
                 for l in cfg["lines"]]
        network = Network(buses, lines, _number(cfg.get("base_mva", 1.0), "base_mva"))
        storage = [
            StorageSpec(str(s["host_bus"]), _number(s["capacity"], "capacity"),
                        _number(s["power_bound"], "power_bound"),
                        _number(s.get("loss", 0.0), "loss"),
                        _number(s.get("initial_soc", 1.0), "initial_soc"))
            for s in cfg.get("storage", [])
        ]
        trans, dist = cfg["transmission"], cfg["distributed"]
        series_path = cfg_path.parent / cfg.get("series", SERIES_NAME)
        pi_cfg = cfg.get("pi_des")
    except KeyError as exc:
        raise ParseError(f"missing key {exc.args[0]!r}", cfg_path) from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError("config", str(exc)) from None
    cols = _parse_series(series_path.read_text(), series_path)
    if "pi_des" in cols:
        pi = cols["pi_des"]
    elif pi_cfg is not None:
        pi = _number(pi_cfg, "pi_des")
    else:
        raise ValidationError("price cap", "no pi_des in config or series")
    T = len(cols["hour"])
    if n_hours is not None and T != n_hours:
        raise ValidationError("series length", f"{T} hours, expected {n_hours}")
    scenario = Scenario(
        network=network,
        a_trans=cols["a_trans"], a_dist=cols["a_dist"], b_load=cols["b_load"],
        demand_lo=cols["demand_lo"], demand_hi=cols["demand_hi"], pi_des=pi,
        transmission_bus=str(trans["bus"]),
        transmission_capacity=_number(trans.get("capacity"), "capacity"),
        dist_bus=str(dist["bus"]), dist_capacity=_number(dist.get("capacity"), "capacity"),
        load_bus=str(cfg["load_bus"]), storage=tuple(storage),
        name=cfg.get("name", cfg_path.parent.name), description=cfg.get("description", ""),
    )
    return scenario.check(strict=strict)


def _json_number(x):
    return None if math.isinf(x) else x


def save_scenario(scenario: Scenario, directory) -> Path:
    """Write ``scenario.json`` and ``series.csv`` into ``directory``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    net = scenario.network
    pi = scenario.pi_des
    uniform = bool(np.all(pi == pi[0]))
    cfg = {
        "name": scenario.name,
        "description": scenario.description,
        "base_mva": net.base_mva,
        "buses": [{"id": b.id, "kind": b.kind, "price_constrained": b.price_constrained}
                  for b in net.buses],
        "lines": [{"from": l.from_bus, "to": l.to_bus, "reactance": l.reactance,
                   "flow_limit": _json_number(l.flow_limit)} for l in net.lines],
        "transmission": {"bus": scenario.transmission_bus,
                         "capacity": _json_number(scenario.transmission_capacity)},
        "distributed": {"bus": scenario.dist_bus,
                        "capacity": _json_number(scenario.dist_capacity)},
        "load_bus": scenario.load_bus,
        "pi_des": float(pi[0]) if uniform else None,
        "storage": [{"host_bus": s.host_bus, "capacity": s.capacity, "power_bound": s.power_bound,
                     "loss": s.loss, "initial_soc": s.initial_soc} for s in scenario.storage],
        "series": SERIES_NAME,
    }
    (directory / CONFIG_NAME).write_text(json.dumps(cfg, indent=2) + "\n")
    header = list(SERIES_COLUMNS) + ([] if uniform else ["pi_des"])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for i in range(scenario.n_hours):
        row = [scenario.a_trans[i], scenario.a_dist[i], scenario.b_load[i],
               scenario.demand_lo[i], scenario.demand_hi[i]]
        if not uniform:
            row.append(pi[i])
        writer.writerow([i + 1, *(repr(float(v)) for v in row)])
    (directory / SERIES_NAME).write_text(buf.getvalue())
    return directory


# Hourly shapes of the synthetic day. Prices (€/MWh) follow a day-ahead profile
# with a midday and an evening peak; demand is the price-requesting load (MW).
_PRICE_SHAPE = np.array([
    52, 48, 45, 44, 47, 53, 62, 70, 79, 86, 92, 88,
    80, 71, 64, 60, 68, 84, 95, 82, 72, 61, 55, 50,
], dtype=float)
_DEMAND_SHAPE = np.array([
    4.30, 4.25, 4.20, 4.20, 4.25, 4.35, 4.45, 4.50, 4.45, 4.50, 4.55, 4.50,
    4.45, 4.65, 4.35, 4.30, 4.40, 4.55, 4.60, 4.55, 4.60, 4.45, 4.35, 4.30,
])
DEFAULT_SEED = 20190601
DEFAULT_CAPPED_HOURS = (9, 10, 11, 12, 13, 18, 19, 20)


def synthesize_apx_like(
    seed=DEFAULT_SEED,
    capped_hours=DEFAULT_CAPPED_HOURS,
    pi_des=75.0,
    margin=3.0,
    price_noise=1.0,
    demand_noise=0.005,
    storage=None,
) -> Scenario:
    """Deterministic synthetic day on the three-bus grid.

    Transmission prices are a fixed day-ahead shape plus seeded noise, then pushed
    at least ``margin`` above ``pi_des`` in ``capped_hours`` and at least ``margin``
    below it elsewhere. The result is checked by solving the uncapped DC-OPF for
    every hour: its price at the constrained bus must exceed the cap in exactly
    ``capped_hours``, otherwise :class:`CalibrationFailed` is raised.
    """
    from .grid import triangle
    from .lp_core import solve
    from .market import build_opf_single, extract_lmp

    T = len(_PRICE_SHAPE)
    capped = sorted(set(int(h) for h in capped_hours))
    if any(not 1 <= h <= T for h in capped):
        raise CalibrationFailed(f"capped hours must lie in 1..{T}, got {capped}")
    if not margin > 0:
        raise CalibrationFailed("margin must be positive")
    rng = np.random.default_rng(seed)
    price = _PRICE_SHAPE + rng.normal(0.0, price_noise, T)
    demand = _DEMAND_SHAPE + rng.normal(0.0, demand_noise, T)
    mask = np.zeros(T, dtype=bool)
    mask[[h - 1 for h in capped]] = True
    price = np.where(mask, np.maximum(price, pi_des + margin), np.minimum(price, pi_des - margin))
    price = np.round(price, 2)
    demand = np.round(demand, 3)
    a_dist = np.round(20.0 + 2.0 * np.sin(np.arange(T) * 2 * np.pi / T), 2)
    if np.any(a_dist >= price):
        raise CalibrationFailed("distributed generation is not cheaper than imports in every hour")
    if storage is None:
        storage = (StorageSpec("3", capacity=2.6, power_bound=0.7, loss=0.0, initial_soc=0.75),)
    scenario = Scenario(
        network=triangle(reactance=0.1, flow_limit=10.0),
        a_trans=price,
        a_dist=a_dist,
        b_load=np.full(T, 150.0),
        demand_lo=np.round(0.9 * demand, 4),
        demand_hi=demand,
        pi_des=pi_des,
        transmission_bus="1",
        transmission_capacity=1.2,
        dist_bus="2",
        dist_capacity=4.0,
        load_bus="3",
        storage=tuple(storage),
        name="apx_like",
        description=(
            f"synthetic APX-like day, seed={seed}, capped hours={capped}; "
            "calibrated reconstruction, not market data"
        ),
    )
    scenario.check(strict=True)
    above = []
    for hour in range(1, T + 1):
        lp = build_opf_single(scenario.network, scenario.inputs(hour), hour)
        lmp = extract_lmp(lp, solve(lp), scenario.load_bus, hour)
        if lmp > pi_des:
            above.append(hour)
    if above != capped:
        raise CalibrationFailed(f"uncapped price exceeds the cap in hours {above}, wanted {capped}")
    return scenario
