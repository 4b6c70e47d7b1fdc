"""Network topology and DC power-flow relations.

Angles are in radians, reactances per unit, powers in MW on ``base_mva``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable

__all__ = ["Bus", "Line", "Network", "NetworkIssue", "NetworkError", "dc_flow", "validate"]

BUS_KINDS = ("slack", "generator", "load", "mixed")


@dataclass(frozen=True)
class Bus:
    id: Hashable
    kind: str = "load"
    price_constrained: bool = False


@dataclass(frozen=True)
class Line:
    from_bus: Hashable
    to_bus: Hashable
    reactance: float
    flow_limit: float = math.inf

    @property
    def key(self):
        return frozenset((self.from_bus, self.to_bus))


@dataclass(frozen=True)
class NetworkIssue:
    code: str
    detail: str = ""

    def __str__(self):
        return f"{self.code}: {self.detail}" if self.detail else self.code


class NetworkError(ValueError):
    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(map(str, self.issues)))


@dataclass(frozen=True)
class Network:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...] = ()
    base_mva: float = 1.0
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "lines", tuple(self.lines))
        object.__setattr__(self, "_index", {b.id: b for b in self.buses})

    @property
    def bus_ids(self):
        return [b.id for b in self.buses]

    def bus(self, bus_id) -> Bus:
        return self._index[bus_id]

    def __contains__(self, bus_id):
        return bus_id in self._index

    @property
    def slack(self):
        slacks = [b.id for b in self.buses if b.kind == "slack"]
        if len(slacks) != 1:
            raise NetworkError(validate(self))
        return slacks[0]

    @property
    def price_constrained(self):
        return [b.id for b in self.buses if b.price_constrained]

    def incident(self, bus_id):
        """Lines touching ``bus_id`` as ``(line, sign)``; sign +1 when the bus is the from end."""
        out = []
        for line in self.lines:
            if line.from_bus == bus_id:
                out.append((line, 1.0))
            elif line.to_bus == bus_id:
                out.append((line, -1.0))
        return out

    def is_connected(self):
        if not self.buses:
            return False
        adj = {b: set() for b in self._index}
        for line in self.lines:
            if line.from_bus in adj and line.to_bus in adj:
                adj[line.from_bus].add(line.to_bus)
                adj[line.to_bus].add(line.from_bus)
        start = self.buses[0].id
        seen = {start}
        stack = [start]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen) == len(adj)


def dc_flow(theta_from, theta_to, line: Line, base_mva=1.0):
    """Flow on ``line`` in MW, positive in the from -> to direction."""
    return base_mva * (theta_from - theta_to) / line.reactance


def validate(network: Network) -> list[NetworkIssue]:
    """All invariant violations of ``network``; an empty list means it is usable."""
    issues = []
    ids = [b.id for b in network.buses]
    if len(set(ids)) != len(ids):
        issues.append(NetworkIssue("DuplicateBus"))
    for b in network.buses:
        if b.kind not in BUS_KINDS:
            issues.append(NetworkIssue("BadBusKind", f"bus {b.id}: {b.kind!r}"))
    n_slack = sum(b.kind == "slack" for b in network.buses)
    if n_slack == 0:
        issues.append(NetworkIssue("NoSlack"))
    elif n_slack > 1:
        issues.append(NetworkIssue("MultipleSlack", f"{n_slack} slack buses"))
    if not network.base_mva > 0:
        issues.append(NetworkIssue("BadBase", f"base_mva={network.base_mva}"))

    seen = set()
    for line in network.lines:
        label = f"{line.from_bus}-{line.to_bus}"
        if line.from_bus not in network or line.to_bus not in network:
            issues.append(NetworkIssue("UnknownBus", label))
        if line.from_bus == line.to_bus:
            issues.append(NetworkIssue("SelfLoop", label))
        if not (line.reactance > 0 and math.isfinite(line.reactance)):
            issues.append(NetworkIssue("BadReactance", f"{label}: X={line.reactance}"))
        if not line.flow_limit >= 0:
            issues.append(NetworkIssue("BadFlowLimit", f"{label}: {line.flow_limit}"))
        if line.key in seen:
            issues.append(NetworkIssue("DuplicateLine", label))
        seen.add(line.key)

    if not network.is_connected():
        issues.append(NetworkIssue("Disconnected"))
    return issues


def check(network: Network) -> Network:
    issues = validate(network)
    if issues:
        raise NetworkError(issues)
    return network


def triangle(reactance=0.1, flow_limit=math.inf, base_mva=1.0) -> Network:
    """The three-bus test grid: slack/transmission bus 1, DER bus 2, price-constrained bus 3."""
    buses = (
        Bus("1", "slack"),
        Bus("2", "generator"),
        Bus("3", "load", price_constrained=True),
    )
    lines = tuple(
        Line(a, b, reactance, flow_limit) for a, b in (("1", "2"), ("1", "3"), ("2", "3"))
    )
    return Network(buses, lines, base_mva)
