"""Energy storage state and state-of-charge dynamics.

One step is one hour, so a flexibility of ``f`` MW moves ``f`` MWh. Positive
flexibility discharges the unit, negative charges it. Charge and discharge are
lossless; standing losses are a fixed ``loss`` MWh per step.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Hashable

__all__ = [
    "StorageSpec",
    "StorageState",
    "SocViolation",
    "Stranded",
    "step_soc",
    "feasible_flex_bounds",
]

SOC_TOL = 1e-9


class SocViolation(ValueError):
    pass


class Stranded(ValueError):
    pass


@dataclass(frozen=True)
class StorageSpec:
    host_bus: Hashable
    capacity: float
    power_bound: float
    loss: float = 0.0
    initial_soc: float = 1.0

    def __post_init__(self):
        if self.capacity < 0 or self.power_bound < 0 or self.loss < 0:
            raise ValueError(f"storage at bus {self.host_bus}: negative rating")
        if not 0.0 <= self.initial_soc <= 1.0:
            raise ValueError(f"initial_soc must lie in [0, 1], got {self.initial_soc}")

    def initial_state(self) -> "StorageState":
        return StorageState(self, self.initial_soc * self.capacity)


@dataclass(frozen=True)
class StorageState:
    spec: StorageSpec
    energy: float

    def __post_init__(self):
        if not -SOC_TOL <= self.energy <= self.spec.capacity + SOC_TOL:
            raise SocViolation(
                f"energy {self.energy} outside [0, {self.spec.capacity}]"
            )

    @property
    def soc(self):
        cap = self.spec.capacity
        return self.energy / cap if cap > 0 else 0.0


def feasible_flex_bounds(state: StorageState) -> tuple[float, float]:
    """``(min, max)`` flexibility admissible in one step from ``state``."""
    spec = state.spec
    after_loss = state.energy - spec.loss
    hi = min(spec.power_bound, after_loss)
    lo = max(-spec.power_bound, after_loss - spec.capacity)
    if lo > hi + SOC_TOL:
        raise Stranded(
            f"standing loss {spec.loss} cannot be covered from energy {state.energy}"
        )
    return lo, max(lo, hi)


def step_soc(state: StorageState, flex: float) -> StorageState:
    """Advance one step: ``energy - loss - flex``."""
    if abs(flex) > state.spec.power_bound + SOC_TOL:
        raise SocViolation(f"flex {flex} exceeds power bound {state.spec.power_bound}")
    energy = state.energy - state.spec.loss - flex
    if energy < -SOC_TOL or energy > state.spec.capacity + SOC_TOL:
        raise SocViolation(
            f"flex {flex} from energy {state.energy} gives {energy}, "
            f"outside [0, {state.spec.capacity}]"
        )
    return replace(state, energy=energy)
