"""Linear programs with named rows and a dense bounded-variable revised simplex.

The solver returns exact basis duals for every constraint row, which is what the
price-hedging formulations rely on: a nodal price is read off as the dual of the
nodal balance row.

Dual sign convention: ``duals[row]`` is the shadow price of the row's right-hand
side, i.e. the change in the (user-sense) objective per unit increase of ``rhs``.
For a maximization this makes the dual of a ``<=`` row non-negative and the dual
of a ``>=`` row non-positive; equality rows are unrestricted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = [
    "LinearProgram",
    "LpSolution",
    "LpError",
    "Infeasible",
    "Unbounded",
    "MalformedProgram",
    "NotOptimal",
    "solve",
    "dual_objective",
    "reduced_costs",
]

PIVOT_TOL = 1e-9
OPT_TOL = 1e-9
FEAS_TOL = 1e-8
REFACTOR_EVERY = 50

_RELATIONS = {"<=": "<=", "=": "==", "==": "==", ">=": ">="}


class LpError(Exception):
    """Base class for solver failures."""


class MalformedProgram(LpError, ValueError):
    pass


class Infeasible(LpError):
    def __init__(self, message="program is infeasible", solution=None):
        super().__init__(message)
        self.solution = solution


class Unbounded(LpError):
    def __init__(self, message="objective is unbounded", solution=None):
        super().__init__(message)
        self.solution = solution


class NotOptimal(LpError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    lower: float = 0.0
    upper: float = math.inf
    cost: float = 0.0


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: Mapping[str, float]
    relation: str
    rhs: float


@dataclass
class LinearProgram:
    """An LP ``sense c.x`` subject to named rows and variable bounds.

    Built incrementally with :meth:`add_variable` / :meth:`add_constraint`;
    treat it as read-only once handed to :func:`solve`.
    """

    sense: str = "maximize"
    variables: dict[str, Variable] = field(default_factory=dict)
    constraints: dict[str, Constraint] = field(default_factory=dict)

    def __post_init__(self):
        if self.sense not in ("maximize", "minimize"):
            raise MalformedProgram(f"unknown objective sense {self.sense!r}")

    def add_variable(self, name, lower=0.0, upper=math.inf, cost=0.0) -> str:
        if name in self.variables:
            raise MalformedProgram(f"duplicate variable {name!r}")
        self.variables[name] = Variable(name, float(lower), float(upper), float(cost))
        return name

    def add_constraint(self, name, coeffs, relation, rhs=0.0) -> str:
        if name in self.constraints:
            raise MalformedProgram(f"duplicate constraint {name!r}")
        if relation not in _RELATIONS:
            raise MalformedProgram(f"unknown relation {relation!r} in row {name!r}")
        self.constraints[name] = Constraint(
            name, dict(coeffs), _RELATIONS[relation], float(rhs)
        )
        return name

    def set_cost(self, name, cost):
        var = self.variables[name]
        self.variables[name] = Variable(var.name, var.lower, var.upper, float(cost))

    def check(self):
        """Raise :class:`MalformedProgram` if any structural invariant fails."""
        for v in self.variables.values():
            if math.isnan(v.lower) or math.isnan(v.upper) or not math.isfinite(v.cost):
                raise MalformedProgram(f"variable {v.name!r} has non-numeric data")
            if v.lower > v.upper:
                raise MalformedProgram(
                    f"variable {v.name!r}: lower {v.lower} > upper {v.upper}"
                )
            if v.lower == math.inf or v.upper == -math.inf:
                raise MalformedProgram(f"variable {v.name!r} has an empty domain")
        for c in self.constraints.values():
            if not math.isfinite(c.rhs):
                raise MalformedProgram(f"row {c.name!r} has non-finite rhs")
            for var, a in c.coeffs.items():
                if var not in self.variables:
                    raise MalformedProgram(
                        f"row {c.name!r} references undeclared variable {var!r}"
                    )
                if not math.isfinite(a):
                    raise MalformedProgram(f"row {c.name!r} has non-finite coefficient")

    def to_arrays(self):
        """Dense ``(c, A, b, lower, upper, relations)`` in declaration order."""
        names = list(self.variables)
        index = {n: j for j, n in enumerate(names)}
        rows = list(self.constraints.values())
        A = np.zeros((len(rows), len(names)))
        for i, row in enumerate(rows):
            for var, a in row.coeffs.items():
                A[i, index[var]] += a
        b = np.array([r.rhs for r in rows], dtype=float)
        c = np.array([v.cost for v in self.variables.values()], dtype=float)
        lo = np.array([v.lower for v in self.variables.values()], dtype=float)
        hi = np.array([v.upper for v in self.variables.values()], dtype=float)
        return c, A, b, lo, hi, [r.relation for r in rows]


@dataclass
class LpSolution:
    status: str
    primal: dict[str, float] = field(default_factory=dict)
    duals: dict[str, float] = field(default_factory=dict)
    objective: float = math.nan
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def __getitem__(self, name):
        return self.primal[name]


class _Simplex:
    """Minimize ``c.x`` s.t. ``A x = b``, ``lo <= x <= hi`` (dense, Bland's rule)."""

    def __init__(self, A, b, lo, hi):
        self.A = A
        self.b = b
        self.lo = lo
        self.hi = hi
        self.m, self.n = A.shape
        self.iterations = 0

    def start(self, basis, x):
        self.basis = np.array(basis, dtype=int)
        self.x = x.astype(float)
        self.is_basic = np.zeros(self.n, dtype=bool)
        self.is_basic[self.basis] = True
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        self.Binv = np.linalg.inv(B)
        nonbasic = ~self.is_basic
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.Binv @ rhs
        self.since_refactor = 0

    def duals(self, c):
        return c[self.basis] @ self.Binv

    def run(self, c, max_iter):
        lo, hi, x = self.lo, self.hi, self.x
        movable = hi > lo
        while True:
            if self.iterations >= max_iter:
                raise LpError(f"iteration limit {max_iter} reached")
            y = self.duals(c)
            d = c - y @ self.A
            at_lo = x <= lo + PIVOT_TOL
            at_hi = x >= hi - PIVOT_TOL
            improving = (~self.is_basic) & movable & (
                ((d < -OPT_TOL) & ~at_hi) | ((d > OPT_TOL) & ~at_lo)
            )
            candidates = np.flatnonzero(improving)
            if candidates.size == 0:
                return "optimal"
            j = candidates[0]  # Bland: lowest index
            direction = 1.0 if d[j] < 0 else -1.0
            alpha = self.Binv @ self.A[:, j]
            rate = -direction * alpha  # d x_B / d t

            step = hi[j] - lo[j]  # bound flip
            leave = -1
            xb = x[self.basis]
            lb = lo[self.basis]
            ub = hi[self.basis]
            ratios = np.full(self.m, math.inf)
            dec = rate < -PIVOT_TOL
            inc = rate > PIVOT_TOL
            ratios[dec] = (xb[dec] - lb[dec]) / -rate[dec]
            ratios[inc] = (ub[inc] - xb[inc]) / rate[inc]
            ratios = np.maximum(ratios, 0.0)
            best = ratios.min() if self.m else math.inf
            if best < step:
                ties = np.flatnonzero(ratios <= best + PIVOT_TOL)
                leave = ties[np.argmin(self.basis[ties])]
                step = ratios[leave]
            if not math.isfinite(step):
                return "unbounded"

            x[j] += direction * step
            x[self.basis] = xb + rate * step
            self.iterations += 1
            if leave < 0:
                # snap the flipped variable onto its bound
                x[j] = hi[j] if direction > 0 else lo[j]
                continue
            out = self.basis[leave]
            x[out] = lb[leave] if rate[leave] < 0 else ub[leave]
            self.pivot(leave, j, alpha)

    def pivot(self, r, j, alpha):
        out = self.basis[r]
        self.basis[r] = j
        self.is_basic[out] = False
        self.is_basic[j] = True
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self.refactor()
            return
        piv = alpha[r]
        row = self.Binv[r] / piv
        self.Binv -= np.outer(alpha, row)
        self.Binv[r] = row


def _start_value(lo, hi):
    if math.isfinite(lo):
        return lo
    if math.isfinite(hi):
        return hi
    return 0.0


def solve(lp: LinearProgram, raise_on_failure=True, max_iter=50_000) -> LpSolution:
    """Solve ``lp`` to optimality.

    Returns an :class:`LpSolution` with primal values, row duals (shadow prices,
    see module docstring) and the objective. Infeasible or unbounded programs
    raise :class:`Infeasible` / :class:`Unbounded` unless ``raise_on_failure`` is
    false, in which case the status is reported on the returned solution.
    """
    lp.check()
    c_user, A, b, lo, hi, relations = lp.to_arrays()
    m, n = A.shape
    sign = -1.0 if lp.sense == "maximize" else 1.0
    c = sign * c_user

    # logical columns: A x + s = b
    s_lo = np.array([0.0 if r in ("<=", "==") else -math.inf for r in relations])
    s_hi = np.array([0.0 if r in (">=", "==") else math.inf for r in relations])
    x0 = np.array([_start_value(l, h) for l, h in zip(lo, hi)])
    residual = b - A @ x0 if n else b.copy()
    art_sign = np.where(residual >= 0, 1.0, -1.0)

    full_A = np.hstack([A, np.eye(m), np.diag(art_sign)])
    full_lo = np.concatenate([lo, s_lo, np.zeros(m)])
    full_hi = np.concatenate([hi, s_hi, np.full(m, math.inf)])
    x = np.concatenate([x0, np.zeros(m), np.abs(residual)])

    sx = _Simplex(full_A, b, full_lo, full_hi)
    sx.start(np.arange(n + m, n + 2 * m), x)

    phase1 = np.concatenate([np.zeros(n + m), np.ones(m)])
    status = sx.run(phase1, max_iter)
    infeasibility = float(sx.x[n + m:].sum())
    if status != "optimal" or infeasibility > FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
        sol = LpSolution("infeasible", iterations=sx.iterations)
        if raise_on_failure:
            raise Infeasible(solution=sol)
        return sol

    # artificials are pinned at zero for phase 2
    sx.hi[n + m:] = 0.0
    sx.x[n + m:] = 0.0
    sx.refactor()
    phase2 = np.concatenate([c, np.zeros(2 * m)])
    status = sx.run(phase2, max_iter)
    if status == "unbounded":
        sol = LpSolution("unbounded", iterations=sx.iterations)
        if raise_on_failure:
            raise Unbounded(solution=sol)
        return sol

    sx.refactor()
    xs = sx.x[:n].copy()
    xs = np.clip(xs, lo, hi)
    y = sx.duals(phase2)
    names = list(lp.variables)
    return LpSolution(
        status="optimal",
        primal=dict(zip(names, xs.tolist())),
        duals=dict(zip(lp.constraints, (sign * y).tolist())),
        objective=float(c_user @ xs),
        iterations=sx.iterations,
    )


def reduced_costs(lp: LinearProgram, sol: LpSolution) -> dict[str, float]:
    """User-sense reduced costs ``c_j - sum_i dual_i A_ij`` implied by ``sol.duals``."""
    d = {name: v.cost for name, v in lp.variables.items()}
    for row in lp.constraints.values():
        y = sol.duals[row.name]
        for var, a in row.coeffs.items():
            d[var] -= y * a
    return d


def dual_objective(lp: LinearProgram, sol: LpSolution, tol=1e-9) -> float:
    """Objective of the dual program evaluated at ``sol.duals``.

    Sum of ``dual * rhs`` over rows plus the bound-multiplier terms: a reduced cost
    pushing a variable against a bound contributes ``reduced_cost * bound``.
    """
    if not sol.optimal:
        raise NotOptimal(f"solution status is {sol.status!r}")
    total = sum(sol.duals[r.name] * r.rhs for r in lp.constraints.values())
    maximize = lp.sense == "maximize"
    for name, dj in reduced_costs(lp, sol).items():
        if abs(dj) <= tol:
            continue
        v = lp.variables[name]
        wants_up = (dj > 0) == maximize
        bound = v.upper if wants_up else v.lower
        if not math.isfinite(bound):
            raise NotOptimal(f"reduced cost of {name!r} is not dual feasible")
        total += dj * bound
    return float(total)
