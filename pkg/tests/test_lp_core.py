import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from flexhedge.lp_core import (
    Infeasible,
    LinearProgram,
    MalformedProgram,
    NotOptimal,
    Unbounded,
    dual_objective,
    reduced_costs,
    solve,
)
from oracles import kkt_residuals, random_lp, vertex_enumeration


def dispatch_lp(b=80.0, a=50.0, load_hi=10.0, gen_hi=math.inf):
    lp = LinearProgram("maximize")
    lp.add_variable("PL", 0, load_hi, b)
    lp.add_variable("PG", 0, gen_hi, -a)
    lp.add_constraint("balance", {"PG": 1, "PL": -1}, "==", 0)
    return lp


def test_bound_only_optimum():
    lp = LinearProgram("maximize")
    lp.add_variable("x", 0, 1, 1)
    sol = solve(lp)
    assert sol.primal["x"] == pytest.approx(1)
    assert sol.objective == pytest.approx(1)


def test_two_variable_dispatch_matches_vertices():
    lp = dispatch_lp()
    sol = solve(lp)
    assert sol.primal["PL"] == pytest.approx(10)
    assert sol.primal["PG"] == pytest.approx(10)
    assert sol.objective == pytest.approx(300)
    assert sol.objective == pytest.approx(vertex_enumeration(lp))
    # generation is unconstrained above, so it is marginal: price = a
    assert -sol.duals["balance"] == pytest.approx(50)


def test_dual_objective_of_dispatch():
    lp = dispatch_lp()
    sol = solve(lp)
    # balance contributes 0 (rhs 0); the load's upper bound contributes (80 - 50) * 10
    assert dual_objective(lp, sol) == pytest.approx(300)


def test_degenerate_tie_objective_only():
    lp = LinearProgram("maximize")
    lp.add_variable("x")
    lp.add_variable("y")
    for v in ("x", "y"):
        lp.set_cost(v, 1)
    lp.add_constraint("c", {"x": 1, "y": 1}, "<=", 1)
    sol = solve(lp)
    assert sol.objective == pytest.approx(1)
    assert sol.primal["x"] + sol.primal["y"] == pytest.approx(1)


def test_zero_objective():
    lp = LinearProgram("maximize")
    lp.add_variable("x", -math.inf, math.inf, 0)
    lp.add_constraint("pin", {"x": 1}, "==", 0)
    sol = solve(lp)
    assert sol.objective == 0
    assert dual_objective(lp, sol) == 0


def test_minimize_sense():
    lp = LinearProgram("minimize")
    lp.add_variable("x", 0, math.inf, 2)
    lp.add_variable("y", 0, math.inf, 3)
    lp.add_constraint("demand", {"x": 1, "y": 1}, ">=", 4)
    lp.add_constraint("xcap", {"x": 1}, "<=", 3)
    sol = solve(lp)
    assert sol.objective == pytest.approx(3 * 2 + 1 * 3)
    # one more unit of demand is served by y
    assert sol.duals["demand"] == pytest.approx(3)
    assert sol.duals["xcap"] == pytest.approx(-1)


def test_infeasible():
    lp = LinearProgram("maximize")
    lp.add_variable("x", 0, 1, 1)
    lp.add_constraint("c", {"x": 1}, ">=", 2)
    with pytest.raises(Infeasible):
        solve(lp)
    sol = solve(lp, raise_on_failure=False)
    assert sol.status == "infeasible"
    with pytest.raises(NotOptimal):
        dual_objective(lp, sol)


def test_unbounded():
    lp = LinearProgram("maximize")
    lp.add_variable("x", 0, math.inf, 1)
    lp.add_variable("y", 0, math.inf, 0)
    lp.add_constraint("c", {"x": 1, "y": -1}, "<=", 1)
    with pytest.raises(Unbounded):
        solve(lp)
    assert solve(lp, raise_on_failure=False).status == "unbounded"


@pytest.mark.parametrize("build", [
    lambda lp: lp.add_variable("x", 2, 1),
    lambda lp: lp.add_constraint("c", {"ghost": 1}, "<=", 1),
    lambda lp: lp.add_constraint("c", {"x": math.nan}, "<=", 1),
    lambda lp: lp.add_constraint("c", {}, "<=", math.inf),
])
def test_malformed(build):
    lp = LinearProgram("maximize")
    build(lp)
    with pytest.raises(MalformedProgram):
        solve(lp)


def test_malformed_at_construction():
    lp = LinearProgram("maximize")
    lp.add_variable("x")
    with pytest.raises(MalformedProgram):
        lp.add_variable("x")
    with pytest.raises(MalformedProgram):
        lp.add_constraint("c", {"x": 1}, "<", 1)
    with pytest.raises(MalformedProgram):
        LinearProgram("maximise")


def test_determinism(rng):
    lp = random_lp(rng, 6, 6)
    a, b = solve(lp), solve(lp)
    assert a.primal == b.primal
    assert a.duals == b.duals
    assert a.iterations == b.iterations


@pytest.mark.parametrize("seed", range(40))
def test_agrees_with_vertex_enumeration(seed):
    lp = random_lp(np.random.default_rng(seed), max_vars=4, max_rows=4)
    best = vertex_enumeration(lp)
    sol = solve(lp)
    assert best is not None
    assert sol.objective == pytest.approx(best, abs=1e-7)


@pytest.mark.parametrize("seed", range(40))
def test_agrees_with_scipy(seed):
    lp = random_lp(np.random.default_rng(1000 + seed), max_vars=8, max_rows=8)
    c, A, b, lo, hi, rel = lp.to_arrays()
    sgn = -1.0 if lp.sense == "maximize" else 1.0
    ub = [i for i, r in enumerate(rel) if r == "<="]
    lb = [i for i, r in enumerate(rel) if r == ">="]
    eq = [i for i, r in enumerate(rel) if r == "=="]
    A_ub = np.vstack([A[ub], -A[lb]]) if ub or lb else None
    b_ub = np.concatenate([b[ub], -b[lb]]) if ub or lb else None
    ref = linprog(sgn * c, A_ub=A_ub, b_ub=b_ub,
                  A_eq=A[eq] if eq else None, b_eq=b[eq] if eq else None,
                  bounds=list(zip(lo, hi)), method="highs")
    assert ref.status == 0
    assert solve(lp).objective == pytest.approx(sgn * ref.fun, abs=1e-7)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_strong_duality_and_kkt(seed):
    lp = random_lp(np.random.default_rng(seed))
    sol = solve(lp)
    assert abs(sol.objective - dual_objective(lp, sol)) <= 1e-6
    primal, cs, sign = kkt_residuals(lp, sol)
    assert primal <= 1e-8
    assert cs <= 1e-8
    assert sign <= 1e-8


def test_reduced_costs_vanish_on_interior_variables():
    lp = dispatch_lp(gen_hi=20)
    sol = solve(lp)
    d = reduced_costs(lp, sol)
    assert d["PG"] == pytest.approx(0)  # strictly between its bounds
    assert d["PL"] == pytest.approx(30)  # pushing against its upper bound


def test_larger_program_refactorizes():
    # long chain of equalities forces well over REFACTOR_EVERY pivots
    n = 120
    lp = LinearProgram("minimize")
    for i in range(n):
        lp.add_variable(f"x{i}", 0, 10, 1 + (i % 7))
    for i in range(n - 1):
        lp.add_constraint(f"r{i}", {f"x{i}": 1, f"x{i + 1}": 1}, ">=", 3 + (i % 5))
    sol = solve(lp)
    assert sol.iterations > 50
    primal, cs, sign = kkt_residuals(lp, sol)
    assert max(primal, cs, sign) <= 1e-8
    assert sol.objective == pytest.approx(dual_objective(lp, sol), abs=1e-6)
