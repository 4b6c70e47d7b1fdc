"""Price hedging with storage-backed demand flexibility on a DC-OPF network."""
from .grid import Bus, Line, Network, dc_flow, triangle, validate
from .lp_core import LinearProgram, LpSolution, dual_objective, solve
from .market import (
    DispatchInputs,
    Generator,
    HedgeResult,
    Load,
    build_economic_dispatch,
    build_hedged_dispatch,
    build_hedged_opf_horizon,
    build_hedged_opf_single,
    build_opf_single,
    compute_flex_required,
    extract_lmp,
)
from .mpc import Trajectory, plan, run_baseline, run_receding, savings
from .scenario_io import Scenario, load_scenario, save_scenario, synthesize_apx_like
from .storage import StorageSpec, StorageState, feasible_flex_bounds, step_soc

__version__ = "0.1.0"
