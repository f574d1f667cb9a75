"""chainalloc: energy-aware allocation of chained application functions.

A pool of battery-powered devices replicates application functions (sensing,
processing, communication). This package assigns every function request to a
hosting device so that the minimum Tier-1 device lifetime is maximized while
chain ordering is preserved, and simulates the resulting battery drain.
"""

from .errors import (
    BrokenChain,
    ChainAllocError,
    Infeasible,
    InvalidAssignment,
    LPInfeasible,
    LPInternalError,
    MinLifetimeViolated,
    ParseError,
    PolicyFailure,
    RoundingInfeasible,
    TooLarge,
    ValidationError,
)
from .exact import (
    SearchStats,
    SolveResult,
    branch_and_bound_solve,
    brute_force_solve,
    combination_count,
    optimal_solve,
)
from .faa import FaaState, OrchestrationLogEntry, faa_allocate, orchestrate_log, select_candidate
from .model import (
    ChainSpec,
    CommCostModel,
    CostTable,
    DeviceSpec,
    FunctionInstance,
    RadioProfile,
    RequestId,
    Scenario,
    Tier,
    build_cost_table,
    energy_budget,
    load_scenario,
    save_scenario,
)
from .objective import (
    Assignment,
    ConstraintReport,
    LifetimeReport,
    added_cost,
    check_constraints,
    system_lifetime,
)
from .problem import Problem
from .relax import RelaxReport, bounds_and_af, build_lp, relax_solve, round_to_integral, solve_lp
from .sim import (
    EnsembleConfig,
    EpisodeTrace,
    Policy,
    SweepSpec,
    generate_ensemble,
    run_ensemble_sweep,
    run_episode,
    run_usecase_sweep,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
