"""Downlink power control for cell-free massive MIMO by accelerated projected gradient."""

from .feasible_set import is_feasible, project
from .model import (
    Coefficients,
    InvalidScenarioError,
    build_coefficients,
    sinr,
    spectral_efficiency,
    total_se,
)
from .objectives import Kind, UtilityKind, evaluate, gradient, se_partials
from .scenario import (
    PathLossParams,
    RadioParams,
    Scenario,
    generate_drop,
    load_scenario,
    save_scenario,
)
from .solver import (
    SolverOptions,
    SolverTrace,
    Variant,
    epa_allocation,
    select_aps,
    solve,
    solve_apg,
    solve_apg_ls,
)

__version__ = "0.1.0"
