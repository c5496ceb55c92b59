"""Joint user association and energy-aware power control for multi-band HetNets.

The package solves a proportional-fairness network utility problem over
fractional user association and per-band transmit powers, with a priced
power model that charges stations a fixed on-power, so raising the price
progressively switches stations off.  See the README for the model, the
solver design, and the command line interface.
"""

from .assoc_proj import (
    DualPoint,
    XStepResult,
    ascent_step_x,
    primal_from_duals,
    project_association,
    solve_dual,
)
from .baselines import (
    greedy_turnoff,
    load_balanced_association,
    max_sinr_association,
    optimize_after_association,
    solve_restricted,
)
from .bcga import SolveResult, SolverConfig, default_init, snap_off_columns, solve_weighted
from .errors import (
    DualSolveError,
    HetnetError,
    InfeasibleError,
    ScenarioFormatError,
    StarvedUserError,
    UncoverableUserError,
)
from .objective import (
    EPS_FEAS,
    EPS_OFF,
    Association,
    PowerMatrix,
    RateTable,
    bs_power,
    full_objective,
    grad_p,
    grad_x,
    link_rates,
    rate_table,
    smooth_objective,
    spectral_rate,
    user_rates,
    utility,
    weighted_objective,
)
from .power_prox import (
    PStepResult,
    ascent_step_p,
    block_soft_threshold,
    clamp_power,
    prox_threshold,
    shrink_columns,
)
from .reweight import solve_sparse, update_weights
from .scenario import (
    Scenario,
    TopologyConfig,
    dbm_per_hz_to_watts,
    generate_scenario,
    load_scenario,
    network_layout,
    save_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "Association",
    "DualPoint",
    "DualSolveError",
    "EPS_FEAS",
    "EPS_OFF",
    "HetnetError",
    "InfeasibleError",
    "PStepResult",
    "PowerMatrix",
    "RateTable",
    "Scenario",
    "ScenarioFormatError",
    "SolveResult",
    "SolverConfig",
    "StarvedUserError",
    "TopologyConfig",
    "UncoverableUserError",
    "XStepResult",
    "ascent_step_p",
    "ascent_step_x",
    "block_soft_threshold",
    "bs_power",
    "clamp_power",
    "dbm_per_hz_to_watts",
    "default_init",
    "full_objective",
    "generate_scenario",
    "grad_p",
    "grad_x",
    "greedy_turnoff",
    "link_rates",
    "load_balanced_association",
    "load_scenario",
    "max_sinr_association",
    "network_layout",
    "optimize_after_association",
    "primal_from_duals",
    "project_association",
    "prox_threshold",
    "rate_table",
    "save_scenario",
    "shrink_columns",
    "smooth_objective",
    "snap_off_columns",
    "solve_dual",
    "solve_restricted",
    "solve_sparse",
    "solve_weighted",
    "spectral_rate",
    "update_weights",
    "user_rates",
    "utility",
    "weighted_objective",
]
