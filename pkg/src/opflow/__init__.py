"""Network opinion dynamics: averaging, linear, and nonlinear anchoring models.

Subpackages: graph (coupling networks and generators), models (payouts,
protocols, fields, energies), dynamics (trajectory integration), equilibrium
(steady-state solving and certification), cli (config-driven experiments).
"""

from . import errors
from .dynamics import (
    BoundsReport,
    IntegratorConfig,
    Trajectory,
    integrate,
    iterate_discrete,
    monitor_bounds,
    spread_decay_rate,
    suggest_dt,
)
from .equilibrium import (
    EquilibriumCertificate,
    SolverConfig,
    certify,
    f_map,
    jacobian_nfj,
    modified_fj_equilibrium,
    multistart_uniqueness,
    newton_solve,
    taylor_equilibrium,
    taylor_jacobian_check,
    verify_nash,
)
from .graph import (
    DegreeData,
    Network,
    complete_graph,
    core_periphery,
    degree_data,
    erdos_renyi,
    is_connected,
    laplacian,
    load_edge_list,
    normalized_adjacency,
    save_edge_list,
    stochastic_block_model,
)
from .models import (
    AbelsonModel,
    ModifiedFjModel,
    NfjModel,
    NfjParams,
    OpinionState,
    TaylorModel,
    TaylorParams,
    discrete_step_degroot,
    discrete_step_fj,
    discrete_step_nfj,
    energy_nfj,
    energy_taylor,
    modified_fj_energy,
    modified_fj_field,
    payout_abelson,
    payout_fj,
    payout_nfj,
    substochastic_transform,
    transformed_taylor_field,
    vector_field_abelson,
    vector_field_nfj,
    vector_field_taylor,
)

__version__ = "0.1.0"
