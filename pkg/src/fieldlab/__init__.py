"""Active-surface uplink channel estimation: models, estimators, planners.

The package splits along the physical pipeline: `sysmodel` (geometry,
configuration, randomness), `channels` (array responses and the cascaded
link under exact, quadratic-phase, and block-planar models), `airlink`
(pilot design, amplification power budget, received-frame synthesis),
`estimators` (LS and linear-MMSE with their error analysis), `power_alloc`
(closed-form power split between device and surface), `block_planner`
(partition error budgets and the closed-form optimal block count), `crlb`
(estimation lower bounds), `dataset_io` (labeled binary datasets), and
`cli` (reproducible experiment commands).
"""

from .airlink import (
    PilotFrame,
    RxFrame,
    amplification_gain,
    design_pilots,
    synthesize_rx_frame,
    synthesize_rx_subframe,
)
from .block_planner import (
    ErrorBudget,
    QuinticSolution,
    approx_error_closed,
    approx_error_direct,
    c1_constants,
    c3_constant,
    error_budget,
    error_ladder,
    estimation_error_closed,
    exhaustive_k,
    ferrari_quartic,
    optimal_k,
    solve_quintic,
    total_error_closed,
)
from .channels import (
    CascadedChannel,
    FarFieldChannel,
    NearFieldChannel,
    SteeringVector,
    block_columns,
    block_ff_channel,
    block_geometry,
    block_permutation,
    block_pieces,
    cascaded,
    ff_channel_g,
    nf_channel,
    nf_distance_exact,
    nf_distance_taylor,
    upa_steering,
)
from .crlb import (
    ApFactors,
    CrlbResult,
    a_p_factors,
    crlb_closed,
    crlb_general,
    crlb_report,
    effective_noise_var,
    per_entry_noise_var,
)
from .dataset_io import (
    DatasetFormatError,
    DatasetHeader,
    DatasetRecord,
    RecordBatch,
    generate_dataset,
    load_predictions,
    load_records,
    record_stream,
    split_counts,
    split_dataset,
    write_predictions,
)
from .estimators import (
    ChannelStats,
    EstimateResult,
    analytic_mse_beta,
    combined_schedule,
    empirical_mse,
    lmmse,
    ls_block,
    ls_full,
    noise_block_covariance,
    pilot_gram_eigenvalues,
    solver_norms,
)
from .power_alloc import (
    PafCoefficients,
    PafSolution,
    mse_coefficients,
    mse_from_coefficients,
    optimal_beta,
)
from .sysmodel import (
    BlockPlan,
    ConfigError,
    ScenarioConfig,
    SystemConfig,
    UserPlacement,
    block_center,
    centered_offsets,
    dbm_to_watts,
    draw_placement,
    draw_surface_link_angles,
    element_position,
    feasible_ladder,
    feasible_plans,
    load_config,
    plan_for,
    rng_stream,
    sample_path_gain,
    user_position,
    validate_plan,
    watts_to_dbm,
)

__version__ = "0.1.0"
