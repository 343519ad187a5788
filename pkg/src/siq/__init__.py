"""Shapley-based interaction indices: exact computation on small games,
budgeted sampling estimation on large ones, baseline estimators, and a
benchmark harness."""

from .baselines import WlsSystem, kb_fsi, pb_sii, pb_sti, wls_solve
from .errors import (
    BudgetExceededError,
    CapacityError,
    ConfigError,
    EmptySamplingRangeError,
    InsufficientBudgetError,
    InvalidCoalitionError,
    SchemaError,
    SiqError,
    SolverError,
    UnsupportedOrderError,
)
from .estimator import (
    EstimateReport,
    InteractionUpdater,
    SamplingPlan,
    WelfordAccumulator,
    determine_sampling_order,
    draw_coalitions,
    sample_coalition,
    shapiq_estimate,
    shapiq_sv,
    shapiq_sv_from_coalitions,
    sv_sampling_plan,
    uksh_constants,
    uksh_estimate,
)
from .exact import (
    InteractionScores,
    canonical_subsets,
    discrete_derivative,
    exact_cii_definition,
    exact_cii_representation,
    exact_scores,
    exact_sv,
    exact_sv_kernel,
    sii_top_order_sum,
    soum_ground_truth,
)
from .games import (
    BudgetedGame,
    Game,
    ShiftedGame,
    SoumGame,
    TabularGame,
    full_mask,
    load_game,
    mask_of,
    players_of,
    save_game,
    soum_random,
    tabular_from_game,
)
from .harness import (
    ExperimentConfig,
    ResultRow,
    mse,
    mse_at_k,
    prec_at_k,
    run_budget_sweep,
    write_csv,
    write_jsonl,
)
from .nsii import aggregate_nsii, efficiency_gap
from .weights import (
    FSI_TOP,
    NSII,
    SII,
    STI,
    SV,
    SamplingWeights,
    WeightFamily,
    bernoulli_numbers,
    gamma_weight,
    harmonic,
    sampling_weights,
    shapley_kernel,
    weight_m,
)

__version__ = "0.1.0"
