"""Validity-constrained distribution learning at desk scale.

A library and CLI for studying learners that must output a model with both
near-optimal loss and provably small mass on invalid outputs, using
piecewise-constant densities on [0, 1) so every analysis quantity (total
variation, KL divergence, expected losses, invalid mass) is closed-form.
"""

from .densities import (
    PiecewiseDensity,
    ZERO_MASS,
    ZeroMass,
    density_at,
    disagreement_mass,
    empirical_loss,
    expected_loss,
    expected_loss_on,
    invalidity,
    kl,
    mix,
    refine,
    restrict,
    sample,
    support_clipped_loss,
    tv,
    uniform,
)
from .exactcheck import (
    BudgetExceededError,
    FlipEstimate,
    ProductTVReport,
    flip_probability,
    invalid_product_margin,
    product_tv_exact,
    product_tv_subadditive_upper,
    reis_lower_bound,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    ExperimentResult,
    RunRecord,
    lower_bound_experiment,
    run_experiment,
    sweep,
)
from .instances import (
    ConstructionError,
    ProblemInstance,
    make_capped_trap_instance,
    make_lower_bound_instance,
    make_mismatched_instance,
    make_realizable_instance,
)
from .intervals import IntervalUnion
from .learners import (
    LearnOutcome,
    LearnParams,
    erm,
    finite_log_loss,
    n_erm_realizable,
    n_log_mixture,
    n_loss_estimation,
    n_vc_realizable,
    valid_restriction,
    valid_restriction_log,
)
from .losses import LossSpec
from .validity import (
    IntervalUnionClass,
    LabeledPoint,
    NonRealizableError,
    ValidityOracle,
    auto_label_valid,
    consistent_intervals,
    label_with_oracle,
)

__version__ = "0.1.0"
