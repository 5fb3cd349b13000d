"""Grouped goodness-of-fit testing with many cells.

χ², likelihood-ratio and general h-statistics; Poisson moment calculus;
large-deviation tail approximations and slope predictions; exact
enumeration, naive Monte Carlo and multilevel splitting estimators.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DegenerateCountsError,
    InstanceTooLargeError,
    InsufficientBudgetError,
    OpenProblemError,
    UnclassifiedFamilyError,
    UnsupportedPredictionError,
)
from .grouping import CellPartition, GroupedCounts, count_occupancy, make_equal_cells, transform_sample  # noqa: E402
from .statistics import CHI2, EMPTY_CELLS, LR, HFunction, chi_square, h_statistic, log_likelihood_ratio, standardize  # noqa: E402
from .poisson_moments import MomentSummary, moment_summary, null_moments, poisson_expectation, rho, shift_xn  # noqa: E402
from .alternatives import (  # noqa: E402
    AlternativeSpec,
    DeltaSchedule,
    DirectionFunction,
    Family,
    FamilyTag,
    cell_probabilities,
    classify_family,
    cosine_direction,
    delta_value,
    epsilon_contrast,
    eval_density,
    sample_alternative,
    strip_condition,
)
from .largedev import (  # noqa: E402
    EfficiencyMarker,
    binomial_point_lower_bound,
    kl_binomial,
    normal_log_tail,
    predict_alpha_slope,
    predict_efficiency,
    tail_approx,
)
from .montecarlo import (  # noqa: E402
    ExperimentPoint,
    Method,
    TailEstimate,
    estimate_alpha_slope,
    estimate_beta_slope,
    estimate_tail,
    exact_tail,
    power_at_critical,
    sample_multinomial,
)
