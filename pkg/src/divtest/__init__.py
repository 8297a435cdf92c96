"""Divergence-based hypothesis tests on finite alphabets.

Exact and simulated errors of tests that accept H0 when a divergence between
the empirical type and the null is below a threshold, together with their
second-order asymptotic predictions.
"""

__version__ = "0.1.0"

from .asymptotics import (
    Expansion,
    Flavor,
    ResidualSeries,
    berry_esseen_sup,
    fit_residuals,
    kl_quadratic_approx,
    predict_divergence_test,
    predict_np,
    residual_verdict,
    second_order_series,
)
from .divergences import (
    DivergenceSpec,
    PqStatistics,
    alpha_div,
    chi_sq,
    eta_of,
    f_div,
    kl,
    power_div_statistic,
    pq_statistics,
    renyi,
)
from .engine import (
    CalibrationResult,
    Decision,
    TestConfig,
    asymptotic_threshold,
    decide,
    exact_calibrate,
    np_exact_calibrate,
    np_statistic,
    np_type1_exact,
    np_type2_exact,
    null_statistic_law,
    type1_exact,
    type1_mc,
    type2_exact,
    type2_mc,
)
from .errors import (
    BudgetExceeded,
    DivtestError,
    MathDomainError,
    NTooSmall,
    RadiusTooLarge,
    ValidationError,
)
from .optimizer import (
    KktSolution,
    RoundedType,
    brute_force_min,
    ell,
    feasibility_data,
    kappa_of,
    kkt_minimize,
    round_to_type,
)
from .simplex import (
    Distribution,
    SeededSource,
    TypeDistribution,
    empirical_type,
    enumerate_types,
    log_type_class_prob,
    make_distribution,
    sample_type,
)
