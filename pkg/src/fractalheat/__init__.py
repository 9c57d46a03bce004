"""Spectral heat content of subordinate killed Brownian motion on
self-similar fractal domains, with numeric verification of the small-time
asymptotic laws in every regime."""

__version__ = "0.1.0"

from .asymptotics import (
    AsymptoticLaw,
    Tolerances,
    VerificationReport,
    classify_regime,
    critical_alpha,
    critical_law,
    subcritical_constant,
    supercritical_constant_via_renewal,
    supercritical_law,
    verify_law,
)
from .brownian_heat import (
    BrownianLaw,
    FractalCurve1D,
    HeatContentCurve,
    IntervalCurve,
    TabulatedCurve,
    UnionCurve,
    brownian_law,
    fractal_heat_content_1d,
    heat_loss_mellin,
    interval_heat_content,
)
from .geometry import (
    BaseSet,
    DimensionResult,
    IFSDomain,
    LogRatioClass,
    Similitude,
    ValidationReport as DomainValidationReport,
    WordExpansion,
    classify_log_ratios,
    expand_words,
    load_domain,
    minkowski_dimension,
    total_measure,
    validate_domain,
)
from .renewal import RenewalProblem, limit_arithmetic, limit_nonarithmetic, solve_series
from .subordinated_heat import (
    SubordinatedCurve,
    SubordinatedEvaluator,
    quadrature_curve,
    subordinated_heat_content,
    subordinated_heat_content_mc,
    subordinated_heat_loss,
)
from .subordinator import (
    StableParams,
    cdf,
    density,
    sample,
    tail_probability_bound,
    truncated_fractional_moment,
)
