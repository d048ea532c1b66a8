"""Pricing, calibration and scaling analysis for normal tempered stable surfaces."""

__version__ = "0.1.0"

from .calibration import (
    CalibrationResult,
    InsufficientQuotesError,
    OptimizerConfig,
    RankDeficiencyError,
    SliceFit,
    calibrate_slice,
    calibrate_surface,
    differential_evolution,
    nelder_mead,
    objective,
    param_covariance,
    price_jacobian,
)
from .estimators import SurfaceCalibrator, WLSRegression, YorkRegression
from .market import (
    DiscountCurve,
    NoValidStrikeError,
    OptionQuote,
    SyntheticForward,
    build_forwards,
    grid_step,
    group_by_expiry,
    liquidity_filter,
    moneyness,
    parity_forward,
    read_chain_csv,
    read_curve_csv,
    synthetic_forward,
)
from .models import (
    ConditionReport,
    ConditionViolation,
    DomainError,
    PowerLawParams,
    SatoParams,
    TemperedStableSlice,
    ats_cf,
    check_existence,
    check_power_law,
    cumulants,
    excess_kurtosis,
    levy_density,
    log_laplace,
    lts_cf,
    martingale_drift,
    power_law_slice,
    rescaled_slice,
    sato_cf,
    skewness,
)
from .pricing import (
    InversionError,
    OptionSpec,
    QuadratureConfig,
    QuadratureError,
    black_price,
    implied_vol,
    lewis_call,
    lewis_call_batch,
    put_from_parity,
)
from .scaling import (
    ConvergenceError,
    MomentTermStructure,
    RescaledPoint,
    ScalingAnalysis,
    ScalingFit,
    constant_eta_test,
    moment_term_structure,
    rescale,
    scaling_analysis,
    test_intercept,
    test_scale_zero,
    test_slope,
    wls_fit,
    york_fit,
)

__all__ = [
    "__version__",
    # models
    "DomainError", "TemperedStableSlice", "PowerLawParams", "SatoParams",
    "ConditionReport", "ConditionViolation", "log_laplace", "martingale_drift",
    "ats_cf", "lts_cf", "sato_cf", "power_law_slice", "rescaled_slice",
    "check_existence", "check_power_law", "cumulants", "skewness",
    "excess_kurtosis", "levy_density",
    # pricing
    "QuadratureError", "InversionError", "OptionSpec", "QuadratureConfig",
    "lewis_call", "lewis_call_batch", "put_from_parity", "black_price",
    "implied_vol",
    # market
    "NoValidStrikeError", "OptionQuote", "DiscountCurve", "SyntheticForward",
    "read_chain_csv", "read_curve_csv", "group_by_expiry", "grid_step",
    "liquidity_filter", "parity_forward", "synthetic_forward", "build_forwards",
    "moneyness",
    # calibration
    "InsufficientQuotesError", "RankDeficiencyError", "OptimizerConfig",
    "SliceFit", "CalibrationResult", "objective", "nelder_mead",
    "differential_evolution", "calibrate_slice", "calibrate_surface",
    "price_jacobian", "param_covariance",
    # scaling
    "ConvergenceError", "RescaledPoint", "ScalingFit", "ScalingAnalysis",
    "MomentTermStructure", "rescale", "wls_fit", "york_fit", "test_slope",
    "test_intercept", "test_scale_zero", "scaling_analysis",
    "constant_eta_test", "moment_term_structure",
    # estimators
    "SurfaceCalibrator", "WLSRegression", "YorkRegression",
]
