"""Power-law scaling analysis of calibrated slice parameters.

Slices are rescaled to theta-time (theta = T sigma_T^2, k_hat = k_T
sigma_T^2, eta_hat = eta_T) with first-order error propagation from the
calibration covariances, then straight lines are fitted in log-log
scale.  Because the abscissa ln theta carries part of the same sigma_T^2
estimation error as ln k_hat, the k regression uses an
errors-in-both-variables fit with correlated errors; the eta regression
treats its ordinate error as independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import norm

from .models import TemperedStableSlice, excess_kurtosis, skewness

__all__ = [
    "ConvergenceError",
    "RescaledPoint",
    "ScalingFit",
    "ScalingAnalysis",
    "MomentTermStructure",
    "rescale",
    "wls_fit",
    "york_fit",
    "test_slope",
    "test_intercept",
    "test_scale_zero",
    "scaling_analysis",
    "constant_eta_test",
    "moment_term_structure",
]


class ConvergenceError(RuntimeError):
    """Iterative fit failed to converge within the iteration cap."""


@dataclass(frozen=True)
class RescaledPoint:
    """One slice in theta-time with propagated log-scale variances."""

    theta: float
    k_hat: float
    eta_hat: float
    var_ln_k: float
    var_ln_eta: float
    var_ln_theta: float
    corr_lnk_lntheta: float

    def __post_init__(self):
        if not self.theta > 0:
            raise ValueError(f"theta must be positive, got {self.theta}")
        if min(self.var_ln_k, self.var_ln_eta, self.var_ln_theta) < 0:
            raise ValueError("variances must be non-negative")
        if not -1.0 <= self.corr_lnk_lntheta <= 1.0:
            raise ValueError(f"correlation out of [-1, 1]: {self.corr_lnk_lntheta}")


@dataclass(frozen=True)
class ScalingFit:
    """Straight-line fit y = intercept + slope * x with Gaussian coefficient errors.

    The stored p-values test the generic nulls slope = 0 and
    intercept = 0; tests against other null values go through
    `test_slope` / `test_intercept`.
    """

    slope: float
    intercept: float
    var_slope: float
    var_intercept: float
    p_value_slope_null: float
    p_value_intercept_null: float


def _gaussian_p(estimate: float, null_value: float, variance: float) -> float:
    if variance < 0:
        raise ValueError(f"variance must be non-negative, got {variance}")
    if variance == 0:
        return 1.0 if estimate == null_value else 0.0
    z = (estimate - null_value) / math.sqrt(variance)
    return float(2.0 * norm.sf(abs(z)))


def test_slope(fit: ScalingFit, null_value: float) -> float:
    """Two-sided Gaussian p-value of slope = null_value."""
    return _gaussian_p(fit.slope, null_value, fit.var_slope)


def test_intercept(fit: ScalingFit, null_value: float) -> float:
    """Two-sided Gaussian p-value of intercept = null_value."""
    return _gaussian_p(fit.intercept, null_value, fit.var_intercept)


def test_scale_zero(fit: ScalingFit) -> float:
    """p-value for the null that the level e^intercept is zero.

    The intercept estimates the log of a positive scale, where the null
    sits at -inf; the delta method transfers the test to the scale
    itself, giving z = scale / se(scale) = 1 / se(intercept).
    """
    if fit.var_intercept == 0:
        return 0.0
    z = 1.0 / math.sqrt(fit.var_intercept)
    return float(2.0 * norm.sf(z))


def rescale(result) -> list[RescaledPoint]:
    """Map calibrated slices to theta-time points with propagated errors.

    Covariances are ordered (k, sigma^2, eta); the log-scale variances
    are the first-order expansions

        Var(ln k_hat)  = S11/k^2 + S22/sigma^4 + 2 S21/(k sigma^2)
        Var(ln eta_hat) = S33/eta^2
        Var(ln theta)  = S22/sigma^4

    and the ln k_hat / ln theta correlation comes from the shared
    sigma^2 component, cov = S22/sigma^4 + S21/(k sigma^2).  Failed
    slices are skipped; successful slices require k, eta > 0 and a
    covariance matrix.
    """
    points = []
    for fit in result.per_slice:
        if not fit.ok:
            continue
        s = fit.slice
        if s.k <= 0 or s.eta <= 0:
            raise ValueError(
                f"rescaling needs k > 0 and eta > 0, got k={s.k}, eta={s.eta} "
                f"at expiry {fit.expiry}"
            )
        if fit.covariance is None:
            raise ValueError(f"slice at expiry {fit.expiry} has no covariance")
        S = np.asarray(fit.covariance, dtype=float)
        k, v, eta = s.k, s.sigma**2, s.eta
        var_ln_k = S[0, 0] / k**2 + S[1, 1] / v**2 + 2.0 * S[1, 0] / (k * v)
        var_ln_eta = S[2, 2] / eta**2
        var_ln_theta = S[1, 1] / v**2
        cov = S[1, 1] / v**2 + S[1, 0] / (k * v)
        if var_ln_k > 0 and var_ln_theta > 0:
            corr = cov / math.sqrt(var_ln_k * var_ln_theta)
            corr = min(1.0, max(-1.0, corr))
        else:
            corr = 0.0
        points.append(RescaledPoint(
            theta=s.t * v,
            k_hat=k * v,
            eta_hat=eta,
            var_ln_k=max(var_ln_k, 0.0),
            var_ln_eta=max(var_ln_eta, 0.0),
            var_ln_theta=max(var_ln_theta, 0.0),
            corr_lnk_lntheta=corr,
        ))
    return points


def _check_xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D arrays of equal length")
    if len(x) < 3:
        raise ValueError(f"need at least 3 points, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("x and y must be finite")
    return x, y


def wls_fit(x, y, weights) -> ScalingFit:
    """Weighted least-squares line with weights = inverse ordinate variances.

    Coefficient covariance is (Z' W Z)^-1, exact when the weights are
    the true inverse variances.
    """
    x, y = _check_xy(x, y)
    w = np.asarray(weights, dtype=float)
    if w.shape != x.shape or np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be positive, finite and match x")
    sw = w.sum()
    xbar = float(w @ x) / sw
    sxx = float(w @ (x - xbar) ** 2)
    if sxx <= 0:
        raise ValueError("x values are collinear (zero weighted spread)")
    slope = float(w @ ((x - xbar) * y)) / sxx
    intercept = float(w @ (y - slope * x)) / sw
    var_slope = 1.0 / sxx
    var_intercept = 1.0 / sw + xbar**2 / sxx
    return ScalingFit(
        slope=slope,
        intercept=intercept,
        var_slope=var_slope,
        var_intercept=var_intercept,
        p_value_slope_null=_gaussian_p(slope, 0.0, var_slope),
        p_value_intercept_null=_gaussian_p(intercept, 0.0, var_intercept),
    )


_YORK_TOL = 1e-12
_YORK_CAP = 100


def york_fit(x, y, var_x, var_y, corr=0.0) -> ScalingFit:
    """Errors-in-both-variables straight line (York's iterated solution).

    Written in variance rather than weight form so var_x = 0 degenerates
    smoothly to the weighted fit.  `corr` is the per-point correlation
    between the x and y errors.  Converges when the slope moves less
    than 1e-12 between iterations; raises ConvergenceError after 100.
    """
    x, y = _check_xy(x, y)
    var_x = np.broadcast_to(np.asarray(var_x, dtype=float), x.shape)
    var_y = np.broadcast_to(np.asarray(var_y, dtype=float), x.shape)
    r = np.broadcast_to(np.asarray(corr, dtype=float), x.shape)
    if np.any(var_x < 0) or np.any(var_y <= 0):
        raise ValueError("need var_x >= 0 and var_y > 0")
    if np.any(np.abs(r) > 1):
        raise ValueError("correlations must lie in [-1, 1]")

    sxy = np.sqrt(var_x * var_y)
    b = wls_fit(x, y, 1.0 / var_y).slope
    for _ in range(_YORK_CAP):
        W = 1.0 / (var_y + b * b * var_x - 2.0 * b * r * sxy)
        xbar = float(W @ x) / W.sum()
        ybar = float(W @ y) / W.sum()
        U = x - xbar
        V = y - ybar
        beta = W * (U * var_y + b * V * var_x - (b * U + V) * r * sxy)
        b_new = float(W @ (beta * V)) / float(W @ (beta * U))
        if abs(b_new - b) < _YORK_TOL:
            b = b_new
            break
        b = b_new
    else:
        raise ConvergenceError(f"slope not converged after {_YORK_CAP} iterations")

    W = 1.0 / (var_y + b * b * var_x - 2.0 * b * r * sxy)
    xbar = float(W @ x) / W.sum()
    ybar = float(W @ y) / W.sum()
    U = x - xbar
    V = y - ybar
    beta = W * (U * var_y + b * V * var_x - (b * U + V) * r * sxy)
    a = ybar - b * xbar
    x_adj = xbar + beta
    xbar_adj = float(W @ x_adj) / W.sum()
    u = x_adj - xbar_adj
    var_b = 1.0 / float(W @ (u * u))
    var_a = 1.0 / W.sum() + xbar_adj**2 * var_b
    return ScalingFit(
        slope=b,
        intercept=a,
        var_slope=var_b,
        var_intercept=var_a,
        p_value_slope_null=_gaussian_p(b, 0.0, var_b),
        p_value_intercept_null=_gaussian_p(a, 0.0, var_a),
    )


class ScalingAnalysis(NamedTuple):
    fit_k: ScalingFit
    fit_eta: ScalingFit
    tests: dict


def scaling_analysis(points) -> ScalingAnalysis:
    """Log-log regressions of k_hat and eta_hat on theta with the standard tests.

    The k regression propagates the ln theta / ln k_hat error
    correlation; the eta regression takes its x error as independent.
    The tests dict reports two-sided p-values for the power-law nulls
    (slope of k on theta = 1, slope of eta = -1/2, constant eta) and
    both conventions for the zero-level intercept nulls: significance of
    the log intercept itself and the delta-method test of the level.
    """
    points = list(points)
    if len(points) < 3:
        raise ValueError(f"need at least 3 rescaled points, got {len(points)}")
    ln_theta = np.log([p.theta for p in points])
    ln_k = np.log([p.k_hat for p in points])
    ln_eta = np.log([p.eta_hat for p in points])
    var_lt = np.array([p.var_ln_theta for p in points])
    var_lk = np.array([p.var_ln_k for p in points])
    var_le = np.array([p.var_ln_eta for p in points])
    corr = np.array([p.corr_lnk_lntheta for p in points])

    fit_k = york_fit(ln_theta, ln_k, var_lt, var_lk, corr)
    fit_eta = york_fit(ln_theta, ln_eta, var_lt, var_le, 0.0)
    tests = {
        "beta_eq_one": test_slope(fit_k, 1.0),
        "delta_eq_minus_half": test_slope(fit_eta, -0.5),
        "constant_eta": test_slope(fit_eta, 0.0),
        "k_level_zero_intercept": test_intercept(fit_k, 0.0),
        "k_level_zero_scale": test_scale_zero(fit_k),
        "eta_level_zero_intercept": test_intercept(fit_eta, 0.0),
        "eta_level_zero_scale": test_scale_zero(fit_eta),
    }
    return ScalingAnalysis(fit_k=fit_k, fit_eta=fit_eta, tests=tests)


def constant_eta_test(points) -> float:
    """p-value of a flat eta_hat path (slope 0 in the eta regression)."""
    return scaling_analysis(points).tests["constant_eta"]


@dataclass(frozen=True)
class MomentTermStructure:
    """Skewness / excess-kurtosis term structure regressed on sqrt(T)."""

    times: tuple[float, ...]
    skew: tuple[float, ...]
    kurt: tuple[float, ...]
    skew_se: tuple[float, ...]
    kurt_se: tuple[float, ...]
    skew_fit: ScalingFit
    kurt_fit: ScalingFit

    @property
    def p_no_slope_skew(self) -> float:
        return self.skew_fit.p_value_slope_null

    @property
    def p_no_slope_kurt(self) -> float:
        return self.kurt_fit.p_value_slope_null


def _moment_se(slice_: TemperedStableSlice, cov, func) -> float:
    # first-order band: gradient wrt (k, sigma^2, eta) by central differences
    params = np.array([slice_.k, slice_.sigma**2, slice_.eta])
    grad = np.empty(3)
    for j in range(3):
        h = max(1e-5 * abs(params[j]), 1e-8)
        up, dn = params.copy(), params.copy()
        up[j] += h
        dn[j] -= h
        f_up = func(TemperedStableSlice(t=slice_.t, sigma=math.sqrt(up[1]),
                                        k=up[0], eta=up[2], alpha=slice_.alpha))
        f_dn = func(TemperedStableSlice(t=slice_.t, sigma=math.sqrt(dn[1]),
                                        k=dn[0], eta=dn[2], alpha=slice_.alpha))
        grad[j] = (f_up - f_dn) / (2.0 * h)
    var = float(grad @ np.asarray(cov, dtype=float) @ grad)
    return math.sqrt(max(var, 0.0))


def moment_term_structure(result) -> MomentTermStructure:
    """Regress per-slice skewness and excess kurtosis on sqrt(maturity).

    A flat term structure (no-slope p above the usual levels) is the
    self-similar signature; a power-law surface with decaying eta slopes
    downward in sqrt(T).  Weights are inverse propagated variances when
    every band is positive, equal otherwise.
    """
    fits = [f for f in result.per_slice if f.ok]
    if len(fits) < 3:
        raise ValueError(f"need at least 3 calibrated slices, got {len(fits)}")
    times, sk, ku, sk_se, ku_se = [], [], [], [], []
    for f in fits:
        times.append(f.expiry)
        sk.append(skewness(f.slice))
        ku.append(excess_kurtosis(f.slice))
        if f.covariance is not None:
            sk_se.append(_moment_se(f.slice, f.covariance, skewness))
            ku_se.append(_moment_se(f.slice, f.covariance, excess_kurtosis))
        else:
            sk_se.append(0.0)
            ku_se.append(0.0)
    root_t = np.sqrt(times)

    def weights(ses):
        ses = np.asarray(ses)
        if np.all(ses > 0):
            return 1.0 / ses**2
        return np.ones_like(ses)

    skew_fit = wls_fit(root_t, sk, weights(sk_se))
    kurt_fit = wls_fit(root_t, ku, weights(ku_se))
    return MomentTermStructure(
        times=tuple(times),
        skew=tuple(sk),
        kurt=tuple(ku),
        skew_se=tuple(sk_se),
        kurt_se=tuple(ku_se),
        skew_fit=skew_fit,
        kurt_fit=kurt_fit,
    )
