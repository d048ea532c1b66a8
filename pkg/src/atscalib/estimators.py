"""Estimator-style wrappers around calibration and the line fits.

Thin adapters exposing the fit/predict idiom: construction stores
hyperparameters untouched, `fit` runs the underlying routine and hangs
the results on trailing-underscore attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .calibration import DEFAULT_OPTIMIZER, calibrate_surface
from .market import build_forwards
from .models import ats_cf
from .pricing import DEFAULT_QUADRATURE, lewis_call_batch
from .scaling import wls_fit, york_fit

__all__ = ["SurfaceCalibrator", "WLSRegression", "YorkRegression"]


class SurfaceCalibrator(BaseEstimator):
    """Calibrate an option surface and price calls at the fitted expiries.

    Parameters mirror `calibrate_surface`; `fit` takes the raw quote
    list plus the discount curve and spot, `predict` takes rows of
    (expiry, strike) and returns call prices.  Every family stores an
    equivalent per-expiry slice, so prediction is uniform across ATS,
    LTS and Sato.
    """

    def __init__(self, family="ATS", alpha=0.5, optimizer=None, quadrature=None):
        self.family = family
        self.alpha = alpha
        self.optimizer = optimizer
        self.quadrature = quadrature

    def fit(self, quotes, curve=None, spot=None):
        if curve is None or spot is None:
            raise ValueError("fit requires curve= and spot=")
        optimizer = self.optimizer if self.optimizer is not None else DEFAULT_OPTIMIZER
        quadrature = self.quadrature if self.quadrature is not None else DEFAULT_QUADRATURE
        self.result_ = calibrate_surface(quotes, curve, spot, self.family,
                                         self.alpha, optimizer, quadrature)
        self.forwards_ = {f.expiry: f.fwd_mid for f in build_forwards(quotes, curve, spot)}
        self.discounts_ = {t: curve.discount_factor(t) for t in self.forwards_}
        return self

    def predict(self, X) -> np.ndarray:
        """Call prices for rows (expiry, strike); expiries must be fitted ones."""
        if not hasattr(self, "result_"):
            raise RuntimeError("not fitted; call fit first")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != 2:
            raise ValueError("X must have columns (expiry, strike)")
        slices = {f.expiry: f.slice for f in self.result_.per_slice if f.ok}
        quadrature = self.quadrature if self.quadrature is not None else DEFAULT_QUADRATURE
        out = np.empty(len(X))
        for expiry in np.unique(X[:, 0]):
            if expiry not in slices:
                raise ValueError(f"expiry {expiry} was not calibrated")
            rows = X[:, 0] == expiry
            s = slices[expiry]
            out[rows] = lewis_call_batch(
                lambda u: ats_cf(u, s),
                self.forwards_[expiry], self.discounts_[expiry],
                X[rows, 1], quadrature,
            )
        return out


def _column(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 2 and X.shape[1] == 1:
        X = X[:, 0]
    if X.ndim != 1:
        raise ValueError("X must be 1-D or a single column")
    return X


class WLSRegression(RegressorMixin, BaseEstimator):
    """Weighted least-squares straight line with sample_weight = 1/Var(y)."""

    def fit(self, X, y, sample_weight=None):
        x = _column(X)
        if sample_weight is None:
            sample_weight = np.ones_like(x)
        self.fit_ = wls_fit(x, y, sample_weight)
        self.slope_ = self.fit_.slope
        self.intercept_ = self.fit_.intercept
        self.var_slope_ = self.fit_.var_slope
        self.var_intercept_ = self.fit_.var_intercept
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "fit_"):
            raise RuntimeError("not fitted; call fit first")
        return self.intercept_ + self.slope_ * _column(X)


class YorkRegression(RegressorMixin, BaseEstimator):
    """Errors-in-both-variables straight line (York's iterated solution)."""

    def fit(self, X, y, var_x=None, var_y=None, corr=0.0):
        x = _column(X)
        if var_x is None or var_y is None:
            raise ValueError("fit requires var_x= and var_y=")
        self.fit_ = york_fit(x, y, var_x, var_y, corr)
        self.slope_ = self.fit_.slope
        self.intercept_ = self.fit_.intercept
        self.var_slope_ = self.fit_.var_slope
        self.var_intercept_ = self.fit_.var_intercept
        return self

    def predict(self, X) -> np.ndarray:
        if not hasattr(self, "fit_"):
            raise RuntimeError("not fitted; call fit first")
        return self.intercept_ + self.slope_ * _column(X)
