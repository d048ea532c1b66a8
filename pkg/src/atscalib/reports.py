"""Deterministic report writers and loaders.

Every file starts with a comment line carrying the tool version and a
hash of the run configuration, so re-runs are byte-comparable and any
output can be traced to its config.  JSON payloads are written with
sorted keys below that line; loaders skip leading comment lines.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math

import numpy as np

from . import __version__
from .calibration import CalibrationResult, SliceFit
from .models import ConditionReport, ConditionViolation, TemperedStableSlice

__all__ = [
    "config_hash",
    "header_line",
    "write_forwards_csv",
    "calibration_to_dict",
    "calibration_from_dict",
    "scaling_to_dict",
    "write_json",
    "load_json",
    "write_scaling_points_csv",
    "write_price_table_csv",
]


def _to_plain(obj):
    if isinstance(obj, dict):
        return {str(k): _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    return obj


def config_hash(config: dict) -> str:
    """First 12 hex digits of the SHA-256 of the canonical config JSON."""
    canon = json.dumps(_to_plain(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:12]


def header_line(cfg_hash: str) -> str:
    return f"# atscalib {__version__} config={cfg_hash}"


def write_json(path, payload: dict, cfg_hash: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_line(cfg_hash) + "\n")
        json.dump(_to_plain(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        body = "".join(line for line in fh if not line.startswith("#"))
    return json.loads(body)


def write_forwards_csv(path, forwards, cfg_hash: str) -> None:
    """Per-expiry synthetic forward table."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(header_line(cfg_hash) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["expiry_yf", "fwd_bid", "fwd_ask", "fwd_mid",
                         "n_used", "n_discarded"])
        for f in forwards:
            writer.writerow([repr(float(f.expiry)), repr(float(f.fwd_bid)),
                             repr(float(f.fwd_ask)), repr(float(f.fwd_mid)),
                             len(f.used_strikes), len(f.discarded_strikes)])


def _slice_to_dict(fit: SliceFit) -> dict:
    d = {
        "expiry": fit.expiry,
        "ok": fit.ok,
        "message": fit.message,
        "n_quotes": fit.n_quotes,
        "mse": fit.mse,
        "mape": fit.mape,
        "objective_value": fit.objective_value,
        "penalty": fit.penalty,
        "params": None,
        "covariance": None,
    }
    if fit.slice is not None:
        s = fit.slice
        d["params"] = {"t": s.t, "sigma": s.sigma, "k": s.k,
                       "eta": s.eta, "alpha": s.alpha}
    if fit.covariance is not None:
        d["covariance"] = np.asarray(fit.covariance).tolist()
    return d


def _report_to_dict(report) -> dict | None:
    if report is None:
        return None
    return {
        "ok": report.ok,
        "alpha": report.alpha,
        "times": list(report.times),
        "violations": [
            {"condition": v.condition, "t": v.t, "detail": v.detail}
            for v in report.violations
        ],
    }


def calibration_to_dict(result: CalibrationResult) -> dict:
    return {
        "family": result.family,
        "alpha": result.alpha,
        "mse": result.mse,
        "mape": result.mape,
        "global_params": result.global_params,
        "slices": [_slice_to_dict(f) for f in result.per_slice],
        "condition_report": _report_to_dict(result.condition_report),
        "diagnostics": result.diagnostics,
    }


def calibration_from_dict(d: dict) -> CalibrationResult:
    """Rebuild a CalibrationResult from its JSON form (NaN-safe)."""
    fits = []
    for sd in d["slices"]:
        slice_ = None
        if sd["params"] is not None:
            p = sd["params"]
            slice_ = TemperedStableSlice(t=p["t"], sigma=p["sigma"], k=p["k"],
                                         eta=p["eta"], alpha=p["alpha"])
        cov = None if sd["covariance"] is None else np.asarray(sd["covariance"])
        fits.append(SliceFit(
            expiry=sd["expiry"],
            slice=slice_,
            covariance=cov,
            mse=_nan(sd["mse"]),
            mape=_nan(sd["mape"]),
            objective_value=_nan(sd["objective_value"]),
            penalty=_nan(sd["penalty"]),
            n_quotes=sd["n_quotes"],
            ok=sd["ok"],
            message=sd["message"],
        ))
    rd = d.get("condition_report")
    report = None
    if rd is not None:
        report = ConditionReport(
            ok=rd["ok"],
            violations=tuple(ConditionViolation(v["condition"], v["t"], v["detail"])
                             for v in rd["violations"]),
            times=tuple(rd["times"]),
            alpha=rd["alpha"],
        )
    return CalibrationResult(
        family=d["family"],
        alpha=d["alpha"],
        per_slice=tuple(fits),
        mse=_nan(d["mse"]),
        mape=_nan(d["mape"]),
        condition_report=report,
        global_params=d.get("global_params"),
        diagnostics=d.get("diagnostics", {}),
    )


def _nan(v):
    return math.nan if v is None else float(v)


def _fit_to_dict(fit) -> dict:
    return {
        "slope": fit.slope,
        "intercept": fit.intercept,
        "var_slope": fit.var_slope,
        "var_intercept": fit.var_intercept,
        "p_value_slope_null": fit.p_value_slope_null,
        "p_value_intercept_null": fit.p_value_intercept_null,
    }


def scaling_to_dict(analysis, points, moments=None) -> dict:
    d = {
        "fit_k": _fit_to_dict(analysis.fit_k),
        "fit_eta": _fit_to_dict(analysis.fit_eta),
        "tests": dict(analysis.tests),
        "points": [
            {
                "theta": p.theta,
                "k_hat": p.k_hat,
                "eta_hat": p.eta_hat,
                "var_ln_k": p.var_ln_k,
                "var_ln_eta": p.var_ln_eta,
                "var_ln_theta": p.var_ln_theta,
                "corr_lnk_lntheta": p.corr_lnk_lntheta,
            }
            for p in points
        ],
    }
    if moments is not None:
        d["moment_term_structure"] = {
            "times": list(moments.times),
            "skew": list(moments.skew),
            "kurt": list(moments.kurt),
            "skew_se": list(moments.skew_se),
            "kurt_se": list(moments.kurt_se),
            "skew_fit": _fit_to_dict(moments.skew_fit),
            "kurt_fit": _fit_to_dict(moments.kurt_fit),
        }
    return d


def write_scaling_points_csv(path, points, cfg_hash: str) -> None:
    """Log-log plot data with standard errors, one row per slice."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(header_line(cfg_hash) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["ln_theta", "ln_k_hat", "ln_eta_hat",
                         "se_ln_theta", "se_ln_k", "se_ln_eta"])
        for p in points:
            writer.writerow([
                repr(math.log(p.theta)), repr(math.log(p.k_hat)),
                repr(math.log(p.eta_hat)),
                repr(math.sqrt(p.var_ln_theta)), repr(math.sqrt(p.var_ln_k)),
                repr(math.sqrt(p.var_ln_eta)),
            ])


def write_price_table_csv(path, rows, cfg_hash: str) -> None:
    """Price/IV table; rows are dicts with strike/moneyness/call/put/implied_vol."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(header_line(cfg_hash) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["strike", "moneyness", "call", "put", "implied_vol"])
        for r in rows:
            writer.writerow([repr(float(r["strike"])), repr(float(r["moneyness"])),
                             repr(float(r["call"])), repr(float(r["put"])),
                             repr(float(r["implied_vol"]))])
