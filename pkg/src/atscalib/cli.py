"""Batch command line: forwards, calibrate, scaling and price tables.

Options resolve with precedence flags > config file > defaults; the
config file is a flat JSON object with the same keys as the flags.
Exit codes: 0 ok, 2 empty input, 3 missing file, 4 invalid
configuration, 5 insufficient data.
"""

from __future__ import annotations

import json
import math
import os
import sys
from dataclasses import asdict, dataclass

import click

from .calibration import (
    InsufficientQuotesError,
    OptimizerConfig,
    calibrate_surface,
)
from .market import (
    NoValidStrikeError,
    build_forwards,
    moneyness,
    read_chain_csv,
    read_curve_csv,
)
from .models import DomainError, TemperedStableSlice, ats_cf
from .pricing import InversionError, implied_vol, lewis_call_batch, put_from_parity
from .reports import (
    calibration_from_dict,
    calibration_to_dict,
    config_hash,
    load_json,
    scaling_to_dict,
    write_forwards_csv,
    write_json,
    write_price_table_csv,
    write_scaling_points_csv,
)
from .scaling import moment_term_structure, rescale, scaling_analysis

EXIT_OK = 0
EXIT_EMPTY_INPUT = 2
EXIT_MISSING_FILE = 3
EXIT_INVALID_CONFIG = 4
EXIT_INSUFFICIENT_DATA = 5


@dataclass
class RunConfig:
    chain: str | None = None
    curve: str | None = None
    spot: float | None = None
    alpha: float = 0.5
    family: str = "ATS"
    out: str = "."
    seed: int = 0
    max_iterations: int = 1000
    tolerance: float = 1e-10
    population_size: int = 15
    restarts: int = 3

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(
            max_iterations=self.max_iterations,
            tolerance=self.tolerance,
            population_size=self.population_size,
            restarts=self.restarts,
            seed=self.seed,
        )


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _resolve(config_path, **flags) -> RunConfig:
    cfg = asdict(RunConfig())
    if config_path is not None:
        try:
            with open(config_path, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except FileNotFoundError:
            _fail(EXIT_MISSING_FILE, f"config file not found: {config_path}")
        except json.JSONDecodeError as exc:
            _fail(EXIT_INVALID_CONFIG, f"config file is not valid JSON: {exc}")
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            _fail(EXIT_INVALID_CONFIG, f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key, value in flags.items():
        if value is not None:
            cfg[key] = value
    try:
        run = RunConfig(**cfg)
        if run.family.upper() not in ("ATS", "LTS", "SATO"):
            raise ValueError(f"family must be ATS, LTS or SATO, got {run.family!r}")
        run.family = run.family.upper()
        if not 0 <= run.alpha < 1:
            raise ValueError(f"alpha must lie in [0, 1), got {run.alpha}")
        if run.spot is not None and not run.spot > 0:
            raise ValueError(f"spot must be positive, got {run.spot}")
        run.optimizer()
    except (TypeError, ValueError) as exc:
        _fail(EXIT_INVALID_CONFIG, str(exc))
    return run


def _load_inputs(run: RunConfig):
    if run.chain is None or run.curve is None or run.spot is None:
        _fail(EXIT_INVALID_CONFIG, "chain, curve and spot are required")
    try:
        quotes = read_chain_csv(run.chain)
    except FileNotFoundError:
        _fail(EXIT_MISSING_FILE, f"chain file not found: {run.chain}")
    except ValueError as exc:
        _fail(EXIT_INVALID_CONFIG, f"malformed chain: {exc}")
    if not quotes:
        _fail(EXIT_EMPTY_INPUT, "no quotes in chain file")
    try:
        curve = read_curve_csv(run.curve)
    except FileNotFoundError:
        _fail(EXIT_MISSING_FILE, f"curve file not found: {run.curve}")
    except ValueError as exc:
        _fail(EXIT_INVALID_CONFIG, f"malformed curve: {exc}")
    return quotes, curve


def _out_path(run: RunConfig, name: str) -> str:
    os.makedirs(run.out, exist_ok=True)
    return os.path.join(run.out, name)


def _hash(run: RunConfig, extra: dict | None = None) -> str:
    payload = asdict(run)
    if extra:
        payload.update(extra)
    return config_hash(payload)


@click.group()
def main():
    """Tempered stable option surface toolkit."""


_common = [
    click.option("--chain", type=str, default=None, help="Option chain CSV."),
    click.option("--curve", type=str, default=None, help="Discount curve CSV."),
    click.option("--spot", type=float, default=None, help="Spot price."),
    click.option("--out", type=str, default=None, help="Output directory."),
    click.option("--seed", type=int, default=None, help="Random seed."),
    click.option("--config", "config_path", type=str, default=None,
                 help="Flat JSON config file (flags take precedence)."),
]


def _with_common(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@main.command()
@_with_common
def forwards(chain, curve, spot, out, seed, config_path):
    """Build per-expiry synthetic forwards from a raw chain."""
    run = _resolve(config_path, chain=chain, curve=curve, spot=spot, out=out, seed=seed)
    quotes, curve_obj = _load_inputs(run)
    try:
        fwds = build_forwards(quotes, curve_obj, run.spot)
    except NoValidStrikeError as exc:
        _fail(EXIT_INSUFFICIENT_DATA, str(exc))
    except ValueError as exc:
        _fail(EXIT_INVALID_CONFIG, str(exc))
    path = _out_path(run, "forwards.csv")
    write_forwards_csv(path, fwds, _hash(run))
    click.echo(f"wrote {path} ({len(fwds)} expiries)")


@main.command()
@_with_common
@click.option("--alpha", type=float, default=None, help="Stability index in [0, 1).")
@click.option("--family", type=str, default=None, help="ATS, LTS or SATO.")
def calibrate(chain, curve, spot, out, seed, config_path, alpha, family):
    """Calibrate the surface in the chosen model family."""
    run = _resolve(config_path, chain=chain, curve=curve, spot=spot, out=out,
                   seed=seed, alpha=alpha, family=family)
    quotes, curve_obj = _load_inputs(run)
    result = _run_calibration(run, quotes, curve_obj)
    path = _out_path(run, "calibration.json")
    write_json(path, calibration_to_dict(result), _hash(run))
    click.echo(f"wrote {path} (family={result.family}, mse={result.mse:.6g})")


def _run_calibration(run, quotes, curve_obj):
    try:
        return calibrate_surface(quotes, curve_obj, run.spot, run.family,
                                 run.alpha, run.optimizer())
    except (InsufficientQuotesError, NoValidStrikeError) as exc:
        _fail(EXIT_INSUFFICIENT_DATA, str(exc))


@main.command()
@_with_common
@click.option("--alpha", type=float, default=None, help="Stability index in [0, 1).")
@click.option("--family", type=str, default=None, help="ATS, LTS or SATO.")
@click.option("--calibration", "calibration_path", type=str, default=None,
              help="Reuse a prior calibration JSON instead of refitting.")
def scaling(chain, curve, spot, out, seed, config_path, alpha, family,
            calibration_path):
    """Rescale calibrated slices to theta-time and fit the scaling laws."""
    run = _resolve(config_path, chain=chain, curve=curve, spot=spot, out=out,
                   seed=seed, alpha=alpha, family=family)
    if calibration_path is not None:
        try:
            result = calibration_from_dict(load_json(calibration_path))
        except FileNotFoundError:
            _fail(EXIT_MISSING_FILE, f"calibration file not found: {calibration_path}")
    else:
        quotes, curve_obj = _load_inputs(run)
        result = _run_calibration(run, quotes, curve_obj)
    try:
        points = rescale(result)
        analysis = scaling_analysis(points)
        moments = moment_term_structure(result)
    except ValueError as exc:
        _fail(EXIT_INSUFFICIENT_DATA, str(exc))
    cfg_hash = _hash(run, {"calibration": calibration_path})
    json_path = _out_path(run, "scaling.json")
    csv_path = _out_path(run, "scaling_points.csv")
    write_json(json_path, scaling_to_dict(analysis, points, moments), cfg_hash)
    write_scaling_points_csv(csv_path, points, cfg_hash)
    click.echo(f"wrote {json_path} and {csv_path} ({len(points)} slices)")


@main.command()
@click.option("--forward", type=float, required=True, help="Forward price F0.")
@click.option("--discount", type=float, default=1.0, help="Discount factor B_T.")
@click.option("--expiry", type=float, required=True, help="Maturity, year fraction.")
@click.option("--sigma", type=float, required=True, help="Slice volatility.")
@click.option("--k", type=float, required=True, help="Subordinator variance.")
@click.option("--eta", type=float, required=True, help="Skew parameter.")
@click.option("--alpha", type=float, default=0.5, show_default=True,
              help="Stability index in [0, 1).")
@click.option("--strikes", type=str, required=True,
              help="Comma-separated strike list.")
@click.option("--out", type=str, default=".", show_default=True,
              help="Output directory.")
def price(forward, discount, expiry, sigma, k, eta, alpha, strikes, out):
    """Price a strike list from explicit slice parameters."""
    raw = [s for s in strikes.split(",") if s.strip()]
    if not raw:
        _fail(EXIT_EMPTY_INPUT, "no strikes given")
    try:
        ks = [float(s) for s in raw]
        slice_ = TemperedStableSlice(t=expiry, sigma=sigma, k=k, eta=eta, alpha=alpha)
        if not forward > 0 or not discount > 0:
            raise ValueError("forward and discount must be positive")
    except (DomainError, ValueError) as exc:
        _fail(EXIT_INVALID_CONFIG, str(exc))
    calls = lewis_call_batch(lambda u: ats_cf(u, slice_), forward, discount, ks)
    rows = []
    for strike, call in zip(ks, calls):
        put = put_from_parity(call, forward, discount, strike)
        try:
            iv = implied_vol(call, forward, strike, expiry, discount)
        except InversionError:
            iv = math.nan
        rows.append({
            "strike": strike,
            "moneyness": moneyness(strike, forward),
            "call": call,
            "put": put,
            "implied_vol": iv,
        })
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "prices.csv")
    payload = {"forward": forward, "discount": discount, "expiry": expiry,
               "sigma": sigma, "k": k, "eta": eta, "alpha": alpha,
               "strikes": ks, "out": out}
    write_price_table_csv(path, rows, config_hash(payload))
    click.echo(f"wrote {path} ({len(rows)} strikes)")


if __name__ == "__main__":
    main()
