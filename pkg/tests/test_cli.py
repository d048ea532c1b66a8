import json
import math
import re

import numpy as np
import pytest
from click.testing import CliRunner

from atscalib.calibration import CalibrationResult, SliceFit
from atscalib.cli import main
from atscalib.models import TemperedStableSlice
from atscalib.reports import calibration_to_dict, write_json

HEADER_RE = re.compile(r"^# atscalib \d+\.\d+\.\d+ config=[0-9a-f]{12}$")

CHAIN_ROWS = [
    (100.0, "P", 4.0, 4.25), (100.0, "C", 3.75, 4.5),
    (105.0, "P", 7.0, 7.25), (105.0, "C", 2.0, 2.25),
    (95.0, "P", 2.0, 2.5), (95.0, "C", 6.5, 7.75),
    (110.0, "P", 11.0, 11.125), (110.0, "C", 1.0, 1.125),
    (90.0, "P", 0.5, 1.0), (90.0, "C", 11.5, 12.0),
]


def write_chain(path, rows=CHAIN_ROWS, expiry=1.0):
    with open(path, "w") as fh:
        fh.write("expiry_yf,strike,side,bid,ask\n")
        for strike, side, bid, ask in rows:
            fh.write(f"{expiry},{strike},{side},{bid},{ask}\n")


def write_curve(path, pillars=((1.0, 1.0),)):
    with open(path, "w") as fh:
        fh.write("tenor_yf,discount_factor\n")
        for tenor, df in pillars:
            fh.write(f"{tenor},{df}\n")


@pytest.fixture
def runner():
    return CliRunner()


def test_forwards_dyadic_chain(tmp_path, runner):
    chain = tmp_path / "chain.csv"
    curve = tmp_path / "curve.csv"
    write_chain(chain)
    write_curve(curve)
    out = tmp_path / "out"
    result = runner.invoke(main, [
        "forwards", "--chain", str(chain), "--curve", str(curve),
        "--spot", "100", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    lines = (out / "forwards.csv").read_text().splitlines()
    assert HEADER_RE.match(lines[0])
    assert lines[1] == "expiry_yf,fwd_bid,fwd_ask,fwd_mid,n_used,n_discarded"
    # wide 90-put is filtered before pairing, the other four strikes agree
    assert lines[2] == "1.0,99.875,100.125,100.0,4,0"


def test_forwards_empty_chain_exits_2(tmp_path, runner):
    chain = tmp_path / "chain.csv"
    curve = tmp_path / "curve.csv"
    chain.write_text("expiry_yf,strike,side,bid,ask\n")
    write_curve(curve)
    result = runner.invoke(main, [
        "forwards", "--chain", str(chain), "--curve", str(curve), "--spot", "100",
    ])
    assert result.exit_code == 2
    assert "no quotes" in result.output


def test_forwards_missing_curve_exits_3(tmp_path, runner):
    chain = tmp_path / "chain.csv"
    write_chain(chain)
    result = runner.invoke(main, [
        "forwards", "--chain", str(chain), "--curve", str(tmp_path / "nope.csv"),
        "--spot", "100",
    ])
    assert result.exit_code == 3
    assert "not found" in result.output


def test_calibrate_invalid_alpha_exits_4(tmp_path, runner):
    result = runner.invoke(main, [
        "calibrate", "--chain", "x.csv", "--curve", "y.csv", "--spot", "100",
        "--alpha", "1.2",
    ])
    assert result.exit_code == 4
    assert "alpha" in result.output


def test_unknown_config_key_exits_4(tmp_path, runner):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"alpha": 0.5, "bogus_knob": 1}))
    result = runner.invoke(main, ["forwards", "--config", str(cfg)])
    assert result.exit_code == 4
    assert "bogus_knob" in result.output


def test_config_precedence_flag_beats_file(tmp_path, runner):
    chain = tmp_path / "chain.csv"
    curve = tmp_path / "curve.csv"
    write_chain(chain)
    write_curve(curve)
    dir_a = tmp_path / "from_config"
    dir_b = tmp_path / "from_flag"
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({
        "chain": str(chain), "curve": str(curve), "spot": 100.0,
        "out": str(dir_a),
    }))
    # config alone: output lands in the configured directory
    r1 = runner.invoke(main, ["forwards", "--config", str(cfg)])
    assert r1.exit_code == 0, r1.output
    assert (dir_a / "forwards.csv").exists()
    # flag overrides the config file
    r2 = runner.invoke(main, ["forwards", "--config", str(cfg), "--out", str(dir_b)])
    assert r2.exit_code == 0, r2.output
    assert (dir_b / "forwards.csv").exists()


def _two_slice_calibration_json(path):
    fits = []
    for t in (0.5, 1.0):
        sl = TemperedStableSlice(t=t, sigma=0.2, k=0.4 * t, eta=1.1, alpha=0.5)
        fits.append(SliceFit(expiry=t, slice=sl, covariance=np.diag([1e-4, 1e-6, 1e-3]),
                             mse=1e-4, mape=1e-3, objective_value=1e-3,
                             penalty=0.0, n_quotes=8))
    result = CalibrationResult(family="ATS", alpha=0.5, per_slice=tuple(fits),
                               mse=1e-4, mape=1e-3)
    write_json(path, calibration_to_dict(result), "0" * 12)


def test_scaling_two_slices_exits_5(tmp_path, runner):
    calib = tmp_path / "calibration.json"
    _two_slice_calibration_json(calib)
    result = runner.invoke(main, [
        "scaling", "--calibration", str(calib), "--out", str(tmp_path),
    ])
    assert result.exit_code == 5
    assert "at least 3" in result.output


def test_scaling_missing_calibration_exits_3(tmp_path, runner):
    result = runner.invoke(main, [
        "scaling", "--calibration", str(tmp_path / "gone.json"),
    ])
    assert result.exit_code == 3


def test_price_table_symmetry_and_parity(tmp_path, runner):
    x = 0.1
    F = 100.0
    strikes = [F * math.exp(-x), F, F * math.exp(x)]
    result = runner.invoke(main, [
        "price", "--forward", str(F), "--discount", "0.99", "--expiry", "0.5",
        "--sigma", "0.2", "--k", "0.5", "--eta", "0.0", "--alpha", "0.5",
        "--strikes", ",".join(repr(K) for K in strikes),
        "--out", str(tmp_path),
    ])
    assert result.exit_code == 0, result.output
    lines = (tmp_path / "prices.csv").read_text().splitlines()
    assert HEADER_RE.match(lines[0])
    assert lines[1] == "strike,moneyness,call,put,implied_vol"
    rows = [line.split(",") for line in lines[2:]]
    assert len(rows) == 3
    for row in rows:
        strike, mono, call, put, iv = map(float, row)
        assert call - put == pytest.approx(0.99 * (F - strike), abs=1e-10)
    # eta = 0 smiles are symmetric in log-moneyness
    assert float(rows[0][4]) == pytest.approx(float(rows[2][4]), abs=1e-4)
    assert float(rows[0][1]) == pytest.approx(-x, abs=1e-12)


def test_price_rejects_bad_parameters(tmp_path, runner):
    result = runner.invoke(main, [
        "price", "--forward", "100", "--expiry", "0.5", "--sigma", "-0.2",
        "--k", "0.5", "--eta", "0.0", "--strikes", "100", "--out", str(tmp_path),
    ])
    assert result.exit_code == 4


def test_price_empty_strike_list_exits_2(tmp_path, runner):
    result = runner.invoke(main, [
        "price", "--forward", "100", "--expiry", "0.5", "--sigma", "0.2",
        "--k", "0.5", "--eta", "0.0", "--strikes", ",", "--out", str(tmp_path),
    ])
    assert result.exit_code == 2
