import math

import numpy as np
import pytest

from atscalib.market import (
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


def _quote(expiry, strike, is_call, bid, ask):
    return OptionQuote(expiry=expiry, strike=strike, is_call=is_call, bid=bid, ask=ask)


def _pair(expiry, strike, fwd_bid, fwd_ask, put_bid, put_ask, discount=1.0):
    """Call/put pair whose parity interval is exactly [fwd_bid, fwd_ask]."""
    call_bid = (fwd_bid - strike) * discount + put_ask
    call_ask = (fwd_ask - strike) * discount + put_bid
    return [
        _quote(expiry, strike, True, call_bid, call_ask),
        _quote(expiry, strike, False, put_bid, put_ask),
    ]


# ---------------------------------------------------------------- basic types

def test_quote_validation():
    with pytest.raises(ValueError):
        _quote(1.0, 100.0, True, 2.0, 1.0)  # ask < bid
    with pytest.raises(ValueError):
        _quote(1.0, 100.0, True, -1.0, 1.0)
    with pytest.raises(ValueError):
        _quote(1.0, -100.0, True, 1.0, 2.0)
    q = _quote(1.0, 100.0, False, 1.0, 2.0)
    assert q.mid == 1.5 and q.side == "P"


def test_discount_curve_interpolation():
    curve = DiscountCurve([(1.0, 0.98), (2.0, 0.94)])
    assert curve.discount_factor(0.0) == 1.0
    assert curve.discount_factor(1.0) == pytest.approx(0.98, abs=1e-15)
    assert curve.discount_factor(2.0) == pytest.approx(0.94, abs=1e-15)
    # log-linear: midpoint of two pillars is the geometric mean
    assert curve.discount_factor(1.5) == pytest.approx(math.sqrt(0.98 * 0.94),
                                                       abs=1e-12)
    assert curve.discount_factor(0.5) == pytest.approx(math.sqrt(0.98), abs=1e-12)
    assert curve(1.0) == curve.discount_factor(1.0)


def test_discount_curve_validation():
    with pytest.raises(ValueError):
        DiscountCurve([])
    with pytest.raises(ValueError):
        DiscountCurve([(1.0, 1.01)])
    with pytest.raises(ValueError):
        DiscountCurve([(1.0, 0.9), (2.0, 0.95)])  # increasing factor
    with pytest.raises(ValueError):
        DiscountCurve([(1.0, 0.98), (1.0, 0.97)])  # duplicate tenor
    curve = DiscountCurve([(1.0, 0.98)])
    with pytest.raises(ValueError):
        curve.discount_factor(1.5)  # beyond last pillar


# ---------------------------------------------------------------- CSV loaders

def test_chain_csv_round_trip(tmp_path):
    path = tmp_path / "chain.csv"
    path.write_text(
        "expiry_yf,strike,side,bid,ask\n"
        "0.5,100,C,3.1,3.3\n"
        "0.5,100,P,2.9,3.0\n"
    )
    quotes = read_chain_csv(path)
    assert len(quotes) == 2
    assert quotes[0].is_call and not quotes[1].is_call
    assert quotes[0].bid == 3.1


def test_chain_csv_rejects_bad_header_and_side(tmp_path):
    bad_header = tmp_path / "bad1.csv"
    bad_header.write_text("expiry,strike,side,bid,ask\n0.5,100,C,1,2\n")
    with pytest.raises(ValueError):
        read_chain_csv(bad_header)
    bad_side = tmp_path / "bad2.csv"
    bad_side.write_text("expiry_yf,strike,side,bid,ask\n0.5,100,X,1,2\n")
    with pytest.raises(ValueError):
        read_chain_csv(bad_side)


def test_curve_csv_round_trip(tmp_path):
    path = tmp_path / "curve.csv"
    path.write_text("tenor_yf,discount_factor\n0.5,0.995\n1.0,0.99\n")
    curve = read_curve_csv(path)
    assert curve.discount_factor(1.0) == pytest.approx(0.99)


# ---------------------------------------------------------------- liquidity

def test_liquidity_filter_rules():
    step = 5.0
    penny = _quote(1.0, 100.0, True, 0.2, 0.3)        # mid 0.25 < 0.5
    zero_bid = _quote(1.0, 100.0, True, 0.0, 2.0)     # missing side proxy
    wide = _quote(1.0, 100.0, True, 1.0, 1.7)         # spread 70% > 60%
    kept_edge = _quote(1.0, 100.0, True, 10.0, 15.0)  # spread exactly 50%
    kept = _quote(1.0, 105.0, False, 2.0, 2.5)
    out = liquidity_filter([penny, zero_bid, wide, kept_edge, kept], step)
    assert out == [kept_edge, kept]


def test_liquidity_filter_idempotent():
    rng = np.random.default_rng(3)
    quotes = []
    for _ in range(60):
        bid = float(rng.uniform(0.0, 5.0)) * float(rng.integers(0, 2))
        ask = bid + float(rng.uniform(0.0, 3.0))
        if ask == bid == 0.0:
            ask = 0.1
        quotes.append(_quote(1.0, float(rng.uniform(50, 150)),
                             bool(rng.integers(0, 2)), bid, ask))
    once = liquidity_filter(quotes, 1.0)
    twice = liquidity_filter(once, 1.0)
    assert once == twice


def test_grid_step():
    quotes = [_quote(1.0, k, True, 1.0, 1.1) for k in (90.0, 95.0, 100.0, 102.5)]
    assert grid_step(quotes) == 2.5
    assert grid_step(quotes[:1]) == 0.0


# ---------------------------------------------------------------- parity

def test_parity_forward_zero_spread_recovers_forward():
    F, K, B, P = 101.3, 95.0, 0.99, 2.4
    call_price = P + B * (F - K)
    call = _quote(1.0, K, True, call_price, call_price)
    put = _quote(1.0, K, False, P, P)
    b, a, m = parity_forward(call, put, B)
    assert b == pytest.approx(F, abs=1e-12)
    assert a == pytest.approx(F, abs=1e-12)
    assert m == pytest.approx(F, abs=1e-12)


def test_parity_forward_hand_computed_triple():
    call = _quote(1.0, 100.0, True, 5.0, 5.4)
    put = _quote(1.0, 100.0, False, 2.0, 2.3)
    b, a, m = parity_forward(call, put, 0.99)
    assert b == pytest.approx((5.0 - 2.3) / 0.99 + 100.0, abs=1e-12)
    assert a == pytest.approx((5.4 - 2.0) / 0.99 + 100.0, abs=1e-12)
    assert m == pytest.approx((b + a) / 2.0, abs=1e-12)
    # widening the put spread widens the interval on both sides
    wider = _quote(1.0, 100.0, False, 1.8, 2.5)
    b2, a2, _ = parity_forward(call, wider, 0.99)
    assert b2 < b and a2 > a


def test_parity_forward_validates_pairing():
    call = _quote(1.0, 100.0, True, 5.0, 5.4)
    put95 = _quote(1.0, 95.0, False, 2.0, 2.3)
    with pytest.raises(ValueError):
        parity_forward(call, put95, 0.99)
    with pytest.raises(ValueError):
        parity_forward(put95, put95, 0.99)


# ---------------------------------------------------------- synthetic forward

def _five_strike_chain():
    """Dyadic fixture: consensus interval [99.875, 100.125], K=90 inconsistent."""
    quotes = []
    quotes += _pair(1.0, 100.0, 99.5, 100.5, 4.0, 4.25)
    quotes += _pair(1.0, 105.0, 99.75, 100.25, 7.0, 7.25)
    quotes += _pair(1.0, 95.0, 99.0, 100.75, 2.0, 2.5)
    quotes += _pair(1.0, 110.0, 99.875, 100.125, 11.0, 11.125)
    quotes += _pair(1.0, 90.0, 100.5, 101.5, 0.5, 1.0)
    return quotes


def test_synthetic_forward_five_strike_consensus_exact():
    fwd = synthetic_forward(_five_strike_chain(), 1.0, 100.0)
    # all inputs are dyadic, so the parity arithmetic is exact
    assert fwd.fwd_bid == 99.875
    assert fwd.fwd_ask == 100.125
    assert fwd.fwd_mid == 100.0
    assert fwd.used_strikes == (100.0, 105.0, 95.0, 110.0)
    assert fwd.discarded_strikes == (90.0,)


def test_synthetic_forward_single_strike_verbatim():
    quotes = _pair(0.5, 100.0, 99.0, 101.0, 3.0, 3.5, discount=0.99)
    fwd = synthetic_forward(quotes, 0.99, 98.0)
    b, a, m = parity_forward(quotes[0], quotes[1], 0.99)
    assert (fwd.fwd_bid, fwd.fwd_ask, fwd.fwd_mid) == (b, a, m)
    assert fwd.used_strikes == (100.0,)
    assert fwd.discarded_strikes == ()


def test_synthetic_forward_consistent_zero_spread_chain():
    F = 101.0
    quotes = []
    for K in (90.0, 95.0, 100.0, 105.0, 110.0):
        P = 2.0 + 0.1 * K
        quotes += _pair(1.0, K, F, F, P, P)
    fwd = synthetic_forward(quotes, 1.0, 100.0)
    assert fwd.fwd_bid == pytest.approx(F, abs=1e-12)
    assert fwd.fwd_ask == pytest.approx(F, abs=1e-12)
    assert fwd.discarded_strikes == ()
    assert len(fwd.used_strikes) == 5


def test_synthetic_forward_anchor_tie_breaks_low_and_superior_first():
    quotes = []
    quotes += _pair(1.0, 100.0, 99.0, 101.0, 4.0, 4.5)
    quotes += _pair(1.0, 105.0, 99.5, 100.5, 7.0, 7.5)
    # anchor exactly between the two strikes: start at the lower one,
    # then visit the superior strike
    fwd = synthetic_forward(quotes, 1.0, 102.5)
    assert fwd.used_strikes == (100.0, 105.0)


def test_synthetic_forward_interval_contained_in_used_intervals():
    rng = np.random.default_rng(17)
    for trial in range(30):
        strikes = 80.0 + 5.0 * np.arange(7)
        quotes = []
        intervals = {}
        for K in strikes:
            center = float(rng.uniform(99.0, 101.0))
            half = float(rng.uniform(0.05, 1.5))
            intervals[K] = (center - half, center + half)
            put_bid = 2.0 + max(0.0, K - 95.0)
            quotes += _pair(1.0, K, center - half, center + half,
                            put_bid, put_bid + 0.2 * half)
        fwd = synthetic_forward(quotes, 1.0, 100.0)
        assert fwd.fwd_bid <= fwd.fwd_mid <= fwd.fwd_ask
        for K in fwd.used_strikes:
            lo, hi = intervals[K]
            assert fwd.fwd_bid >= lo - 1e-12
            assert fwd.fwd_ask <= hi + 1e-12


def test_synthetic_forward_errors():
    with pytest.raises(NoValidStrikeError):
        synthetic_forward([], 1.0, 100.0)
    calls_only = [_quote(1.0, 100.0, True, 3.0, 3.2)]
    with pytest.raises(NoValidStrikeError):
        synthetic_forward(calls_only, 1.0, 100.0)
    mixed_expiry = (_pair(1.0, 100.0, 99.0, 101.0, 3.0, 3.5)
                    + _pair(0.5, 100.0, 99.0, 101.0, 3.0, 3.5))
    with pytest.raises(ValueError):
        synthetic_forward(mixed_expiry, 1.0, 100.0)


def test_synthetic_forward_invariant_on_construction():
    with pytest.raises(ValueError):
        SyntheticForward(expiry=1.0, fwd_bid=100.0, fwd_ask=99.0, fwd_mid=99.5)


# ---------------------------------------------------------------- multi expiry

def test_build_forwards_chains_anchors():
    curve = DiscountCurve([(0.5, 0.995), (1.0, 0.99)])
    quotes = []
    for K in (95.0, 100.0, 105.0):
        quotes += _pair(0.5, K, 100.0, 100.0, 8.0, 8.0, discount=0.995)
    for K in (95.0, 100.0, 105.0):
        quotes += _pair(1.0, K, 103.0, 103.0, 8.0, 8.0, discount=0.99)
    fwds = build_forwards(quotes, curve, 98.0)
    assert [f.expiry for f in fwds] == [0.5, 1.0]
    assert fwds[0].fwd_mid == pytest.approx(100.0, abs=1e-10)
    assert fwds[1].fwd_mid == pytest.approx(103.0, abs=1e-10)


def test_build_forwards_reports_failing_expiry():
    curve = DiscountCurve([(1.0, 0.99)])
    calls_only = [_quote(1.0, 100.0, True, 3.0, 3.2)]
    with pytest.raises(NoValidStrikeError, match="expiry 1.0"):
        build_forwards(calls_only, curve, 100.0)


def test_group_by_expiry_sorted():
    quotes = [_quote(t, 100.0, True, 1.0, 1.2) for t in (1.0, 0.25, 0.5)]
    grouped = group_by_expiry(quotes)
    assert list(grouped) == [0.25, 0.5, 1.0]


# ---------------------------------------------------------------- moneyness

def test_moneyness_values():
    assert moneyness(100.0, 100.0) == 0.0
    assert moneyness(100.0 * math.e, 100.0) == pytest.approx(1.0, abs=1e-12)
    assert moneyness(95.0, 100.0) == pytest.approx(-0.05129329438755058, abs=1e-12)
    with pytest.raises(ValueError):
        moneyness(-1.0, 100.0)
