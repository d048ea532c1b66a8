"""Option-chain ingestion, liquidity filtering and synthetic forwards.

The forward at each expiry is rebuilt from put-call parity intervals of
liquid strikes: starting from the strike nearest the anchor (spot for
the shortest expiry, previous forward mid after that) the algorithm
walks outward, alternating superior and inferior strikes, keeping a
strike only when the running forward mid falls inside its parity
interval, and tightening the running interval with it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .validation import check_positive

__all__ = [
    "NoValidStrikeError",
    "OptionQuote",
    "DiscountCurve",
    "SyntheticForward",
    "read_chain_csv",
    "read_curve_csv",
    "group_by_expiry",
    "grid_step",
    "liquidity_filter",
    "parity_forward",
    "synthetic_forward",
    "build_forwards",
    "moneyness",
]

CHAIN_HEADER = ["expiry_yf", "strike", "side", "bid", "ask"]
CURVE_HEADER = ["tenor_yf", "discount_factor"]


class NoValidStrikeError(ValueError):
    """No strike with both a call and a put survived the liquidity filter."""


@dataclass(frozen=True)
class OptionQuote:
    """A single bid/ask quote; side is encoded in ``is_call``."""

    expiry: float
    strike: float
    is_call: bool
    bid: float
    ask: float

    def __post_init__(self):
        check_positive(self.expiry, "expiry")
        check_positive(self.strike, "strike")
        if not (np.isfinite(self.bid) and self.bid >= 0):
            raise ValueError(f"bid must be >= 0, got {self.bid}")
        if not (np.isfinite(self.ask) and self.ask >= self.bid):
            raise ValueError(f"ask must be >= bid, got ask={self.ask} bid={self.bid}")

    @property
    def mid(self) -> float:
        return 0.5 * (self.bid + self.ask)

    @property
    def side(self) -> str:
        return "C" if self.is_call else "P"


@dataclass(frozen=True)
class DiscountCurve:
    """Discount factors at tenor pillars, log-linearly interpolated.

    The curve is anchored at B(0) = 1; querying beyond the last pillar
    raises (no extrapolation).
    """

    pillars: tuple[tuple[float, float], ...]

    def __init__(self, pillars):
        pts = sorted((float(t), float(b)) for t, b in pillars)
        if not pts:
            raise ValueError("need at least one pillar")
        prev_t, prev_b = 0.0, 1.0
        for t, b in pts:
            if t <= prev_t:
                raise ValueError(f"pillar tenors must be strictly increasing and positive, got {t}")
            if not 0.0 < b <= 1.0:
                raise ValueError(f"discount factor must lie in (0, 1], got {b}")
            if b > prev_b:
                raise ValueError(f"discount factors must be non-increasing in tenor (at {t})")
            prev_t, prev_b = t, b
        object.__setattr__(self, "pillars", tuple(pts))

    def discount_factor(self, t: float) -> float:
        if not (np.isfinite(t) and t >= 0):
            raise ValueError(f"tenor must be >= 0, got {t}")
        tenors = [0.0] + [p[0] for p in self.pillars]
        logs = [0.0] + [math.log(p[1]) for p in self.pillars]
        if t > tenors[-1]:
            raise ValueError(
                f"tenor {t} beyond the last pillar {tenors[-1]}; extrapolation not supported"
            )
        return math.exp(float(np.interp(t, tenors, logs)))

    def __call__(self, t: float) -> float:
        return self.discount_factor(t)


@dataclass(frozen=True)
class SyntheticForward:
    """Forward interval at one expiry together with the strikes that built it."""

    expiry: float
    fwd_bid: float
    fwd_ask: float
    fwd_mid: float
    used_strikes: tuple[float, ...] = field(default_factory=tuple)
    discarded_strikes: tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.fwd_bid <= self.fwd_mid <= self.fwd_ask:
            raise ValueError(
                f"forward interval out of order: bid={self.fwd_bid} "
                f"mid={self.fwd_mid} ask={self.fwd_ask}"
            )


def read_chain_csv(path) -> list[OptionQuote]:
    """Load an option chain from CSV with header expiry_yf,strike,side,bid,ask."""
    quotes = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CHAIN_HEADER:
            raise ValueError(f"expected header {','.join(CHAIN_HEADER)} in {path}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 5:
                raise ValueError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            expiry, strike, side, bid, ask = (c.strip() for c in row)
            if side not in ("C", "P"):
                raise ValueError(f"{path}:{lineno}: side must be C or P, got {side!r}")
            quotes.append(OptionQuote(float(expiry), float(strike), side == "C",
                                      float(bid), float(ask)))
    return quotes


def read_curve_csv(path) -> DiscountCurve:
    """Load a discount curve from CSV with header tenor_yf,discount_factor."""
    pillars = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != CURVE_HEADER:
            raise ValueError(f"expected header {','.join(CURVE_HEADER)} in {path}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 fields, got {len(row)}")
            pillars.append((float(row[0]), float(row[1])))
    return DiscountCurve(pillars)


def group_by_expiry(quotes) -> dict[float, list[OptionQuote]]:
    """Quotes keyed by expiry, keys in increasing order."""
    grouped: dict[float, list[OptionQuote]] = {}
    for q in quotes:
        grouped.setdefault(q.expiry, []).append(q)
    return {t: grouped[t] for t in sorted(grouped)}


def grid_step(quotes) -> float:
    """Minimum spacing of the strike grid; 0 when fewer than two distinct strikes."""
    strikes = sorted({q.strike for q in quotes})
    if len(strikes) < 2:
        return 0.0
    return min(b - a for a, b in zip(strikes, strikes[1:]))


def liquidity_filter(quotes, strike_step: float) -> list[OptionQuote]:
    """Drop penny options and quotes with missing or too-wide sides.

    Removes quotes with mid below 10% of the strike-grid step, with a
    zero bid (missing side), or with relative spread (ask-bid)/bid
    strictly above 60%.  Idempotent for a fixed step.
    """
    if strike_step < 0:
        raise ValueError(f"strike_step must be >= 0, got {strike_step}")
    kept = []
    for q in quotes:
        if q.mid < 0.10 * strike_step:
            continue
        if q.bid == 0:
            continue
        if (q.ask - q.bid) / q.bid > 0.60:
            continue
        kept.append(q)
    return kept


def parity_forward(call: OptionQuote, put: OptionQuote, discount: float):
    """Forward (bid, ask, mid) implied by a call/put pair at one strike."""
    if not call.is_call or put.is_call:
        raise ValueError("parity_forward needs a call and a put, in that order")
    if call.expiry != put.expiry or call.strike != put.strike:
        raise ValueError("call and put must share expiry and strike")
    check_positive(discount, "discount")
    fwd_bid = (call.bid - put.ask) / discount + call.strike
    fwd_ask = (call.ask - put.bid) / discount + call.strike
    return fwd_bid, fwd_ask, 0.5 * (fwd_bid + fwd_ask)


def _paired_intervals(quotes, discount):
    by_key: dict[tuple[float, bool], OptionQuote] = {}
    for q in quotes:
        key = (q.strike, q.is_call)
        if key in by_key:
            raise ValueError(f"duplicate quote for strike {q.strike} side {q.side}")
        by_key[key] = q
    intervals = {}
    for (strike, is_call) in by_key:
        if not is_call:
            continue
        put = by_key.get((strike, False))
        if put is None:
            continue
        b, a, _ = parity_forward(by_key[(strike, True)], put, discount)
        intervals[strike] = (b, a)
    return intervals


def synthetic_forward(quotes, discount: float, anchor: float) -> SyntheticForward:
    """Iterated parity-interval forward for the quotes of one expiry.

    Quotes are assumed already filtered.  The walk starts at the strike
    nearest `anchor` (ties toward the lower strike) and alternates
    superior/inferior outward; at equal distance the superior strike is
    visited first.
    """
    quotes = list(quotes)
    if not quotes:
        raise NoValidStrikeError("no quotes at this expiry")
    expiry = quotes[0].expiry
    if any(q.expiry != expiry for q in quotes):
        raise ValueError("synthetic_forward operates on a single expiry")
    check_positive(anchor, "anchor")

    intervals = _paired_intervals(quotes, discount)
    if not intervals:
        raise NoValidStrikeError(
            f"no strike with both call and put at expiry {expiry}"
        )
    strikes = sorted(intervals)
    # nearest strike; exact distance tie resolves to the lower strike
    start = min(range(len(strikes)), key=lambda i: (abs(strikes[i] - anchor), strikes[i]))
    superior = strikes[start + 1:]
    inferior = strikes[start - 1::-1] if start > 0 else []
    order = []
    for i in range(max(len(superior), len(inferior))):
        if i < len(superior):
            order.append(superior[i])
        if i < len(inferior):
            order.append(inferior[i])

    bid, ask = intervals[strikes[start]]
    mid = 0.5 * (bid + ask)
    used = [strikes[start]]
    discarded = []
    for strike in order:
        b_k, a_k = intervals[strike]
        if b_k <= mid <= a_k:
            bid = max(bid, b_k)
            ask = min(ask, a_k)
            mid = 0.5 * (bid + ask)
            used.append(strike)
        else:
            discarded.append(strike)
    return SyntheticForward(expiry, bid, ask, mid, tuple(used), tuple(discarded))


def build_forwards(quotes, curve: DiscountCurve, spot: float) -> list[SyntheticForward]:
    """Filter each expiry and chain synthetic forwards across maturities.

    The strike-grid step is measured on the raw chain of the expiry;
    the anchor is the spot for the shortest expiry and the previous
    forward mid afterwards.
    """
    check_positive(spot, "spot")
    forwards = []
    anchor = spot
    for expiry, chain in group_by_expiry(quotes).items():
        filtered = liquidity_filter(chain, grid_step(chain))
        try:
            fwd = synthetic_forward(filtered, curve.discount_factor(expiry), anchor)
        except NoValidStrikeError as exc:
            raise NoValidStrikeError(f"expiry {expiry}: {exc}") from exc
        forwards.append(fwd)
        anchor = fwd.fwd_mid
    return forwards


def moneyness(strike: float, forward: float) -> float:
    """Log-moneyness ln(K / F0)."""
    check_positive(strike, "strike")
    check_positive(forward, "forward")
    return math.log(strike / forward)
