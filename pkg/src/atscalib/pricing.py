"""Characteristic-function option pricing and Black-76 utilities.

Calls are priced from the characteristic function of the forward
log-return with the Lewis representation

    C(K, T) = B_T F_0 (1 - e^(x/2) I(x)),
    I(x) = (1/pi) int_0^inf Re[e^(i z x) cf(-z - i/2)] / (z^2 + 1/4) dz,

where x = ln(K / F_0).  The integrand is the even real part of a
Hermitian function, which is why the half line suffices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import roots_legendre
from scipy.stats import norm

__all__ = [
    "QuadratureError",
    "InversionError",
    "OptionSpec",
    "QuadratureConfig",
    "lewis_call",
    "lewis_call_batch",
    "put_from_parity",
    "black_price",
    "implied_vol",
]


class QuadratureError(RuntimeError):
    """The integrand tail never dropped below tolerance at any admissible truncation."""


class InversionError(ValueError):
    """Price not attainable by any volatility inside the search bracket."""


@dataclass(frozen=True)
class OptionSpec:
    """One European option: strike, year-fraction expiry and call/put flag."""

    strike: float
    expiry: float
    is_call: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.strike) and self.strike > 0):
            raise ValueError(f"strike must be positive, got {self.strike}")
        if not (np.isfinite(self.expiry) and self.expiry > 0):
            raise ValueError(f"expiry must be positive, got {self.expiry}")


@dataclass(frozen=True)
class QuadratureConfig:
    """Fixed-node rule for the Lewis integral.

    `truncation` is the starting half-width of the z range.  The actual
    range is the smallest member of the ladder truncation * 2^m,
    m in [-5, 10], whose endpoint integrand magnitude falls below
    `tail_tol`; growing past the ladder raises QuadratureError.  The
    range is then covered by geometric panels (edges 0, 5, 20, 80, ...)
    so the 1/(z^2 + 1/4) core keeps its own narrow panel, with the node
    budget split evenly across panels.
    """

    truncation: float = 200.0
    nodes: int = 2048
    scheme: str = "gauss-legendre"
    tail_tol: float = 1e-12

    def __post_init__(self):
        if not self.truncation > 0:
            raise ValueError(f"truncation must be positive, got {self.truncation}")
        if self.nodes < 64:
            raise ValueError(f"need at least 64 nodes, got {self.nodes}")
        if self.scheme not in ("gauss-legendre", "trapezoid"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.tail_tol > 0:
            raise ValueError(f"tail_tol must be positive, got {self.tail_tol}")


DEFAULT_QUADRATURE = QuadratureConfig()

_gl_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(n: int):
    if n not in _gl_cache:
        _gl_cache[n] = roots_legendre(n)
    return _gl_cache[n]


def _tail_magnitude(cf, z: float) -> float:
    return abs(cf(-z - 0.5j)) / (z * z + 0.25)


def _truncation_width(cf, quad: QuadratureConfig) -> float:
    width = float(quad.truncation)
    if _tail_magnitude(cf, width) < quad.tail_tol:
        steps = 0
        while steps < 5 and _tail_magnitude(cf, width / 2.0) < quad.tail_tol:
            width /= 2.0
            steps += 1
        return width
    for _ in range(10):
        width *= 2.0
        if _tail_magnitude(cf, width) < quad.tail_tol:
            return width
    raise QuadratureError(
        f"integrand magnitude at truncation {width:g} still {_tail_magnitude(cf, width):.3g}, "
        f"above the tail tolerance {quad.tail_tol:g}"
    )


def _panel_grid(width: float, quad: QuadratureConfig):
    edges = [0.0]
    b = 5.0
    while b < width:
        edges.append(b)
        b *= 4.0
    edges.append(width)
    per_panel = max(64, quad.nodes // (len(edges) - 1))
    zs, ws = [], []
    if quad.scheme == "gauss-legendre":
        zn, wn = _gauss_legendre(per_panel)
        for lo, hi in zip(edges, edges[1:]):
            half = 0.5 * (hi - lo)
            zs.append(half * (zn + 1.0) + lo)
            ws.append(half * wn)
    else:  # trapezoid
        for lo, hi in zip(edges, edges[1:]):
            z = np.linspace(lo, hi, per_panel)
            w = np.full(per_panel, (hi - lo) / (per_panel - 1))
            w[0] *= 0.5
            w[-1] *= 0.5
            zs.append(z)
            ws.append(w)
    return np.concatenate(zs), np.concatenate(ws)


def lewis_call_batch(cf, forward: float, discount: float, strikes,
                     quad: QuadratureConfig = DEFAULT_QUADRATURE) -> np.ndarray:
    """Price calls at several strikes off one shared quadrature grid.

    `cf` is the characteristic function of the forward log-return at the
    relevant expiry, vectorized over complex arguments.
    """
    if not forward > 0:
        raise ValueError(f"forward must be positive, got {forward}")
    if not discount > 0:
        raise ValueError(f"discount must be positive, got {discount}")
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    if np.any(strikes <= 0) or not np.all(np.isfinite(strikes)):
        raise ValueError("strikes must be positive and finite")

    width = _truncation_width(cf, quad)
    z, w = _panel_grid(width, quad)
    x = np.log(strikes / forward)
    cf_vals = np.asarray(cf(-z - 0.5j))
    integrand = np.real(np.exp(1j * np.outer(z, x)) * cf_vals[:, None])
    integrand /= (z * z + 0.25)[:, None]
    integral = (w @ integrand) / math.pi
    prices = discount * forward * (1.0 - np.exp(x / 2.0) * integral)

    # 0 <= C <= B_T F_0, allow only rounding-level violations
    cap = discount * forward
    slack = 1e-12 * max(1.0, cap)
    if np.any(prices < -slack) or np.any(prices > cap + slack):
        raise QuadratureError(
            f"price bounds violated beyond rounding (min {prices.min():.6g}, "
            f"max {prices.max():.6g}, cap {cap:.6g}); quadrature unreliable"
        )
    return np.clip(prices, 0.0, cap)


def lewis_call(cf, forward: float, discount: float, spec: OptionSpec,
               quad: QuadratureConfig = DEFAULT_QUADRATURE) -> float:
    """Call price for a single OptionSpec; `cf` must belong to spec.expiry."""
    if not spec.is_call:
        raise ValueError("lewis_call prices calls; build puts with put_from_parity")
    return float(lewis_call_batch(cf, forward, discount, [spec.strike], quad)[0])


def put_from_parity(call_price: float, forward: float, discount: float,
                    strike: float) -> float:
    """European put from the call at the same strike, P = C - B_T (F_0 - K)."""
    return call_price - discount * (forward - strike)


def black_price(forward: float, strike: float, expiry: float, sigma: float,
                discount: float = 1.0, is_call: bool = True) -> float:
    """Black-76 price on the forward; sigma = 0 collapses to intrinsic value."""
    if not (forward > 0 and strike > 0):
        raise ValueError("forward and strike must be positive")
    if not expiry > 0:
        raise ValueError(f"expiry must be positive, got {expiry}")
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if sigma == 0:
        payoff = forward - strike if is_call else strike - forward
        return discount * max(payoff, 0.0)
    s = sigma * math.sqrt(expiry)
    d1 = math.log(forward / strike) / s + 0.5 * s
    d2 = d1 - s
    if is_call:
        return discount * (forward * norm.cdf(d1) - strike * norm.cdf(d2))
    return discount * (strike * norm.cdf(-d2) - forward * norm.cdf(-d1))


_IV_BRACKET = (1e-6, 5.0)
_INTRINSIC_SLACK = 1e-9


def implied_vol(price: float, forward: float, strike: float, expiry: float,
                discount: float = 1.0, is_call: bool = True) -> float:
    """Invert Black-76 with a bracketed root search on sigma in [1e-6, 5].

    Prices below intrinsic by less than 1e-9 are treated as intrinsic
    (returns 0.0, numerical noise from upstream quadrature); anything
    else outside the attainable range raises InversionError.
    """
    payoff = forward - strike if is_call else strike - forward
    intrinsic = discount * max(payoff, 0.0)
    upper = discount * forward if is_call else discount * strike
    if price < intrinsic:
        if intrinsic - price < _INTRINSIC_SLACK:
            return 0.0
        raise InversionError(
            f"price {price} below intrinsic value {intrinsic}"
        )
    if price == intrinsic:
        return 0.0
    if price >= upper:
        raise InversionError(f"price {price} at or above the upper bound {upper}")

    lo, hi = _IV_BRACKET
    f = lambda s: black_price(forward, strike, expiry, s, discount, is_call) - price
    f_lo = f(lo)
    if f_lo >= 0:
        if f_lo == 0:
            return lo
        raise InversionError(
            f"price {price} below the minimum attainable at sigma = {lo}"
        )
    f_hi = f(hi)
    if f_hi <= 0:
        if f_hi == 0:
            return hi
        raise InversionError(
            f"price {price} above the maximum attainable at sigma = {hi}"
        )
    return float(brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps))
