"""Surface calibration for the Levy, Sato and additive model families.

Per-slice fits minimize the squared distance between model and mid
prices over (sigma_T, k_T, eta_T) with the stability index fixed.  The
additive family calibrates slices sequentially in maturity, penalizing
candidates whose g1/g2/g3 values decrease versus the previous slice.
Parameter covariances come from the nonlinear-regression sandwich with
price variances read off the bid-ask spreads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import differential_evolution as _scipy_de
from scipy.optimize import minimize

from .market import (
    DiscountCurve,
    build_forwards,
    grid_step,
    group_by_expiry,
    liquidity_filter,
)
from .models import (
    DomainError,
    SatoParams,
    TemperedStableSlice,
    _g1_g2,
    _g3_log,
    ats_cf,
    check_existence,
    sato_cf,
)
from .pricing import DEFAULT_QUADRATURE, QuadratureError, lewis_call_batch

__all__ = [
    "InsufficientQuotesError",
    "RankDeficiencyError",
    "OptimizerConfig",
    "SliceFit",
    "CalibrationResult",
    "objective",
    "nelder_mead",
    "differential_evolution",
    "calibrate_slice",
    "calibrate_surface",
    "price_jacobian",
    "param_covariance",
]

# generous envelopes around equity-index magnitudes
SIGMA_BOUNDS = (0.01, 2.0)
K_BOUNDS = (1e-4, 50.0)
ETA_BOUNDS = (-5.0, 20.0)
GAMMA_BOUNDS = (0.01, 1.5)

_PENALTY_WEIGHT = 1e6
_INFEASIBLE = 1e12


class InsufficientQuotesError(ValueError):
    """Fewer quotes than needed to identify the slice parameters."""


class RankDeficiencyError(RuntimeError):
    """Jacobian without full column rank; covariance not identified."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Budgets and seed for the simplex and evolutionary stages."""

    max_iterations: int = 1000
    tolerance: float = 1e-10
    population_size: int = 15
    restarts: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations <= 0 or self.population_size <= 0 or self.restarts <= 0:
            raise ValueError("iteration, population and restart counts must be positive")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")


DEFAULT_OPTIMIZER = OptimizerConfig()


@dataclass(frozen=True)
class SliceFit:
    """One calibrated maturity slice with covariance and fit metrics.

    `covariance` is ordered (k_T, sigma_T^2, eta_T).  `penalty` is the
    monotonicity-violation term left at the optimum (0 when the slice
    sequence is feasible).  Failed slices carry ok=False, slice=None and
    the reason in `message`.
    """

    expiry: float
    slice: TemperedStableSlice | None
    covariance: np.ndarray | None
    mse: float
    mape: float
    objective_value: float
    penalty: float
    n_quotes: int
    ok: bool = True
    message: str = ""


@dataclass(frozen=True)
class CalibrationResult:
    family: str
    alpha: float
    per_slice: tuple[SliceFit, ...]
    mse: float
    mape: float
    condition_report: object = None
    global_params: object = None
    diagnostics: dict = field(default_factory=dict)


def _model_prices(cf, forward, discount, quotes, quad):
    strikes = np.array([q.strike for q in quotes])
    calls = lewis_call_batch(cf, forward, discount, strikes, quad)
    is_call = np.array([q.is_call for q in quotes])
    # puts by parity at the shared forward
    return np.where(is_call, calls, calls - discount * (forward - strikes))


def objective(slice_, quotes, forward, discount, quad=DEFAULT_QUADRATURE) -> float:
    """Sum of squared model-minus-mid price errors over calls and puts."""
    prices = _model_prices(lambda u: ats_cf(u, slice_), forward, discount, quotes, quad)
    mids = np.array([q.mid for q in quotes])
    return float(np.sum((prices - mids) ** 2))


def nelder_mead(f, x0, config: OptimizerConfig = DEFAULT_OPTIMIZER):
    """Simplex descent with the standard 1 / 2 / 0.5 / 0.5 coefficients.

    Stops when both the simplex diameter and the f spread drop below the
    configured tolerance or the iteration budget runs out.
    """
    res = minimize(
        f,
        np.asarray(x0, dtype=float),
        method="Nelder-Mead",
        options=dict(
            maxiter=config.max_iterations,
            xatol=config.tolerance,
            fatol=config.tolerance,
            adaptive=False,
        ),
    )
    return np.asarray(res.x, dtype=float), float(res.fun)


def _polish_starts(x_best, bounds, config):
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    rng = np.random.default_rng(config.seed + 1)
    starts = [np.asarray(x_best, dtype=float)]
    for _ in range(config.restarts):
        step = rng.normal(0.0, 0.1, size=len(bounds)) * (hi - lo)
        starts.append(np.clip(x_best + step, lo, hi))
    return lo, hi, starts


def differential_evolution(f, bounds, config: OptimizerConfig = DEFAULT_OPTIMIZER):
    """Global rand/1/bin evolutionary search plus multi-start simplex polish.

    F = 0.8, CR = 0.9; the best member and `restarts` seeded
    perturbations of it are refined by nelder_mead, best point wins.
    Deterministic for a fixed seed.
    """
    result = _scipy_de(
        f,
        bounds,
        strategy="rand1bin",
        maxiter=config.max_iterations,
        popsize=config.population_size,
        tol=0.01,
        mutation=0.8,
        recombination=0.9,
        seed=config.seed,
        polish=False,
        init="latinhypercube",
    )
    lo, hi, starts = _polish_starts(result.x, bounds, config)

    def f_boxed(x):
        xc = np.clip(x, lo, hi)
        return f(xc) + 1e8 * float(np.sum((x - xc) ** 2))

    best_x, best_f = np.asarray(result.x, dtype=float), float(result.fun)
    for x0 in starts:
        x, fval = _refined_nelder_mead(f_boxed, x0, config)
        x = np.clip(x, lo, hi)
        fval = f(x)
        if fval < best_f:
            best_x, best_f = x, float(fval)
    return best_x, best_f


def _refined_nelder_mead(f, x0, config):
    """Restart the simplex from its own endpoint until it stops improving."""
    x, fval = nelder_mead(f, x0, config)
    for _ in range(2):
        x2, f2 = nelder_mead(f, x, config)
        if fval - f2 < max(config.tolerance, 1e-14 * (1.0 + abs(fval))):
            return x2, min(fval, f2)
        x, fval = x2, f2
    return x, fval


def _monotonicity_penalty(candidate: TemperedStableSlice,
                          prev: TemperedStableSlice | None) -> float:
    """Squared decrease of g1, g2 and log-scale g3 versus the previous slice."""
    if prev is None:
        return 0.0
    pen = 0.0
    g1p, g2p = _g1_g2(prev)
    g1c, g2c = _g1_g2(candidate)
    for before, after in ((g1p, g1c), (g2p, g2c), (_g3_log(prev), _g3_log(candidate))):
        pen += max(0.0, before - after) ** 2
    return pen


def _atm_vol_guess(quotes, forward, discount):
    from .pricing import InversionError, implied_vol

    calls = [q for q in quotes if q.is_call]
    if not calls:
        return 0.2
    atm = min(calls, key=lambda q: abs(q.strike - forward))
    try:
        iv = implied_vol(atm.mid, forward, atm.strike, atm.expiry, discount)
    except InversionError:
        return 0.2
    return iv if 0.01 < iv < 2.0 else 0.2


def calibrate_slice(quotes, forward, discount, alpha,
                    prev: TemperedStableSlice | None = None,
                    config: OptimizerConfig = DEFAULT_OPTIMIZER,
                    quad=DEFAULT_QUADRATURE,
                    x0=None) -> SliceFit:
    """Fit (sigma_T, k_T, eta_T) of one maturity slice at fixed alpha.

    Optimizes in (ln sigma, ln k, eta) coordinates by multi-start
    simplex; infeasible parameter points and pricing failures are
    assigned a large objective value instead of raising.  `x0` optionally
    seeds the search with a (sigma, k, eta) triple, e.g. the previous
    slice's fit.
    """
    quotes = list(quotes)
    if len(quotes) < 4:
        raise InsufficientQuotesError(
            f"need at least 4 quotes to fit 3 parameters, got {len(quotes)}"
        )
    expiry = quotes[0].expiry
    if any(q.expiry != expiry for q in quotes):
        raise ValueError("calibrate_slice operates on a single expiry")
    mids = np.array([q.mid for q in quotes])

    def unpack(x):
        return math.exp(x[0]), math.exp(x[1]), x[2]

    def wrapped(x):
        sigma, k, eta = unpack(x)
        if not (SIGMA_BOUNDS[0] <= sigma <= SIGMA_BOUNDS[1]
                and K_BOUNDS[0] <= k <= K_BOUNDS[1]
                and ETA_BOUNDS[0] <= eta <= ETA_BOUNDS[1]):
            return _INFEASIBLE
        try:
            cand = TemperedStableSlice(t=expiry, sigma=sigma, k=k, eta=eta, alpha=alpha)
            prices = _model_prices(lambda u: ats_cf(u, cand), forward, discount,
                                   quotes, quad)
        except (DomainError, QuadratureError, ValueError, OverflowError):
            return _INFEASIBLE
        sse = float(np.sum((prices - mids) ** 2))
        return sse + _PENALTY_WEIGHT * _monotonicity_penalty(cand, prev)

    vol0 = _atm_vol_guess(quotes, forward, discount)
    starts = []
    if x0 is not None:
        starts.append(np.array([math.log(x0[0]), math.log(x0[1]), x0[2]]))
    starts.append(np.array([math.log(vol0), math.log(0.2), 1.0]))
    rng = np.random.default_rng(config.seed + 2)
    base = starts[0]
    for _ in range(config.restarts):
        starts.append(base + rng.normal(0.0, [0.4, 0.8, 0.5]))

    best_x, best_f = None, np.inf
    for s in starts:
        x, fval = _refined_nelder_mead(wrapped, s, config)
        if fval < best_f:
            best_x, best_f = x, fval
    if best_x is None or best_f >= _INFEASIBLE:
        raise RuntimeError(f"no feasible slice parameters found at expiry {expiry}")

    sigma, k, eta = unpack(best_x)
    fitted = TemperedStableSlice(t=expiry, sigma=sigma, k=k, eta=eta, alpha=alpha)
    penalty = _PENALTY_WEIGHT * _monotonicity_penalty(fitted, prev)
    prices = _model_prices(lambda u: ats_cf(u, fitted), forward, discount, quotes, quad)
    errors = prices - mids
    try:
        jac = price_jacobian(fitted, quotes, forward, discount, quad)
        spreads = np.array([q.ask - q.bid for q in quotes])
        cov = param_covariance(jac, np.eye(len(quotes)), np.diag(spreads**2 / 16.0))
    except RankDeficiencyError:
        cov = None
    return SliceFit(
        expiry=expiry,
        slice=fitted,
        covariance=cov,
        mse=float(np.mean(errors**2)),
        mape=float(np.mean(np.abs(errors) / mids)),
        objective_value=best_f,
        penalty=penalty,
        n_quotes=len(quotes),
    )


def price_jacobian(slice_: TemperedStableSlice, quotes, forward, discount,
                   quad=DEFAULT_QUADRATURE) -> np.ndarray:
    """Central-difference price sensitivities to (k, sigma^2, eta).

    Relative step 1e-5 with absolute floor 1e-8, balancing truncation
    against quadrature noise.  A put moves exactly like its call
    (parity at fixed forward), so rows differ only through the strike.
    """
    params = np.array([slice_.k, slice_.sigma**2, slice_.eta])

    def rebuild(p):
        return TemperedStableSlice(t=slice_.t, sigma=math.sqrt(p[1]), k=p[0],
                                   eta=p[2], alpha=slice_.alpha)

    cols = []
    for j in range(3):
        h = max(1e-5 * abs(params[j]), 1e-8)
        up, dn = params.copy(), params.copy()
        up[j] += h
        dn[j] -= h
        p_up = _model_prices(lambda u: ats_cf(u, rebuild(up)), forward, discount,
                             quotes, quad)
        p_dn = _model_prices(lambda u: ats_cf(u, rebuild(dn)), forward, discount,
                             quotes, quad)
        cols.append((p_up - p_dn) / (2.0 * h))
    return np.column_stack(cols)


def param_covariance(jacobian: np.ndarray, weights: np.ndarray,
                     price_cov: np.ndarray) -> np.ndarray:
    """Sandwich covariance (F'WF)^-1 F'W Sigma W'F (F'WF)^-1 of the fit.

    `price_cov` is the price noise covariance, diagonal with entries
    (ask - bid)^2 / 16 in the intended use.  Raises RankDeficiencyError
    when the jacobian does not have full column rank.
    """
    F = np.asarray(jacobian, dtype=float)
    W = np.asarray(weights, dtype=float)
    S = np.asarray(price_cov, dtype=float)
    if F.ndim != 2 or F.shape[0] < F.shape[1]:
        raise RankDeficiencyError(f"jacobian shape {F.shape} cannot have full column rank")
    G = F.T @ W @ F
    if np.linalg.matrix_rank(F, tol=None) < F.shape[1] or np.linalg.cond(G) > 1e14:
        raise RankDeficiencyError("jacobian is rank deficient; parameters not identified")
    A = np.linalg.solve(G, F.T @ W)
    cov = A @ S @ A.T
    return 0.5 * (cov + cov.T)


def _sato_equivalent_slice(params: SatoParams, t: float) -> TemperedStableSlice:
    # unit-time slice with the exact same law as the Sato marginal at t
    s = t**params.gamma
    return TemperedStableSlice(
        t=1.0,
        sigma=params.sigma * s,
        k=params.k,
        eta=(0.5 + params.eta) / s - 0.5,
        alpha=params.alpha,
    )


def _slice_tables(quotes, curve: DiscountCurve, spot: float):
    forwards = build_forwards(quotes, curve, spot)
    fwd_by_expiry = {f.expiry: f for f in forwards}
    tables = []
    for expiry, chain in group_by_expiry(quotes).items():
        filtered = liquidity_filter(chain, grid_step(chain))
        if not filtered:
            continue
        tables.append((expiry, filtered, fwd_by_expiry[expiry].fwd_mid,
                       curve.discount_factor(expiry)))
    return tables


def _aggregate(tables, cf_for, quad):
    sq, ape, n = 0.0, 0.0, 0
    for expiry, quotes, forward, discount in tables:
        cf = cf_for(expiry)
        if cf is None:
            continue
        prices = _model_prices(cf, forward, discount, quotes, quad)
        mids = np.array([q.mid for q in quotes])
        sq += float(np.sum((prices - mids) ** 2))
        ape += float(np.sum(np.abs(prices - mids) / mids))
        n += len(quotes)
    if n == 0:
        return math.nan, math.nan
    return sq / n, ape / n


def _global_sse(tables, cf_factory, quad):
    total = 0.0
    for expiry, quotes, forward, discount in tables:
        try:
            prices = _model_prices(cf_factory(expiry), forward, discount, quotes, quad)
        except (DomainError, QuadratureError, ValueError, OverflowError):
            return _INFEASIBLE
        mids = np.array([q.mid for q in quotes])
        total += float(np.sum((prices - mids) ** 2))
    return total


def _per_slice_fit(slice_, expiry, quotes, forward, discount, quad):
    prices = _model_prices(lambda u: ats_cf(u, slice_), forward, discount, quotes, quad)
    mids = np.array([q.mid for q in quotes])
    errors = prices - mids
    try:
        jac = price_jacobian(slice_, quotes, forward, discount, quad)
        spreads = np.array([q.ask - q.bid for q in quotes])
        cov = param_covariance(jac, np.eye(len(quotes)), np.diag(spreads**2 / 16.0))
    except RankDeficiencyError:
        cov = None
    return SliceFit(
        expiry=expiry,
        slice=slice_,
        covariance=cov,
        mse=float(np.mean(errors**2)),
        mape=float(np.mean(np.abs(errors) / mids)),
        objective_value=float(np.sum(errors**2)),
        penalty=0.0,
        n_quotes=len(quotes),
    )


def calibrate_surface(quotes, curve: DiscountCurve, spot: float, family: str,
                      alpha: float,
                      config: OptimizerConfig = DEFAULT_OPTIMIZER,
                      quad=DEFAULT_QUADRATURE) -> CalibrationResult:
    """Calibrate a whole surface in one of the three families.

    ATS fits slices sequentially in maturity, passing each fit as the
    monotonicity reference of the next; LTS and Sato run one global
    evolutionary search over all expiries.  Slice failures in the ATS
    chain are recorded with ok=False and skipped, not raised.
    """
    family = family.upper()
    if family not in ("ATS", "LTS", "SATO"):
        raise ValueError(f"family must be ATS, LTS or SATO, got {family!r}")
    if not (0 <= alpha < 1):
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    tables = _slice_tables(quotes, curve, spot)
    if not tables:
        raise InsufficientQuotesError("no quotes survived the liquidity filter")

    if family == "ATS":
        fits = []
        prev = None
        warm = None
        for expiry, chain, forward, discount in tables:
            try:
                fit = calibrate_slice(chain, forward, discount, alpha, prev=prev,
                                      config=config, quad=quad, x0=warm)
                prev = fit.slice
                warm = (fit.slice.sigma, fit.slice.k, fit.slice.eta)
            except (InsufficientQuotesError, RuntimeError) as exc:
                fit = SliceFit(expiry=expiry, slice=None, covariance=None,
                               mse=math.nan, mape=math.nan,
                               objective_value=math.nan, penalty=math.nan,
                               n_quotes=len(chain), ok=False, message=str(exc))
            fits.append(fit)
        slices = [f.slice for f in fits if f.ok]
        report = check_existence(slices) if len(slices) >= 1 else None
        by_expiry = {f.expiry: f.slice for f in fits if f.ok}
        mse, mape = _aggregate(
            tables,
            lambda T: (lambda u: ats_cf(u, by_expiry[T])) if T in by_expiry else None,
            quad,
        )
        return CalibrationResult(
            family="ATS", alpha=alpha, per_slice=tuple(fits), mse=mse, mape=mape,
            condition_report=report,
            diagnostics={"n_slices": len(fits), "n_failed": sum(not f.ok for f in fits),
                         "seed": config.seed},
        )

    if family == "LTS":
        bounds = [SIGMA_BOUNDS, K_BOUNDS, ETA_BOUNDS]

        def f(x):
            sigma, k, eta = x

            def factory(T):
                return lambda u: ats_cf(u, TemperedStableSlice(
                    t=T, sigma=sigma, k=k, eta=eta, alpha=alpha))

            try:
                return _global_sse(tables, factory, quad)
            except (DomainError, ValueError, OverflowError):
                return _INFEASIBLE

        x, fval = differential_evolution(f, bounds, config)
        sigma, k, eta = x
        fits = [
            _per_slice_fit(
                TemperedStableSlice(t=T, sigma=sigma, k=k, eta=eta, alpha=alpha),
                T, chain, forward, discount, quad)
            for T, chain, forward, discount in tables
        ]
        report = check_existence([f.slice for f in fits])
        by_expiry = {f.expiry: f.slice for f in fits}
        mse, mape = _aggregate(tables,
                               lambda T: (lambda u: ats_cf(u, by_expiry[T])), quad)
        return CalibrationResult(
            family="LTS", alpha=alpha, per_slice=tuple(fits), mse=mse, mape=mape,
            condition_report=report,
            global_params={"sigma": float(sigma), "k": float(k), "eta": float(eta)},
            diagnostics={"objective": fval, "seed": config.seed},
        )

    # Sato
    bounds = [SIGMA_BOUNDS, K_BOUNDS, ETA_BOUNDS, GAMMA_BOUNDS]

    def f(x):
        sigma, k, eta, gamma = x
        try:
            params = SatoParams(sigma=sigma, k=k, eta=eta, alpha=alpha, gamma=gamma)
        except (DomainError, ValueError):
            return _INFEASIBLE

        def factory(T):
            return lambda u: sato_cf(u, T, params)

        return _global_sse(tables, factory, quad)

    x, fval = differential_evolution(f, bounds, config)
    params = SatoParams(sigma=float(x[0]), k=float(x[1]), eta=float(x[2]),
                        alpha=alpha, gamma=float(x[3]))
    fits = [
        _per_slice_fit(_sato_equivalent_slice(params, T), T, chain, forward,
                       discount, quad)
        for T, chain, forward, discount in tables
    ]
    cf_by_expiry = {T: (lambda u, T=T: sato_cf(u, T, params)) for T, *_ in tables}
    mse, mape = _aggregate(tables, lambda T: cf_by_expiry[T], quad)
    return CalibrationResult(
        family="SATO", alpha=alpha, per_slice=tuple(fits), mse=mse, mape=mape,
        condition_report=None,
        global_params={"sigma": params.sigma, "k": params.k, "eta": params.eta,
                       "gamma": params.gamma},
        diagnostics={"objective": fval, "seed": config.seed},
    )
