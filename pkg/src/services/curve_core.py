"""
Smith-Wilson curve service.

Wilson kernel evaluation, curve fitting, discounting and yield reconstruction.
Yields are continuously-compounded zero rates in decimal units; prices are
m = exp(-y * u).
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import linalg

from ..errors import CurveFitError, DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

# Relative condition-number guard for the Gram matrix
CONDITION_LIMIT = 1e12


def _check_alpha(alpha: float) -> None:
    if not np.isfinite(alpha) or alpha <= 0:
        raise DomainError(f"alpha must be positive and finite, got {alpha}")


def _as_finite(values: ArrayLike, name: str) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(array)):
        raise DomainError(f"{name} contains non-finite values")
    return array


@dataclass(frozen=True)
class TermGrid:
    """Strictly increasing positive maturities in years."""

    maturities: tuple

    def __post_init__(self):
        values = np.asarray(self.maturities, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise DomainError("A term grid needs at least one maturity")
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise DomainError("Maturities must be positive and finite")
        if np.any(np.diff(values) <= 0):
            raise DomainError("Maturities must be strictly increasing")
        object.__setattr__(self, 'maturities', tuple(float(v) for v in values))

    @property
    def u(self) -> np.ndarray:
        return np.asarray(self.maturities, dtype=float)

    def __len__(self) -> int:
        return len(self.maturities)


@dataclass
class QuotePanel:
    """
    Dated cross-sections of continuously-compounded zero rates.

    ``yields`` is indexed by date with one column per maturity (years).
    """

    yields: pd.DataFrame
    grid: TermGrid = field(init=False)

    def __post_init__(self):
        if self.yields.empty:
            raise DomainError("A quote panel needs at least one date")
        if self.yields.isna().any().any():
            raise DomainError("Quote panel has missing cells")
        if not self.yields.index.is_monotonic_increasing or self.yields.index.has_duplicates:
            raise DomainError("Quote panel dates must be strictly increasing")
        self.yields = self.yields.astype(float)
        self.yields.columns = [float(c) for c in self.yields.columns]
        self.grid = TermGrid(tuple(self.yields.columns))

    @property
    def dates(self) -> pd.Index:
        return self.yields.index

    def __len__(self) -> int:
        return len(self.yields)

    def prices(self, date) -> np.ndarray:
        """Zero-coupon prices exp(-y * u) on a given date."""
        return np.exp(-self.yields.loc[date].to_numpy() * self.grid.u)

    def subset(self, dates) -> 'QuotePanel':
        return QuotePanel(self.yields.loc[dates].copy())


def annual_to_continuous(rate: ArrayLike) -> ArrayLike:
    """Annually-compounded rate to continuous: ln(1 + r)."""
    rate = np.asarray(rate, dtype=float)
    if np.any(rate <= -1):
        raise DomainError("Annual rate must exceed -1")
    result = np.log1p(rate)
    return float(result) if result.ndim == 0 else result


def continuous_to_annual(rate: ArrayLike) -> ArrayLike:
    """Continuous rate to annually-compounded: exp(f) - 1."""
    result = np.expm1(np.asarray(rate, dtype=float))
    return float(result) if result.ndim == 0 else result


def wilson_h(t: ArrayLike, u: ArrayLike, alpha: float) -> ArrayLike:
    """
    Heart of the Wilson function.

    H(t, u) = alpha * min(t, u) - exp(-alpha * max(t, u)) * sinh(alpha * min(t, u)).
    Broadcasts over array inputs.

    Args:
        t: Maturity (years), t >= 0
        u: Maturity (years), u >= 0
        alpha: Convergence speed

    Returns:
        Kernel value(s)
    """
    t = _as_finite(t, 't')
    u = _as_finite(u, 'u')
    _check_alpha(alpha)
    if np.any(t < 0) or np.any(u < 0):
        raise DomainError("Maturities must be non-negative")
    low = np.minimum(t, u)
    high = np.maximum(t, u)
    result = alpha * low - np.exp(-alpha * high) * np.sinh(alpha * low)
    return float(result) if result.ndim == 0 else result


def wilson_w(t: ArrayLike, u: ArrayLike, alpha: float, f_inf: float) -> ArrayLike:
    """Wilson function W(t, u) = exp(-f_inf * (t + u)) * H(t, u)."""
    if not np.isfinite(f_inf):
        raise DomainError("f_inf must be finite")
    heart = wilson_h(t, u, alpha)
    result = np.exp(-f_inf * (np.asarray(t, dtype=float) + np.asarray(u, dtype=float))) * heart
    return float(result) if np.ndim(result) == 0 else result


def wilson_h_matrix(t: np.ndarray, u: np.ndarray, alpha: float) -> np.ndarray:
    """Kernel matrix H[i, j] = H(t_i, u_j)."""
    return np.asarray(wilson_h(np.asarray(t, dtype=float)[:, None], np.asarray(u, dtype=float)[None, :], alpha))


def wilson_wbar(t: ArrayLike, u: float, alpha_bar: float) -> ArrayLike:
    """
    Smoothed kernel used by the forward-rate roughness weights.

    The last term is active only where t <= u.
    """
    t = _as_finite(t, 't')
    _check_alpha(alpha_bar)
    if not np.isfinite(u) or u <= 0:
        raise DomainError(f"u must be positive, got {u}")
    scale = 0.5 * alpha_bar ** 2 * u ** 2
    result = 1.0 - np.exp(-alpha_bar * t) * (np.cosh(alpha_bar * u) - 1.0) / scale
    gap = np.maximum(u - t, 0.0)
    indicator = (np.cosh(alpha_bar * gap) - 1.0 - 0.5 * alpha_bar ** 2 * gap ** 2) / scale
    result = result + np.where(t <= u, indicator, 0.0)
    return float(result) if np.ndim(result) == 0 else result


@dataclass(frozen=True)
class SmithWilsonCurve:
    """Fitted Smith-Wilson curve; immutable after fitting."""

    alpha: float
    f_inf: float
    xi: np.ndarray
    grid: TermGrid
    cashflows: np.ndarray

    @property
    def zeta(self) -> np.ndarray:
        """Kernel weights per grid date, C^T xi."""
        return self.cashflows.T @ self.xi

    @property
    def ufr(self) -> float:
        """Annually-compounded UFR."""
        return float(np.expm1(self.f_inf))


def identity_cashflows(grid: TermGrid) -> np.ndarray:
    return np.eye(len(grid))


def fit_curve(prices: ArrayLike, cashflows: Optional[np.ndarray], grid: TermGrid,
              alpha: float, f_inf: float) -> SmithWilsonCurve:
    """
    Fits the Smith-Wilson weights so the curve reprices the instruments.

    Solves (C D H D C^T) xi = m - C exp(-f_inf * u) with D = diag(exp(-f_inf * u)).

    Args:
        prices: Instrument prices m (length N)
        cashflows: N x J cash flow matrix, identity when None
        grid: Payment dates
        alpha: Convergence speed
        f_inf: Continuously-compounded UFR

    Returns:
        SmithWilsonCurve: Fitted curve

    Raises:
        CurveFitError: Gram matrix is too ill-conditioned
    """
    _check_alpha(alpha)
    if not np.isfinite(f_inf):
        raise DomainError("f_inf must be finite")
    prices = _as_finite(prices, 'prices')
    u = grid.u
    cashflows = identity_cashflows(grid) if cashflows is None else np.asarray(cashflows, dtype=float)
    if cashflows.shape != (prices.size, u.size):
        raise DomainError(f"Cash flow matrix shape {cashflows.shape} does not match {prices.size} prices and {u.size} dates")

    decay = np.exp(-f_inf * u)
    kernel = decay[:, None] * wilson_h_matrix(u, u, alpha) * decay[None, :]
    gram = cashflows @ kernel @ cashflows.T
    condition = np.linalg.cond(gram)
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise CurveFitError("Smith-Wilson system is singular", condition, CONDITION_LIMIT)

    rhs = prices - cashflows @ decay
    xi = linalg.lu_solve(linalg.lu_factor(gram), rhs)
    logger.debug(f"Fitted curve: alpha={alpha:.4f}, f_inf={f_inf:.6f}, cond={condition:.2e}")
    return SmithWilsonCurve(alpha=float(alpha), f_inf=float(f_inf), xi=xi, grid=grid, cashflows=cashflows)


def fit_zero_coupon_curve(yields: ArrayLike, grid: TermGrid, alpha: float, f_inf: float) -> SmithWilsonCurve:
    """Fits a curve to zero-coupon yields (C = identity)."""
    yields = _as_finite(yields, 'yields')
    return fit_curve(np.exp(-yields * grid.u), None, grid, alpha, f_inf)


def discount(curve: SmithWilsonCurve, tau: ArrayLike) -> ArrayLike:
    """Discount factor P(tau) of a fitted curve."""
    tau = _as_finite(tau, 'tau')
    if np.any(tau < 0):
        raise DomainError("tau must be non-negative")
    flat = np.atleast_1d(tau)
    kernel = np.exp(-curve.f_inf * (flat[:, None] + curve.grid.u[None, :])) * wilson_h_matrix(flat, curve.grid.u, curve.alpha)
    result = np.exp(-curve.f_inf * flat) + kernel @ curve.zeta
    return float(result[0]) if tau.ndim == 0 else result


def yield_at(curve: SmithWilsonCurve, tau: ArrayLike) -> ArrayLike:
    """Continuously-compounded zero yield -ln P(tau) / tau, tau > 0."""
    tau = _as_finite(tau, 'tau')
    if np.any(tau <= 0):
        raise DomainError("Yield is undefined at tau <= 0")
    result = -np.log(discount(curve, tau)) / tau
    return float(result) if np.ndim(result) == 0 else result


def curve_yields(curve: SmithWilsonCurve, taus: ArrayLike) -> np.ndarray:
    """Yields at several maturities, always as an array."""
    return np.atleast_1d(yield_at(curve, np.atleast_1d(np.asarray(taus, dtype=float))))


def price_instruments(curve: SmithWilsonCurve, cashflows: Optional[np.ndarray] = None) -> np.ndarray:
    """Prices instruments as C @ P(u)."""
    cashflows = curve.cashflows if cashflows is None else np.asarray(cashflows, dtype=float)
    return cashflows @ np.atleast_1d(discount(curve, curve.grid.u))


def forward_at(curve: SmithWilsonCurve, tau: ArrayLike, step: float = 1e-4) -> ArrayLike:
    """
    Instantaneous forward rate -d ln P / d tau by central differences.

    Args:
        curve: Fitted curve
        tau: Maturity (years), tau >= step
        step: Difference step in years

    Returns:
        Forward rate(s)
    """
    if step <= 0:
        raise DomainError("step must be positive")
    tau = _as_finite(tau, 'tau')
    if np.any(tau < step):
        raise DomainError("tau must be at least one difference step")
    upper = np.log(discount(curve, tau + step))
    lower = np.log(discount(curve, tau - step))
    return -(upper - lower) / (2.0 * step)


def one_year_forward(curve: SmithWilsonCurve, tau: ArrayLike) -> ArrayLike:
    """Discrete forward -ln(P(tau + 1) / P(tau))."""
    tau = _as_finite(tau, 'tau')
    return -(np.log(discount(curve, tau + 1.0)) - np.log(discount(curve, tau)))
