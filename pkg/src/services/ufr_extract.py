"""
UFR extraction service.

Endogenous UFR extraction by the SDF, SFR, SYC and ZJW methods, dynamic
alpha selection and lambda calibration. All rates are continuous internally.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import integrate, linalg, optimize

from ..errors import CalibrationError, DomainError, ExtractionError, UfrKitError
from .curve_core import (
    CONDITION_LIMIT, QuotePanel, TermGrid, fit_curve, forward_at, wilson_h_matrix, wilson_wbar,
)

logger = logging.getLogger(__name__)

METHODS = ('SDF', 'SFR', 'SYC', 'ZJW')

# Points in the vectorised sign-change scan of a FOC bracket
SCAN_POINTS = 401
MAX_EXPANSIONS = 2
# Local scan density around the coarse lambda minimum, relative to the grid
REFINE_FACTOR = 10


@dataclass(frozen=True)
class ZjwConfig:
    """Settings of the ZJW improved method."""

    f_prior: float = 0.045
    lam: float = 1.0
    alpha_min: float = 0.05
    convergence_point: float = 60.0
    forward_gap_tol: float = 1e-4
    alpha_grid: Tuple[float, float, float] = (0.05, 1.0, 0.001)
    root_bracket: Tuple[float, float] = (1e-4, 0.20)

    def __post_init__(self):
        lo, hi, step = self.alpha_grid
        if self.lam < 0:
            raise DomainError("lambda must be non-negative")
        if min(self.f_prior, self.alpha_min, self.convergence_point, self.forward_gap_tol, lo, step) <= 0:
            raise DomainError("ZJW settings must be positive")
        if lo > hi:
            raise DomainError("alpha grid lower bound exceeds upper bound")
        if self.root_bracket[0] >= self.root_bracket[1]:
            raise DomainError("root bracket must satisfy lo < hi")

    def alphas(self) -> np.ndarray:
        """Ascending alpha grid, rounded to keep cache keys stable."""
        lo, hi, step = self.alpha_grid
        count = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return np.round(lo + step * np.arange(count), 10)

    def with_lambda(self, lam: float) -> 'ZjwConfig':
        return ZjwConfig(self.f_prior, lam, self.alpha_min, self.convergence_point,
                         self.forward_gap_tol, self.alpha_grid, self.root_bracket)


class AlphaSelection(NamedTuple):
    alpha: float
    f_inf: float
    flagged: bool


@dataclass
class UfrSeries:
    """Per-date UFR estimates for one extraction method."""

    dates: pd.Index
    f_inf: np.ndarray
    method: str
    alpha_path: Optional[np.ndarray] = None
    flagged: List = field(default_factory=list)
    failures: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.f_inf = np.asarray(self.f_inf, dtype=float)
        if len(self.dates) != self.f_inf.size:
            raise DomainError("UFR series dates and values are misaligned")
        if self.alpha_path is not None:
            self.alpha_path = np.asarray(self.alpha_path, dtype=float)
            if self.alpha_path.size != self.f_inf.size:
                raise DomainError("alpha path is misaligned with the series")

    @property
    def ufr(self) -> np.ndarray:
        """Annually-compounded UFR, the reported unit."""
        return np.expm1(self.f_inf)

    def __len__(self) -> int:
        return self.f_inf.size

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({'f_inf': self.f_inf, 'ufr': self.ufr}, index=self.dates)
        if self.alpha_path is not None:
            frame['alpha'] = self.alpha_path
        frame.index.name = 'date'
        return frame


@dataclass
class LambdaCalibration:
    """Result of the lambda search."""

    lambda_star: float
    objective_star: float
    grid: np.ndarray
    objective: np.ndarray
    refined: bool
    degenerate: bool


def _discount_proxies(prices: np.ndarray, cashflows: Optional[np.ndarray], grid: TermGrid) -> np.ndarray:
    """pi = C^{-1} m."""
    prices = np.asarray(prices, dtype=float)
    if prices.size != len(grid):
        raise ExtractionError("Extraction needs one price per grid date")
    if cashflows is None:
        pi = prices
    else:
        cashflows = np.asarray(cashflows, dtype=float)
        if cashflows.shape != (len(grid), len(grid)):
            raise ExtractionError("Cash flow matrix must be square for UFR extraction")
        try:
            pi = linalg.solve(cashflows, prices)
        except linalg.LinAlgError as e:
            raise ExtractionError(f"Cash flow matrix is not invertible: {e}") from e
    if np.any(pi <= 0) or not np.all(np.isfinite(pi)):
        raise ExtractionError("Implied discount factors must be positive")
    return pi


@lru_cache(maxsize=4096)
def _heart_inverse(maturities: tuple, alpha: float) -> np.ndarray:
    heart = wilson_h_matrix(np.asarray(maturities), np.asarray(maturities), alpha)
    condition = np.linalg.cond(heart)
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise ExtractionError(f"Wilson matrix is singular at alpha={alpha} (condition {condition:.2e})")
    inverse = linalg.inv(heart)
    inverse.setflags(write=False)
    return inverse


def sdf_foc(f_values, pi: np.ndarray, grid: TermGrid, alpha: float) -> np.ndarray:
    """
    Discount-smoothness first-order condition, vectorised over f_values.

    F(f) = sum_ij u_i a_i [H^-1]_ij (a_j - 1) with a_j = pi_j exp(f u_j).
    """
    u = grid.u
    inverse = _heart_inverse(grid.maturities, float(alpha))
    f_values = np.atleast_1d(np.asarray(f_values, dtype=float))
    scaled = pi[None, :] * np.exp(f_values[:, None] * u[None, :])
    return np.einsum('fi,ij,fj->f', u[None, :] * scaled, inverse, scaled - 1.0)


def _find_root(objective, bracket: Tuple[float, float], anchor: float) -> float:
    """Root of a scalar function in the bracket, closest to anchor."""
    lo, hi = bracket
    width = hi - lo
    for expansion in range(MAX_EXPANSIONS + 1):
        points = np.linspace(lo, hi, SCAN_POINTS)
        values = objective(points)
        finite = np.isfinite(values)
        roots = list(points[finite & (values == 0.0)])
        changes = np.nonzero(finite[:-1] & finite[1:] & (np.sign(values[:-1]) * np.sign(values[1:]) < 0))[0]
        for index in changes:
            left, right = points[index], points[index + 1]
            scalar = lambda f: float(objective(np.array([f]))[0])
            roots.append(optimize.brentq(scalar, left, right, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
        if roots:
            roots = np.asarray(roots)
            return float(roots[np.argmin(np.abs(roots - anchor))])
        lo, hi = lo - width, hi + width
        logger.debug(f"No FOC sign change, expanding bracket to [{lo:.4f}, {hi:.4f}] (expansion {expansion + 1})")
    raise ExtractionError(f"No FOC root in bracket after {MAX_EXPANSIONS} expansions")


def extract_sdf(prices, cashflows, grid: TermGrid, alpha: float = 0.1,
                root_bracket: Tuple[float, float] = (1e-4, 0.20), anchor: float = 0.045) -> float:
    """
    Extracts f_inf by the smoothest-discount-factor method.

    Args:
        prices: Instrument prices
        cashflows: Square invertible cash flow matrix, identity when None
        grid: Payment dates
        alpha: Convergence speed
        root_bracket: Initial bracket for the root search
        anchor: Root closest to this value wins when there are several

    Returns:
        float: Continuous f_inf

    Raises:
        ExtractionError: No root found
    """
    pi = _discount_proxies(prices, cashflows, grid)
    return _find_root(lambda f: sdf_foc(f, pi, grid, alpha), root_bracket, anchor)


def zjw_foc(f_values, pi: np.ndarray, grid: TermGrid, alpha: float, lam: float, f_prior: float) -> np.ndarray:
    """Penalised FOC: F(f) + lambda (f - f_prior)."""
    f_values = np.atleast_1d(np.asarray(f_values, dtype=float))
    return sdf_foc(f_values, pi, grid, alpha) + lam * (f_values - f_prior)


def zjw_foc_solve(prices, cashflows, grid: TermGrid, alpha: float, lam: float, f_prior: float,
                  root_bracket: Tuple[float, float] = (1e-4, 0.20), anchor: Optional[float] = None) -> float:
    """Root of the penalised FOC at a fixed alpha."""
    if lam < 0:
        raise DomainError("lambda must be non-negative")
    pi = _discount_proxies(prices, cashflows, grid)
    anchor = f_prior if anchor is None else anchor
    return _find_root(lambda f: zjw_foc(f, pi, grid, alpha, lam, f_prior), root_bracket, anchor)


def in_region_a(pi: np.ndarray, grid: TermGrid, alpha: float, lam: float, f_prior: float) -> bool:
    """Sign condition: the penalised FOC is negative at f = 0."""
    return bool(zjw_foc(0.0, pi, grid, alpha, lam, f_prior)[0] < 0)


def forward_gap(prices, cashflows, grid: TermGrid, alpha: float, f_inf: float, convergence_point: float) -> float:
    """|f(CP) - f_inf| for the curve fitted at (alpha, f_inf)."""
    curve = fit_curve(prices, cashflows, grid, alpha, f_inf)
    return abs(float(forward_at(curve, convergence_point)) - f_inf)


def zjw_alpha_star(prices, cashflows, grid: TermGrid, config: ZjwConfig,
                   anchor: Optional[float] = None) -> AlphaSelection:
    """
    Selects the smallest feasible alpha on the configured grid.

    An alpha is feasible when the penalised FOC is negative at zero, alpha is
    at least alpha_min and the forward at the convergence point is within the
    gap tolerance of the resulting f_inf. With no feasible alpha the grid upper
    bound is returned and the selection is flagged.

    Args:
        prices: Instrument prices
        cashflows: Square invertible cash flow matrix, identity when None
        grid: Payment dates
        config: ZJW settings
        anchor: Root tie-break anchor (previous date's f_inf)

    Returns:
        AlphaSelection: alpha, its f_inf and the fallback flag
    """
    pi = _discount_proxies(prices, cashflows, grid)
    anchor = config.f_prior if anchor is None else anchor
    alphas = config.alphas()
    for alpha in alphas:
        alpha = float(alpha)
        if alpha < config.alpha_min:
            continue
        try:
            if not in_region_a(pi, grid, alpha, config.lam, config.f_prior):
                continue
            f_alpha = _find_root(lambda f: zjw_foc(f, pi, grid, alpha, config.lam, config.f_prior),
                                 config.root_bracket, anchor)
            gap = forward_gap(prices, cashflows, grid, alpha, f_alpha, config.convergence_point)
        except UfrKitError as e:
            logger.debug(f"alpha={alpha} skipped: {e}")
            continue
        if gap <= config.forward_gap_tol:
            return AlphaSelection(alpha, f_alpha, False)

    upper = float(alphas[-1])
    logger.warning(f"No feasible alpha on the grid, falling back to {upper}")
    f_upper = _find_root(lambda f: zjw_foc(f, pi, grid, upper, config.lam, config.f_prior),
                         config.root_bracket, anchor)
    return AlphaSelection(upper, f_upper, True)


def zjw_extract(prices, cashflows, grid: TermGrid, config: ZjwConfig,
                anchor: Optional[float] = None) -> AlphaSelection:
    """Two-step ZJW extraction: alpha selection, then the penalised FOC at that alpha."""
    selection = zjw_alpha_star(prices, cashflows, grid, config, anchor)
    f_inf = zjw_foc_solve(prices, cashflows, grid, selection.alpha, config.lam, config.f_prior,
                          config.root_bracket, anchor)
    return AlphaSelection(selection.alpha, f_inf, selection.flagged)


@lru_cache(maxsize=256)
def _weight_matrix(maturities: tuple, alpha: float, method: str, alpha_bar: float, f_inf: float) -> np.ndarray:
    u = np.asarray(maturities)
    n = u.size
    if method == 'SYC':
        heart = wilson_h_matrix(u, u, alpha)
        kernel = np.exp(-f_inf * (u[:, None] + u[None, :])) * heart
        return kernel / (alpha * u[None, :])
    if method == 'SFR':
        matrix = np.empty((n, n))
        for k in range(n):
            for j in range(n):
                value, _ = integrate.quad(lambda s: wilson_wbar(s, u[j], alpha_bar), 0.0, u[k],
                                          epsabs=1e-10, points=[u[j]] if u[j] < u[k] else None, limit=200)
                matrix[k, j] = value / u[k]
        return matrix
    raise DomainError(f"Unknown weight method: {method}")


def _weight_inverse(grid: TermGrid, alpha: float, method: str, alpha_bar: Optional[float], f_inf: float) -> np.ndarray:
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    alpha_bar = alpha if alpha_bar is None else alpha_bar
    matrix = _weight_matrix(grid.maturities, float(alpha), method, float(alpha_bar), float(f_inf))
    condition = np.linalg.cond(matrix)
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise ExtractionError(f"{method} weight matrix is singular (condition {condition:.2e})")
    return linalg.inv(matrix)


def weight_matrix(grid: TermGrid, alpha: float, method: str, alpha_bar: Optional[float] = None,
                  f_inf: float = 0.0) -> np.ndarray:
    """The G matrix of the SFR (forward) or SYC (yield) method."""
    alpha_bar = alpha if alpha_bar is None else alpha_bar
    return _weight_matrix(grid.maturities, float(alpha), method.upper(), float(alpha_bar), float(f_inf)).copy()


def sfr_syc_weights(grid: TermGrid, alpha: float, method: str, alpha_bar: Optional[float] = None,
                    f_inf: float = 0.0) -> np.ndarray:
    """
    Linear weights v_0..v_n of the SFR/SYC UFR.

    v_k is the k-th column sum of G^{-1}; v_0 makes the weights sum to one.
    """
    inverse = _weight_inverse(grid, alpha, method.upper(), alpha_bar, f_inf)
    v = inverse.sum(axis=0)
    return np.concatenate([[1.0 - v.sum()], v])


def short_rate_estimate(yields: np.ndarray, grid: TermGrid, inverse: np.ndarray) -> float:
    """Optimised y_0 from the inverse weight matrix."""
    u = grid.u
    pair_mean = 0.5 * (yields[:, None] + yields[None, :])
    numerator = np.sum((inverse * pair_mean).sum(axis=1) / u)
    denominator = np.sum(inverse.sum(axis=1) / u)
    if denominator == 0:
        raise ExtractionError("Short-rate weights sum to zero")
    return float(numerator / denominator)


def _extract_smooth(prices, cashflows, grid: TermGrid, alpha: float, method: str,
                    alpha_bar: Optional[float], f_inf: float) -> float:
    pi = _discount_proxies(prices, cashflows, grid)
    yields = -np.log(pi) / grid.u
    inverse = _weight_inverse(grid, alpha, method, alpha_bar, f_inf)
    v = inverse.sum(axis=0)
    y0 = short_rate_estimate(yields, grid, inverse)
    return float((1.0 - v.sum()) * y0 + v @ yields)


def extract_sfr(prices, cashflows, grid: TermGrid, alpha: float = 0.1, alpha_bar: Optional[float] = None) -> float:
    """f_inf by the smoothest-forward-rate method."""
    return _extract_smooth(prices, cashflows, grid, alpha, 'SFR', alpha_bar, 0.0)


def extract_syc(prices, cashflows, grid: TermGrid, alpha: float = 0.1, f_inf: float = 0.0) -> float:
    """
    f_inf by the smoothest-yield-curve method.

    G^y is built with exp(-f_inf (u_k + u_j)) set to one (f_inf = 0), so the
    weights depend on alpha and the grid only. A non-zero f_inf gives the
    discounted variant.
    """
    return _extract_smooth(prices, cashflows, grid, alpha, 'SYC', None, f_inf)


def extract_series(panel: QuotePanel, method: str, config: Optional[ZjwConfig] = None,
                   alpha: float = 0.1, alpha_bar: Optional[float] = None, strict: bool = False) -> UfrSeries:
    """
    Extracts a UFR series date by date.

    Per-date failures are logged and leave a NaN cell unless strict is set.
    ZJW records the selected alpha per date and anchors each root search
    on the previous date's f_inf.

    Args:
        panel: Quote panel
        method: One of SDF, SFR, SYC, ZJW
        config: ZJW settings (ZJW only)
        alpha: Fixed alpha for SDF/SFR/SYC
        alpha_bar: Smoothing alpha of the SFR kernel, alpha when None
        strict: Raise on the first per-date failure

    Returns:
        UfrSeries: Extracted series
    """
    method = method.upper()
    if method not in METHODS:
        raise DomainError(f"Unknown extraction method: {method}")
    config = config or ZjwConfig()
    grid = panel.grid
    values = np.full(len(panel), np.nan)
    alphas = np.full(len(panel), np.nan) if method == 'ZJW' else None
    series = UfrSeries(panel.dates, values, method, alphas)
    anchor = config.f_prior

    for index, date in enumerate(panel.dates):
        prices = panel.prices(date)
        try:
            if method == 'SDF':
                values[index] = extract_sdf(prices, None, grid, alpha, config.root_bracket, anchor)
            elif method == 'SFR':
                values[index] = extract_sfr(prices, None, grid, alpha, alpha_bar)
            elif method == 'SYC':
                values[index] = extract_syc(prices, None, grid, alpha)
            else:
                selection = zjw_extract(prices, None, grid, config, anchor)
                values[index] = selection.f_inf
                alphas[index] = selection.alpha
                if selection.flagged:
                    series.flagged.append(date)
            if method in ('SDF', 'ZJW'):
                anchor = values[index]
            logger.debug(f"{method} {date}: f_inf={values[index]:.6f}")
        except UfrKitError as e:
            if strict:
                raise CalibrationError(f"{method} extraction failed: {e}", str(date)) from e
            logger.warning(f"{method} extraction failed on {date}: {e}")
            series.failures[date] = str(e)

    series.f_inf = values
    series.alpha_path = alphas
    logger.info(f"Extracted {method} series: {len(panel)} dates, {len(series.failures)} failures, "
                f"{len(series.flagged)} flagged")
    return series


def _objective(zjw: np.ndarray, sfr: np.ndarray, syc: np.ndarray) -> float:
    return float(np.sum((zjw - sfr) ** 2) + np.sum((zjw - syc) ** 2))


def calibrate_lambda(panel: QuotePanel, config: Optional[ZjwConfig] = None, lo: float = 1e-2,
                     hi: float = 1e4, points: int = 61, alpha: float = 0.1,
                     alpha_bar: Optional[float] = None) -> LambdaCalibration:
    """
    Chooses lambda minimising the squared gaps between ZJW and both SFR and SYC.

    The objective is evaluated on annually-compounded UFRs over a log-spaced
    grid. The cells next to the grid minimum are rescanned at REFINE_FACTOR
    times the density and a local minimum there is polished by golden-section
    search in log10(lambda).

    Args:
        panel: Quote panel, at least two dates
        config: ZJW settings (its lambda is ignored)
        lo: Smallest grid lambda
        hi: Largest grid lambda
        points: Grid size
        alpha: Alpha of the SFR/SYC benchmarks
        alpha_bar: Smoothing alpha of the SFR kernel

    Returns:
        LambdaCalibration: lambda*, the grid objective and flags

    Raises:
        CalibrationError: A per-date extraction failed
    """
    if len(panel) < 2:
        raise DomainError("Lambda calibration needs at least two dates")
    if not 0 < lo < hi or points < 3:
        raise DomainError("Lambda grid needs 0 < lo < hi and at least three points")
    config = config or ZjwConfig()
    sfr = extract_series(panel, 'SFR', config, alpha, alpha_bar, strict=True).ufr
    syc = extract_series(panel, 'SYC', config, alpha, strict=True).ufr

    def evaluate(lam: float) -> float:
        zjw = extract_series(panel, 'ZJW', config.with_lambda(lam), strict=True).ufr
        return _objective(zjw, sfr, syc)

    log_grid = np.linspace(np.log10(lo), np.log10(hi), points)
    grid = 10.0 ** log_grid
    objective = np.array([evaluate(lam) for lam in grid])
    best = int(np.argmin(objective))
    lambda_star, objective_star = float(grid[best]), float(objective[best])

    spread = float(np.ptp(objective))
    degenerate = spread <= 1e-14 * max(1.0, abs(objective_star))
    refined = False
    if degenerate:
        lambda_star, objective_star = float(grid[0]), float(objective[0])
        logger.warning("Lambda objective is constant on the grid; returning the smallest grid lambda")
    else:
        # Alpha selection makes the objective piecewise in lambda; scan the cells next to the grid minimum
        left, right = max(best - 1, 0), min(best + 1, points - 1)
        local = np.linspace(log_grid[left], log_grid[right], REFINE_FACTOR * (right - left) + 1)
        local_objective = np.array([evaluate(10.0 ** x) for x in local])
        k = int(np.argmin(local_objective))
        if local_objective[k] < objective_star:
            lambda_star, objective_star, refined = float(10.0 ** local[k]), float(local_objective[k]), True
        if 0 < k < local.size - 1 and local_objective[k] < min(local_objective[k - 1], local_objective[k + 1]):
            result = optimize.minimize_scalar(lambda x: evaluate(10.0 ** x), method='golden',
                                              bracket=(local[k - 1], local[k], local[k + 1]),
                                              options={'xtol': 1e-10})
            if result.fun < objective_star:
                lambda_star, objective_star, refined = float(10.0 ** result.x), float(result.fun), True

    logger.info(f"Calibrated lambda*={lambda_star:.6g} (objective {objective_star:.6e}, refined={refined})")
    return LambdaCalibration(lambda_star, objective_star, grid, objective, refined, degenerate)


def extract_all(panel: QuotePanel, config: Optional[ZjwConfig] = None, alpha: float = 0.1,
                alpha_bar: Optional[float] = None, calibrate: bool = False) -> Dict[str, UfrSeries]:
    """SDF, SFR, SYC and ZJW series on one panel, optionally calibrating lambda first."""
    config = config or ZjwConfig()
    if calibrate:
        config = config.with_lambda(calibrate_lambda(panel, config, alpha=alpha, alpha_bar=alpha_bar).lambda_star)
    return {
        'SDF': extract_series(panel, 'SDF', config, alpha),
        'SFR': extract_series(panel, 'SFR', config, alpha, alpha_bar),
        'SYC': extract_series(panel, 'SYC', config, alpha),
        'ZJW': extract_series(panel, 'ZJW', config),
    }
