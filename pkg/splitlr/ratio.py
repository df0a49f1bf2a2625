"""Optimal splitting ratios for the split likelihood ratio test.

The search scans an m0 grid for the split that minimises the limit CDF at
the universal threshold, i.e. maximises limit power, growing the
noncentrality until the best split reaches the target power. The CDF is
either the normal approximation with closed-form moments (``algo1``) or a
Monte Carlo estimate from common random numbers (``mc``, ``crossfit``).
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterator

import numpy as np

from infrastructure.logger import get_logger

from .errors import NonConvergenceError
from .schemas import SplitRatioResult, SplitSearchConfig, universal_threshold
from .splitchisq import SplitChiSqDraws, crossfit_mean_var, draw_limit, normal_cdf, split_chisq_mean_var

logger = get_logger(__name__)

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI_SQ = (3.0 - math.sqrt(5.0)) / 2.0


def _check_dims(d: int, p: int) -> None:
    if d < 1 or not 0 <= p <= d:
        raise ValueError(f"need d >= 1 and 0 <= p <= d, got d={d}, p={p}")
    if p == 0:
        raise NonConvergenceError("p = 0 leaves no constrained coordinate; the test has no power at any delta")


def m0_grid(config: SplitSearchConfig) -> np.ndarray:
    lo, hi = config.m0_range
    n = int(math.floor((hi - lo) / config.grid_step + 1e-9)) + 1
    return np.round(lo + config.grid_step * np.arange(n), 12)


def delta_schedule(p: int, config: SplitSearchConfig) -> Iterator[float]:
    """delta_0 = max(1, p) unless configured, multiplied by delta_factor up to delta_cap."""
    delta = config.delta_initial if config.delta_initial is not None else float(max(1, p))
    while delta <= config.delta_cap:
        yield delta
        delta *= config.delta_factor


def golden_section_minimize(
    obj: Callable[[float], float], a: float, b: float, tol: float = 1e-4
) -> tuple[float, float]:
    """Golden section search on [a, b]; returns (argmin, min). Ties go to the left end."""
    dist = b - a
    if dist <= tol:
        x = 0.5 * (a + b)
        return x, obj(x)

    n = int(math.ceil(math.log(tol / dist) / math.log(_INV_PHI)))
    c = a + _INV_PHI_SQ * dist
    d = a + _INV_PHI * dist
    yc = obj(c)
    yd = obj(d)
    for _ in range(n - 1):
        if yc <= yd:
            b, d, yd = d, c, yc
            dist = _INV_PHI * dist
            c = a + _INV_PHI_SQ * dist
            yc = obj(c)
        else:
            a, c, yc = c, d, yd
            dist = _INV_PHI * dist
            d = a + _INV_PHI * dist
            yd = obj(d)
    return (c, yc) if yc <= yd else (d, yd)


def _grid_search(
    d: int,
    p: int,
    config: SplitSearchConfig,
    method: str,
    cdf_on_grid: Callable[[np.ndarray, float], np.ndarray],
    refine: Callable[[float], Callable[[float], float]] | None = None,
) -> SplitRatioResult:
    grid = m0_grid(config)
    trace: list[tuple[float, float, float]] = []
    for iteration, delta in enumerate(delta_schedule(p, config), start=1):
        values = cdf_on_grid(grid, delta)
        i = int(np.argmin(values))  # first minimum -> smaller m0 on ties
        m0_best, cdf_best = float(grid[i]), float(values[i])
        if refine is not None:
            lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
            m_ref, v_ref = golden_section_minimize(refine(delta), float(lo), float(hi), config.refine_tol)
            if v_ref < cdf_best:
                m0_best, cdf_best = m_ref, v_ref
        power = 1.0 - cdf_best
        trace.append((delta, m0_best, power))
        logger.debug("%s d=%d p=%d delta=%.4g -> m0=%.4f power=%.4f", method, d, p, delta, m0_best, power)
        if power >= config.target_power:
            return SplitRatioResult(
                m0_opt=m0_best,
                achieved_power=power,
                delta_used=delta,
                method=method,
                converged=True,
                iterations=iteration,
                trace=trace,
            )
    raise NonConvergenceError(
        f"{method}: power {config.target_power} not reached before delta cap {config.delta_cap:g} (d={d}, p={p})"
    )


def _resolve(alpha: float | None, config: SplitSearchConfig | None) -> SplitSearchConfig:
    config = config or SplitSearchConfig()
    if alpha is not None and alpha != config.alpha:
        config = config.model_copy(update={"alpha": alpha})
    return config


def optimal_split_normal(
    d: int, p: int, alpha: float | None = None, config: SplitSearchConfig | None = None
) -> SplitRatioResult:
    """Normal-approximation search: minimise Phi((t - E[Z]) / sd(Z)) over m0, growing delta."""
    _check_dims(d, p)
    config = _resolve(alpha, config)
    threshold = universal_threshold(config.alpha)

    def cdf_on_grid(grid: np.ndarray, delta: float) -> np.ndarray:
        mean, var = split_chisq_mean_var(d, p, grid, delta)
        return normal_cdf((threshold - mean) / np.sqrt(var))

    def refine(delta: float) -> Callable[[float], float]:
        return lambda m0: float(cdf_on_grid(np.asarray(m0), delta))

    return _grid_search(d, p, config, "algo1", cdf_on_grid, refine)


def _mc_cdf_on_grid(
    draws: SplitChiSqDraws, threshold: float, crossfit: bool
) -> Callable[[np.ndarray, float], np.ndarray]:
    def cdf_on_grid(grid: np.ndarray, delta: float) -> np.ndarray:
        out = np.empty(grid.size)
        for j, m0 in enumerate(grid):
            values = draws.evaluate(float(m0), delta, crossfit=crossfit, w0=0.5, antithetic=crossfit)
            out[j] = np.count_nonzero(values <= threshold) / values.size
        return out

    return cdf_on_grid


def optimal_split_mc(
    d: int, p: int, alpha: float | None = None, config: SplitSearchConfig | None = None
) -> SplitRatioResult:
    """Monte Carlo search with the same normals reused at every grid point and delta."""
    _check_dims(d, p)
    config = _resolve(alpha, config)
    draws = draw_limit(d, p, config.n_reps, config.seed, threads=config.threads)
    cdf = _mc_cdf_on_grid(draws, universal_threshold(config.alpha), crossfit=False)
    return _grid_search(d, p, config, "mc", cdf)


def optimal_split_crossfit(
    d: int, p: int, alpha: float | None = None, config: SplitSearchConfig | None = None
) -> SplitRatioResult:
    """Monte Carlo search for the equally weighted cross-fit statistic.

    Each (X, Y) pair is also used as (Y, X), which makes the estimated CDF
    exactly symmetric in m0 <-> 1 - m0.
    """
    _check_dims(d, p)
    config = _resolve(alpha, config)
    draws = draw_limit(d, p, config.n_reps, config.seed, threads=config.threads)
    cdf = _mc_cdf_on_grid(draws, universal_threshold(config.alpha), crossfit=True)
    return _grid_search(d, p, config, "crossfit", cdf)


def wasserman_split(d: int, alpha: float) -> float:
    """Split minimising the squared radius of the universal Gaussian-mean confidence set."""
    if d < 1:
        raise ValueError("d must be at least 1")
    log_inv = -math.log(alpha) if 0.0 < alpha < 1.0 else math.nan
    if math.isnan(log_inv):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return 1.0 - (math.sqrt(4.0 * d * d + 8.0 * d * log_inv) - 2.0 * d) / (4.0 * log_inv)


def rule_of_thumb_split(d: int, k: int) -> float:
    """High-dimensional rule of thumb m0 = 0.52 - exp(-2.7 k/d - 1.05)."""
    if d < 1 or not 0 <= k <= d:
        raise ValueError(f"need d >= 1 and 0 <= k <= d, got d={d}, k={k}")
    return 0.52 - math.exp(-2.7 * k / d - 1.05)


# ------------------------------
# Limit power and calibration
# ------------------------------


def limit_hits(
    draws: SplitChiSqDraws,
    m0: float,
    delta: float,
    alpha: float,
    crossfit: bool = False,
    w0: float = 0.5,
    critical_value: float | None = None,
) -> np.ndarray:
    """Per-draw rejection indicators at the universal threshold (or a given critical value)."""
    threshold = universal_threshold(alpha) if critical_value is None else critical_value
    return draws.evaluate(m0, delta, crossfit=crossfit, w0=w0) > threshold


def limit_power(
    draws: SplitChiSqDraws, m0: float, delta: float, alpha: float, crossfit: bool = False, w0: float = 0.5
) -> float:
    return float(limit_hits(draws, m0, delta, alpha, crossfit, w0).mean())


def calibrate_delta(
    draws: SplitChiSqDraws,
    m0: float,
    alpha: float,
    target_power: float,
    *,
    rel_tol: float = 1e-6,
    delta_cap: float = 1e9,
) -> float:
    """Smallest delta at which the Monte Carlo limit power at m0 reaches target_power (bisection)."""
    if draws.p == 0:
        raise NonConvergenceError("p = 0: power does not depend on delta")
    lo, hi = 0.0, float(max(1, draws.p))
    while limit_power(draws, m0, hi, alpha) < target_power:
        lo, hi = hi, 2.0 * hi
        if hi > delta_cap:
            raise NonConvergenceError(f"target power {target_power} unreachable below delta {delta_cap:g}")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if limit_power(draws, m0, mid, alpha) >= target_power:
            hi = mid
        else:
            lo = mid
    return hi
