"""Split likelihood ratio tests over an abstract model.

The split statistic evaluates, on the evaluation part D0, the log-likelihood
of the full-model MLE fitted on D1 against the null MLE fitted on D0:

    Lambda = 2 * [l_D0(theta_full(D1)) - l_D0(theta_null(D0))]

exp(Lambda / 2) is an e-value, so rejecting when Lambda > -2 log(alpha) is
valid in finite samples. Cross-fit and subsampled variants combine several
such e-values and stay valid.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy.special import logsumexp
from scipy.stats import chi2

from infrastructure.logger import get_logger

from .errors import EmptySplitError
from .schemas import SlrtResult, universal_threshold

logger = get_logger(__name__)

Theta = Any


class SplitModel(ABC):
    """A parametric model the tests can fit and evaluate.

    Implementations must be read-only after construction so one instance can
    be shared by concurrent replications.
    """

    @abstractmethod
    def log_likelihood(self, theta: Theta, data: np.ndarray) -> float: ...

    @abstractmethod
    def mle_null(self, data: np.ndarray) -> Theta: ...

    @abstractmethod
    def mle_full(self, data: np.ndarray) -> Theta: ...

    @abstractmethod
    def simulate(self, theta: Theta, n: int, rng: np.random.Generator) -> np.ndarray: ...

    @abstractmethod
    def dims(self) -> tuple[int, int]:
        """(d, k): parameter dimension and null-hypothesis dimension."""

    @property
    def p(self) -> int:
        d, k = self.dims()
        return d - k


@dataclass(frozen=True)
class DataSplit:
    indices_d0: np.ndarray
    indices_d1: np.ndarray
    m0: float
    seed: int | np.random.SeedSequence | None = None

    def parts(self, data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return data[self.indices_d0], data[self.indices_d1]

    def swapped(self) -> DataSplit:
        return DataSplit(self.indices_d1, self.indices_d0, 1.0 - self.m0, self.seed)


def split_sizes(n: int, m0: float) -> tuple[int, int]:
    """(floor(m0 n), n - floor(m0 n)); the second equals ceil((1 - m0) n)."""
    n0 = math.floor(m0 * n + 1e-9)
    return n0, n - n0


def split_data(n: int, m0: float, seed: int | np.random.SeedSequence | None = None) -> DataSplit:
    """Uniformly random partition of range(n) into D0 (size floor(m0 n)) and D1."""
    if not 0.0 < m0 < 1.0:
        raise ValueError(f"m0 must lie in (0, 1), got {m0}")
    n0, n1 = split_sizes(n, m0)
    if n < 2 or n0 < 1 or n1 < 1:
        raise EmptySplitError(f"split of n={n} at m0={m0} leaves an empty part ({n0}, {n1})")
    perm = np.random.default_rng(seed).permutation(n)
    return DataSplit(indices_d0=np.sort(perm[:n0]), indices_d1=np.sort(perm[n0:]), m0=m0, seed=seed)


def _split_statistic(model: SplitModel, d0: np.ndarray, d1: np.ndarray) -> float:
    theta_full = model.mle_full(d1)
    theta_null = model.mle_null(d0)
    return 2.0 * (model.log_likelihood(theta_full, d0) - model.log_likelihood(theta_null, d0))


def slrt_statistic(model: SplitModel, data: np.ndarray, split: DataSplit) -> float:
    d0, d1 = split.parts(data)
    return _split_statistic(model, d0, d1)


def slrt_test(model: SplitModel, data: np.ndarray, split: DataSplit, alpha: float) -> SlrtResult:
    threshold = universal_threshold(alpha)
    stat = slrt_statistic(model, data, split)
    return SlrtResult(statistic=stat, combined=stat, threshold=threshold, reject=stat > threshold)


def asymptotic_slrt(model: SplitModel, data: np.ndarray, split: DataSplit, critical_value: float) -> SlrtResult:
    """Split statistic compared with an externally supplied critical value (e.g. a limit quantile)."""
    stat = slrt_statistic(model, data, split)
    return SlrtResult(
        statistic=stat, combined=stat, threshold=critical_value, reject=stat > critical_value, variant="asymptotic"
    )


def combine_crossfit(statistic: float, statistic_swap: float, w0: float, alpha: float) -> SlrtResult:
    """w0 * Lambda + (1 - w0) * Lambda_swap against the universal threshold.

    w0 has to be fixed before looking at the data.
    """
    if not 0.0 <= w0 <= 1.0:
        raise ValueError(f"w0 must lie in [0, 1], got {w0}")
    threshold = universal_threshold(alpha)
    combined = w0 * statistic + (1.0 - w0) * statistic_swap
    return SlrtResult(
        statistic=statistic,
        statistic_swap=statistic_swap,
        weight_w0=w0,
        combined=combined,
        threshold=threshold,
        reject=combined > threshold,
        variant="crossfit",
    )


def crossfit_statistic(
    model: SplitModel, data: np.ndarray, split: DataSplit, w0: float = 0.5, alpha: float = 0.05
) -> SlrtResult:
    d0, d1 = split.parts(data)
    if w0 == 1.0:
        stat = _split_statistic(model, d0, d1)
        return combine_crossfit(stat, stat, 1.0, alpha).model_copy(update={"statistic_swap": None})
    return combine_crossfit(_split_statistic(model, d0, d1), _split_statistic(model, d1, d0), w0, alpha)


def subsample_seeds(
    seed: int | np.random.SeedSequence | None, n_subsamples: int
) -> list[int | np.random.SeedSequence | None]:
    """The caller's seed for the first split, child sequences for the rest.

    Children are derived from the parent's entropy and spawn key, so the
    caller's SeedSequence is left untouched and repeated calls agree.
    """
    if n_subsamples < 1:
        raise ValueError("n_subsamples must be at least 1")
    parent = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = [
        np.random.SeedSequence(parent.entropy, spawn_key=(*parent.spawn_key, j), pool_size=parent.pool_size)
        for j in range(1, n_subsamples)
    ]
    return [seed, *children]


def combine_subsamples(statistics: list[float], alpha: float) -> SlrtResult:
    """Average the e-values exp(Lambda_j / 2); reject when the mean exceeds 1/alpha.

    Reported on the statistic scale: combined = 2 log(mean e-value).
    """
    threshold = universal_threshold(alpha)
    stats = np.asarray(statistics, dtype=float)
    combined = 2.0 * (float(logsumexp(0.5 * stats)) - math.log(stats.size))
    return SlrtResult(
        statistic=float(stats[0]),
        combined=combined,
        threshold=threshold,
        reject=combined > threshold,
        variant="subsample",
        n_subsamples=int(stats.size),
    )


def subsample_statistic(
    model: SplitModel,
    data: np.ndarray,
    m0: float,
    n_subsamples: int,
    alpha: float = 0.05,
    seed: int | np.random.SeedSequence | None = None,
) -> SlrtResult:
    n = data.shape[0]
    stats = [slrt_statistic(model, data, split_data(n, m0, s)) for s in subsample_seeds(seed, n_subsamples)]
    return combine_subsamples(stats, alpha)


def classical_lrt(model: SplitModel, data: np.ndarray, alpha: float = 0.05) -> SlrtResult:
    """Full-data likelihood ratio test with the chi^2_p critical value."""
    stat = 2.0 * (model.log_likelihood(model.mle_full(data), data) - model.log_likelihood(model.mle_null(data), data))
    stat = max(stat, 0.0)
    critical = float(chi2.ppf(1.0 - alpha, model.p))
    return SlrtResult(statistic=stat, combined=stat, threshold=critical, reject=stat > critical, variant="classical")
