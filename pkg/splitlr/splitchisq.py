"""Noncentral split chi-square distribution and its cross-fit variant.

A draw is ``||X_[p] + sqrt(m0) h||^2 - ||X - sqrt(m0/m1) Y||^2`` with X, Y
independent standard normal in R^d. The law depends on h only through
``delta = h^T h``, so h is always placed as ``(sqrt(delta), 0, ..., 0)``.

Everything here is pure given an explicit random stream or seed.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from infrastructure.logger import get_logger

from .errors import DimensionMismatchError
from .montecarlo import DEFAULT_BLOCK_SIZE, replication_rng, run_blocks
from .schemas import MomentSummary, SplitChiSqParams

logger = get_logger(__name__)

DEFAULT_REPS = 100_000

Sampler = Callable[[SplitChiSqParams, np.random.Generator, int], np.ndarray]


# -----------------------
# Closed-form moments
# -----------------------


def split_chisq_mean_var(d: int, p: int, m0, delta):
    """Mean and variance of split-chi^2; broadcasts over array-valued m0 / delta."""
    m0 = np.asarray(m0, dtype=float)
    delta = np.asarray(delta, dtype=float)
    r = m0 / (1.0 - m0)
    mean = p - d - d * r + m0 * delta
    var = 2.0 * (d - p) + 4.0 * d * r + 2.0 * d * r**2 + 4.0 * m0 * delta
    return mean, var


def crossfit_mean_var(d: int, p: int, m0, delta):
    """Mean and variance of the equally weighted cross-fit limit."""
    m0 = np.asarray(m0, dtype=float)
    r = m0 / (1.0 - m0)
    s = r + 1.0 / r
    delta = np.asarray(delta, dtype=float)
    mean = p - d - 0.5 * d * s + 0.5 * delta
    var = (d - p) * (1.0 + s) + d * (2.0 + s) + 0.5 * d * (r**2 + r**-2) + delta
    return mean, var


# -----------------------
# Quadratic-form oracle
# -----------------------


@dataclass(frozen=True)
class QuadraticFormSpec:
    """``scale * (eps + mu)^T A (eps + mu)`` with ``eps ~ N(0, covariance)``."""

    A: np.ndarray
    covariance: np.ndarray
    mu: np.ndarray
    scale: float = 1.0

    def __post_init__(self) -> None:
        A = np.asarray(self.A, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionMismatchError(f"A must be square, got shape {A.shape}")
        if cov.shape != A.shape:
            raise DimensionMismatchError(f"covariance shape {cov.shape} does not match A {A.shape}")
        if mu.shape != (A.shape[0],):
            raise DimensionMismatchError(f"mu must have length {A.shape[0]}, got shape {mu.shape}")
        if not np.allclose(A, A.T):
            raise ValueError("A must be symmetric")
        if not np.allclose(cov, cov.T):
            raise ValueError("covariance must be symmetric")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance must be positive definite") from exc
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "mu", mu)


def quadratic_form_cumulants(spec: QuadraticFormSpec, max_order: int = 2) -> list[float]:
    """Cumulants kappa_1..kappa_max_order of the (mean-shifted, scaled) quadratic form."""
    if not 1 <= max_order <= 4:
        raise ValueError(f"max_order must be in 1..4, got {max_order}")
    A, mu, c = spec.A, spec.mu, spec.scale
    AS = A @ spec.covariance
    Amu = A @ mu
    cumulants = [c * (float(np.trace(AS)) + float(mu @ Amu))]
    power = AS  # (A Sigma)^(n-1)
    for n in range(2, max_order + 1):
        trace_term = float(np.trace(power @ AS))
        shift_term = float(mu @ (power @ Amu))
        kappa = 2.0 ** (n - 1) * math.factorial(n - 1) * (trace_term + n * shift_term)
        cumulants.append(c**n * kappa)
        power = power @ AS
    return cumulants


def quadratic_form_moments(spec: QuadraticFormSpec, max_order: int = 2) -> MomentSummary:
    k = quadratic_form_cumulants(spec, max_order)
    k += [0.0] * (4 - len(k))
    k1, k2, k3, k4 = k
    moment3 = k1**3 + 3 * k1 * k2 + k3 if max_order >= 3 else None
    moment4 = k1**4 + 6 * k1**2 * k2 + 3 * k2**2 + 4 * k1 * k3 + k4 if max_order >= 4 else None
    return MomentSummary(mean=k1, variance=max(k2, 0.0), moment3=moment3, moment4=moment4)


def split_quadratic_form(params: SplitChiSqParams, crossfit: bool = False, w0: float = 0.5) -> QuadraticFormSpec:
    """Stacked 2d-dimensional quadratic form whose law is the (cross-fit) limit.

    With ``eps = (X / sqrt(m0), Y / sqrt(m1))`` and ``mu = (h, 0, h, 0)``, the
    plain statistic is ``m0 (eps+mu)^T (P_u - D) (eps+mu)`` where P_u keeps the
    constrained coordinates of the first block and D is the quadratic form of
    ``u - v``. The swapped statistic uses P_v and scale m1.
    """
    d, p, m0, m1 = params.d, params.p, params.m0, params.m1
    eye = np.eye(d)
    D = np.block([[eye, -eye], [-eye, eye]])
    P_u = np.zeros((2 * d, 2 * d))
    P_v = np.zeros((2 * d, 2 * d))
    P_u[:p, :p] = np.eye(p)
    P_v[d : d + p, d : d + p] = np.eye(p)
    cov = np.diag(np.concatenate([np.full(d, 1.0 / m0), np.full(d, 1.0 / m1)]))
    mu = np.zeros(2 * d)
    if p > 0:
        mu[0] = math.sqrt(params.delta)
        mu[d] = math.sqrt(params.delta)
    if not crossfit:
        return QuadraticFormSpec(A=P_u - D, covariance=cov, mu=mu, scale=m0)
    A = w0 * m0 * (P_u - D) + (1.0 - w0) * m1 * (P_v - D)
    return QuadraticFormSpec(A=A, covariance=cov, mu=mu, scale=1.0)


def moments(
    params: SplitChiSqParams,
    crossfit: bool = False,
    w0: float = 0.5,
    max_order: int = 2,
) -> MomentSummary:
    """Mean and variance (and optionally raw moments 3-4) of the limit law.

    Closed forms cover the plain statistic and the cross-fit average at
    w0 = 0.5; other cross-fit weights go through the quadratic-form oracle.
    """
    if not 0.0 <= w0 <= 1.0:
        raise ValueError(f"w0 must lie in [0, 1], got {w0}")
    if crossfit and w0 != 0.5:
        return quadratic_form_moments(split_quadratic_form(params, True, w0), max_order)

    fn = crossfit_mean_var if crossfit else split_chisq_mean_var
    mean, var = fn(params.d, params.p, params.m0, params.delta)
    summary = MomentSummary(mean=float(mean), variance=float(var))
    if max_order > 2:
        higher = quadratic_form_moments(split_quadratic_form(params, crossfit, w0), max_order)
        summary = summary.model_copy(update={"moment3": higher.moment3, "moment4": higher.moment4})
    return summary


# -----------
# Sampling
# -----------


@dataclass(frozen=True)
class SplitChiSqDraws:
    """Sufficient statistics of n independent (X, Y) pairs.

    Any (m0, delta) split-chi^2 or cross-fit draw is an affine function of
    these, so one set of normals serves a whole m0 grid (common random numbers).
    """

    d: int
    p: int
    sx: np.ndarray  # ||X||^2
    sy: np.ndarray  # ||Y||^2
    sxp: np.ndarray  # ||X_[p]||^2
    syp: np.ndarray  # ||Y_[p]||^2
    x1: np.ndarray  # first coordinate of X (zero when p == 0)
    y1: np.ndarray
    sxy: np.ndarray  # X . Y

    @property
    def size(self) -> int:
        return int(self.sx.shape[0])

    @classmethod
    def from_normals(cls, X: np.ndarray, Y: np.ndarray, p: int) -> SplitChiSqDraws:
        d = X.shape[1]
        if p > 0:
            x1, y1 = X[:, 0].copy(), Y[:, 0].copy()
        else:
            x1 = y1 = np.zeros(X.shape[0])
        return cls(
            d=d,
            p=p,
            sx=np.einsum("ij,ij->i", X, X),
            sy=np.einsum("ij,ij->i", Y, Y),
            sxp=np.einsum("ij,ij->i", X[:, :p], X[:, :p]),
            syp=np.einsum("ij,ij->i", Y[:, :p], Y[:, :p]),
            x1=x1,
            y1=y1,
            sxy=np.einsum("ij,ij->i", X, Y),
        )

    @classmethod
    def from_rng(cls, d: int, p: int, rng: np.random.Generator, size: int) -> SplitChiSqDraws:
        X = rng.standard_normal((size, d))
        Y = rng.standard_normal((size, d))
        return cls.from_normals(X, Y, p)

    @classmethod
    def concatenate(cls, parts: list[SplitChiSqDraws]) -> SplitChiSqDraws:
        first = parts[0]
        fields = ("sx", "sy", "sxp", "syp", "x1", "y1", "sxy")
        return cls(d=first.d, p=first.p, **{f: np.concatenate([getattr(b, f) for b in parts]) for f in fields})

    def swapped(self) -> SplitChiSqDraws:
        """The same draws with the roles of X and Y exchanged."""
        return SplitChiSqDraws(
            d=self.d, p=self.p, sx=self.sy, sy=self.sx, sxp=self.syp, syp=self.sxp, x1=self.y1, y1=self.x1, sxy=self.sxy
        )

    def _plain(self, m0: float, delta: float) -> np.ndarray:
        a2 = m0 / (1.0 - m0)
        signal = self.sxp + 2.0 * math.sqrt(m0 * delta) * self.x1 + m0 * delta
        return signal - (self.sx - 2.0 * math.sqrt(a2) * self.sxy + a2 * self.sy)

    def evaluate(
        self,
        m0: float,
        delta: float = 0.0,
        crossfit: bool = False,
        w0: float = 0.5,
        antithetic: bool = False,
    ) -> np.ndarray:
        """Limit draws at (m0, delta); ``antithetic`` appends the X<->Y swapped draws."""
        if self.p == 0 and delta > 0:
            raise ValueError("delta must be 0 when p = 0")
        if not crossfit:
            values = self._plain(m0, delta)
        else:
            values = w0 * self._plain(m0, delta) + (1.0 - w0) * self.swapped()._plain(1.0 - m0, delta)
        if antithetic:
            # (Y, X) has the same law as (X, Y); at w0 = 0.5 the pair cancels
            # the first-order m0 sensitivity around an even split.
            mirror = self.swapped().evaluate(m0, delta, crossfit, w0)
            values = np.concatenate([values, mirror])
        return values


def draw_limit(
    d: int,
    p: int,
    n_reps: int,
    seed: int,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
    progress: bool = False,
    stream: str = "split-chisq-limit",
) -> SplitChiSqDraws:
    """n_reps (X, Y) pairs, one seeded substream per block of the named stream."""

    def _block(index: int, start: int, stop: int) -> SplitChiSqDraws:
        rng = replication_rng(seed, stream, index)
        return SplitChiSqDraws.from_rng(d, p, rng, stop - start)

    blocks = run_blocks(_block, n_reps, block_size=block_size, threads=threads, progress=progress, desc="limit draws")
    return SplitChiSqDraws.concatenate(blocks)


def sample_split_chisq_batch(params: SplitChiSqParams, rng: np.random.Generator, size: int) -> np.ndarray:
    return SplitChiSqDraws.from_rng(params.d, params.p, rng, size).evaluate(params.m0, params.delta)


def sample_crossfit_batch(
    params: SplitChiSqParams, rng: np.random.Generator, size: int, w0: float = 0.5
) -> np.ndarray:
    draws = SplitChiSqDraws.from_rng(params.d, params.p, rng, size)
    return draws.evaluate(params.m0, params.delta, crossfit=True, w0=w0)


def sample_split_chisq(params: SplitChiSqParams, rng: np.random.Generator) -> float:
    """One exact draw; consumes 2d standard normals from ``rng``."""
    return float(sample_split_chisq_batch(params, rng, 1)[0])


def sample_crossfit_limit(params: SplitChiSqParams, rng: np.random.Generator, w0: float = 0.5) -> float:
    """One draw of w0*Z + (1-w0)*Z_swap built from a single shared (X, Y) pair."""
    return float(sample_crossfit_batch(params, rng, 1, w0)[0])


def sample_split_chisq_direct(
    d: int, m0: float, h: np.ndarray, rng: np.random.Generator, size: int
) -> np.ndarray:
    """Reference sampler taking an arbitrary direction h in R^p."""
    h = np.asarray(h, dtype=float)
    p = h.shape[0]
    if p > d:
        raise DimensionMismatchError(f"h has length {p} > d={d}")
    X = rng.standard_normal((size, d))
    Y = rng.standard_normal((size, d))
    shifted = X[:, :p] + math.sqrt(m0) * h
    resid = X - math.sqrt(m0 / (1.0 - m0)) * Y
    return np.einsum("ij,ij->i", shifted, shifted) - np.einsum("ij,ij->i", resid, resid)


# -------------------------------
# Monte Carlo CDF and quantiles
# -------------------------------


def _limit_values(
    params: SplitChiSqParams,
    crossfit: bool,
    n_reps: int,
    seed: int,
    w0: float,
    sampler: Sampler | None,
    threads: int,
) -> np.ndarray:
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    if sampler is not None:
        return np.asarray(sampler(params, np.random.default_rng(seed), n_reps), dtype=float)
    draws = draw_limit(params.d, params.p, n_reps, seed, threads=threads)
    return draws.evaluate(params.m0, params.delta, crossfit=crossfit, w0=w0)


def empirical_cdf(values: np.ndarray, x: float) -> tuple[float, float]:
    n = values.shape[0]
    est = float(np.count_nonzero(values <= x)) / n
    return est, math.sqrt(est * (1.0 - est) / n)


def order_statistic_quantile(values: np.ndarray, prob: float) -> float:
    """Upper order statistic at index ceil(prob * n) (1-based)."""
    n = values.shape[0]
    idx = max(math.ceil(prob * n - 1e-9), 1) - 1
    return float(np.partition(values, idx)[idx])


def mc_cdf(
    params: SplitChiSqParams,
    crossfit: bool,
    x: float,
    n_reps: int = DEFAULT_REPS,
    seed: int = 0,
    *,
    w0: float = 0.5,
    sampler: Sampler | None = None,
    threads: int = 1,
) -> tuple[float, float]:
    """Fraction of limit draws <= x and its binomial standard error."""
    values = _limit_values(params, crossfit, n_reps, seed, w0, sampler, threads)
    return empirical_cdf(values, x)


def mc_quantile(
    params: SplitChiSqParams,
    crossfit: bool,
    prob: float,
    n_reps: int = DEFAULT_REPS,
    seed: int = 0,
    *,
    w0: float = 0.5,
    sampler: Sampler | None = None,
    threads: int = 1,
) -> float:
    if not 0.0 < prob < 1.0:
        raise ValueError(f"prob must lie in (0, 1), got {prob}")
    if n_reps < 1.0 / min(prob, 1.0 - prob):
        raise ValueError(f"n_reps={n_reps} too small to resolve the {prob} quantile")
    values = _limit_values(params, crossfit, n_reps, seed, w0, sampler, threads)
    return order_statistic_quantile(values, prob)


def normal_cdf(z):
    """Standard normal CDF through the complementary error function."""
    return 0.5 * erfc(-np.asarray(z, dtype=float) / math.sqrt(2.0))


def normal_approx_cdf(params: SplitChiSqParams, x: float, crossfit: bool = False) -> float:
    """Phi((x - mean) / sd) with the closed-form limit moments."""
    summary = moments(params, crossfit=crossfit)
    if math.isinf(x):
        return 1.0 if x > 0 else 0.0
    return float(normal_cdf((x - summary.mean) / math.sqrt(summary.variance)))
