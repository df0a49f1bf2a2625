"""Concrete models for the split likelihood ratio tests.

GaussianMeanModel is the regular d-dimensional unit-covariance mean model;
FactorModel tests the one-factor covariance family against the saturated
model, which is singular at loadings with fewer than three nonzero entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from infrastructure.logger import get_logger

from .errors import DegenerateDataError, NonConvergenceError
from .slrt import SplitModel

logger = get_logger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)

# Heywood guard: specific variances never drop below this during fitting.
OMEGA_FLOOR = 1e-6

SCENARIOS = ("gaussian", "factor-regular", "factor-irregular")


# ----------------
# Gaussian means
# ----------------


def gaussian_mle(data: np.ndarray, restrict_null: bool = False, p: int = 0) -> np.ndarray:
    """Sample mean; under the null the first p coordinates are zero."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    if data.shape[0] == 0:
        raise ValueError("cannot fit a mean to an empty subset")
    theta = data.mean(axis=0)
    if restrict_null:
        theta[:p] = 0.0
    return theta


@dataclass(frozen=True)
class GaussianMeanModel(SplitModel):
    """N_d(theta, I); H0: the first p = d - k mean coordinates are zero."""

    d: int
    k: int

    def __post_init__(self) -> None:
        if self.d < 1 or not 0 <= self.k <= self.d:
            raise ValueError(f"need d >= 1 and 0 <= k <= d, got d={self.d}, k={self.k}")

    def dims(self) -> tuple[int, int]:
        return self.d, self.k

    def log_likelihood(self, theta: np.ndarray, data: np.ndarray) -> float:
        resid = np.asarray(data, dtype=float) - theta
        n = resid.shape[0]
        return float(-0.5 * np.einsum("ij,ij->", resid, resid) - 0.5 * n * self.d * _LOG_2PI)

    def mle_full(self, data: np.ndarray) -> np.ndarray:
        return gaussian_mle(data)

    def mle_null(self, data: np.ndarray) -> np.ndarray:
        return gaussian_mle(data, restrict_null=True, p=self.p)

    def simulate(self, theta: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal((n, self.d)) + np.asarray(theta, dtype=float)


def gaussian_local_alternative(d: int, k: int, h: np.ndarray, n: int) -> tuple[np.ndarray, float]:
    """theta_n = h / sqrt(n) and the limit noncentrality ||h_[p]||^2 (identity information)."""
    h = np.asarray(h, dtype=float)
    if h.shape != (d,):
        raise ValueError(f"h must have length {d}")
    p = d - k
    return h / math.sqrt(n), float(h[:p] @ h[:p])


# ------------------
# Factor analysis
# ------------------


@dataclass(frozen=True)
class FactorFit:
    omega: np.ndarray  # diagonal of Omega
    gamma: np.ndarray
    log_likelihood: float
    em_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = True
    start: int = 0

    @property
    def sigma(self) -> np.ndarray:
        return np.diag(self.omega) + np.outer(self.gamma, self.gamma)


def sample_covariance(data: np.ndarray) -> np.ndarray:
    """Zero-mean MLE X^T X / n."""
    data = np.asarray(data, dtype=float)
    return data.T @ data / data.shape[0]


def gaussian_cov_loglik(sigma: np.ndarray, S: np.ndarray, n: int) -> float:
    """Zero-mean Gaussian log-likelihood from the sample second-moment matrix S."""
    sign, logdet = np.linalg.slogdet(sigma)
    if sign <= 0:
        return -math.inf
    p = S.shape[0]
    return float(-0.5 * n * (p * _LOG_2PI + logdet + np.trace(np.linalg.solve(sigma, S))))


def _objective(params: np.ndarray, S: np.ndarray) -> tuple[float, np.ndarray]:
    """log det(Sigma) + tr(Sigma^-1 S) and its gradient in (gamma, omega)."""
    q = S.shape[0]
    gamma, omega = params[:q], params[q:]
    sigma = np.diag(omega) + np.outer(gamma, gamma)
    try:
        chol = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        return math.inf, np.zeros_like(params)
    inv = np.linalg.inv(sigma)
    logdet = 2.0 * float(np.log(np.diag(chol)).sum())
    inv_s = inv @ S
    value = logdet + float(np.trace(inv_s))
    G = inv - inv_s @ inv
    return value, np.concatenate([2.0 * G @ gamma, np.diag(G).copy()])


def _em_steps(
    S: np.ndarray, gamma: np.ndarray, omega: np.ndarray, n: int, steps: int
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Rubin-Thayer EM iterations for one factor; returns the log-likelihood after each step."""
    trace = [gaussian_cov_loglik(np.diag(omega) + np.outer(gamma, gamma), S, n)]
    for _ in range(steps):
        sigma = np.diag(omega) + np.outer(gamma, gamma)
        beta = np.linalg.solve(sigma, gamma)  # Sigma^-1 gamma
        s_beta = S @ beta
        ezz = 1.0 - gamma @ beta + beta @ s_beta
        new_gamma = s_beta / ezz
        new_omega = np.maximum(np.diag(S) - new_gamma * s_beta, OMEGA_FLOOR)
        ll = gaussian_cov_loglik(np.diag(new_omega) + np.outer(new_gamma, new_gamma), S, n)
        if ll < trace[-1] - 1e-9 * abs(trace[-1]):
            # only possible when the floor binds
            logger.debug("EM step decreased the log-likelihood (%.10g -> %.10g); stopping EM", trace[-1], ll)
            break
        gamma, omega = new_gamma, new_omega
        trace.append(ll)
    return gamma, omega, trace


def _starting_points(S: np.ndarray, n_starts: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    eigval, eigvec = np.linalg.eigh(S)
    lead, v = eigval[-1], eigvec[:, -1]
    rest = float(eigval[:-1].mean()) if eigval.size > 1 else 0.0
    gamma0 = v * math.sqrt(max(lead - rest, 1e-3))
    diag = np.diag(S)
    omega0 = np.maximum(diag - gamma0**2, 0.05 * diag)
    starts = [(gamma0, omega0)]
    for j in range(1, n_starts):
        rng = np.random.default_rng([seed, j])
        gamma = gamma0 * (1.0 + 0.5 * rng.standard_normal(gamma0.size)) + 0.1 * np.sqrt(diag) * rng.standard_normal(
            gamma0.size
        )
        omega = np.maximum(omega0 * np.exp(0.5 * rng.standard_normal(omega0.size)), 10 * OMEGA_FLOOR)
        starts.append((gamma, omega))
    return starts


def fit_one_factor(
    S: np.ndarray,
    n: int,
    *,
    tol: float = 1e-6,
    max_iter: int = 500,
    n_starts: int = 5,
    em_steps: int = 25,
    seed: int = 0,
) -> FactorFit:
    """One-factor Gaussian MLE from a sample second-moment matrix.

    EM warm start, then L-BFGS-B on (gamma, diag Omega) with Omega bounded
    below by OMEGA_FLOOR. The best converged start wins.
    """
    q = S.shape[0]
    bounds = [(None, None)] * q + [(OMEGA_FLOOR, None)] * q
    best: FactorFit | None = None
    for start, (gamma, omega) in enumerate(_starting_points(S, n_starts, seed)):
        gamma, omega, trace = _em_steps(S, gamma, omega, n, em_steps)
        res = minimize(
            _objective,
            np.concatenate([gamma, omega]),
            args=(S,),
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": max_iter, "gtol": tol, "ftol": 1e-12},
        )
        x = res.x
        _, grad = _objective(x, S)
        # projected gradient: components pushing into an active bound do not count
        at_floor = np.concatenate([np.zeros(q, dtype=bool), x[q:] <= OMEGA_FLOOR * (1 + 1e-8)])
        grad = np.where(at_floor & (grad > 0), 0.0, grad)
        converged = bool(res.success) or float(np.abs(grad).max()) <= tol
        fit = FactorFit(
            omega=x[q:].copy(),
            gamma=x[:q].copy(),
            log_likelihood=-0.5 * n * (q * _LOG_2PI + float(res.fun)),
            em_trace=trace,
            iterations=int(res.nit),
            converged=converged,
            start=start,
        )
        logger.debug("factor start %d: ll=%.6f converged=%s (%s)", start, fit.log_likelihood, converged, res.message)
        if converged and (best is None or fit.log_likelihood > best.log_likelihood):
            best = fit
    if best is None:
        raise NonConvergenceError(f"one-factor fit did not converge from any of {n_starts} starts")
    return best


def factor_mle(
    data: np.ndarray,
    restrict_to_one_factor: bool = True,
    tol: float = 1e-6,
    max_iter: int = 500,
    *,
    n_starts: int = 5,
    seed: int = 0,
) -> FactorFit | np.ndarray:
    """One-factor fit (restricted) or the saturated MLE, the sample covariance."""
    data = np.asarray(data, dtype=float)
    n, q = data.shape
    if n <= q:
        raise DegenerateDataError(f"need more than {q} observations, got {n}")
    S = sample_covariance(data)
    if np.linalg.cond(S) > 1e12:
        raise DegenerateDataError("sample covariance is numerically singular")
    if not restrict_to_one_factor:
        return S
    return fit_one_factor(S, n, tol=tol, max_iter=max_iter, n_starts=n_starts, seed=seed)


@dataclass(frozen=True)
class FactorModel(SplitModel):
    """N_q(0, Sigma): H0 Sigma = Omega + Gamma Gamma^T vs. any positive definite Sigma."""

    n_vars: int = 12
    tol: float = 1e-6
    max_iter: int = 500
    n_starts: int = 5
    seed: int = 0

    def dims(self) -> tuple[int, int]:
        q = self.n_vars
        return q * (q + 1) // 2, 2 * q

    def log_likelihood(self, theta: np.ndarray, data: np.ndarray) -> float:
        data = np.asarray(data, dtype=float)
        return gaussian_cov_loglik(theta, sample_covariance(data), data.shape[0])

    def mle_full(self, data: np.ndarray) -> np.ndarray:
        return factor_mle(data, restrict_to_one_factor=False)

    def mle_null(self, data: np.ndarray) -> np.ndarray:
        fit = factor_mle(
            data, True, self.tol, self.max_iter, n_starts=self.n_starts, seed=self.seed
        )
        return fit.sigma

    def simulate(self, theta: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        chol = np.linalg.cholesky(theta)
        return rng.standard_normal((n, self.n_vars)) @ chol.T


@dataclass(frozen=True)
class TwoFactorAlternative:
    """Sigma = Omega + Gamma Gamma^T + Gamma2 Gamma2^T with Gamma2 = (h/sqrt(q), ..., h/sqrt(q))."""

    omega: np.ndarray
    gamma: np.ndarray
    gamma2: np.ndarray
    h: float
    regular: bool

    @property
    def n_vars(self) -> int:
        return int(self.omega.size)

    @property
    def null_sigma(self) -> np.ndarray:
        return np.diag(self.omega) + np.outer(self.gamma, self.gamma)

    @property
    def sigma(self) -> np.ndarray:
        return self.null_sigma + np.outer(self.gamma2, self.gamma2)

    @property
    def name(self) -> str:
        return "factor-regular" if self.regular else "factor-irregular"

    def model(self, **kwargs: float | int) -> FactorModel:
        return FactorModel(n_vars=self.n_vars, **kwargs)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.model().simulate(self.sigma, n, rng)


def factor_scenario(regular: bool, h: float, n_vars: int = 12) -> TwoFactorAlternative:
    """Omega = I/5; Gamma = (5,5,5,0,...) (regular) or (5,5,0,...) (irregular)."""
    if h < 0:
        raise ValueError("h must be non-negative")
    omega = np.full(n_vars, 0.2)
    gamma = np.zeros(n_vars)
    gamma[: 3 if regular else 2] = 5.0
    gamma2 = np.full(n_vars, h / math.sqrt(n_vars))
    return TwoFactorAlternative(omega=omega, gamma=gamma, gamma2=gamma2, h=h, regular=regular)
