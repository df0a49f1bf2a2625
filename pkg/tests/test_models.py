from __future__ import annotations

import numpy as np
import pytest

from splitlr.errors import DegenerateDataError, NonConvergenceError
from splitlr.models import (
    OMEGA_FLOOR,
    SCENARIOS,
    FactorFit,
    FactorModel,
    GaussianMeanModel,
    _em_steps,
    factor_mle,
    factor_scenario,
    fit_one_factor,
    gaussian_cov_loglik,
    gaussian_local_alternative,
    gaussian_mle,
    sample_covariance,
)


def test_gaussian_mle_examples() -> None:
    np.testing.assert_array_equal(gaussian_mle(np.array([[2.0, 4.0]])), [2.0, 4.0])
    np.testing.assert_array_equal(
        gaussian_mle(np.array([[2.0, 4.0], [0.0, 0.0]]), restrict_null=True, p=1), [0.0, 2.0]
    )
    with pytest.raises(ValueError):
        gaussian_mle(np.empty((0, 2)))


def test_gaussian_model_probe_invariants() -> None:
    model = GaussianMeanModel(d=5, k=2)
    rng = np.random.default_rng(1)
    data = model.simulate(np.full(5, 0.5), 30, rng)
    full = model.mle_full(data)
    null = model.mle_null(data)
    assert np.all(null[: model.p] == 0.0)
    assert model.log_likelihood(null, data) <= model.log_likelihood(full, data)
    for _ in range(50):
        probe = full + 0.3 * rng.standard_normal(5)
        assert model.log_likelihood(probe, data) <= model.log_likelihood(full, data)
        probe[: model.p] = 0.0
        assert model.log_likelihood(probe, data) <= model.log_likelihood(null, data) + 1e-9


def test_gaussian_model_dims() -> None:
    model = GaussianMeanModel(d=6, k=1)
    assert model.dims() == (6, 1)
    assert model.p == 5
    with pytest.raises(ValueError):
        GaussianMeanModel(d=3, k=4)


def test_gaussian_local_alternative() -> None:
    theta, delta = gaussian_local_alternative(4, 1, np.array([2.0, 2.0, 2.0, 5.0]), 100)
    np.testing.assert_allclose(theta, [0.2, 0.2, 0.2, 0.5])
    assert delta == pytest.approx(12.0)
    with pytest.raises(ValueError):
        gaussian_local_alternative(4, 1, np.ones(3), 100)


def test_factor_scenarios() -> None:
    regular = factor_scenario(True, 0.0)
    irregular = factor_scenario(False, 0.0)
    np.testing.assert_allclose(regular.sigma, regular.null_sigma)
    assert np.count_nonzero(regular.gamma) == 3
    assert np.count_nonzero(irregular.gamma) == 2
    assert regular.name == "factor-regular"
    assert irregular.name == "factor-irregular"
    alt = factor_scenario(True, 2.0)
    np.testing.assert_allclose(alt.gamma2, np.full(12, 2.0 / np.sqrt(12)))
    np.linalg.cholesky(alt.sigma)
    with pytest.raises(ValueError):
        factor_scenario(True, -1.0)
    assert set(SCENARIOS) == {"gaussian", "factor-regular", "factor-irregular"}


def test_factor_model_dims() -> None:
    model = FactorModel()
    assert model.dims() == (78, 24)
    assert model.p == 54


def test_saturated_fit_is_sample_covariance() -> None:
    data = factor_scenario(True, 1.0).sample(100, np.random.default_rng(2))
    np.testing.assert_array_equal(factor_mle(data, restrict_to_one_factor=False), data.T @ data / 100)


def test_factor_fit_recovers_generating_covariance() -> None:
    scenario = factor_scenario(True, 0.0)
    data = scenario.sample(5000, np.random.default_rng(3))
    fit = factor_mle(data)
    assert isinstance(fit, FactorFit)
    assert fit.converged
    assert np.all(fit.omega >= OMEGA_FLOOR)
    error = np.linalg.norm(fit.sigma - scenario.sigma) / np.linalg.norm(scenario.sigma)
    assert error < 0.05


def test_one_factor_likelihood_below_saturated() -> None:
    data = factor_scenario(False, 1.5).sample(300, np.random.default_rng(4))
    fit = factor_mle(data)
    S = sample_covariance(data)
    saturated = gaussian_cov_loglik(S, S, 300)
    assert fit.log_likelihood <= saturated + 1e-6
    model = FactorModel()
    assert model.log_likelihood(model.mle_null(data), data) <= model.log_likelihood(model.mle_full(data), data) + 1e-6


def test_em_iterations_never_decrease_likelihood() -> None:
    data = factor_scenario(False, 0.0).sample(400, np.random.default_rng(5))
    S = sample_covariance(data)
    gamma0 = np.full(12, 0.5)
    omega0 = np.diag(S).copy()
    _, _, trace = _em_steps(S, gamma0, omega0, 400, 40)
    assert len(trace) > 1
    assert all(b >= a - 1e-9 * abs(a) for a, b in zip(trace, trace[1:], strict=False))


def test_factor_fit_is_deterministic() -> None:
    data = factor_scenario(True, 0.5).sample(200, np.random.default_rng(6))
    a = factor_mle(data, seed=3)
    b = factor_mle(data, seed=3)
    np.testing.assert_array_equal(a.sigma, b.sigma)
    assert a.start == b.start


def test_factor_fit_input_validation() -> None:
    with pytest.raises(DegenerateDataError):
        factor_mle(np.random.default_rng(0).standard_normal((12, 12)))
    singular = np.zeros((50, 12))
    singular[:, 0] = 1.0
    with pytest.raises(DegenerateDataError):
        factor_mle(singular)


def test_fit_without_iterations_fails() -> None:
    data = factor_scenario(True, 0.0).sample(200, np.random.default_rng(7))
    S = sample_covariance(data)
    with pytest.raises(NonConvergenceError):
        fit_one_factor(S, 200, tol=1e-300, max_iter=1, n_starts=2, em_steps=0)
