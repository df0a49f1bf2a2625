from __future__ import annotations

from collections.abc import Callable

import numpy as np
import pytest

from splitlr.schemas import SplitChiSqParams
from splitlr.slrt import SplitModel


class ConstantSampler:
    """Sampler stub that returns a point mass at ``value``."""

    def __init__(self, value: float) -> None:
        self.value = value
        self.calls: list[tuple[SplitChiSqParams, int]] = []

    def __call__(self, params: SplitChiSqParams, rng: np.random.Generator, size: int) -> np.ndarray:
        self.calls.append((params, size))
        return np.full(size, self.value)


class OriginModel(SplitModel):
    """Unit-variance Gaussian location model fitted at the origin under both hypotheses.

    Any split statistic it produces is exactly zero.
    """

    def __init__(self, d: int = 2) -> None:
        self.d = d

    def dims(self) -> tuple[int, int]:
        return self.d, self.d

    def log_likelihood(self, theta: np.ndarray, data: np.ndarray) -> float:
        return float(-0.5 * np.sum((data - theta) ** 2))

    def mle_full(self, data: np.ndarray) -> np.ndarray:
        return np.zeros(self.d)

    def mle_null(self, data: np.ndarray) -> np.ndarray:
        return np.zeros(self.d)

    def simulate(self, theta: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal((n, self.d)) + theta


class FailingModel(OriginModel):
    """Model whose null fit always raises."""

    def __init__(self, exc: Exception) -> None:
        super().__init__(d=1)
        self.exc = exc

    def mle_null(self, data: np.ndarray) -> np.ndarray:
        raise self.exc


@pytest.fixture
def constant_sampler() -> Callable[[float], ConstantSampler]:
    return ConstantSampler


@pytest.fixture
def origin_model() -> OriginModel:
    return OriginModel()


@pytest.fixture
def failing_model() -> Callable[[Exception], FailingModel]:
    return FailingModel


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240501)
