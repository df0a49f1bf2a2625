from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

from infrastructure.logger import get_logger

logger = get_logger(__name__)

# m0 is clamped into this band at API boundaries; the limit variance
# diverges as m0 -> 1.
M0_MIN = 0.01
M0_MAX = 0.99


def universal_threshold(alpha: float) -> float:
    """Critical value -2 log(alpha) of the split likelihood ratio test."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return -2.0 * math.log(alpha)


def clamp_m0(m0: float) -> float:
    if not 0.0 < m0 < 1.0:
        raise ValueError(f"m0 must lie in (0, 1), got {m0}")
    clamped = min(max(m0, M0_MIN), M0_MAX)
    if clamped != m0:
        logger.debug("m0=%g clamped to %g", m0, clamped)
    return clamped


class SplitChiSqParams(BaseModel):
    """Parameters (d, p, m0, delta) of the noncentral split chi-square family."""

    model_config = ConfigDict(frozen=True)

    d: int = Field(..., ge=1)
    p: int = Field(..., ge=0)
    m0: float
    delta: float = Field(0.0, ge=0.0)

    @field_validator("m0")
    @classmethod
    def _clamp(cls, v: float) -> float:
        return clamp_m0(v)

    @model_validator(mode="after")
    def _check_dims(self) -> SplitChiSqParams:
        if self.p > self.d:
            raise ValueError(f"p={self.p} exceeds d={self.d}")
        if self.p == 0 and self.delta > 0:
            raise ValueError("delta must be 0 when p = 0 (no constrained coordinates)")
        return self

    @property
    def k(self) -> int:
        return self.d - self.p

    @property
    def m1(self) -> float:
        return 1.0 - self.m0


class MomentSummary(BaseModel):
    mean: float
    variance: float = Field(..., ge=0.0)
    moment3: float | None = None  # raw E[Z^3]
    moment4: float | None = None  # raw E[Z^4]


class TestConfig(BaseModel):
    """Significance level, replication counts and seed of a testing run."""

    __test__ = False  # keep pytest from collecting this class

    alpha: float = Field(0.05, gt=0.0, lt=1.0)
    n_reps: int = Field(10_000, ge=1)
    limit_reps: int = Field(100_000, ge=1)
    seed: int = Field(0, ge=0)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def threshold(self) -> float:
        return universal_threshold(self.alpha)


class SplitSearchConfig(BaseModel):
    """Inputs of the optimal splitting-ratio search."""

    grid_step: float = Field(0.01, gt=0.0)
    m0_range: tuple[float, float] = (0.05, 0.95)
    target_power: float = Field(0.8, gt=0.0, lt=1.0)
    alpha: float = Field(0.05, gt=0.0, lt=1.0)
    delta_initial: float | None = Field(None, gt=0.0)  # None -> max(1, p)
    delta_factor: float = Field(1.25, gt=1.0)
    delta_cap: float = Field(1e9, gt=0.0)
    refine_tol: float = Field(1e-4, gt=0.0)
    n_reps: int = Field(100_000, ge=1)
    seed: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check_range(self) -> SplitSearchConfig:
        lo, hi = self.m0_range
        if not 0.0 < lo < hi < 1.0:
            raise ValueError(f"m0_range must be a closed interval inside (0, 1), got {self.m0_range}")
        if self.grid_step >= hi - lo:
            raise ValueError("grid_step must be smaller than the m0_range length")
        return self


SplitMethod = Literal["algo1", "mc", "eq5", "thumb", "crossfit"]


class SplitRatioResult(BaseModel):
    m0_opt: float
    achieved_power: float | None = None
    delta_used: float | None = None
    method: SplitMethod
    converged: bool = True
    iterations: int = 0
    trace: list[tuple[float, float, float]] = Field(default_factory=list)  # (delta, m0, power) per step


SlrtVariant = Literal["plain", "crossfit", "subsample", "classical", "asymptotic"]


class SlrtResult(BaseModel):
    """Statistic value(s) and decision of one test on one dataset."""

    statistic: float
    statistic_swap: float | None = None
    weight_w0: float = Field(1.0, ge=0.0, le=1.0)
    combined: float
    threshold: float
    reject: bool
    variant: SlrtVariant = "plain"
    n_subsamples: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check_decision(self) -> SlrtResult:
        if self.reject != (self.combined > self.threshold):
            raise ValueError("reject flag disagrees with combined statistic and threshold")
        return self

    @property
    def log_e_value(self) -> float:
        """log of the e-value exp(combined / 2); for subsampling the log of the averaged e-value."""
        return 0.5 * self.combined


class ScenarioConfig(BaseModel):
    """One study run: scenario, grids, level, replications, seed, output path."""

    scenario: str
    model_params: dict[str, float | int | str] = Field(default_factory=dict)
    m0_grid: list[float] | None = None
    n_grid: list[int] | None = None
    h_grid: list[float] | None = None
    d_grid: list[int] | None = None
    alpha: float = Field(0.05, gt=0.0, lt=1.0)
    n_reps: int = Field(10_000, ge=100)
    seed: int = Field(0, ge=0)
    out: str | None = None

    @field_validator("m0_grid", "n_grid", "h_grid", "d_grid")
    @classmethod
    def _nonempty(cls, v: list | None) -> list | None:
        if v is not None and len(v) == 0:
            raise ValueError("grids must be nonempty")
        return v

    @field_validator("m0_grid")
    @classmethod
    def _m0_inside(cls, v: list[float] | None) -> list[float] | None:
        return None if v is None else [clamp_m0(m) for m in v]


def binomial_se(power: float, reps: int) -> float:
    return math.sqrt(max(power * (1.0 - power), 0.0) / reps)


class PowerCurveRow(BaseModel):
    scenario: str
    variable: str
    value: float
    method: str
    m0: float | None = None
    power: float = Field(..., ge=0.0, le=1.0)
    se: float = Field(..., ge=0.0)
    reps: int = Field(..., ge=1)
    failures: int = Field(0, ge=0)
    seed: int

    @model_validator(mode="after")
    def _check_se(self) -> PowerCurveRow:
        if not math.isclose(self.se, binomial_se(self.power, self.reps), rel_tol=1e-9, abs_tol=1e-15):
            raise ValueError("se must equal sqrt(p(1-p)/reps)")
        return self

    @classmethod
    def from_hits(
        cls,
        *,
        scenario: str,
        variable: str,
        value: float,
        method: str,
        rejections: int,
        reps: int,
        seed: int,
        m0: float | None = None,
        failures: int = 0,
    ) -> PowerCurveRow:
        power = rejections / reps
        return cls(
            scenario=scenario,
            variable=variable,
            value=value,
            method=method,
            m0=m0,
            power=power,
            se=binomial_se(power, reps),
            reps=reps,
            failures=failures,
            seed=seed,
        )


class QuantileRow(BaseModel):
    scenario: str
    d: int
    p: int
    m0: float
    alpha: float
    quantile: float
    threshold: float
    reps: int
    seed: int


class OptimalSplitRow(BaseModel):
    d: int
    k: int
    alpha: float
    method: SplitMethod
    m0_opt: float
    achieved_power: float | None
    delta_used: float | None
    reps: int
    seed: int


MethodKind = Literal["slrt", "crossfit", "subsample", "lrt", "asym"]


class MethodSpec(BaseModel):
    """A test variant parsed from strings like ``crossfit:0.41:0.7``."""

    model_config = ConfigDict(frozen=True)

    kind: MethodKind
    m0: float | None = None
    w0: float = Field(0.5, ge=0.0, le=1.0)
    n_subsamples: int = Field(2, ge=1)

    @classmethod
    def parse(cls, text: str) -> MethodSpec:
        parts = text.strip().split(":")
        kind = parts[0]
        try:
            if kind == "lrt":
                return cls(kind="lrt")
            if kind in ("slrt", "asym"):
                return cls(kind=kind, m0=float(parts[1]))
            if kind == "crossfit":
                w0 = float(parts[2]) if len(parts) > 2 else 0.5
                return cls(kind="crossfit", m0=float(parts[1]), w0=w0)
            if kind == "subsample":
                j = int(parts[2]) if len(parts) > 2 else 2
                return cls(kind="subsample", m0=float(parts[1]), n_subsamples=j)
        except (IndexError, ValueError) as exc:
            raise ValueError(f"cannot parse method {text!r}") from exc
        raise ValueError(f"unknown method kind {kind!r}")

    @property
    def label(self) -> str:
        if self.kind == "lrt":
            return "lrt"
        if self.kind == "crossfit":
            return f"crossfit:{self.m0:g}:{self.w0:g}"
        if self.kind == "subsample":
            return f"subsample:{self.m0:g}:{self.n_subsamples}"
        return f"{self.kind}:{self.m0:g}"
