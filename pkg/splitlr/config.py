import os
from dataclasses import dataclass, field

from dotenv import load_dotenv

from .errors import ConfigError

load_dotenv()

_TRUTHY = {"1", "true", "True", "yes", "on"}


def _env_int(key: str, default: int) -> int:
    raw = os.environ.get(key, "")
    if not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got {raw!r}") from exc


@dataclass(frozen=True)
class Settings:
    """Runtime defaults parsed from environment variables.

    Attributes:
    seed: master seed used when --seed is not given.
    threads: worker count for replication fan-out.
    limit_reps: replications for studies that sample the limit law directly.
    data_reps: replications for data-level Gaussian studies.
    factor_reps: replications for the factor-analysis study.
    block_size: replications per seeded block; fixes the substream layout.
    progress: show tqdm progress bars.
    """

    seed: int = field(default_factory=lambda: _env_int("SPLITLR_SEED", 20240501))
    threads: int = field(default_factory=lambda: _env_int("SPLITLR_THREADS", 1))
    limit_reps: int = field(default_factory=lambda: _env_int("SPLITLR_LIMIT_REPS", 100_000))
    data_reps: int = field(default_factory=lambda: _env_int("SPLITLR_DATA_REPS", 10_000))
    factor_reps: int = field(default_factory=lambda: _env_int("SPLITLR_FACTOR_REPS", 1_000))
    block_size: int = field(default_factory=lambda: _env_int("SPLITLR_BLOCK_SIZE", 10_000))
    progress: bool = field(default_factory=lambda: os.environ.get("SPLITLR_PROGRESS", "0") in _TRUTHY)


def get_settings() -> Settings:
    s = Settings()
    if s.seed < 0:
        raise ConfigError("SPLITLR_SEED must be non-negative")
    if s.threads < 1:
        raise ConfigError("SPLITLR_THREADS must be at least 1")
    if min(s.limit_reps, s.data_reps, s.factor_reps) < 1:
        raise ConfigError("replication counts must be positive")
    if s.block_size < 1:
        raise ConfigError("SPLITLR_BLOCK_SIZE must be positive")
    return s
