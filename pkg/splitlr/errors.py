"""Exception hierarchy and exit-code classification."""

from __future__ import annotations

from collections.abc import Iterable

from pydantic import ValidationError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3


class SplitLRError(RuntimeError):
    pass


class ConfigError(SplitLRError):
    """Invalid settings, CLI arguments or scenario definitions."""


class NonConvergenceError(SplitLRError):
    """An iterative search or fit stopped without meeting its criterion."""


class DimensionMismatchError(SplitLRError, ValueError):
    pass


class EmptySplitError(SplitLRError, ValueError):
    """A data split would leave one of the two parts empty."""


class DegenerateDataError(SplitLRError, ValueError):
    """Too few observations, or a numerically singular sample covariance."""


def _iter_causes(exc: BaseException) -> Iterable[BaseException]:
    """Yield the exception and its causes."""
    current: BaseException | None = exc
    while current is not None:
        yield current
        current = current.__cause__


def exit_code_for(exc: BaseException) -> int:
    """Map an exception (or anything in its cause chain) to a CLI exit code."""
    for candidate in _iter_causes(exc):
        if isinstance(candidate, NonConvergenceError):
            return EXIT_NONCONVERGENCE
        if isinstance(candidate, (ConfigError, ValidationError, ValueError)):
            return EXIT_CONFIG
    return EXIT_FAILURE
