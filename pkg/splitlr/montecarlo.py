"""Replication seeding and fan-out for the Monte Carlo studies.

Replications are grouped into fixed-size blocks. Each block draws from its
own substream derived from (seed, scenario, block index), so results depend
only on the block layout and never on how many workers run the blocks.
"""

from __future__ import annotations

import hashlib
import math
from collections.abc import Callable, Sequence
from typing import TypeVar

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from infrastructure.logger import get_logger

logger = get_logger(__name__)

T = TypeVar("T")

DEFAULT_BLOCK_SIZE = 10_000


def scenario_key(name: str) -> int:
    """Stable 32-bit key for a scenario label (``hash()`` is salted per process)."""
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=4).digest()
    return int.from_bytes(digest, "big")


def replication_seed(seed: int, scenario: str, index: int, *extra: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=(scenario_key(scenario), index, *extra))


def replication_rng(seed: int, scenario: str, index: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng(replication_seed(seed, scenario, index, *extra))


def block_ranges(n_reps: int, block_size: int = DEFAULT_BLOCK_SIZE) -> list[tuple[int, int]]:
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    if block_size < 1:
        raise ValueError("block_size must be at least 1")
    return [(start, min(start + block_size, n_reps)) for start in range(0, n_reps, block_size)]


def run_blocks(
    func: Callable[[int, int, int], T],
    n_reps: int,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
    progress: bool = False,
    desc: str = "replications",
) -> list[T]:
    """Evaluate ``func(block_index, start, stop)`` for every block, results in block order."""
    ranges = block_ranges(n_reps, block_size)
    logger.debug("%s: %d reps in %d blocks on %d thread(s)", desc, n_reps, len(ranges), threads)
    tasks = (delayed(func)(i, start, stop) for i, (start, stop) in enumerate(ranges))
    if progress:
        tasks = tqdm(tasks, total=len(ranges), desc=desc)
    if threads == 1:
        return [f(*args, **kwargs) for f, args, kwargs in tasks]
    return Parallel(n_jobs=threads, prefer="threads")(tasks)


def map_replications(
    func: Callable[[int], T],
    n_reps: int,
    *,
    block_size: int = DEFAULT_BLOCK_SIZE,
    threads: int = 1,
    progress: bool = False,
    desc: str = "replications",
) -> list[T]:
    """Apply ``func(rep_index)`` to every replication; output order is replication order."""

    def _block(_: int, start: int, stop: int) -> list[T]:
        return [func(i) for i in range(start, stop)]

    blocks = run_blocks(_block, n_reps, block_size=block_size, threads=threads, progress=progress, desc=desc)
    return [item for block in blocks for item in block]


def paired_se(hits_a: Sequence[bool] | np.ndarray, hits_b: Sequence[bool] | np.ndarray) -> float:
    """Standard error of the power difference of two tests run on the same replications."""
    a = np.asarray(hits_a, dtype=float)
    b = np.asarray(hits_b, dtype=float)
    if a.shape != b.shape or a.size < 2:
        raise ValueError("paired comparisons need equally long hit vectors of length >= 2")
    diff = a - b
    return float(diff.std(ddof=1) / math.sqrt(diff.size))
