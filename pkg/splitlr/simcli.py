"""Simulation studies for the split likelihood ratio test and their CLI.

Each study returns validated row models; ``write_csv`` serialises them with
a ``schema=1`` first line and 17 significant digits per real, replacing the
target file atomically. Results depend on the seed only, never on --threads.

    splitlr quantile --d 6 --p-list 1,3,6 --m0-grid 0.1,0.3,0.5,0.7,0.9 --out q.csv
    splitlr optimal-split --d 78 --k 24 --method algo1
    splitlr factor-study --reps 1000 --threads 8 --out factor.csv
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import tempfile
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import BaseModel

from infrastructure.logger import get_logger

from .config import Settings, get_settings
from .errors import EXIT_FAILURE, EXIT_OK, ConfigError, DegenerateDataError, NonConvergenceError, exit_code_for
from .models import SCENARIOS, FactorModel, GaussianMeanModel, factor_scenario
from .montecarlo import map_replications, paired_se, replication_rng, replication_seed
from .ratio import (
    calibrate_delta,
    limit_hits,
    optimal_split_crossfit,
    optimal_split_mc,
    optimal_split_normal,
    rule_of_thumb_split,
    wasserman_split,
)
from .schemas import (
    MethodSpec,
    OptimalSplitRow,
    PowerCurveRow,
    QuantileRow,
    ScenarioConfig,
    SplitChiSqParams,
    SplitSearchConfig,
    universal_threshold,
)
from .slrt import (
    DataSplit,
    classical_lrt,
    combine_crossfit,
    combine_subsamples,
    slrt_statistic,
    split_data,
    subsample_seeds,
)
from .splitchisq import draw_limit, mc_quantile, moments, order_statistic_quantile

logger = get_logger(__name__)

SCHEMA_LINE = "schema=1"

DEFAULT_D_GRID = (6, 12, 24, 48, 96)
DEFAULT_N_GRID = (50, 100, 200, 500, 1000, 2000)
DEFAULT_M0_GRID = tuple(round(0.05 * i, 2) for i in range(1, 20))
# power at n=2000 climbs from the size level to 1 between h=0.25 and h=0.5
DEFAULT_H_GRID = (0.0, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5)
DEFAULT_FACTOR_METHODS = (
    "slrt:0.41",
    "slrt:0.51",
    "crossfit:0.5:0.5",
    "crossfit:0.41:0.5",
    "crossfit:0.41:0.7",
    "subsample:0.41:2",
)

# A failed MLE counts as a non-rejection and is reported in the failures column.
FIT_FAILURES = (NonConvergenceError, DegenerateDataError, np.linalg.LinAlgError)


# ----------------
# CSV output
# ----------------


def format_value(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(rows: Sequence[BaseModel], path: str | Path | None, columns: Sequence[str] | None = None) -> None:
    """Write ``schema=1``, a header and one line per row; ``path=None`` writes to stdout."""
    if columns is None:
        if not rows:
            raise ValueError("columns are required when there are no rows")
        columns = list(type(rows[0]).model_fields)
    lines = [[format_value(row.model_dump()[c]) for c in columns] for row in rows]

    if path is None:
        sys.stdout.write(SCHEMA_LINE + "\n")
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(lines)
        return

    target = Path(path).expanduser()
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(SCHEMA_LINE + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            writer.writerows(lines)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    logger.info("Wrote %d rows to %s", len(rows), target)


# ----------------------------
# Limit-distribution studies
# ----------------------------


def run_quantile_study(
    d: int,
    p_list: Sequence[int],
    m0_grid: Sequence[float],
    alpha_list: Sequence[float],
    n_reps: int,
    seed: int,
    *,
    threads: int = 1,
    progress: bool = False,
) -> list[QuantileRow]:
    """(1 - alpha) Monte Carlo quantiles of the null split chi-square next to -2 log(alpha)."""
    smallest = min(min(a, 1.0 - a) for a in alpha_list)
    if n_reps < 1.0 / smallest:
        raise ConfigError(f"n_reps={n_reps} cannot resolve alpha={smallest}")
    logger.info("Quantile study d=%d p=%s (%d reps)", d, list(p_list), n_reps)
    rows = []
    for p in p_list:
        draws = draw_limit(d, p, n_reps, seed, threads=threads, progress=progress)
        for m0 in (SplitChiSqParams(d=d, p=p, m0=m).m0 for m in m0_grid):
            values = draws.evaluate(m0)
            for alpha in alpha_list:
                rows.append(
                    QuantileRow(
                        scenario="split-chisq",
                        d=d,
                        p=p,
                        m0=m0,
                        alpha=alpha,
                        quantile=order_statistic_quantile(values, 1.0 - alpha),
                        threshold=universal_threshold(alpha),
                        reps=n_reps,
                        seed=seed,
                    )
                )
    return rows


def run_power_vs_split(
    d: int,
    p_list: Sequence[int],
    delta: float,
    alpha: float,
    m0_grid: Sequence[float],
    n_reps: int,
    seed: int,
    *,
    threads: int = 1,
    progress: bool = False,
) -> list[PowerCurveRow]:
    """Limit power per m0 at the universal threshold (``slrt``) and at the null limit quantile (``asym``).

    Both use the same draws at every m0, so neighbouring points are paired.
    """
    logger.info("Power vs split d=%d p=%s delta=%g (%d reps)", d, list(p_list), delta, n_reps)
    rows = []
    for p in p_list:
        draws = draw_limit(d, p, n_reps, seed, threads=threads, progress=progress)
        scenario = f"limit-d{d}-p{p}"
        for m0 in (SplitChiSqParams(d=d, p=p, m0=m, delta=delta).m0 for m in m0_grid):
            critical = order_statistic_quantile(draws.evaluate(m0), 1.0 - alpha)
            for method, cv in (("slrt", None), ("asym", critical)):
                hits = limit_hits(draws, m0, delta, alpha, critical_value=cv)
                rows.append(
                    PowerCurveRow.from_hits(
                        scenario=scenario,
                        variable="m0",
                        value=m0,
                        method=method,
                        m0=m0,
                        rejections=int(hits.sum()),
                        reps=n_reps,
                        seed=seed,
                    )
                )
    return rows


def resolve_k(rule: str, d: int) -> int:
    """Hypothesis dimension from a rule: an integer such as ``5`` or ``d/6``."""
    if rule == "d/6":
        k = max(1, round(d / 6))
    else:
        try:
            k = int(rule)
        except ValueError as exc:
            raise ConfigError(f"unknown k rule {rule!r}") from exc
    if not 0 <= k < d:
        raise ConfigError(f"k rule {rule!r} gives k={k}, need 0 <= k < d={d}")
    return k


def run_optimal_split_comparison(
    d_grid: Sequence[int],
    k_rule: str,
    alpha: float,
    n_reps: int,
    seed: int,
    *,
    deltas: Sequence[float] = (100.0, 250.0),
    target_powers: Sequence[float] = (0.8, 0.65),
    grid_step: float = 0.01,
    threads: int = 1,
    progress: bool = False,
) -> list[PowerCurveRow]:
    """Limit power of the algo1, mc, eq5 and thumb splits per d.

    Fixed-delta rows use each delta in ``deltas``; calibrated rows use the
    smallest delta at which the algo1 split reaches each target power.
    Splits are searched on one stream and evaluated on another, the same
    evaluation draws for every method.
    """
    rows = []
    for d in d_grid:
        k = resolve_k(k_rule, d)
        p = d - k
        search = SplitSearchConfig(alpha=alpha, n_reps=n_reps, seed=seed, threads=threads, grid_step=grid_step)
        splits = {
            "algo1": optimal_split_normal(d, p, config=search).m0_opt,
            "mc": optimal_split_mc(d, p, config=search).m0_opt,
            "eq5": wasserman_split(d, alpha),
            "thumb": rule_of_thumb_split(d, k),
        }
        logger.info("d=%d k=%d splits: %s", d, k, {m: round(v, 4) for m, v in splits.items()})
        draws = draw_limit(d, p, n_reps, seed, threads=threads, progress=progress, stream="split-comparison")

        regimes = [(f"fixed-delta:{delta:g}:k={k_rule}", float(delta)) for delta in deltas]
        for target in target_powers:
            delta = calibrate_delta(draws, splits["algo1"], alpha, target)
            regimes.append((f"target-power:{target:g}:k={k_rule}", delta))

        for scenario, delta in regimes:
            hits = {m: limit_hits(draws, m0, delta, alpha) for m, m0 in splits.items()}
            logger.info(
                "%s d=%d delta=%.4g: power(algo1) - power(eq5) = %.4f (paired se %.4f)",
                scenario,
                d,
                delta,
                hits["algo1"].mean() - hits["eq5"].mean(),
                paired_se(hits["algo1"], hits["eq5"]),
            )
            for method, m0 in splits.items():
                rows.append(
                    PowerCurveRow.from_hits(
                        scenario=scenario,
                        variable="d",
                        value=d,
                        method=method,
                        m0=m0,
                        rejections=int(hits[method].sum()),
                        reps=n_reps,
                        seed=seed,
                    )
                )
    return rows


def optimal_split(
    d: int, k: int, alpha: float, method: str, *, grid_step: float = 0.01, n_reps: int, seed: int, threads: int = 1
) -> OptimalSplitRow:
    p = d - k
    if method in ("eq5", "thumb"):
        m0 = wasserman_split(d, alpha) if method == "eq5" else rule_of_thumb_split(d, k)
        return OptimalSplitRow(
            d=d, k=k, alpha=alpha, method=method, m0_opt=m0, achieved_power=None, delta_used=None, reps=0, seed=seed
        )
    search = {"algo1": optimal_split_normal, "mc": optimal_split_mc, "crossfit": optimal_split_crossfit}
    if method not in search:
        raise ConfigError(f"unknown split method {method!r}")
    config = SplitSearchConfig(alpha=alpha, grid_step=grid_step, n_reps=n_reps, seed=seed, threads=threads)
    result = search[method](d, p, config=config)
    return OptimalSplitRow(
        d=d,
        k=k,
        alpha=alpha,
        method=method,
        m0_opt=result.m0_opt,
        achieved_power=result.achieved_power,
        delta_used=result.delta_used,
        reps=0 if method == "algo1" else n_reps,
        seed=seed,
    )


# ---------------------
# Data-level studies
# ---------------------


def run_power_vs_n(
    config: ScenarioConfig, *, limit_reps: int = 100_000, threads: int = 1, progress: bool = False
) -> list[PowerCurveRow]:
    """Gaussian mean model at theta = (theta, ..., theta): LRT, universal SLRT and Asym per n and m0.

    ``model_params`` may set d (6), k (0) and theta (0.1).
    """
    if config.scenario != "gaussian":
        raise ConfigError(f"power-vs-n runs the gaussian scenario, got {config.scenario!r}")
    d = int(config.model_params.get("d", 6))
    k = int(config.model_params.get("k", 0))
    theta = np.full(d, float(config.model_params.get("theta", 0.1)))
    model = GaussianMeanModel(d, k)
    m0_list = list(config.m0_grid or [0.5])
    threshold = universal_threshold(config.alpha)
    critical = [
        mc_quantile(SplitChiSqParams(d=d, p=model.p, m0=m0), False, 1.0 - config.alpha, limit_reps, config.seed)
        for m0 in m0_list
    ]
    logger.info("Power vs n d=%d k=%d m0=%s (%d reps)", d, k, m0_list, config.n_reps)

    rows = []
    for n in config.n_grid or DEFAULT_N_GRID:

        def one(rep: int, n: int = n) -> list[bool]:
            data = model.simulate(theta, n, replication_rng(config.seed, config.scenario, rep, n))
            hits = [classical_lrt(model, data, config.alpha).reject]
            for j, m0 in enumerate(m0_list):
                split = split_data(n, m0, replication_seed(config.seed, config.scenario, rep, n, j + 1))
                stat = slrt_statistic(model, data, split)
                hits += [stat > threshold, stat > critical[j]]
            return hits

        hits = np.asarray(
            map_replications(one, config.n_reps, threads=threads, progress=progress, desc=f"n={n}"), dtype=bool
        )
        labels = [("lrt", None)]
        for m0 in m0_list:
            labels += [(f"slrt:{m0:g}", m0), (f"asym:{m0:g}", m0)]
        for col, (method, m0) in enumerate(labels):
            rows.append(
                PowerCurveRow.from_hits(
                    scenario=config.scenario,
                    variable="n",
                    value=n,
                    method=method,
                    m0=m0,
                    rejections=int(hits[:, col].sum()),
                    reps=config.n_reps,
                    seed=config.seed,
                )
            )
    return rows


@dataclass
class _ReplicationStatistics:
    """Split statistics of one dataset, computed once per (m0, orientation)."""

    model: FactorModel
    data: np.ndarray
    seed_for: Callable[[float], np.random.SeedSequence]
    _cache: dict[tuple[float, bool], float | Exception] = field(default_factory=dict)

    def split(self, m0: float) -> DataSplit:
        return split_data(self.data.shape[0], m0, self.seed_for(m0))

    def statistic(self, m0: float, swap: bool = False) -> float:
        key = (m0, swap)
        if key not in self._cache:
            split = self.split(m0)
            try:
                self._cache[key] = slrt_statistic(self.model, self.data, split.swapped() if swap else split)
            except FIT_FAILURES as exc:
                self._cache[key] = exc
        value = self._cache[key]
        if isinstance(value, Exception):
            raise NonConvergenceError(f"split statistic at m0={m0} failed") from value
        return value


def _factor_reject(
    method: MethodSpec, stats: _ReplicationStatistics, alpha: float, critical: dict[float, float]
) -> bool:
    threshold = universal_threshold(alpha)
    if method.kind == "lrt":
        return classical_lrt(stats.model, stats.data, alpha).reject
    m0 = method.m0
    if method.kind == "slrt":
        return stats.statistic(m0) > threshold
    if method.kind == "asym":
        return stats.statistic(m0) > critical[m0]
    if method.kind == "crossfit":
        if method.w0 == 1.0:
            return stats.statistic(m0) > threshold
        return combine_crossfit(stats.statistic(m0), stats.statistic(m0, swap=True), method.w0, alpha).reject
    # subsample: the first split is the plain SLRT split
    extra = subsample_seeds(stats.seed_for(m0), method.n_subsamples)[1:]
    values = [stats.statistic(m0)]
    values += [slrt_statistic(stats.model, stats.data, split_data(stats.data.shape[0], m0, s)) for s in extra]
    return combine_subsamples(values, alpha).reject


def run_factor_study(
    h_grid: Sequence[float],
    methods: Sequence[str],
    n: int,
    n_reps: int,
    seed: int,
    *,
    alpha: float = 0.05,
    regimes: Sequence[bool] = (True, False),
    n_vars: int = 12,
    limit_reps: int = 100_000,
    threads: int = 1,
    progress: bool = False,
) -> list[PowerCurveRow]:
    """Power of SLRT variants for the one-factor null against two-factor alternatives.

    Replication ``rep`` uses the same normals at every h, and every method
    sees the same dataset and the same split for a given m0.
    """
    specs = [MethodSpec.parse(m) for m in methods]
    rows = []
    for regular in regimes:
        for h in h_grid:
            scenario = factor_scenario(regular, h, n_vars)
            model = scenario.model(seed=seed)
            d, k = model.dims()
            critical = {
                s.m0: mc_quantile(SplitChiSqParams(d=d, p=d - k, m0=s.m0), False, 1.0 - alpha, limit_reps, seed)
                for s in specs
                if s.kind == "asym"
            }

            def one(rep: int, scenario=scenario, model=model, critical=critical) -> tuple[list[bool], list[bool]]:
                data = scenario.sample(n, replication_rng(seed, scenario.name, rep, 0))
                stats = _ReplicationStatistics(
                    model,
                    data,
                    lambda m0: replication_seed(seed, scenario.name, rep, 1, round(m0 * 10_000)),
                )
                hits, failures = [], []
                for spec in specs:
                    try:
                        hits.append(_factor_reject(spec, stats, alpha, critical))
                        failures.append(False)
                    except FIT_FAILURES:
                        hits.append(False)
                        failures.append(True)
                return hits, failures

            logger.info("Factor study %s h=%g n=%d (%d reps)", scenario.name, h, n, n_reps)
            results = map_replications(one, n_reps, threads=threads, progress=progress, desc=f"{scenario.name} h={h:g}")
            hits = np.asarray([r[0] for r in results], dtype=bool)
            failures = np.asarray([r[1] for r in results], dtype=bool)
            for col, spec in enumerate(specs):
                n_failed = int(failures[:, col].sum())
                if n_failed:
                    logger.warning("%s h=%g %s: %d failed fits", scenario.name, h, spec.label, n_failed)
                rows.append(
                    PowerCurveRow.from_hits(
                        scenario=scenario.name,
                        variable="h",
                        value=h,
                        method=spec.label,
                        m0=spec.m0,
                        rejections=int(hits[:, col].sum()),
                        reps=n_reps,
                        failures=n_failed,
                        seed=seed,
                    )
                )
    return rows


# ----------------
# CLI
# ----------------


class MomentRow(BaseModel):
    d: int
    p: int
    m0: float
    delta: float
    crossfit: bool
    w0: float
    mean: float
    variance: float
    moment3: float | None
    moment4: float | None


class SampleRow(BaseModel):
    index: int
    value: float


def positive_int(value: str) -> int:
    try:
        parsed = int(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{value!r} is not an integer") from exc
    if parsed <= 0:
        raise argparse.ArgumentTypeError("value must be positive")
    return parsed


def float_list(value: str) -> list[float]:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{value!r} is not a comma-separated list of numbers") from exc


def int_list(value: str) -> list[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"{value!r} is not a comma-separated list of integers") from exc


def str_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Master seed (defaults to SPLITLR_SEED).")
    common.add_argument("--reps", type=positive_int, default=None, help="Monte Carlo replications.")
    common.add_argument("--alpha", type=float, default=0.05, help="Significance level (default: 0.05).")
    common.add_argument("--threads", type=positive_int, default=None, help="Worker threads (defaults to SPLITLR_THREADS).")
    common.add_argument("--out", default=None, help="CSV output path (default: stdout).")

    parser = argparse.ArgumentParser(
        prog="splitlr",
        description="Split likelihood ratio tests: limit distribution, optimal splits and simulation studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def limit_params(p: argparse.ArgumentParser) -> None:
        p.add_argument("--d", type=positive_int, required=True)
        p.add_argument("--p", type=int, required=True)
        p.add_argument("--m0", type=float, required=True)
        p.add_argument("--delta", type=float, default=0.0)
        p.add_argument("--crossfit", action="store_true", help="Use the cross-fit limit.")
        p.add_argument("--w0", type=float, default=0.5, help="Cross-fit weight of the original split.")

    p = sub.add_parser("sample", parents=[common], help="Draw from the (cross-fit) split chi-square.")
    limit_params(p)
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("moments", parents=[common], help="Raw moments of the (cross-fit) split chi-square.")
    limit_params(p)
    p.add_argument("--order", type=int, choices=(2, 3, 4), default=2)
    p.set_defaults(handler=cmd_moments)

    p = sub.add_parser("quantile", parents=[common], help="Null quantiles against the universal threshold.")
    p.add_argument("--d", type=positive_int, required=True)
    p.add_argument("--p-list", type=int_list, required=True)
    p.add_argument("--m0-grid", type=float_list, default=list(DEFAULT_M0_GRID))
    p.add_argument("--alpha-list", type=float_list, default=[0.01, 0.05, 0.1])
    p.set_defaults(handler=cmd_quantile)

    p = sub.add_parser("optimal-split", parents=[common], help="Optimal splitting ratio for (d, k).")
    p.add_argument("--d", type=positive_int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--method", choices=("algo1", "mc", "eq5", "thumb", "crossfit"), default="algo1")
    p.add_argument("--grid-step", type=float, default=0.01)
    p.set_defaults(handler=cmd_optimal_split)

    p = sub.add_parser("power-vs-n", parents=[common], help="Gaussian power against sample size.")
    p.add_argument("--d", type=positive_int, default=6)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--theta", type=float, default=0.1)
    p.add_argument("--n-grid", type=int_list, default=list(DEFAULT_N_GRID))
    p.add_argument("--m0-grid", type=float_list, default=[0.3, 0.5, 0.7])
    p.set_defaults(handler=cmd_power_vs_n)

    p = sub.add_parser("power-vs-split", parents=[common], help="Limit power against the splitting ratio.")
    p.add_argument("--d", type=positive_int, required=True)
    p.add_argument("--p-list", type=int_list, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--m0-grid", type=float_list, default=list(DEFAULT_M0_GRID))
    p.set_defaults(handler=cmd_power_vs_split)

    p = sub.add_parser("split-comparison", parents=[common], help="Power of competing splitting ratios per d.")
    p.add_argument("--d-grid", type=int_list, default=list(DEFAULT_D_GRID))
    p.add_argument("--k-rule", default="5", help="Integer k or 'd/6' (default: 5).")
    p.add_argument("--deltas", type=float_list, default=[100.0, 250.0])
    p.add_argument("--target-powers", type=float_list, default=[0.8, 0.65])
    p.add_argument("--grid-step", type=float, default=0.01)
    p.set_defaults(handler=cmd_split_comparison)

    p = sub.add_parser("factor-study", parents=[common], help="SLRT variants in one-factor analysis.")
    p.add_argument("--n", type=positive_int, default=2000)
    p.add_argument("--h-grid", type=float_list, default=list(DEFAULT_H_GRID))
    p.add_argument("--methods", type=str_list, default=list(DEFAULT_FACTOR_METHODS))
    p.add_argument("--scenarios", type=str_list, default=["factor-regular", "factor-irregular"])
    p.set_defaults(handler=cmd_factor_study)

    return parser.parse_args(argv)


def _seed(args: argparse.Namespace, settings: Settings) -> int:
    seed = settings.seed if args.seed is None else args.seed
    if seed < 0:
        raise ConfigError("--seed must be non-negative")
    return seed


def _threads(args: argparse.Namespace, settings: Settings) -> int:
    return settings.threads if args.threads is None else args.threads


def cmd_sample(args: argparse.Namespace, settings: Settings) -> list[BaseModel]:
    params = SplitChiSqParams(d=args.d, p=args.p, m0=args.m0, delta=args.delta)
    reps = args.reps or 1000
    draws = draw_limit(
        params.d, params.p, reps, _seed(args, settings), block_size=settings.block_size, threads=_threads(args, settings)
    )
    values = draws.evaluate(params.m0, params.delta, crossfit=args.crossfit, w0=args.w0)
    return [SampleRow(index=i, value=float(v)) for i, v in enumerate(values)]


def cmd_moments(args: argparse.Namespace, settings: Settings) -> list[BaseModel]:
    params = SplitChiSqParams(d=args.d, p=args.p, m0=args.m0, delta=args.delta)
    summary = moments(params, crossfit=args.crossfit, w0=args.w0, max_order=args.order)
    return [
        MomentRow(
            d=params.d,
            p=params.p,
            m0=params.m0,
            delta=params.delta,
            crossfit=args.crossfit,
            w0=args.w0,
            **summary.model_dump(),
        )
    ]


def cmd_quantile(args: argparse.Namespace, settings: Settings) -> list[BaseModel]:
    return run_quantile_study(
        args.d,
        args.p_list,
        args.m0_grid,
        args.alpha_list,
        args.reps or settings.limit_reps,
        _seed(args, settings),
        threads=_threads(args, settings),
        progress=settings.progress,
    )


def cmd_optimal_split(args: argparse.Namespace, settings: Settings) -> list[BaseModel]:
    return [
        optimal_split(
            args.d,
            args.k,
            args.alpha,
            args.method,
            grid_step=args.grid_step,
            n_reps=args.reps or settings.limit_reps,
            seed=_seed(args, settings),
            threads=_threads(args, settings),
        )
    ]


def cmd_power_vs_n(args: argparse.Namespace, settings: Settings) -> list[BaseModel]:
    config = ScenarioConfig(
        scenario="gaussian",
        model_params={"d": args.d, "k": args.k, "theta": args.theta},
        n_grid=args.n_grid,
        m0_grid=args.m0_grid,
        alpha=args.alpha,
        n_reps=args.reps or settings.data_reps,
        seed=_seed(args, settings),
        out=args.out,
    )
    return run_power_vs_n(
        config, limit_reps=settings.limit_reps, threads=_threads(args, settings), progress=settings.progress
    )


def cmd_power_vs_split(args: argparse.Namespace, settings: Settings) -> list[BaseModel]:
    return run_power_vs_split(
        args.d,
        args.p_list,
        args.delta,
        args.alpha,
        args.m0_grid,
        args.reps or settings.limit_reps,
        _seed(args, settings),
        threads=_threads(args, settings),
        progress=settings.progress,
    )


def cmd_split_comparison(args: argparse.Namespace, settings: Settings) -> list[BaseModel]:
    return run_optimal_split_comparison(
        args.d_grid,
        args.k_rule,
        args.alpha,
        args.reps or settings.limit_reps,
        _seed(args, settings),
        deltas=args.deltas,
        target_powers=args.target_powers,
        grid_step=args.grid_step,
        threads=_threads(args, settings),
        progress=settings.progress,
    )


def cmd_factor_study(args: argparse.Namespace, settings: Settings) -> list[BaseModel]:
    unknown = [s for s in args.scenarios if s not in SCENARIOS or s == "gaussian"]
    if unknown:
        raise ConfigError(f"unknown factor scenarios: {unknown}")
    return run_factor_study(
        args.h_grid,
        args.methods,
        args.n,
        args.reps or settings.factor_reps,
        _seed(args, settings),
        alpha=args.alpha,
        regimes=[s == "factor-regular" for s in args.scenarios],
        limit_reps=settings.limit_reps,
        threads=_threads(args, settings),
        progress=settings.progress,
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    try:
        settings = get_settings()
        if not 0.0 < args.alpha < 1.0:
            raise ConfigError(f"--alpha must lie in (0, 1), got {args.alpha}")
        rows = args.handler(args, settings)
        write_csv(rows, args.out)
    except Exception as exc:
        code = exit_code_for(exc)
        if code == EXIT_FAILURE:
            logger.exception("%s failed", args.command)
        else:
            logger.error("%s failed: %s", args.command, exc)
        return code
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
