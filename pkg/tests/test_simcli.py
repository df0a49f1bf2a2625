from __future__ import annotations

import csv
import math
from pathlib import Path

import pytest

from splitlr import simcli
from splitlr.errors import EXIT_CONFIG, EXIT_NONCONVERGENCE, ConfigError
from splitlr.schemas import MethodSpec, PowerCurveRow, QuantileRow, ScenarioConfig


def read_csv(path: Path) -> tuple[str, list[dict[str, str]]]:
    with path.open(newline="", encoding="utf-8") as fh:
        schema = fh.readline().strip()
        return schema, list(csv.DictReader(fh))


def test_format_value() -> None:
    assert simcli.format_value(0.1) == "0.10000000000000001"
    assert simcli.format_value(None) == ""
    assert simcli.format_value(True) == "true"
    assert simcli.format_value(3) == "3"
    assert simcli.format_value(6.0) == "6"


def test_write_csv_is_atomic_and_versioned(tmp_path: Path) -> None:
    target = tmp_path / "out" / "rows.csv"
    row = PowerCurveRow.from_hits(
        scenario="gaussian", variable="n", value=100, method="lrt", rejections=3, reps=10, seed=1
    )
    simcli.write_csv([row], target)
    schema, rows = read_csv(target)
    assert schema == "schema=1"
    assert list(rows[0]) == ["scenario", "variable", "value", "method", "m0", "power", "se", "reps", "failures", "seed"]
    assert rows[0]["power"] == "0.29999999999999999"
    assert rows[0]["m0"] == ""
    assert [p.name for p in target.parent.iterdir()] == ["rows.csv"]

    simcli.write_csv([row, row], target)
    assert len(read_csv(target)[1]) == 2


def test_method_spec_parsing() -> None:
    spec = MethodSpec.parse("crossfit:0.41:0.7")
    assert (spec.kind, spec.m0, spec.w0) == ("crossfit", 0.41, 0.7)
    assert spec.label == "crossfit:0.41:0.7"
    assert MethodSpec.parse("subsample:0.41:2").n_subsamples == 2
    assert MethodSpec.parse("lrt").label == "lrt"
    assert MethodSpec.parse("slrt:0.51").label == "slrt:0.51"
    for bad in ("bogus", "slrt", "crossfit:x"):
        with pytest.raises(ValueError):
            MethodSpec.parse(bad)


def test_resolve_k() -> None:
    assert simcli.resolve_k("5", 6) == 5
    assert simcli.resolve_k("d/6", 96) == 16
    assert simcli.resolve_k("d/6", 6) == 1
    with pytest.raises(ConfigError):
        simcli.resolve_k("7", 6)
    with pytest.raises(ConfigError):
        simcli.resolve_k("half", 6)


def test_quantile_study_rows() -> None:
    rows = simcli.run_quantile_study(6, [1, 6], [0.3, 0.7], [0.01, 0.1], 20_000, seed=3)
    assert len(rows) == 8
    assert all(isinstance(r, QuantileRow) for r in rows)
    for row in rows:
        assert row.quantile < row.threshold
    by_key = {(r.p, r.m0, r.alpha): r for r in rows}
    for p in (1, 6):
        for m0 in (0.3, 0.7):
            assert by_key[(p, m0, 0.01)].quantile > by_key[(p, m0, 0.1)].quantile
    with pytest.raises(ConfigError):
        simcli.run_quantile_study(6, [1], [0.5], [0.001], 100, seed=3)


def test_power_vs_split_rows() -> None:
    rows = simcli.run_power_vs_split(6, [1], 40.0, 0.05, [0.05, 0.3, 0.6, 0.95], 20_000, seed=4)
    assert len(rows) == 8
    slrt = {r.m0: r.power for r in rows if r.method == "slrt"}
    asym = {r.m0: r.power for r in rows if r.method == "asym"}
    assert slrt[0.6] > slrt[0.3]
    assert slrt[0.6] > max(slrt[0.05], slrt[0.95])
    for m0, power in slrt.items():
        assert asym[m0] >= power
    for row in rows:
        assert row.se == pytest.approx(math.sqrt(row.power * (1 - row.power) / row.reps))


def test_power_vs_n_rows() -> None:
    config = ScenarioConfig(
        scenario="gaussian",
        model_params={"d": 6, "k": 0, "theta": 0.1},
        n_grid=[100, 2000],
        m0_grid=[0.5],
        n_reps=200,
        seed=5,
    )
    rows = simcli.run_power_vs_n(config, limit_reps=20_000)
    assert [r.method for r in rows[:3]] == ["lrt", "slrt:0.5", "asym:0.5"]
    assert len(rows) == 6
    power = {(r.value, r.method): r.power for r in rows}
    assert power[(2000.0, "lrt")] > 0.9
    assert power[(2000.0, "lrt")] >= power[(2000.0, "slrt:0.5")]
    assert power[(2000.0, "asym:0.5")] >= power[(2000.0, "slrt:0.5")]
    with pytest.raises(ConfigError):
        simcli.run_power_vs_n(config.model_copy(update={"scenario": "factor-regular"}))


def test_split_comparison_rows() -> None:
    rows = simcli.run_optimal_split_comparison(
        [12], "5", 0.05, 5_000, seed=6, deltas=[100.0], target_powers=[0.8], grid_step=0.05
    )
    assert {r.method for r in rows} == {"algo1", "mc", "eq5", "thumb"}
    assert {r.scenario for r in rows} == {"fixed-delta:100:k=5", "target-power:0.8:k=5"}
    calibrated = {r.method: r.power for r in rows if r.scenario.startswith("target-power")}
    assert calibrated["algo1"] >= 0.8


def test_factor_study_rows() -> None:
    rows = simcli.run_factor_study(
        [1.0], ["slrt:0.41", "crossfit:0.5:0.5", "subsample:0.41:2"], 200, 4, seed=7, regimes=(True,)
    )
    assert [r.method for r in rows] == ["slrt:0.41", "crossfit:0.5:0.5", "subsample:0.41:2"]
    for row in rows:
        assert row.scenario == "factor-regular"
        assert row.variable == "h"
        assert row.reps == 4
        assert 0.0 <= row.power <= 1.0


def test_factor_study_counts_failed_fits() -> None:
    rows = simcli.run_factor_study([0.0], ["slrt:0.41"], 20, 3, seed=8, regimes=(False,))
    assert rows[0].failures == 3
    assert rows[0].power == 0.0


def test_factor_study_propagates_errors_other_than_fit_failures(monkeypatch: pytest.MonkeyPatch) -> None:
    def broken(*args: object, **kwargs: object) -> float:
        raise ValueError("bad shape")

    monkeypatch.setattr(simcli, "slrt_statistic", broken)
    with pytest.raises(ValueError, match="bad shape"):
        simcli.run_factor_study([0.0], ["slrt:0.41"], 50, 2, seed=1, regimes=(True,))


def test_default_h_grid_covers_power_transition() -> None:
    args = simcli.parse_args(["factor-study"])
    assert args.h_grid == list(simcli.DEFAULT_H_GRID)
    assert args.h_grid[0] == 0.0
    assert {0.25, 0.35, 0.5} <= set(args.h_grid)
    assert max(args.h_grid) <= 0.5


def test_factor_study_size_at_null() -> None:
    reps = 100
    rows = simcli.run_factor_study(
        [0.0], ["slrt:0.41", "crossfit:0.5:0.5", "subsample:0.41:2"], 2000, reps, seed=12
    )
    assert {r.scenario for r in rows} == {"factor-regular", "factor-irregular"}
    bound = 0.05 + 3 * math.sqrt(0.05 * 0.95 / reps)
    for row in rows:
        assert row.power <= bound, row
        assert row.failures < reps // 10


def test_factor_study_smaller_split_more_powerful_mid_range() -> None:
    rows = simcli.run_factor_study([0.35], ["slrt:0.41", "slrt:0.51"], 2000, 150, seed=13, regimes=(False,))
    small, large = rows
    assert 0.0 < small.power < 1.0
    assert small.power >= large.power - 2 * math.hypot(small.se, large.se)


def test_split_comparison_normal_search_beats_fixed_formula() -> None:
    rows = simcli.run_optimal_split_comparison([24, 48], "5", 0.05, 10_000, seed=14, grid_step=0.05)
    power = {(r.scenario, r.value, r.method): r for r in rows}
    for (scenario, d, method), row in power.items():
        if method != "algo1":
            continue
        eq5 = power[(scenario, d, "eq5")]
        assert row.power >= eq5.power - 2 * math.hypot(row.se, eq5.se), (scenario, d)


def test_main_optimal_split_eq5(tmp_path: Path) -> None:
    out = tmp_path / "split.csv"
    assert simcli.main(["optimal-split", "--d", "78", "--k", "24", "--method", "eq5", "--out", str(out)]) == 0
    schema, rows = read_csv(out)
    assert schema == "schema=1"
    assert float(rows[0]["m0_opt"]) == pytest.approx(0.5094, abs=1e-3)
    assert rows[0]["achieved_power"] == ""


def test_main_optimal_split_algo1(tmp_path: Path) -> None:
    out = tmp_path / "split.csv"
    assert simcli.main(["optimal-split", "--d", "78", "--k", "24", "--out", str(out)]) == 0
    _, rows = read_csv(out)
    assert float(rows[0]["m0_opt"]) == pytest.approx(0.41, abs=0.03)
    assert float(rows[0]["achieved_power"]) >= 0.8


def test_main_exit_codes(tmp_path: Path) -> None:
    out = str(tmp_path / "x.csv")
    assert simcli.main(["optimal-split", "--d", "5", "--k", "5", "--out", out]) == EXIT_NONCONVERGENCE
    assert simcli.main(["moments", "--d", "6", "--p", "7", "--m0", "0.5", "--out", out]) == EXIT_CONFIG
    assert simcli.main(["moments", "--d", "6", "--p", "3", "--m0", "0.5", "--alpha", "2", "--out", out]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as info:
        simcli.main(["optimal-split", "--d", "6"])
    assert info.value.code == 2


def test_main_moments(tmp_path: Path) -> None:
    out = tmp_path / "m.csv"
    args = ["moments", "--d", "6", "--p", "3", "--m0", "0.5", "--delta", "40", "--order", "4", "--out", str(out)]
    assert simcli.main(args) == 0
    _, rows = read_csv(out)
    assert float(rows[0]["mean"]) == pytest.approx(11.0)
    assert float(rows[0]["variance"]) == pytest.approx(122.0)
    assert rows[0]["moment4"] != ""


def test_main_is_independent_of_thread_count(tmp_path: Path) -> None:
    outputs = []
    for threads in ("1", "3"):
        out = tmp_path / f"q{threads}.csv"
        args = ["quantile", "--d", "6", "--p-list", "1,6", "--m0-grid", "0.3,0.7", "--reps", "25000"]
        assert simcli.main([*args, "--seed", "9", "--threads", threads, "--out", str(out)]) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_main_sample(tmp_path: Path) -> None:
    out = tmp_path / "s.csv"
    args = ["sample", "--d", "4", "--p", "2", "--m0", "0.4", "--delta", "3", "--reps", "50", "--out", str(out)]
    assert simcli.main(args) == 0
    _, rows = read_csv(out)
    assert len(rows) == 50
    assert rows[0]["index"] == "0"
