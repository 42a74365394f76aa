"""Monte Carlo harness: determinism, record semantics, and exact baselines."""

import math

import numpy as np
import pytest
from scipy import stats

from mixlab.aggregation import build_trace
from mixlab.constructions import ConstructionError
from mixlab.harness import (
    RECORD_COLUMNS,
    ExperimentConfig,
    ReplicateRecord,
    deviation_experiment,
    deviation_upper_check,
    erm_exact_lower,
    erm_upper_check,
    expectation_benchmark,
    run_experiment,
    wilson_interval,
)
from mixlab.walks import excursion_probability_exact


def small_config(**kw):
    base = dict(kind="expectation", loss="square", y1=1.0, ytilde1=0.8,
                gamma=0.12, n_grid=(12,), replicates=40, seed=3)
    base.update(kw)
    return ExperimentConfig(**base)


class TestWilsonInterval:
    def test_zero_successes_reaches_zero(self):
        lo, hi = wilson_interval(0, 100)
        assert lo == 0.0
        assert 0.0 < hi < 0.1

    def test_contains_the_point_estimate(self):
        for k, n in [(1, 10), (5, 50), (99, 100)]:
            lo, hi = wilson_interval(k, n, z=1.96)
            assert lo <= k / n <= hi
            assert 0.0 <= lo and hi <= 1.0

    def test_wider_z_widens(self):
        lo95, hi95 = wilson_interval(10, 100, z=1.96)
        lo3, hi3 = wilson_interval(10, 100, z=3.0)
        assert lo3 < lo95 and hi95 < hi3

    def test_rejects_empty_sample(self):
        with pytest.raises(ValueError):
            wilson_interval(0, 0)


class TestConfigValidation:
    @pytest.mark.parametrize(
        "kw",
        [
            dict(kind="tail"),
            dict(loss="hinge"),
            dict(n_grid=()),
            dict(n_grid=(0,)),
            dict(replicates=0),
            dict(seed=2**64),
            dict(seed=-1),
            dict(rules=("pm", "map")),
            dict(rules=()),
            dict(pim_substitution="plugin"),
            dict(pim_selector="center"),
            dict(gamma=0.5, c0=1.0),
            dict(kind="deviation", gamma=0.5),
            dict(gamma=1.0),
            dict(gamma=None, c0=-0.1),
            dict(lam=0.0),
            dict(epsilons=(0.0,)),
            dict(tail_fractions=(-1.0,)),
            dict(workers=0),
        ],
    )
    def test_rejects(self, kw):
        base = dict(kind="expectation", gamma=0.1, n_grid=(10,))
        base.update(kw)
        with pytest.raises(ValueError):
            ExperimentConfig(**base)

    def test_gamma_resolution(self):
        assert small_config().gamma_at(12) == 0.12
        sched = ExperimentConfig(kind="deviation", c0=1.0, n_grid=(100,))
        assert sched.gamma_at(100) == pytest.approx(math.sqrt(math.log(100) / 100))
        neither = ExperimentConfig(n_grid=(10,))
        assert neither.gamma_at(10) == 0.0

    def test_semantic_dict_drops_scheduling_knobs(self):
        a = small_config(workers=1)
        b = small_config(workers=8)
        assert a.semantic_dict() == b.semantic_dict()
        assert a.to_dict() != b.to_dict()
        assert "workers" not in a.semantic_dict()

    def test_record_columns_match_record_fields(self):
        fields = tuple(ReplicateRecord.__dataclass_fields__)
        normalized = tuple("S_n" if f == "s_n" else f for f in fields)
        assert normalized == RECORD_COLUMNS


class TestDeterminism:
    def test_identical_reruns(self):
        r1, s1 = run_experiment(small_config())
        r2, s2 = run_experiment(small_config())
        for key in RECORD_COLUMNS:
            a = r1[12].columns()[key]
            b = r2[12].columns()[key]
            np.testing.assert_array_equal(a, b)
        assert s1 == s2

    def test_worker_count_does_not_change_records(self):
        # replicates > block size so multiple spans actually run
        cfg1 = small_config(replicates=10000, n_grid=(8,), workers=1)
        cfg8 = small_config(replicates=10000, n_grid=(8,), workers=8)
        r1, _ = run_experiment(cfg1)
        r8, _ = run_experiment(cfg8)
        for key in RECORD_COLUMNS:
            np.testing.assert_array_equal(r1[8].columns()[key], r8[8].columns()[key])

    def test_seed_changes_records(self):
        r1, _ = run_experiment(small_config(seed=3))
        r2, _ = run_experiment(small_config(seed=4))
        assert not np.array_equal(r1[12].s_n, r2[12].s_n)


class TestRecordSemantics:
    def test_row_and_len(self):
        records, _ = run_experiment(small_config(replicates=5))
        rs = records[12]
        assert len(rs) == 5
        row = rs.row(2)
        assert row.replicate == 2 and row.seed_stream == 2
        assert isinstance(row.excursion, bool)

    def test_walk_and_risk_invariants(self):
        config = small_config(replicates=300, n_grid=(15,))
        records, summary = run_experiment(config)
        rs = records[15]
        con = config.construction(15)
        # S_n has the parity of n and stays within n steps
        assert np.all((rs.s_n + 15) % 2 == 0)
        assert np.all(np.abs(rs.s_n) <= 15)
        assert np.all((rs.p >= 0.0) & (rs.p <= 1.0))
        # selection excess is exactly zero or the full risk gap
        gap = con.risk_gap()
        uniq = np.unique(rs.excess_erm)
        assert all(v == 0.0 or abs(v - gap) < 1e-15 for v in uniq)
        assert np.all(rs.excess_erm >= 0.0)
        # averaged rules never exceed the risk gap and never break the bound
        assert np.all(rs.excess_pm <= gap + 1e-12)
        assert np.all(rs.excess_pim <= gap + 1e-12)
        assert np.all(rs.regret <= rs.regret_bound + 1e-9)
        assert summary["per_n"][0]["regret"]["violations"] == 0

    def test_records_match_reference_aggregator(self):
        """Replay each replicate's label stream through the step-by-step
        reference implementation and demand the same record row."""
        config = small_config(replicates=6, n_grid=(12,), seed=9)
        records, _ = run_experiment(config)
        rs = records[12]
        loss = config.loss_spec()
        con = config.construction(12)
        values = np.array([con.ytilde1, con.ytilde2])
        pstep = 0.5 * (1.0 + con.gamma)
        r1 = float(con.exact_risk(con.ytilde1))
        for rep in range(6):
            rng = np.random.Generator(np.random.Philox(key=[9, rep]))
            u = rng.random(13)
            y = np.where(u < pstep, con.y1, con.y2)
            trace = build_trace(loss, loss.lam, values, y)
            p_avg = float(trace.weights[:, 0].mean())
            assert rs.p[rep] == pytest.approx(p_avg, abs=1e-12)
            assert rs.s_n[rep] == int(np.sum(np.where(y[:12] == con.y1, 1, -1)))
            pm_value = con.ytilde2 + p_avg * (con.ytilde1 - con.ytilde2)
            assert rs.excess_pm[rep] == pytest.approx(
                float(con.exact_risk(pm_value)) - r1, abs=1e-12)
            pim_value = float(trace.predictions.mean())
            assert rs.excess_pim[rep] == pytest.approx(
                float(con.exact_risk(pim_value)) - r1, abs=1e-12)
            assert rs.regret[rep] == pytest.approx(trace.regret(), abs=1e-9)
            s_final = int(np.where(y == con.y1, 1, -1).sum())
            expected_erm = 0.0 if s_final >= 0 else con.risk_gap()
            assert rs.excess_erm[rep] == pytest.approx(expected_erm, abs=0.0)

    def test_pm_equals_pim_for_the_gibbs_mean_substitution(self):
        records, _ = run_experiment(small_config(replicates=50))
        rs = records[12]
        np.testing.assert_allclose(rs.excess_pm, rs.excess_pim, atol=1e-13)

    def test_feasible_interval_substitution_produces_different_records(self):
        mid = small_config(replicates=50, pim_substitution="feasible_interval")
        records, summary = run_experiment(mid)
        rs = records[12]
        assert not np.allclose(rs.excess_pim, rs.excess_pm)
        assert summary["per_n"][0]["regret"]["violations"] == 0

    @pytest.mark.parametrize("selector", ["lower", "upper"])
    def test_feasible_selectors_run_clean(self, selector):
        cfg = small_config(replicates=30, pim_substitution="feasible_interval",
                           pim_selector=selector)
        _, summary = run_experiment(cfg)
        assert summary["per_n"][0]["regret"]["violations"] == 0

    def test_overdriven_temperature_is_infeasible(self):
        cfg = small_config(replicates=10, lam=4.0,
                           pim_substitution="feasible_interval")
        with pytest.raises(ConstructionError, match="infeasible"):
            run_experiment(cfg)


class TestSummaryBlocks:
    def test_excursion_block_matches_dp(self):
        config = ExperimentConfig(kind="deviation", c0=0.05, ytilde1=1.0,
                                  n_grid=(20,), replicates=20000, seed=11)
        _, summary = run_experiment(config)
        block = summary["per_n"][0]
        exc = block["excursion"]
        con = config.construction(20)
        assert exc["dp_exact"] == pytest.approx(
            excursion_probability_exact(20, exc["tau"], con.gamma))
        assert exc["dp_in_wilson3"]
        assert exc["count"] > 0
        assert exc["freq"] == exc["count"] / 20000

    def test_conditional_caps_hold_on_excursions(self):
        """Every replicate that hits the excursion must show the crushed
        leading-expert weight and a bracketed averaged prediction."""
        block = deviation_experiment(n=20, c0=0.05, replicates=20000,
                                     seed=11, ytilde1=1.0)
        cond = block["conditional"]
        assert cond is not None and cond["count"] > 0
        assert cond["weight_cap"] == pytest.approx(1.0 / 21.0)
        assert cond["weight_cap_violations"] == 0
        assert cond["pm_bracket_violations"] == 0
        assert cond["p_bound_violations"] == 0
        assert cond["floor_violations"] == 0
        assert sum(cond["histogram_pm"]["counts"]) == cond["count"]

    def test_deviation_requires_no_excursion_when_probability_is_tiny(self):
        block = deviation_experiment(n=100, c0=1.0, replicates=500, seed=1)
        assert block["excursion"]["dp_exact"] < 1e-6
        assert block["excursion"]["count"] == 0
        assert block["conditional"] is None

    def test_tail_blocks_count_threshold_crossings(self):
        config = small_config(replicates=400, tail_fractions=(0.0, 0.5))
        records, summary = run_experiment(config)
        rs = records[12]
        block = summary["per_n"][0]
        gap = config.construction(12).risk_gap()
        for frac in (0.0, 0.5):
            t = block["rules"]["pm"]["tails"][f"{frac:g}"]
            expected = int((rs.excess_pm >= frac * gap - 1e-15).sum())
            assert t["count"] == expected
            assert t["threshold"] == pytest.approx(frac * gap)

    def test_erm_block_carries_exact_mean(self):
        config = small_config(replicates=4000, n_grid=(25,))
        _, summary = run_experiment(config)
        erm = summary["per_n"][0]["rules"]["erm"]
        con = config.construction(25)
        wrong = float(stats.binom.cdf(math.ceil(26 / 2) - 1, 26, 0.5 * 1.12))
        assert erm["exact_mean"] == pytest.approx(con.risk_gap() * wrong, rel=1e-12)
        # Monte Carlo mean should sit within 5 sigma of the exact value
        spread = max(erm["sem"], 1e-12)
        assert abs(erm["mean"] - erm["exact_mean"]) <= 5 * spread


class TestDerivedExperiments:
    def test_deviation_upper_check_passes_and_reports_slack(self):
        config = ExperimentConfig(kind="deviation", c0=1.0, n_grid=(100,),
                                  replicates=2000, seed=5)
        out = deviation_upper_check(config)
        assert out["all_ok"]
        rows = out["rows"]
        assert {r["epsilon"] for r in rows} == {0.05, 0.1, 0.25}
        assert {r["rule"] for r in rows} == {"pm", "pim"}
        for r in rows:
            assert r["freq"] <= r["limit"]
            assert r["threshold"] > 0

    def test_deviation_upper_check_rejects_unbounded_losses(self):
        config = ExperimentConfig(kind="deviation", loss="entropy", c0=1.0,
                                  y1=0.9, n_grid=(50,), replicates=100)
        with pytest.raises(ValueError, match="unbounded"):
            deviation_upper_check(config)

    def test_erm_exact_lower_rows(self):
        out = erm_exact_lower(n_grid=(16, 64, 256, 1024, 4096))
        rows = {r["n"]: r for r in out["rows"]}
        assert out["holds_from_64"]
        assert not rows[16]["asserted"]
        assert all(rows[n]["asserted"] for n in (64, 256, 1024, 4096))
        for n in (64, 256, 1024, 4096):
            assert rows[n]["max_excess"] >= rows[n]["floor"]
        # the excess over delta/sqrt(n) approaches a Gaussian limit
        assert out["ratio_limit"] == pytest.approx(stats.norm.cdf(-0.5) / 2)
        assert rows[4096]["ratio_to_sqrt"] == pytest.approx(out["ratio_limit"], abs=0.02)

    def test_erm_upper_check(self):
        config = small_config(replicates=2000, n_grid=(50,))
        out = erm_upper_check(config)
        assert out["all_ok"]
        row = out["rows"][0]
        assert row["bound"] == pytest.approx(math.sqrt(2 * math.log(2) / 50))
        assert row["mean"] <= row["bound"]

    def test_expectation_benchmark_scales(self):
        out = expectation_benchmark(n_grid=(100, 400), replicates=2000, seed=2)
        assert out["kappa"] == pytest.approx(0.25, abs=1e-8)
        for row in out["rows"]:
            n = row["n"]
            assert row["benchmark"] == pytest.approx(0.25 / (math.e * (n + 1)), rel=1e-6)
            # the selection rule cannot undercut the scale mark here
            assert row["erm_excess_max_vertex"] >= row["benchmark"]
            assert row["pm_within_gap_bound"]
            assert row["gap_bound"] == pytest.approx(math.log(2) / (0.5 * (n + 1)))
