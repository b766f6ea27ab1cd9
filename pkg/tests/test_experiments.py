import math
from fractions import Fraction

import numpy as np
import pytest

from cantor_rgg import experiments
from cantor_rgg.exceptions import ConsistencyError, DomainError
from cantor_rgg.experiments import (block_size, estimate_escape_probability, inclusion_exclusion_escape,
                                    occupancy_test, replicate_batch, resolve_workers, run_convergence,
                                    run_experiment, run_l1_rate, simulate_block, union_bound, verify_identity)
from cantor_rgg.model import RATE_GRID, ExperimentConfig, Target
from cantor_rgg.output import results_csv
from cantor_rgg.sampler import split_stats
from cantor_rgg.sequence import compute_sequence, compute_sequence_numeric
from cantor_rgg.threshold import connectivity_threshold
from tests import BaseTestClass


def only(config: ExperimentConfig, target: Target, **changes) -> ExperimentConfig:
    return config.model_copy(update={"targets": (target,), **changes})


class TestBlocks(BaseTestClass):
    def test_block_size(self):
        assert block_size(8, 8) == 2 ** 17
        assert block_size(1000, 2 ** 21) == 2
        assert block_size(2 ** 21, 8) == 1

    def test_replicate_batch_matches_block(self, small_config):
        for n in small_config.n_grid:
            arrays = simulate_block(small_config.params, n, small_config.master_seed, 0, small_config.replicates)
            for replicate_id in (0, 17, small_config.replicates - 1):
                batch = replicate_batch(small_config, n, replicate_id)
                stats = split_stats(batch)
                assert connectivity_threshold(batch.points).r == arrays.r[replicate_id]
                assert stats.n_lower == arrays.n_lower[replicate_id]
                assert stats.all_cells_occupied == arrays.occupied[replicate_id]
                assert stats.minimum == arrays.minimum[replicate_id]
                assert stats.maximum == arrays.maximum[replicate_id]

    def test_replicate_batch_across_blocks(self, small_config, monkeypatch):
        monkeypatch.setattr(experiments, "BLOCK_POINTS", 64)
        size = block_size(16, small_config.params.cells)
        assert size == 4
        arrays = simulate_block(small_config.params, 16, small_config.master_seed, 3, size)
        batch = replicate_batch(small_config, 16, 3 * size + 2)
        assert connectivity_threshold(batch.points).r == arrays.r[2]

    def test_replicate_out_of_range(self, small_config):
        with pytest.raises(DomainError):
            replicate_batch(small_config, 8, small_config.replicates)

    def test_workers(self):
        assert resolve_workers(3) == 3
        assert resolve_workers(0) >= 1
        with pytest.raises(DomainError):
            resolve_workers(-1)


class TestDeterminism(BaseTestClass):
    def test_rerun_is_identical(self, small_config):
        assert results_csv(run_experiment(small_config)) == results_csv(run_experiment(small_config))

    def test_independent_of_workers(self, small_config, monkeypatch):
        monkeypatch.setattr(experiments, "BLOCK_POINTS", 256)
        serial = results_csv(run_experiment(small_config, workers=1))
        assert results_csv(run_experiment(small_config, workers=3)) == serial

    def test_seed_changes_results(self, small_config):
        other = small_config.model_copy(update={"master_seed": 8})
        assert results_csv(run_experiment(small_config)) != results_csv(run_experiment(other))

    def test_targets_share_simulations(self, small_config):
        combined = run_experiment(small_config)
        alone = run_convergence(only(small_config, Target.CONVERGENCE))
        assert combined.row("mean", 16) == alone.row("mean", 16)


class TestConvergence(BaseTestClass):
    def test_rows_and_invariants(self, small_config):
        config = only(small_config, Target.CONVERGENCE)
        result = run_convergence(config)
        assert {row.target for row in result.rows} == {Target.CONVERGENCE}
        for n in config.n_grid:
            for statistic in ("mean", "median", "q05", "q95", "exceed_0.05", "exceed_0.01", "event_frequency"):
                row = result.row(statistic, n)
                assert row.replicates == config.replicates
                assert row.seed == config.master_seed
            assert result.row("q05", n).estimate <= result.row("median", n).estimate <= result.row("q95", n).estimate
        violations = [row for row in result.rows if row.statistic.startswith("violations_")]
        assert len(violations) == 4 * len(config.n_grid)
        assert all(row.estimate == 0 for row in violations)

    def test_mean_reference_is_exact(self, small_config):
        row = run_convergence(only(small_config, Target.CONVERGENCE)).row("mean", 8)
        assert row.reference_exact == Fraction(1, 3)
        assert row.z == pytest.approx((row.estimate - 1 / 3) / row.stderr)

    def test_threshold_concentrates(self, params):
        config = ExperimentConfig(params=params, n_grid=(1000, 4000), replicates=100, master_seed=3,
                                  targets=(Target.CONVERGENCE,))
        result = run_convergence(config)
        assert abs(result.row("median", 4000).estimate - 1 / 3) < 0.01
        assert result.row("exceed_0.05", 4000).estimate == 0
        assert result.row("event_frequency", 4000).estimate == 1

    def test_target_must_be_requested(self, small_config):
        with pytest.raises(DomainError):
            run_convergence(only(small_config, Target.OCCUPANCY))


class TestL1Rate(BaseTestClass):
    def test_decomposition_adds_up(self, small_config):
        result = run_l1_rate(only(small_config, Target.L1_RATE))
        for n in small_config.n_grid:
            total = sum(result.row(name, n).estimate for name in ("main_term", "correction_term", "escape_term"))
            assert total == pytest.approx(result.row("mean_abs_deviation", n).estimate, rel=1e-9, abs=1e-15)
            assert result.row("ratio_to_a_n", n).estimate == pytest.approx(2 * result.row("ratio_to_2a_n", n).estimate)

    def test_references(self, small_config):
        config = only(small_config, Target.L1_RATE)
        seq = compute_sequence(config.params.phi, 32)
        result = run_l1_rate(config, sequence=seq)
        row = result.row("mean_abs_deviation", 16)
        assert row.reference_exact == 2 * seq.a(16)
        assert row.reference == pytest.approx(float(2 * seq.a(16)))
        slope = result.row("loglog_slope", 32)
        assert slope.reference == pytest.approx(-math.log2(3))
        assert slope.estimate < 0

    def test_mean_deviation_decreases_along_the_grid(self, small_config):
        result = run_l1_rate(only(small_config, Target.L1_RATE))
        trend = result.select("trend_violation")
        assert [row.n for row in trend] == [16, 32]
        assert all(row.estimate == 0 and row.reference == 0 for row in trend)
        means = [result.row("mean_abs_deviation", n).estimate for n in small_config.n_grid]
        assert means == sorted(means, reverse=True)

    def test_short_sequence_falls_back_to_asymptotic(self, small_config):
        config = only(small_config, Target.L1_RATE)
        result = run_l1_rate(config, sequence=compute_sequence_numeric(config.params.phi, 16))
        assert result.select("ratio_to_2a_n") and not [row for row in result.select("ratio_to_2a_n") if row.n == 32]
        assert any("n=32" in flag for flag in result.flags)

    def test_phi_mismatch(self, small_config):
        with pytest.raises(ConsistencyError):
            run_l1_rate(only(small_config, Target.L1_RATE), sequence=compute_sequence("1/4", 32))

    @pytest.mark.slow
    def test_rate_matches_expected_minimum(self, params):
        config = ExperimentConfig(params=params, n_grid=RATE_GRID, replicates=10_000, master_seed=1,
                                  targets=(Target.L1_RATE,))
        result = run_l1_rate(config, workers=0)
        for row in result.select("ratio_to_2a_n"):
            assert abs(row.z) <= 3, row
        assert all(row.estimate == 0 for row in result.select("trend_violation"))
        slope = result.row("loglog_slope", 2048)
        assert abs(slope.estimate - slope.reference) <= 0.05


class TestIdentity(BaseTestClass):
    def test_exact_reference(self, small_config):
        result = verify_identity(only(small_config, Target.IDENTITY))
        for n in small_config.n_grid:
            row = result.row("lhs", n)
            assert isinstance(row.reference_exact, Fraction)
            assert abs(row.z) <= 4

    def test_sequence_too_short(self, small_config):
        with pytest.raises(ConsistencyError):
            verify_identity(only(small_config, Target.IDENTITY), sequence=compute_sequence("1/3", 16))

    @pytest.mark.slow
    def test_identity_at_scale(self, params):
        config = ExperimentConfig(params=params, n_grid=(8,), replicates=1_000_000, master_seed=2,
                                  targets=(Target.IDENTITY,))
        row = verify_identity(config, workers=0).row("lhs", 8)
        assert abs(row.z) <= 4


class TestEscape(BaseTestClass):
    def test_inclusion_exclusion(self):
        assert inclusion_exclusion_escape(2, 5) == Fraction(1, 16)
        assert inclusion_exclusion_escape(8, 7) == 1
        assert inclusion_exclusion_escape(8, 8) == 1 - Fraction(math.factorial(8), 8 ** 8)

    def test_union_bound_dominates(self):
        for n in (8, 16, 32, 64, 128):
            assert float(inclusion_exclusion_escape(8, n)) <= union_bound(8, n)
        assert union_bound(8, 64) == pytest.approx(8 * math.exp(64 * math.log(7 / 8)))

    def test_frequency(self, small_config):
        result = estimate_escape_probability(only(small_config, Target.ESCAPE_PROBABILITY))
        for row in result.select("escape_frequency"):
            assert abs(row.z) <= 4
            assert row.reference == pytest.approx(float(row.reference_exact))
        for row in result.select("escape_vs_bound"):
            assert row.z <= 4

    @pytest.mark.slow
    def test_escape_at_scale(self, params):
        config = ExperimentConfig(params=params, n_grid=(8, 16, 32, 64), replicates=100_000, master_seed=4,
                                  targets=(Target.ESCAPE_PROBABILITY,))
        result = estimate_escape_probability(config)
        assert all(abs(row.z) <= 3 for row in result.select("escape_frequency"))
        assert all(row.z <= 3 for row in result.select("escape_vs_bound"))


class TestOccupancy(BaseTestClass):
    def test_rows_and_flags(self, small_config):
        result = occupancy_test(only(small_config, Target.OCCUPANCY))
        assert result.flags == tuple(f"n={n}: expected cell count < 5" for n in small_config.n_grid)
        for n in small_config.n_grid:
            assert result.row("count_sum_ok", n).estimate == 1
            assert abs(result.row("lower_fraction", n).z) <= 4
            assert result.row("summed_chi2", n).reference == small_config.replicates * 7
            assert 0 <= result.row("pooled_chi2_p_value", n).estimate <= 1

    def test_uniform_cells(self, params):
        config = ExperimentConfig(params=params, n_grid=(64, 256), replicates=500, master_seed=5,
                                  targets=(Target.OCCUPANCY,))
        result = occupancy_test(config)
        assert result.flags == ()
        assert result.row("pooled_chi2_p_value", 256).estimate > 0.001
        assert result.row("summed_chi2_p_value", 256).estimate > 0.001

    def test_p_values_uniform_over_seeds(self, params):
        p_values = []
        for seed in range(100):
            config = ExperimentConfig(params=params, n_grid=(64,), replicates=200, master_seed=seed,
                                      targets=(Target.OCCUPANCY,))
            p_values.append(occupancy_test(config).row("pooled_chi2_p_value", 64).estimate)
        # 99% band of Bin(100, 0.05)
        assert 1 <= sum(p < 0.05 for p in p_values) <= 10


@pytest.mark.slow
class TestAcceptance(BaseTestClass):
    def test_threshold_limit(self, params):
        config = ExperimentConfig(params=params, n_grid=(100_000,), replicates=200, master_seed=0,
                                  targets=(Target.CONVERGENCE,), deltas=(0.05,))
        result = run_convergence(config, workers=0)
        assert abs(result.row("median", 100_000).estimate - 1 / 3) <= 0.01
        assert result.row("exceed_0.05", 100_000).estimate <= 0.01

    def test_no_violations_at_scale(self, params):
        config = ExperimentConfig(params=params, n_grid=(64,), replicates=100_000, master_seed=6,
                                  targets=(Target.CONVERGENCE,))
        result = run_convergence(config, workers=0)
        assert all(row.estimate == 0 for row in result.rows if row.statistic.startswith("violations_"))

    def test_workers_one_and_eight(self, params):
        config = ExperimentConfig(params=params, n_grid=(64, 256, 1024), replicates=5_000, master_seed=9)
        assert results_csv(run_experiment(config, 1)) == results_csv(run_experiment(config, 8))

    def test_occupancy_counts(self, params):
        config = ExperimentConfig(params=params, n_grid=(64,), replicates=20_000, master_seed=10,
                                  targets=(Target.OCCUPANCY,))
        assert np.isfinite(occupancy_test(config).row("summed_chi2", 64).z)
