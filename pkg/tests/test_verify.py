"""Tests for the verification suites, the lower-bound scan machinery,
the depth diagnostics, and the desk-scale demo pipeline."""

import math
from fractions import Fraction

import numpy as np
import pytest

from qptransport import constants as frozen
from qptransport import verify as vf
from qptransport.arithmetic import (construct_liouville_frequency,
                                    continued_fraction_expansion)
from qptransport.errors import DepthLimitError, InputError, ThresholdError
from qptransport.floquet import band_structure
from qptransport.operator import (AmoSampling, Chain, PeriodicModel,
                                  TableSampling, ZeroSampling,
                                  periodic_model)
from qptransport.transfer import gordon_block_statistic, transfer_product
from qptransport.transport import EvolutionConfig

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
Q2_MODEL = PeriodicModel.from_potential([1.0, -1.0])


def full_spectrum(model):
    bs = band_structure(model)
    return (bs.band(1).lo - 0.1, bs.band(model.q).hi + 0.1)


class TestEnsemble:
    def test_deterministic_under_seed(self):
        a = vf.random_periodic_ensemble(5, 6, seed=3)
        b = vf.random_periodic_ensemble(5, 6, seed=3)
        for ma, mb in zip(a, b):
            assert ma.q == mb.q
            np.testing.assert_array_equal(ma.potential, mb.potential)

    def test_q_range(self):
        models = vf.random_periodic_ensemble(30, 4, seed=0, q_min=3)
        assert all(3 <= m.q <= 4 for m in models)

    def test_bad_args(self):
        with pytest.raises(InputError):
            vf.random_periodic_ensemble(0, 5)
        with pytest.raises(InputError):
            vf.random_periodic_ensemble(5, 1)


class TestFloquetSuite:
    def test_free_families_zero_violations(self):
        models = [PeriodicModel.from_potential([0.0] * q) for q in (2, 3, 5)]
        rep = vf.floquet_identity_suite(models=models, samples_per_model=3,
                                        seed=2)
        assert rep.instances > 0
        assert rep.violations == 0
        assert rep.passed

    def test_random_ensemble_clean(self):
        rep = vf.floquet_identity_suite(count=6, q_max=6, seed=5,
                                        samples_per_model=3)
        assert rep.violations == 0
        seen = {r["check"] for r in rep.artifacts}
        assert seen == set(vf.FLOQUET_CHECKS)

    def test_corrupted_corner_trips(self):
        rep = vf.floquet_identity_suite(count=4, q_max=6, seed=5,
                                        samples_per_model=2,
                                        checks=("determinant",),
                                        corrupt_corner=True)
        assert rep.violations > 0
        assert not rep.passed
        assert rep.worst_margin < 0

    def test_unknown_check_rejected(self):
        with pytest.raises(InputError):
            vf.floquet_identity_suite(count=2, checks=("nonsense",))

    def test_report_row_filter(self):
        rep = vf.floquet_identity_suite(count=3, q_max=5, seed=0,
                                        samples_per_model=2,
                                        checks=("weights", "symmetry"))
        assert len(rep.rows("weights")) + len(rep.rows("symmetry")) \
            == rep.instances
        assert all(r["check"] == "weights" for r in rep.rows("weights"))


class TestTransportSuite:
    def test_routes_agree_q2(self):
        rep = vf.transport_consistency_suite(models=[Q2_MODEL],
                                             time_scales=(5.0,),
                                             checks=("routes",),
                                             max_site=12)
        assert rep.violations == 0
        rows = rep.rows("routes")
        assert len(rows) == 13
        assert all(r["p_time"] > 0 for r in rows)
        assert any(r["n"] < 0 for r in rows)

    def test_all_checks_clean(self):
        rep = vf.transport_consistency_suite(time_scales=(5.0,),
                                             max_site=24)
        assert rep.violations == 0
        seen = {r["check"] for r in rep.artifacts}
        assert seen == set(vf.TRANSPORT_CHECKS)

    def test_unknown_check_rejected(self):
        with pytest.raises(InputError):
            vf.transport_consistency_suite(checks=("teleport",))


class TestLowerBound:
    def test_calibration_instance_full_pass(self):
        scan = vf.lower_bound_scan(Q2_MODEL, full_spectrum(Q2_MODEL), 250.0,
                                   max_points=12)
        assert scan.q == 2
        assert scan.eta == pytest.approx(2.0, abs=1e-12)
        assert scan.band_width == pytest.approx(math.sqrt(5.0) - 1.0,
                                                rel=1e-6)
        assert scan.window == (1, 115)
        assert scan.fraction_satisfied == 1.0

    def test_window_matches_formula(self):
        scan = vf.lower_bound_scan(Q2_MODEL, full_spectrum(Q2_MODEL), 250.0,
                                   max_points=4)
        c, c1, cap = scan.constants
        lo = cap * scan.q ** 4 / (scan.eta * scan.band_width)
        hi = c1 * scan.eta * scan.band_width * scan.time_scale / scan.q ** 4
        assert scan.window == (math.floor(lo) + 1, math.ceil(hi) - 1)
        rhs = c * scan.eta ** 2 / (scan.q ** 6 * scan.band_width
                                   * scan.time_scale)
        assert all(r == pytest.approx(rhs) for _, _, r in scan.pairs)

    def test_calibration_regeneration(self):
        cal = vf.calibrate_lower_bound(Q2_MODEL, full_spectrum(Q2_MODEL),
                                       250.0, max_points=12)
        # the window-edge point n = 115 is the argmin and is always sampled
        assert cal.min_ratio == pytest.approx(6.398, rel=0.05)
        assert cal.suggested_c >= frozen.LOWER_C

    def test_threshold_error_below_admissible(self):
        with pytest.raises(ThresholdError) as exc:
            vf.lower_bound_scan(Q2_MODEL, full_spectrum(Q2_MODEL), 0.05)
        assert exc.value.minimal_admissible is not None
        assert exc.value.minimal_admissible > 0.05

    def test_minimal_admissible_time(self):
        t1 = vf.minimal_admissible_time(2, 2.0, 1.2)
        t2 = vf.minimal_admissible_time(2, 0.5, 1.2)
        assert t2 > t1 > 0
        with pytest.raises(InputError):
            vf.minimal_admissible_time(2, 0.0, 1.2)

    def test_gap_interval_rejected(self):
        bs = band_structure(Q2_MODEL)
        gap_mid = 0.5 * (bs.band(1).hi + bs.band(2).lo)
        width = 0.25 * (bs.band(2).lo - bs.band(1).hi)
        with pytest.raises(InputError):
            vf.lower_bound_scan(Q2_MODEL, (gap_mid - width, gap_mid + width),
                                250.0)

    def test_out_of_sample_q3(self):
        model = periodic_model(AmoSampling(2.0), Fraction(1, 3), 0.1)
        bs = band_structure(model)
        ell = float(max(bs.widths))
        t_use = 1.3 * model.q ** 4 / (frozen.LOWER_C1 * 2.0 * ell)
        scan = vf.lower_bound_scan(model, full_spectrum(model), t_use,
                                   config=EvolutionConfig(
                                       energy_rel_tol=1e-3))
        assert scan.fraction_satisfied >= 0.9


class TestBandwidth:
    def test_minimum_matches_direct_computation(self):
        golden = continued_fraction_expansion(GOLDEN, max_terms=10)
        f = AmoSampling(2.0)
        rep = vf.bandwidth_proposition_check(f, golden, [4], theta_count=64)
        row = rep.rows("minimum")[0]
        assert row["q"] == 5
        model = periodic_model(f, golden.convergent(4), 0.0)
        bs = band_structure(model)
        from qptransport.transfer import lyapunov_exponent
        direct = min(
            math.log(bs.band(j).width) / 5
            + lyapunov_exponent(f, GOLDEN, bs.band(j).center, n_steps=5,
                                theta_count=64).gamma_hat
            for j in range(1, 6))
        assert row["min_value"] == pytest.approx(direct, abs=1e-12)
        assert rep.config_snapshot["trend"] == "insufficient depths"

    def test_trend_rows_appear_with_two_depths(self):
        golden = continued_fraction_expansion(GOLDEN, max_terms=10)
        rep = vf.bandwidth_proposition_check(AmoSampling(2.0), golden,
                                             [4, 5], theta_count=32)
        assert len(rep.rows("trend")) == 1
        assert rep.config_snapshot["trend"] in (
            "nondecreasing", "decreasing at depth steps [0]")

    def test_empty_depths_rejected(self):
        golden = continued_fraction_expansion(GOLDEN, max_terms=10)
        with pytest.raises(InputError):
            vf.bandwidth_proposition_check(AmoSampling(2.0), golden, [])

    def test_period_one_rejected(self):
        golden = continued_fraction_expansion(GOLDEN, max_terms=10)
        with pytest.raises(InputError):
            vf.bandwidth_proposition_check(AmoSampling(2.0), golden, [1])

    def test_huge_period_raises_depth_limit(self):
        freq = construct_liouville_frequency(2.0, 2, 3)
        with pytest.raises(DepthLimitError) as exc:
            vf.bandwidth_proposition_check(AmoSampling(2.0), freq, [1, 3],
                                           theta_count=8)
        assert exc.value.achieved_depth == 1


class TestGordon:
    def test_rational_frequency_zero_difference(self):
        freq = continued_fraction_expansion(0.625)
        rep = vf.gordon_diagnostic(AmoSampling(1.5), freq, 0.3,
                                   [freq.depth])
        row = rep.artifacts[0]
        assert row["difference"] == 0.0
        assert row["statistic_quasi"] == pytest.approx(
            row["statistic_periodic"], rel=1e-9)
        assert row["statistic_quasi"] >= 0.5 - 1e-9
        assert rep.violations == 0

    def test_quasi_blocks_match_periodic_product(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            values = rng.uniform(-2.0, 2.0, 4)
            f = TableSampling(values)
            alpha = Fraction(1, 4)
            energy = float(rng.uniform(-3.0, 3.0))
            quasi = vf._quasi_block_statistic(f, alpha, 0.0, energy, 4,
                                              np.array([1.0, 0.0]))
            block = transfer_product(Chain(f, alpha, 0.0), energy, 0, 3)
            a = block.matrix_scaled * math.exp(block.log_scale)
            assert quasi == pytest.approx(gordon_block_statistic(a),
                                          rel=1e-9)

    def test_liouville_difference_decreases(self):
        # Weak coupling keeps the local growth rate small, and the probe
        # energy sits inside a band of the deep approximant so the orbit
        # difference is not amplified by gap-rate transients.
        freq = construct_liouville_frequency(2.0, 2, 3)
        f = AmoSampling(1.05)
        deep = periodic_model(f, freq.convergent(2), 0.0)
        energy = band_structure(deep).band(45).center
        rep = vf.gordon_diagnostic(f, freq, energy, [1, 2])
        assert rep.config_snapshot["difference_trend"] == "decreasing"
        assert rep.violations == 0
        diffs = [row["difference"] for row in rep.artifacts]
        assert diffs[1] < 1e-6 * diffs[0]

    def test_golden_difference_not_decreasing(self):
        golden = continued_fraction_expansion(GOLDEN, max_terms=10)
        rep = vf.gordon_diagnostic(AmoSampling(2.0), golden, 0.5, [3, 4, 5])
        assert rep.config_snapshot["difference_trend"] == "not decreasing"

    def test_orbit_budget_truncates(self):
        freq = construct_liouville_frequency(2.0, 2, 3)
        rep = vf.gordon_diagnostic(AmoSampling(2.0), freq, 0.5, [1, 2, 3])
        assert rep.config_snapshot["truncated_at_depth"] == 3
        assert "max_orbit" in rep.config_snapshot["truncation_reason"]
        assert rep.instances == 2

    def test_non_unit_vector_rejected(self):
        golden = continued_fraction_expansion(GOLDEN, max_terms=10)
        with pytest.raises(InputError):
            vf.gordon_diagnostic(AmoSampling(2.0), golden, 0.5, [3],
                                 u=(2.0, 0.0))

    def test_single_depth_trend(self):
        golden = continued_fraction_expansion(GOLDEN, max_terms=10)
        rep = vf.gordon_diagnostic(AmoSampling(2.0), golden, 0.5, [4])
        assert rep.config_snapshot["difference_trend"] == \
            "insufficient depths"


class TestTheoremDemo:
    def test_amo_pipeline(self):
        rep = vf.theorem_demo(AmoSampling(1.05), 0.45, theta_grid=16)
        assert rep.threshold == pytest.approx(rep.beta_target, rel=1e-12)
        assert rep.beta_hat > rep.threshold
        assert rep.schedule.size >= 2
        first = rep.points[0]
        assert first.feasible
        for p in (1, 2):
            target = 0.01 * first.time_scale ** ((1.0 - 0.45) * p)
            assert first.min_moments[p] > target
        assert first.refined_change < 0.05
        later = [pt for pt in rep.points if not pt.feasible]
        assert later
        assert all(pt.note for pt in later)

    def test_free_sampling_clamps_gamma(self):
        rep = vf.theorem_demo(ZeroSampling(), 0.45, theta_grid=8)
        assert rep.gamma0 == pytest.approx(1e-4)
        assert rep.gamma0_clamped
        first = rep.points[0]
        assert first.feasible
        t = first.time_scale
        assert first.min_moments[2] == pytest.approx(2.0 * t * t, rel=0.2)

    def test_delta_validation(self):
        with pytest.raises(InputError):
            vf.theorem_demo(ZeroSampling(), 0.6)
        with pytest.raises(InputError):
            vf.theorem_demo(ZeroSampling(), 0.0)

    def test_report_metadata(self):
        rep = vf.theorem_demo(AmoSampling(1.05), 0.45, theta_grid=8)
        assert rep.eta_by_depth
        assert rep.frequency.depth >= 2
        assert rep.eps_prime > 0
        assert rep.config_snapshot["probe_q"] >= 2
        assert len(rep.feasible_points) >= 1
