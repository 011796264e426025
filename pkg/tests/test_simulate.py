import json
import math

import numpy as np
import pytest

from oodcal.calibrate import ThresholdModel, fit_threshold_multi, fit_threshold_one
from oodcal.dataset import ClassWeights, resample_by_class
from oodcal.errors import AllThresholdsInfinite, UnlabeledDataset
from oodcal.evaluate import missed_detection_rate, per_class_tpr
from oodcal.scores import DetectorModel, ScoreVector, score_dataset
from oodcal.simulate import (
    SimplexSample,
    derive_trial_seed,
    perturbation_sweep,
    rate_histogram,
    sample_simplex,
    simulate_label_shift,
    simulate_oversampling,
    summarize_oversampling,
    summarize_shift,
    summarize_sweep,
    write_oversample_csv,
    write_shift_csv,
    write_sweep_csv,
)
from oodcal.synthetic import make_ood_logits, make_shifted_logits

from conftest import make_dataset


class TestSeeds:
    def test_deterministic(self):
        assert derive_trial_seed(42, 7) == derive_trial_seed(42, 7)

    def test_distinct_across_trials_and_masters(self):
        seeds = {derive_trial_seed(m, t) for m in range(20) for t in range(200)}
        assert len(seeds) == 20 * 200

    def test_negative_master_seed_ok(self):
        assert 0 <= derive_trial_seed(-5, 0) < 2**64


class TestSimplex:
    def test_degenerate_k1(self, rng):
        assert sample_simplex(1, rng).p.tolist() == [1.0]

    def test_sums_to_one(self, rng):
        for k in (2, 10, 100):
            for _ in range(200):
                p = sample_simplex(k, rng).p
                assert abs(p.sum() - 1.0) <= 1e-12
                assert np.all(p >= 0)

    def test_coordinate_moments(self, rng):
        k = 10
        draws = np.array([sample_simplex(k, rng).p for _ in range(20000)])
        # mean 1/K with sampling tolerance ~4 sigma of the mean estimator
        se = math.sqrt((k - 1) / (k**2 * (k + 1)) / 20000)
        assert np.all(np.abs(draws.mean(axis=0) - 0.1) < 5 * se)

    def test_invalid_k(self, rng):
        with pytest.raises(ValueError):
            sample_simplex(0, rng)

    def test_sample_invariants_enforced(self):
        with pytest.raises(ValueError):
            SimplexSample(np.array([0.5, 0.6]))
        with pytest.raises(ValueError):
            SimplexSample(np.array([-0.1, 1.1]))


@pytest.fixture(scope="module")
def shifted():
    return make_shifted_logits(200, 10, seed=21)


class TestLabelShift:
    def test_deterministic(self, shifted):
        det = DetectorModel(kind="max_logit")
        a = simulate_label_shift(shifted, det, "one", 0.95, 20, master_seed=9)
        b = simulate_label_shift(shifted, det, "one", 0.95, 20, master_seed=9)
        assert [r.payload for r in a] == [r.payload for r in b]
        assert [r.seed for r in a] == [r.seed for r in b]

    def test_equal_marginals_give_zero_delta(self, shifted):
        det = DetectorModel(kind="max_logit")
        records = simulate_label_shift(
            shifted, det, "one", 0.95, 15, master_seed=3, equal_marginals=True
        )
        assert all(r.payload["delta_p"] == 0.0 for r in records)

    def test_trial_order_and_fields(self, shifted):
        det = DetectorModel(kind="energy")
        records = simulate_label_shift(shifted, det, "multi", 0.9, 10, master_seed=1)
        assert [r.trial_index for r in records] == list(range(10))
        for r in records:
            assert 0.0 <= r.payload["false_alarm_rate"] <= 1.0
            assert len(r.payload["p_train"]) == 10
            assert r.payload["delta_p"] >= 0.0

    def test_one_spreads_more_than_multi(self):
        # misaligned per-class scales: the single threshold's false-alarm rate
        # fluctuates with the marginal, the class-wise one barely moves
        ds = make_shifted_logits(400, 10, seed=5)
        det = DetectorModel(kind="max_logit")
        far_one = np.array(
            [
                r.payload["false_alarm_rate"]
                for r in simulate_label_shift(ds, det, "one", 0.95, 300, 77)
            ]
        )
        far_multi = np.array(
            [
                r.payload["false_alarm_rate"]
                for r in simulate_label_shift(ds, det, "multi", 0.95, 300, 77)
            ]
        )
        assert far_one.std() > 3.0 * far_multi.std()

    def test_unlabeled_rejected(self, rng):
        ds = make_dataset(rng.normal(0, 1, (50, 3)))
        with pytest.raises(UnlabeledDataset):
            simulate_label_shift(ds, DetectorModel(kind="max_logit"), "one", 0.9, 2, 0)

    def test_resample_fit_mode(self, shifted):
        det = DetectorModel(kind="max_logit")
        records = simulate_label_shift(
            shifted, det, "multi", 0.95, 10, master_seed=5,
            fit_mode="resample", valid_resample_factor=2,
        )
        assert len(records) == 10
        rerun = simulate_label_shift(
            shifted, det, "multi", 0.95, 10, master_seed=5,
            fit_mode="resample", valid_resample_factor=2,
        )
        assert [r.payload for r in records] == [r.payload for r in rerun]

    def test_weighted_one_matches_plain_cutoff_at_empirical_marginal(self, shifted):
        # p_train equal to the empirical class shares puts uniform mass on
        # every sample, so the weighted cutoff is the plain pooled cutoff
        from oodcal.calibrate import tpr_beta_cutoff
        from oodcal.dataset import split_dataset
        from oodcal.simulate import _WeightedCutoff

        _, valid = split_dataset(shifted, 0.5, 3)
        sv = score_dataset(DetectorModel(kind="max_logit"), valid)
        k = shifted.num_classes
        shares = np.bincount(valid.labels, minlength=k) / len(valid)
        pooled = _WeightedCutoff(sv.scores, valid.labels, k)
        assert pooled.cutoff(shares, 0.95) == tpr_beta_cutoff(sv.scores, 0.95)


@pytest.fixture(scope="module")
def fitted_pair():
    ds = make_shifted_logits(100, num_classes=5, seed=8)
    det = DetectorModel(kind="max_logit")
    sv = score_dataset(det, ds)
    one = fit_threshold_one(sv, 0.9)
    multi = fit_threshold_multi(sv, 0.9, 5)
    return ds, det, one, multi


class TestOversampling:
    def test_unit_gammas_reproduce_baseline(self, fitted_pair):
        ds, det, _, multi = fitted_pair
        sv = score_dataset(det, ds)
        baseline = per_class_tpr(sv, multi).tpr
        records = simulate_oversampling(
            ds, multi, det, n_trials=5, gamma_range=(1.0, 1.0), master_seed=4
        )
        for r in records:
            assert r.payload["per_class_tpr"] == pytest.approx(baseline.tolist())

    def test_integer_gamma_invariance_via_resample(self, fitted_pair):
        # duplicating one class's rows exactly leaves every TPR unchanged
        ds, det, _, multi = fitted_pair
        baseline = per_class_tpr(score_dataset(det, ds), multi).tpr
        weights = np.ones(5)
        weights[2] = 3.0
        resampled = resample_by_class(ds, ClassWeights(weights), seed=0)
        after = per_class_tpr(score_dataset(det, resampled), multi).tpr
        assert after.tolist() == baseline.tolist()

    def test_uniform_integer_range_invariant_across_trials(self, fitted_pair):
        ds, det, _, multi = fitted_pair
        records = simulate_oversampling(
            ds, multi, det, n_trials=4, gamma_range=(2.0, 2.0), master_seed=1
        )
        first = records[0].payload["per_class_tpr"]
        assert all(r.payload["per_class_tpr"] == first for r in records)

    def test_default_trial_count_is_one_thousand(self, fitted_pair):
        ds, det, _, multi = fitted_pair
        records = simulate_oversampling(ds, multi, det, master_seed=2)
        assert len(records) == 1000
        assert all(len(r.payload["gammas"]) == 5 for r in records)

    def test_records_both_groupings(self, fitted_pair):
        ds, det, _, multi = fitted_pair
        records = simulate_oversampling(ds, multi, det, n_trials=2, master_seed=3)
        for r in records:
            assert "per_class_tpr" in r.payload and "per_label_tpr" in r.payload

    def test_determinism(self, fitted_pair):
        ds, det, _, multi = fitted_pair
        a = simulate_oversampling(ds, multi, det, n_trials=6, master_seed=11)
        b = simulate_oversampling(ds, multi, det, n_trials=6, master_seed=11)
        assert [r.payload for r in a] == [r.payload for r in b]


class TestSweep:
    def _ood_scores(self, det):
        sets = {}
        for level, name in [(3.0, "near"), (-2.0, "far")]:
            ds = make_ood_logits(400, 5, level=level, seed=13, name=name)
            sets[name] = score_dataset(det, ds)
        return sets

    def test_zero_delta_reproduces_unperturbed(self, fitted_pair):
        _, det, one, multi = fitted_pair
        ood = self._ood_scores(det)
        records, multi_rates = perturbation_sweep(one, multi, ood, delta=0.0, n_points=50)
        assert len(records) == 50
        for name, sv in ood.items():
            expected = missed_detection_rate(sv, one)
            assert all(r.payload["per_ood_rates"][name] == expected for r in records)
        assert set(multi_rates) == {"near", "far"}

    def test_endpoints_match_formula_exactly(self, fitted_pair):
        _, det, _, _ = fitted_pair
        one = ThresholdModel("one", 0.9, np.array([5.0]), np.array([100]))
        multi = ThresholdModel(
            "multi", 0.9, np.array([2.0, 6.0, 7.0, 9.0, 11.0]), np.full(5, 20)
        )
        records, _ = perturbation_sweep(
            one, multi, self._ood_scores(det), delta=0.5, n_points=7
        )
        deltas = [r.payload["delta_tau"] for r in records]
        assert deltas[0] == -0.5 * abs(5.0 - 2.0)
        assert deltas[-1] == 0.5 * abs(11.0 - 5.0)

    def test_degenerate_interval(self, fitted_pair):
        _, det, _, _ = fitted_pair
        one = ThresholdModel("one", 0.9, np.array([5.0]), np.array([100]))
        multi = ThresholdModel("multi", 0.9, np.full(5, 5.0), np.full(5, 20))
        records, _ = perturbation_sweep(
            one, multi, self._ood_scores(det), delta=0.5, n_points=5
        )
        assert all(r.payload["delta_tau"] == 0.0 for r in records)

    def test_infinite_thresholds_ignored_and_guarded(self, fitted_pair):
        _, det, one, _ = fitted_pair
        all_inf = ThresholdModel("multi", 0.9, np.full(5, np.inf), np.zeros(5, dtype=int))
        with pytest.raises(AllThresholdsInfinite):
            perturbation_sweep(one, all_inf, self._ood_scores(det))


class TestWriters:
    def test_shift_csv_and_summary(self, shifted, tmp_path):
        det = DetectorModel(kind="max_logit")
        records = simulate_label_shift(shifted, det, "one", 0.95, 8, master_seed=2)
        write_shift_csv(records, tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "trial,delta_p,far"
        assert len(lines) == 9
        summary = summarize_shift(records)
        assert summary["trials"] == 8
        assert len(summary["histogram"]["counts"]) == 200

    def test_oversample_csv(self, fitted_pair, tmp_path):
        ds, det, _, multi = fitted_pair
        records = simulate_oversampling(ds, multi, det, n_trials=3, master_seed=2)
        write_oversample_csv(records, tmp_path / "o.csv")
        lines = (tmp_path / "o.csv").read_text().splitlines()
        assert lines[0] == "trial,class,tpr"
        assert len(lines) == 1 + 3 * 5
        summary = summarize_oversampling(records, 5)
        assert len(summary["per_class_tpr"]) == 5

    def test_sweep_csv(self, fitted_pair, tmp_path):
        _, det, one, multi = fitted_pair
        ood = TestSweep()._ood_scores(det)
        records, multi_rates = perturbation_sweep(one, multi, ood, n_points=4)
        write_sweep_csv(records, tmp_path / "w.csv")
        lines = (tmp_path / "w.csv").read_text().splitlines()
        assert lines[0] == "point,delta_tau,ood_set,rate"
        assert len(lines) == 1 + 4 * 2
        summary = summarize_sweep(records, multi_rates)
        assert {row["ood_set"] for row in summary["per_ood_set"]} == {"near", "far"}

    def test_histogram_includes_boundaries(self):
        hist = rate_histogram(np.array([0.0, 1.0, 0.5]))
        assert sum(hist["counts"]) == 3
        assert hist["counts"][0] == 1 and hist["counts"][-1] == 1
