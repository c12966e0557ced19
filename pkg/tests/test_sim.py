import math

import numpy as np
import pytest
from scipy.stats import skew as scipy_skew

from loocvlab import sim
from loocvlab.linreg import ComparisonSpec, DataGeneratingProcess, loocv_diff_form
from loocvlab.quadform import GaussianLaw, evaluate
from loocvlab.sim import (
    ExperimentConfig,
    TrialRecord,
    calibration_bands,
    generate_dataset,
    read_trials_csv,
    run_experiment,
    run_trial,
    summarize,
    trial_rng,
    write_trials_csv,
)


def small_config(**overrides):
    base = dict(
        n_list=(8,),
        beta_delta_list=(0.0,),
        n_trials=4,
        n_test_sets=20,
        seed=7,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestGenerateDataset:
    def test_outlier_shifts_first_residual(self):
        rng = np.random.default_rng(0)
        resid = []
        for _ in range(4000):
            x, y = generate_dataset(8, 0.0, 20.0, "stochastic", rng)
            eps = y - x @ np.array([0.0, 1.0, 0.0])
            resid.append(eps[0])
        resid = np.array(resid)
        assert abs(resid.mean() - 20.0) < 4.0 / math.sqrt(len(resid))

    def test_no_outlier_centered(self):
        rng = np.random.default_rng(1)
        first = []
        for _ in range(4000):
            x, y = generate_dataset(8, 0.5, 0.0, "stochastic", rng)
            first.append((y - x @ np.array([0.0, 1.0, 0.5]))[0])
        assert abs(np.mean(first)) < 4.0 / math.sqrt(len(first))

    def test_deterministic_given_seed(self):
        xa, ya = generate_dataset(10, 0.3, 2.0, "stochastic", np.random.default_rng(5))
        xb, yb = generate_dataset(10, 0.3, 2.0, "stochastic", np.random.default_rng(5))
        assert np.array_equal(xa, xb) and np.array_equal(ya, yb)

    def test_fixed_grid_covariate(self):
        x, _ = generate_dataset(8, 0.0, 0.0, "fixed_grid", np.random.default_rng(2))
        np.testing.assert_allclose(x[:, 1], -1.0 + 2.0 * np.arange(1, 9) / 8.0)
        np.testing.assert_allclose(x[:, 0], 1.0)


class TestRunTrial:
    def test_error_identity(self):
        record = run_trial(small_config(), 8, 0.0, 0)
        assert record.error == record.elpdhat - record.elpd_target
        assert 0.0 <= record.pit_normal <= 1.0
        assert 0.0 <= record.pit_bb <= 1.0
        assert not record.skipped

    def test_fixed_tau_matches_analytic_form(self):
        # The simulated LOO estimate is the same function of the data as the
        # exact quadratic form.
        config = small_config(tau2=1.0, n_trials=3)
        beta = np.array([0.0, 1.0, 0.0])
        for trial in range(3):
            rng = trial_rng(config.seed, 8, 0.0, 0.0, trial)
            x, y = generate_dataset(8, 0.0, 0.0, "stochastic", rng)
            record = run_trial(config, 8, 0.0, trial)
            spec = ComparisonSpec(x, (0, 1), (0, 1, 2), 1.0)
            dgp = DataGeneratingProcess(x, beta, GaussianLaw(np.zeros(8), np.eye(8)))
            analytic = evaluate(loocv_diff_form(spec, dgp), y - x @ beta)
            assert abs(record.elpdhat - analytic) < 1e-8

    def test_large_effect_prefers_bigger_model(self):
        from loocvlab.estimators import NormalApprox, prob_a_better

        config = small_config(n_list=(64,), beta_delta_list=(10.0,), n_trials=30, n_test_sets=10)
        records = [run_trial(config, 64, 10.0, t) for t in range(30)]
        probs = [prob_a_better(NormalApprox(r.elpdhat, r.se_hat)) for r in records]
        assert np.mean([p < 0.01 for p in probs]) >= 0.99

    def test_kfold_equals_n_is_bit_identical_to_loo(self):
        loo_cfg = small_config(n_trials=3)
        kfold_cfg = small_config(n_trials=3, cv_mode="kfold", kfold_k=8)
        for t in range(3):
            a = run_trial(loo_cfg, 8, 0.0, t)
            b = run_trial(kfold_cfg, 8, 0.0, t)
            assert a == b


class TestRunExperiment:
    def test_deterministic_rerun(self):
        config = small_config(n_trials=3)
        a = list(run_experiment(config))
        b = list(run_experiment(config))
        assert a == b

    def test_subset_matches_full_run(self):
        full = ExperimentConfig(n_list=(8, 10), beta_delta_list=(0.0, 0.5), n_trials=3, n_test_sets=10, seed=3)
        part = ExperimentConfig(n_list=(10,), beta_delta_list=(0.5,), n_trials=3, n_test_sets=10, seed=3)
        full_records = {(r.n, r.beta_delta, r.trial_id): r for r in run_experiment(full)}
        for record in run_experiment(part):
            assert full_records[(10, 0.5, record.trial_id)] == record

    def test_trial_count(self):
        config = ExperimentConfig(n_list=(8, 10), beta_delta_list=(0.0, 1.0), n_trials=3, n_test_sets=5, seed=1)
        records = list(run_experiment(config))
        assert len(records) == 4 * 3
        assert sum(r.skipped for r in records) == 0

    def test_worker_count_does_not_change_records(self):
        config = small_config(n_trials=6)
        serial = list(run_experiment(config, workers=1))
        parallel = list(run_experiment(config, workers=2))
        assert serial == parallel


class TestSummarize:
    @staticmethod
    def synthetic_records(values, pits=None):
        records = []
        for i, v in enumerate(values):
            p = pits[i] if pits is not None else 0.5
            records.append(
                TrialRecord(
                    n=8, beta_delta=0.0, mu_out=0.0, trial_id=i,
                    elpdhat=v, se_hat=1.0, elpd_target=2.0 * v, error=-v,
                    pit_normal=p, pit_bb=p, bb_mean=v, bb_sd=1.0,
                )
            )
        return records

    def test_hand_computed_statistics(self):
        values = [1.0, 2.0, 3.0, 4.0, 10.0]
        cells = summarize(self.synthetic_records(values), n_bins=4)
        cell = cells[0]
        arr = np.array(values)
        assert cell.elpdhat_mean == pytest.approx(arr.mean())
        assert cell.elpdhat_sd == pytest.approx(arr.std(ddof=1))
        assert cell.elpdhat_skew == pytest.approx(float(scipy_skew(arr, bias=False)))
        assert cell.elpd_mean == pytest.approx(2 * arr.mean())
        assert cell.error_mean == pytest.approx(-arr.mean())
        # elpdhat vs target = perfectly correlated by construction
        assert cell.corr_elpdhat_elpd == pytest.approx(1.0)
        # ratio: se_hat = 1 for all trials
        assert cell.se_ratio_median == pytest.approx(1.0 / arr.std(ddof=1))
        assert cell.rel_err_mean == pytest.approx(-arr.mean() / (2 * arr.std(ddof=1)))

    def test_identical_errors_flag_undefined_ratio(self):
        records = self.synthetic_records([3.0] * 5)
        cell = summarize(records, n_bins=4)[0]
        assert cell.se_ratio_median is None
        assert cell.rel_err_mean is None

    def test_pit_counts_sum_to_trials(self):
        rng = np.random.default_rng(4)
        pits = rng.uniform(size=50)
        cell = summarize(self.synthetic_records(rng.standard_normal(50), pits), n_bins=10)[0]
        assert sum(cell.pit_normal_counts) == 50
        assert sum(cell.pit_bb_counts) == 50
        assert len(cell.pit_normal_counts) == 10

    def test_skipped_trials_counted_and_excluded(self):
        records = self.synthetic_records([1.0, 2.0, 3.0])
        nan = float("nan")
        records.append(TrialRecord(8, 0.0, 0.0, 3, nan, nan, nan, nan, nan, nan, nan, nan, skipped=True))
        cell = summarize(records, n_bins=4)[0]
        assert cell.n_trials == 3
        assert cell.n_skipped == 1


class TestCalibrationBands:
    def test_expected_count(self):
        bands = calibration_bands(2000, 20, 0.99)
        assert len(bands) == 20
        lo, hi = bands[0]
        assert lo < 100 < hi

    def test_full_level_spans_everything(self):
        assert calibration_bands(500, 10, 1.0) == [(0, 500)] * 10

    def test_uniform_coverage(self):
        # Under uniform PITs, about 1% of bins should fall outside a 99% band.
        rng = np.random.default_rng(5)
        n_trials, n_bins = 2000, 20
        lo, hi = calibration_bands(n_trials, n_bins, 0.99)[0]
        outside = 0
        total = 0
        for _ in range(200):
            counts, _ = np.histogram(rng.uniform(size=n_trials), bins=n_bins, range=(0, 1))
            outside += int(np.sum((counts < lo) | (counts > hi)))
            total += n_bins
        assert outside / total < 0.025

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            calibration_bands(100, 1, 0.99)
        with pytest.raises(ValueError):
            calibration_bands(100, 10, 0.0)


class TestCsvRoundTrip:
    def test_round_trip_and_byte_determinism(self, tmp_path):
        config = small_config(n_trials=3)
        records = list(run_experiment(config))
        path_a = tmp_path / "a.csv"
        path_b = tmp_path / "b.csv"
        assert write_trials_csv(records, str(path_a)) == 3
        write_trials_csv(list(run_experiment(config)), str(path_b))
        assert path_a.read_bytes() == path_b.read_bytes()
        assert read_trials_csv(str(path_a)) == records

    def test_row_order(self, tmp_path):
        records = [
            TrialRecord(16, 0.0, 0.0, 1, 0.0, 1.0, 0.0, 0.0, 0.5, 0.5, 0.0, 1.0),
            TrialRecord(8, 1.0, 0.0, 0, 0.0, 1.0, 0.0, 0.0, 0.5, 0.5, 0.0, 1.0),
            TrialRecord(8, 0.0, 0.0, 0, 0.0, 1.0, 0.0, 0.0, 0.5, 0.5, 0.0, 1.0),
        ]
        path = tmp_path / "t.csv"
        write_trials_csv(records, str(path))
        loaded = read_trials_csv(str(path))
        assert [(r.n, r.beta_delta, r.trial_id) for r in loaded] == [(8, 0.0, 0), (8, 1.0, 0), (16, 0.0, 1)]


class TestConfigValidation:
    def test_kfold_bounds(self):
        with pytest.raises(ValueError):
            ExperimentConfig(n_list=(8,), beta_delta_list=(0.0,), cv_mode="kfold", kfold_k=10)
        with pytest.raises(ValueError):
            ExperimentConfig(n_list=(8,), beta_delta_list=(0.0,), kfold_k=4)

    def test_minimum_sizes(self):
        with pytest.raises(ValueError):
            ExperimentConfig(n_list=(3,), beta_delta_list=(0.0,))
        with pytest.raises(ValueError):
            ExperimentConfig(n_list=(8,), beta_delta_list=(0.0,), n_trials=1)
