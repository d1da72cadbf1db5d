import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import kstest

from mfgp import harness
from mfgp.fusion import method_spec
from mfgp.gp_core import ConditioningError, InvalidArgumentError
from mfgp.harness import (
    ExperimentConfig,
    ExperimentError,
    high_fidelity_points,
    log_l2_error,
    run_experiment,
    sample_high_fidelity,
    sensitivity_sweep,
    trial_seed,
    write_summary,
)


def small_config(**kw):
    values = dict(methods=("kriging",), n_high=(6, 9), n_low=30, n_trials=2, n_test=50, restarts=2)
    values.update(kw)
    return ExperimentConfig.with_defaults(kw.pop("benchmark", "phase_shift"), **values)


class TestLogL2Error:
    def test_exact(self):
        assert log_l2_error([1.0, 2.0], [1.0, 2.0]) == -16.0

    def test_tenth(self):
        truth = np.array([3.0, 4.0])
        pred = truth + 0.1 * 5.0 / np.sqrt(2)
        assert log_l2_error(pred, truth) == pytest.approx(-1.0, abs=1e-12)

    def test_zero_prediction(self):
        assert log_l2_error(np.zeros(5), np.arange(1.0, 6.0)) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            log_l2_error([1.0], [1.0, 2.0])

    def test_zero_truth(self):
        with pytest.raises(InvalidArgumentError):
            log_l2_error([1.0, 2.0], [0.0, 0.0])

    @given(
        st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30),
        st.floats(0.01, 100),
        st.sampled_from([-1.0, 1.0]),
        st.integers(0, 2**32 - 1),
    )
    def test_scale_invariant(self, truth, scale, sign, seed):
        truth = np.array(truth)
        if np.linalg.norm(truth) < 1e-3:
            return
        pred = truth + np.random.default_rng(seed).normal(size=truth.size)
        c = sign * scale
        assert log_l2_error(c * pred, c * truth) == pytest.approx(log_l2_error(pred, truth), abs=1e-9)


class TestSampling:
    def test_deterministic(self):
        np.testing.assert_array_equal(sample_high_fidelity((0, 1), 10, 7), sample_high_fidelity((0, 1), 10, 7))

    def test_single_point(self):
        t = sample_high_fidelity((2.0, 3.0), 1, 0)
        assert t.shape == (1,) and 2.0 <= t[0] <= 3.0

    def test_sorted_and_inside(self):
        t = sample_high_fidelity((-1.0, 4.0), 50, 3)
        assert np.all(np.diff(t) >= 0) and t.min() >= -1 and t.max() <= 4

    def test_uniform(self):
        draws = np.concatenate([sample_high_fidelity((0, 1), 10, s) for s in range(10_000)])
        assert kstest(draws, "uniform").statistic < 0.02

    def test_rejects_zero(self):
        with pytest.raises(InvalidArgumentError):
            sample_high_fidelity((0, 1), 0, 0)

    def test_pairing_shared_across_methods(self):
        config = small_config(methods=("kriging", "nargp"))
        a = high_fidelity_points(config, (0, 1), 9, 1)
        np.testing.assert_array_equal(a, high_fidelity_points(config, (0, 1), 9, 1))
        assert not np.array_equal(a, high_fidelity_points(config, (0, 1), 9, 0))

    def test_trial_seeds_distinct(self):
        seeds = {trial_seed(0, m, n, k) for m in ("kriging", "ar1") for n in (10, 15) for k in range(5)}
        assert len(seeds) == 20


class TestConfig:
    def test_defaults(self):
        c = ExperimentConfig.with_defaults("phase_shift")
        assert c.methods == ("kriging", "ar1", "nargp", "delays", "gpe")
        assert c.n_high == (10, 15, 20, 25)
        assert (c.n_low, c.n_trials, c.n_test) == (100, 10, 500)

    def test_hh_defaults(self):
        c = ExperimentConfig.with_defaults("hodgkin_huxley")
        assert c.n_low == 300 and "gpe2" in c.methods

    @pytest.mark.parametrize("field,value", [("n_trials", 0), ("n_high", (0,)), ("n_low", 1),
                                             ("methods", ("magic",)), ("delay_step", -1.0),
                                             ("methods", ())])
    def test_rejects(self, field, value):
        with pytest.raises(InvalidArgumentError):
            ExperimentConfig.with_defaults("phase_shift", **{field: value})

    def test_unknown_benchmark(self):
        with pytest.raises(InvalidArgumentError):
            ExperimentConfig.with_defaults("nope")


@pytest.fixture(scope="module")
def small_result():
    return run_experiment(small_config(methods=("kriging", "nargp")))


class TestRunExperiment:
    def test_smoke(self):
        cfg = ExperimentConfig.with_defaults("discontinuity", methods=("kriging",), n_high=(25,), n_trials=1,
                                             n_low=20, restarts=2)
        result = run_experiment(cfg)
        assert len(result.trials) == 1
        assert np.isfinite(result.trials[0].log_l2_error)

    def test_shape_and_order(self, small_result):
        keys = [(r.method, r.n_high, r.trial) for r in small_result.trials]
        assert keys == [(m, n, k) for m in ("kriging", "nargp") for n in (6, 9) for k in range(2)]

    def test_mean_is_arithmetic(self, small_result):
        for (m, n), mean in small_result.means.items():
            vals = [r.log_l2_error for r in small_result.trials if r.method == m and r.n_high == n]
            assert mean == float(np.mean(vals))

    def test_reproducible(self, small_result):
        again = run_experiment(small_result.config)
        assert [r.log_l2_error for r in again.trials] == [r.log_l2_error for r in small_result.trials]

    def test_parallel_matches_serial(self, small_result, tmp_path):
        par = run_experiment(small_result.config, jobs=2, results_path=tmp_path / "p.csv")
        run_experiment(small_result.config, jobs=1, results_path=tmp_path / "s.csv")
        assert (tmp_path / "p.csv").read_bytes() == (tmp_path / "s.csv").read_bytes()
        assert par.means == small_result.means

    def test_sweep_table(self):
        table = sensitivity_sweep(small_config(n_trials=1))
        assert list(table) == ["kriging"]
        assert table["kriging"].shape == (2,) and np.all(np.isfinite(table["kriging"]))

    def test_sweep_needs_two_sizes(self):
        with pytest.raises(InvalidArgumentError):
            sensitivity_sweep(small_config(n_high=(6,)))


class FlakySpec:
    def __init__(self, fail):
        self.fail = fail
        self.inner = method_spec("kriging")

    def build(self, pair, seed, **kw):
        if self.fail(pair.t_h.size):
            raise ConditioningError("injected")
        return self.inner.build(pair, seed, **kw)


class TestFailures:
    def test_failed_trials_excluded(self, monkeypatch):
        monkeypatch.setattr(harness, "method_spec", lambda name: FlakySpec(lambda n: n == 9))
        cfg = small_config(n_high=(6, 9), n_trials=2)
        with pytest.warns(UserWarning, match="2 of 2 trials failed"), pytest.raises(ExperimentError) as err:
            run_experiment(cfg)
        result = err.value.result
        assert result.failures[("kriging", 9)] == 2
        assert np.isnan(result.means[("kriging", 9)])
        assert np.isfinite(result.means[("kriging", 6)])

    def test_minority_failures_tolerated(self, monkeypatch):
        calls = {"n": 0}

        def fail(n):
            calls["n"] += 1
            return calls["n"] == 1

        monkeypatch.setattr(harness, "method_spec", lambda name: FlakySpec(fail))
        cfg = small_config(n_high=(6,), n_trials=3)
        with pytest.warns(UserWarning, match="1 of 3 trials failed"):
            result = run_experiment(cfg)
        assert result.failures[("kriging", 6)] == 1
        good = [r.log_l2_error for r in result.trials if r.ok]
        assert result.means[("kriging", 6)] == float(np.mean(good))
        assert [r.status for r in result.trials] == ["failed", "ok", "ok"]


class TestCsv:
    def test_results_and_summary(self, small_result, tmp_path):
        run_experiment(small_result.config, results_path=tmp_path / "results.csv", predictions_dir=tmp_path)
        write_summary(tmp_path / "summary.csv", small_result)
        rows = list(csv.reader(open(tmp_path / "results.csv")))
        assert rows[0] == ["benchmark", "method", "n_high", "trial", "log_l2_error", "status", "wall_time_ms"]
        assert len(rows) == 1 + len(small_result.trials)
        assert float(rows[1][4]) == small_result.trials[0].log_l2_error
        assert rows[1][6] == ""
        summary = list(csv.reader(open(tmp_path / "summary.csv")))
        assert summary[0] == ["benchmark", "method", "n_high", "mean_log_l2", "n_failed"]
        assert float(summary[1][3]) == small_result.means[("kriging", 6)]
        pred = list(csv.reader(open(tmp_path / "predictions_phase_shift_nargp.csv")))
        assert pred[0] == ["t", "mean", "variance", "truth"]
        assert len(pred) == 51

    def test_timings_optional(self, tmp_path):
        cfg = small_config(n_high=(6,), n_trials=1)
        run_experiment(cfg, results_path=tmp_path / "r.csv", timings=True)
        rows = list(csv.reader(open(tmp_path / "r.csv")))
        assert float(rows[1][6]) > 0
