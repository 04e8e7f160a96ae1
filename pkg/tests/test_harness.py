"""Monte Carlo harness: experiment mechanics, determinism, persistence."""

import csv
import math
import os

import numpy as np
import pytest

from optregress import (ConfigError, ExperimentSpec, ScenarioConfig,
                        run_experiment, write_report, xi_for)

RISK = ScenarioConfig(kind="risk", c=2.0, sigma=1.0, lambda_r=0.5, jump_r=1.0,
                      lambda_g=0.3, jump_g=1.0, horizon=12.0, step=0.05, seed=21)


def read_bytes(path):
    with open(path, "rb") as fp:
        return fp.read()


class TestValidation:
    def test_unknown_experiment_kind(self):
        with pytest.raises(ConfigError):
            ExperimentSpec(scenario=RISK, kind="bogus")

    def test_kronecker_on_nonlinear_rejected(self):
        nl = ScenarioConfig(kind="nonlinear", theta=4.0, horizon=5.0, step=0.1)
        with pytest.raises(ConfigError):
            ExperimentSpec(scenario=nl, kind="kronecker")

    def test_variance_statistics_need_replicates(self):
        with pytest.raises(ConfigError):
            ExperimentSpec(scenario=RISK, kind="unbiasedness",
                           n_replicates=1, levels=[5.0])

    def test_nonlinear_bias_needs_nonlinear_scenario(self):
        spec = ExperimentSpec(scenario=RISK, kind="nonlinear_bias",
                              n_replicates=10, levels=[5.0])
        with pytest.raises(ConfigError):
            run_experiment(spec)


class TestExperiments:
    def test_unbiasedness_small(self):
        spec = ExperimentSpec(scenario=RISK, kind="unbiasedness",
                              n_replicates=400, levels=[10.0])
        rep = run_experiment(spec)
        cell = rep.cells[0]
        assert cell["crossed_fraction"] == 1.0
        assert abs(cell["bias"]) <= cell["radius"]
        assert rep.passed

    def test_variance_bound_small(self):
        spec = ExperimentSpec(scenario=RISK, kind="variance_bound",
                              n_replicates=400, levels=[10.0])
        rep = run_experiment(spec)
        cell = rep.cells[0]
        assert cell["sample_var"] <= 1.1 * xi_for(RISK) / 10.0
        assert rep.passed

    def test_consistency_medians_decrease(self):
        spec = ExperimentSpec(scenario=RISK, kind="consistency",
                              n_replicates=60, horizons=[10.0, 100.0, 1000.0],
                              max_grid_points=5000)
        rep = run_experiment(spec)
        meds = [c["median_abs_error"] for c in rep.cells]
        assert meds[0] > meds[1] > meds[2]
        assert rep.passed
        assert "condition_value_q2=1.8" in rep.annotation

    def test_consistency_growing_deterministic_weight(self):
        # unit weight: the design grows without bound and errors shrink
        grows = ScenarioConfig(kind="gaussian_deterministic_f", theta=1.5,
                               sigma=1.0, horizon=10.0, step=0.01, seed=3,
                               f_form={"form": "const", "value": 1.0})
        spec = ExperimentSpec(scenario=grows, kind="consistency",
                              n_replicates=40, horizons=[10.0, 100.0, 1000.0],
                              max_grid_points=2000)
        rep = run_experiment(spec)
        meds = [c["median_abs_error"] for c in rep.cells]
        assert rep.passed and meds[0] > meds[1] > meds[2]

    def test_consistency_condition_violated_annotated(self):
        bounded = ScenarioConfig(kind="gaussian_deterministic_f", theta=1.0,
                                 sigma=1.0, horizon=20.0, step=0.01, seed=4,
                                 f_form={"form": "inv_affine", "a": 1.0, "b": 1.0})
        spec = ExperimentSpec(scenario=bounded, kind="consistency",
                              n_replicates=20, horizons=[5.0, 20.0])
        rep = run_experiment(spec)
        assert rep.passed is None
        assert rep.annotation.startswith("condition-violated")

    def test_hypothesis_error_rates(self):
        cfg = RISK.replace(horizon=25.0, step=0.25)
        spec = ExperimentSpec(scenario=cfg, kind="hypothesis_error",
                              n_replicates=300, levels=[20.0],
                              delta=2.0, epsilon=0.2)
        rep = run_experiment(spec)
        assert rep.passed
        for cell in rep.cells:
            assert cell["error_rate"] <= cell["threshold"]
        rows = rep.replicates["under_H0"]
        assert {r["true_hypothesis"] for r in rows} == {"H0"}

    def test_kronecker_diagnostic_experiment(self):
        cfg = ScenarioConfig(kind="risk", theta=0.0, lambda_r=1.0, jump_r=1.0,
                             horizon=2000.0, step=2000.0, seed=10)
        spec = ExperimentSpec(scenario=cfg, kind="kronecker", n_replicates=20,
                              kronecker_tolerance=0.15)
        rep = run_experiment(spec)
        assert rep.passed
        assert rep.cells[0]["pass_fraction"] >= 0.95

    def test_nonlinear_bias_shrinks_with_level(self):
        nl = ScenarioConfig(kind="nonlinear", theta=4.0, sigma=1.0,
                            lambda_r=0.5, jump_r=1.0, horizon=60.0, step=0.25,
                            seed=2)
        spec = ExperimentSpec(scenario=nl, kind="nonlinear_bias",
                              n_replicates=500, levels=[5.0, 50.0])
        rep = run_experiment(spec)
        b = [abs(c["bias"]) for c in rep.cells]
        r = [c["radius_emp"] for c in rep.cells]
        assert b[1] <= b[0] + r[0] + r[1]
        assert rep.passed


class TestDeterminism:
    def test_serial_equals_parallel_bytes(self, tmp_path):
        spec = ExperimentSpec(scenario=RISK, kind="unbiasedness",
                              n_replicates=64, levels=[8.0])
        rep1 = run_experiment(spec, master_seed=5)
        rep8 = run_experiment(spec.replace(n_jobs=8), master_seed=5)
        d1, d8 = tmp_path / "serial", tmp_path / "parallel"
        f1 = write_report(rep1, str(d1))
        f8 = write_report(rep8, str(d8))
        assert [os.path.basename(p) for p in f1] == [os.path.basename(p) for p in f8]
        for a, b in zip(f1, f8):
            assert read_bytes(a) == read_bytes(b)

    def test_rerun_is_byte_identical(self, tmp_path):
        spec = ExperimentSpec(scenario=RISK, kind="hypothesis_error",
                              n_replicates=40, levels=[8.0], delta=2.0,
                              epsilon=0.2)
        a = write_report(run_experiment(spec, master_seed=3), str(tmp_path / "a"))
        b = write_report(run_experiment(spec, master_seed=3), str(tmp_path / "b"))
        for pa, pb in zip(a, b):
            assert read_bytes(pa) == read_bytes(pb)

    def test_different_seed_changes_replicates(self):
        spec = ExperimentSpec(scenario=RISK, kind="unbiasedness",
                              n_replicates=16, levels=[8.0])
        a = run_experiment(spec, master_seed=1)
        b = run_experiment(spec, master_seed=2)
        ra = [r["theta_hat"] for r in next(iter(a.replicates.values()))]
        rb = [r["theta_hat"] for r in next(iter(b.replicates.values()))]
        assert ra != rb


class TestPersistence:
    def test_flags_recomputable_from_raw_rows(self, tmp_path):
        spec = ExperimentSpec(scenario=RISK, kind="unbiasedness",
                              n_replicates=200, levels=[10.0])
        rep = run_experiment(spec, master_seed=11)
        files = write_report(rep, str(tmp_path))
        raw = [p for p in files if "replicates" in os.path.basename(p)][0]
        with open(raw) as fp:
            rows = list(csv.DictReader(fp))
        est = np.asarray([float(r["theta_hat"]) for r in rows])
        target = float(rows[0]["theta_true"])
        xi = xi_for(RISK)
        radius = 4.0 * math.sqrt(xi / (10.0 * len(rows)))
        assert (abs(est.mean() - target) <= radius) == rep.cells[0]["bias_ok"]
        assert all(r["crossed"] == "true" for r in rows)

    def test_sequential_row_schema(self, tmp_path):
        spec = ExperimentSpec(scenario=RISK, kind="variance_bound",
                              n_replicates=5, levels=[8.0])
        files = write_report(run_experiment(spec, master_seed=1), str(tmp_path))
        raw = [p for p in files if "replicates" in os.path.basename(p)][0]
        with open(raw) as fp:
            header = fp.readline().strip()
        assert header == "replicate,seed,theta_true,theta_hat,tau_H,beta_H,crossed,form"

    def test_hypothesis_row_schema(self, tmp_path):
        spec = ExperimentSpec(scenario=RISK.replace(horizon=25.0, step=0.5),
                              kind="hypothesis_error", n_replicates=5,
                              levels=[20.0], delta=2.0, epsilon=0.2)
        files = write_report(run_experiment(spec, master_seed=1), str(tmp_path))
        raws = [p for p in files if "replicates" in os.path.basename(p)]
        for raw in raws:
            with open(raw) as fp:
                header = fp.readline().strip()
            assert header == "replicate,true_hypothesis,theta,phi,decision,H,delta,epsilon"
