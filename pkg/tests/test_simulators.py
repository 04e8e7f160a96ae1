"""Noise generators and scenario assembly: structure, moments, determinism."""

import math

import numpy as np
import pytest

from optregress import (ConfigError, LadlagPath, PathLeg, ScenarioConfig,
                        build_scenario, component_rng, kronecker_diagnostic,
                        line_path, simulate_poisson_left,
                        simulate_poisson_right, simulate_wiener)

RISK = dict(kind="risk", c=2.0, sigma=1.0, lambda_r=0.5, jump_r=1.0,
            lambda_g=0.3, jump_g=1.0)


class TestWiener:
    def test_zero_scale_gives_zero_path(self):
        w = simulate_wiener(0.0, 1.0, 0.1, seed=1)
        assert np.all(w.value == 0.0)

    def test_continuous_everywhere(self):
        w = simulate_wiener(1.0, 1.0, 0.01, seed=2)
        assert w.jumps() == []

    def test_same_seed_bit_identical(self):
        w1 = simulate_wiener(1.0, 1.0, 0.01, seed=3)
        w2 = simulate_wiener(1.0, 1.0, 0.01, seed=3)
        assert np.array_equal(w1.value, w2.value)

    def test_terminal_moments(self):
        # mean within 4/sqrt(n) of 0 and variance within 10% of T
        n = 10_000
        finals = np.empty(n)
        for i in range(n):
            rng = component_rng(2024, i, 0)
            w = simulate_wiener(1.0, 1.0, 1e-3, rng=rng)
            finals[i] = w.value[-1]
        assert abs(finals.mean()) <= 4.0 / math.sqrt(n)
        assert abs(finals.var(ddof=1) - 1.0) <= 0.1


class TestPoisson:
    def test_zero_rate(self):
        p = simulate_poisson_right(0.0, 1.0, 5.0, seed=1)
        assert p.jumps() == []

    def test_right_variant_has_no_forward_jumps(self):
        p = simulate_poisson_right(2.0, -1.5, 10.0, seed=4)
        assert len(p.jumps()) > 0
        for _, d, dp in p.jumps():
            assert d == -1.5 and dp == 0.0

    def test_left_variant_carries_jump_in_right_limit(self):
        p = simulate_poisson_left(1.0, 2.0, 10.0, seed=5)
        t0 = p.jumps()[0][0]
        assert p.value_at(t0, "at") == p.value_at(t0, "left")
        assert p.value_at(t0, "right") == p.value_at(t0, "at") + 2.0
        for _, d, dp in p.jumps():
            assert d == 0.0 and dp == 2.0

    def test_right_mean_count(self):
        n = 10_000
        counts = np.empty(n)
        for i in range(n):
            rng = component_rng(77, i, 1)
            p = simulate_poisson_right(2.0, 1.0, 10.0, rng=rng)
            counts[i] = p.value[-1]
        assert abs(counts.mean() - 20.0) <= 4.0 * math.sqrt(20.0 / n)

    def test_left_mean_count(self):
        n = 10_000
        counts = np.empty(n)
        for i in range(n):
            rng = component_rng(78, i, 2)
            p = simulate_poisson_left(3.0, 1.0, 10.0, rng=rng)
            counts[i] = p.right[-1]
        assert abs(counts.mean() - 30.0) <= 4.0 * math.sqrt(30.0 / n)

    def test_left_compensated_kronecker_tail(self):
        # (N - lam*t)/t decays; moderate horizon keeps the test quick
        lam, T = 1.0, 2000.0
        ok = 0
        for i in range(20):
            rng = component_rng(99, i, 2)
            p = simulate_poisson_left(lam, 1.0, T, rng=rng)
            from optregress import add, sampled_path
            comp = sampled_path(p.times, -lam * p.times, horizon=T, rule="linear")
            N = add(p, comp)
            diag = kronecker_diagnostic(N, line_path(1.0, T))
            ok += diag.tail_max(0.9) < 0.15
        assert ok >= 19


class TestBuildScenario:
    def test_noiseless_risk_is_the_line(self):
        cfg = ScenarioConfig(kind="risk", c=1.0, horizon=2.0, step=0.25)
        m = build_scenario(cfg)
        assert m.theta == 1.0
        assert np.allclose(m.X.value, m.X.times, rtol=0, atol=0)

    def test_risk_reparameterization(self):
        cfg = ScenarioConfig(horizon=2.0, step=0.25, **RISK)
        m = build_scenario(cfg)
        assert m.theta == pytest.approx(1.8, abs=1e-15)
        assert m.xi_bound == pytest.approx(1.8, abs=1e-15)
        # theta given instead of c resolves to the same premium
        cfg2 = ScenarioConfig(kind="risk", theta=1.8, sigma=1.0, lambda_r=0.5,
                              jump_r=1.0, lambda_g=0.3, jump_g=1.0,
                              horizon=2.0, step=0.25)
        assert cfg2.resolved_premium() == pytest.approx(2.0, abs=1e-15)

    def test_model_reassembles_from_components(self):
        cfg = ScenarioConfig(horizon=5.0, step=0.05, seed=8, **RISK)
        m = build_scenario(cfg)
        from optregress import add, scale
        rebuilt_m = add(m.components["wiener"], m.components["poisson_r"],
                        m.components["poisson_g"], m.components["compensator"])
        assert np.array_equal(rebuilt_m.value, m.M.value)
        rebuilt_x = add(scale(m.drift, m.coef), rebuilt_m)
        assert np.array_equal(rebuilt_x.value, m.X.value)
        assert np.array_equal(rebuilt_x.left, m.X.left)
        assert np.array_equal(rebuilt_x.right, m.X.right)

    def test_reproducible_across_calls_and_replicates(self):
        cfg = ScenarioConfig(horizon=3.0, step=0.1, seed=123, **RISK)
        a = build_scenario(cfg, replicate=7)
        b = build_scenario(cfg, replicate=7)
        other = build_scenario(cfg, replicate=8)
        assert np.array_equal(a.X.value, b.X.value)
        assert not np.array_equal(a.X.value, other.X.value)

    def test_ou_noiseless_matches_ode(self):
        # dX = (1 - X) dt from 0: X_t = 1 - exp(-t); the predictable
        # (held-left) drift reading is forward Euler, whose exact discrete
        # solution peaks at e^-1 * step/2 error near t=1, so 2e-4 at this
        # step; halving the step must halve the error (first order)
        def max_err(step):
            cfg = ScenarioConfig(kind="ou", theta=1.0, mu=1.0, x0=0.0,
                                 horizon=2.0, step=step)
            m = build_scenario(cfg)
            return np.max(np.abs(m.X.value - (1.0 - np.exp(-m.X.times))))

        coarse = max_err(1e-3)
        assert coarse <= 2e-4
        assert 0.4 <= max_err(5e-4) / coarse <= 0.6

    def test_ou_drift_reads_left_values(self):
        cfg = ScenarioConfig(kind="ou", theta=0.7, mu=1.0, sigma=0.4,
                             horizon=1.0, step=0.05, seed=6)
        m = build_scenario(cfg)
        X = m.X
        k = 10
        # integrand at an event only depends on the path strictly before it
        bumped = LadlagPath(X.times, X.left,
                            np.where(np.arange(X.n_events) == k,
                                     X.value + 5.0, X.value),
                            np.where(np.arange(X.n_events) == k,
                                     X.right + 5.0, X.right),
                            X.horizon, rule=X.rule)
        orig = m.integrand.f_r.at_times(X.times[k:k + 1])[0]
        pert = PathLeg(bumped, transform=lambda v: cfg.mu - v, side="left",
                       segment_policy="hold_left").at_times(X.times[k:k + 1])[0]
        assert orig == pert

    def test_martingale_mean_zero(self):
        n = 2000
        for kw in (RISK,
                   dict(kind="ou", theta=1.0, mu=1.0, sigma=0.5),
                   dict(kind="gaussian_deterministic_f", theta=2.0, sigma=1.0,
                        f_form={"form": "affine", "a": 1.0, "b": 1.0}),
                   dict(kind="nonlinear", theta=4.0, sigma=1.0)):
            cfg = ScenarioConfig(horizon=2.0, step=0.01, **kw)
            finals = np.empty(n)
            for i in range(n):
                finals[i] = build_scenario(cfg, replicate=i,
                                           master_seed=31).M.value[-1]
            assert abs(finals.mean()) <= 4.0 * math.sqrt(finals.var(ddof=1) / n)

    def test_nonlinear_negative_theta_rejected(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(kind="nonlinear", theta=-1.0, horizon=1.0, step=0.1)

    def test_gaussian_rejects_jumps(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(kind="gaussian_deterministic_f", theta=1.0,
                           lambda_r=0.5, jump_r=1.0, horizon=1.0, step=0.1)

    def test_custom_kind_not_buildable(self):
        cfg = ScenarioConfig(kind="custom", horizon=1.0, step=0.1)
        with pytest.raises(ConfigError):
            build_scenario(cfg)

    def test_design_divergence_flags(self):
        base = dict(kind="gaussian_deterministic_f", theta=1.0, sigma=1.0,
                    horizon=1.0, step=0.1)
        grows = build_scenario(ScenarioConfig(
            f_form={"form": "const", "value": 1.0}, **base))
        bounded = build_scenario(ScenarioConfig(
            f_form={"form": "inv_affine", "a": 1.0, "b": 1.0}, **base))
        assert grows.design_diverges and not bounded.design_diverges
