"""Metropolis sampling: correctness, error bars, determinism, budgeting."""

import math

import numpy as np
import pytest

from bellforge import (LvModel, MeasurementScenario, SamplerConfig,
                       canonicalize_feature, required_sweeps, sample_moments)
from bellforge.mc import NonPositiveInput
from bellforge.scenario import ScenarioError

from conftest import pair_model, random_pair_model


def _within_error_bars(est_values, truth, est_errors, n_sigma=5.0,
                       floor=1e-4):
    return np.all(np.abs(est_values - truth)
                  <= n_sigma * np.maximum(est_errors, floor))


class TestSamplerConfig:
    def test_needs_two_chains(self):
        with pytest.raises(ScenarioError):
            SamplerConfig(n_chains=1)

    def test_default_burnin_is_ten_percent(self):
        cfg = SamplerConfig(n_chains=4, n_steps=1000)
        assert cfg.n_burnin == 100


class TestSampleMoments:
    def test_single_bond_tanh(self):
        m = pair_model(0.5)
        cfg = SamplerConfig(n_chains=8, n_steps=20_000, seed=3)
        est = sample_moments(m, cfg)
        assert _within_error_bars(est.values, math.tanh(0.5), est.errors)

    def test_zero_couplings(self, rng):
        m = random_pair_model(rng).with_couplings(np.zeros(6))
        est = sample_moments(m, SamplerConfig(n_chains=6, n_steps=5000, seed=1))
        assert _within_error_bars(est.values, 0.0, est.errors)
        assert est.acceptance_rate == pytest.approx(1.0, abs=1e-12)

    def test_agrees_with_enumeration(self, rng):
        for trial in range(4):
            m = random_pair_model(rng, coupling_scale=1.0)
            exact = m.exact_moments().values
            est = sample_moments(
                m, SamplerConfig(n_chains=8, n_steps=8000, seed=100 + trial))
            assert _within_error_bars(est.values, exact, est.errors)

    def test_two_variable_distribution(self):
        # Moments of sigma_1, sigma_2 and sigma_1 sigma_2 pin down the full
        # 4-state distribution, so this doubles as a detailed-balance check.
        s = MeasurementScenario(n_sites=2, n_settings=1)
        feats = [canonicalize_feature([(0, 0)], s),
                 canonicalize_feature([(1, 0)], s),
                 canonicalize_feature([(0, 0), (1, 0)], s)]
        m = LvModel(s, feats, [0.3, -0.2, 0.6])
        exact = m.exact_moments().values
        est = sample_moments(m, SamplerConfig(n_chains=8, n_steps=30_000,
                                              seed=7))
        assert _within_error_bars(est.values, exact, est.errors)

    def test_seed_determinism(self, rng):
        m = random_pair_model(rng)
        cfg = SamplerConfig(n_chains=4, n_steps=2000, seed=42)
        a = sample_moments(m, cfg)
        b = sample_moments(m, cfg)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.errors, b.errors)
        assert np.array_equal(a.final_states, b.final_states)

    def test_error_scaling(self):
        # Quadrupling the sweeps should roughly halve the error bars.
        m = pair_model(0.4)
        short = sample_moments(m, SamplerConfig(n_chains=16, n_steps=2000,
                                                seed=11))
        long = sample_moments(m, SamplerConfig(n_chains=16, n_steps=8000,
                                               seed=11))
        ratio = short.errors[0] / long.errors[0]
        assert 2.0 / 1.5 <= ratio <= 2.0 * 1.5

    def test_chain_means_consistent(self):
        m = pair_model(0.3)
        est = sample_moments(m, SamplerConfig(n_chains=8, n_steps=10_000,
                                              seed=5))
        spread = est.chain_means.std(axis=0, ddof=1)
        grand = est.chain_means.mean(axis=0)
        assert np.all(np.abs(est.chain_means - grand) <= 5.0 * spread + 1e-3)

    def test_warm_start_reproducible(self, rng):
        m = random_pair_model(rng)
        cfg = SamplerConfig(n_chains=4, n_steps=1000, seed=9)
        first = sample_moments(m, cfg)
        warm_a = sample_moments(m, cfg, initial_states=first.final_states)
        warm_b = sample_moments(m, cfg, initial_states=first.final_states)
        assert np.array_equal(warm_a.values, warm_b.values)


class TestRequiredSweeps:
    def test_paper_operating_point(self):
        assert required_sweeps(1.0, 0.05, calib=1.0, min_sweeps=1,
                               max_sweeps=10**9) == 400

    def test_inverse_square_scaling(self):
        base = required_sweeps(0.5, 0.05, min_sweeps=1, max_sweeps=10**9)
        halved = required_sweeps(0.25, 0.05, min_sweeps=1, max_sweeps=10**9)
        assert halved == 4 * base

    def test_clamping(self):
        assert required_sweeps(100.0, 0.05, min_sweeps=200,
                               max_sweeps=5000) == 200
        assert required_sweeps(1e-6, 0.05, min_sweeps=200,
                               max_sweeps=5000) == 5000

    @pytest.mark.parametrize("gns,eta", [(0.0, 0.05), (1.0, 0.0), (-1.0, 0.05)])
    def test_non_positive_input(self, gns, eta):
        with pytest.raises(NonPositiveInput):
            required_sweeps(gns, eta)
