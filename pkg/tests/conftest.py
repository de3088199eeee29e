"""Shared fixtures and model builders for the test suite."""

import itertools

import numpy as np
import pytest

from bellforge import (LvModel, MeasurementScenario, QuantumDataset,
                       canonicalize_feature)


def chsh_scenario():
    return MeasurementScenario(n_sites=2, n_settings=2)


def chsh_features(scenario=None):
    """The four cross-pair correlators (a on site 0, b on site 1)."""
    s = scenario or chsh_scenario()
    return [canonicalize_feature([(0, a), (1, b)], s)
            for a, b in ((0, 0), (1, 1), (0, 1), (1, 0))]


def frustrated_square_model(kappa=1.0):
    """Couplings (+k, +k, +k, -k) on the CHSH 4-cycle of variables."""
    s = chsh_scenario()
    return LvModel(s, chsh_features(s), [kappa, kappa, kappa, -kappa])


def pair_model(coupling):
    """Two variables, one bond: H = -K sigma_1 sigma_2."""
    s = MeasurementScenario(n_sites=2, n_settings=1)
    f = canonicalize_feature([(0, 0), (1, 0)], s)
    return LvModel(s, [f], [coupling])


def random_pair_model(rng, n_sites=4, n_settings=2, n_features=6,
                      coupling_scale=1.0):
    """Random degree-2 model on distinct variable pairs."""
    s = MeasurementScenario(n_sites=n_sites, n_settings=n_settings)
    variables = list(itertools.product(range(n_sites), range(n_settings)))
    pairs = list(itertools.combinations(variables, 2))
    chosen = rng.choice(len(pairs), size=min(n_features, len(pairs)),
                        replace=False)
    features = [canonicalize_feature(list(pairs[i]), s) for i in chosen]
    couplings = rng.uniform(-coupling_scale, coupling_scale, len(features))
    return LvModel(s, features, couplings)


def dataset_from_model(model, uncertainty=0.0):
    """Planted-model dataset: exact moments of the model as quantum data."""
    mv = model.exact_moments()
    entries = tuple((f, float(v), uncertainty)
                    for f, v in zip(model.features, mv.values))
    return QuantumDataset(scenario=model.scenario, entries=entries,
                          metadata="planted LV model")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
