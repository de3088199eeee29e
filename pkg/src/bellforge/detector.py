"""Estimator-style front end: fit a local-variable model to quantum data,
and on failure distill the violated Bell inequality."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import distill
from .scenario import QuantumDataset, validate_dataset
from .solver import SaturatedNonlocal, SolverConfig, solve


class BellNonlocalityDetector(BaseEstimator):
    """Runs the full detection pipeline with sklearn-style parameters.

    ``fit`` performs the variational descent; if the gradient saturates,
    the asymptotic gradient is distilled, rationalized and certified into
    ``inequality_``. ``get_params``/``set_params`` come from BaseEstimator
    so the detector composes with standard model-selection tooling.
    """

    def __init__(self, step_size=1e-2, max_iters=5000, acceleration=True,
                 eta=0.05, saturation_window=50, saturation_rel_tol=0.02,
                 uncertainty_floor=1e-3, engine="exact", seed=0,
                 distill_window=50, denominators=(1, 2, 3, 4),
                 snap_rel_tol=0.05, bound_method="exhaustive", n_sigma=3.0):
        self.step_size = step_size
        self.max_iters = max_iters
        self.acceleration = acceleration
        self.eta = eta
        self.saturation_window = saturation_window
        self.saturation_rel_tol = saturation_rel_tol
        self.uncertainty_floor = uncertainty_floor
        self.engine = engine
        self.seed = seed
        self.distill_window = distill_window
        self.denominators = denominators
        self.snap_rel_tol = snap_rel_tol
        self.bound_method = bound_method
        self.n_sigma = n_sigma

    def _solver_config(self) -> SolverConfig:
        return SolverConfig(step_size=self.step_size, max_iters=self.max_iters,
                            acceleration=self.acceleration, eta=self.eta,
                            saturation_window=self.saturation_window,
                            saturation_rel_tol=self.saturation_rel_tol,
                            uncertainty_floor=self.uncertainty_floor,
                            seed=self.seed)

    def fit(self, X: QuantumDataset, y=None):
        dataset = validate_dataset(X)
        self.dataset_ = dataset
        self.outcome_ = solve(dataset, cfg=self._solver_config(),
                              engine=self.engine)
        self.couplings_ = np.array(self.outcome_.couplings)
        self.trace_ = self.outcome_.trace
        self.inequality_ = None
        self.frustrated_ = None
        if isinstance(self.outcome_, SaturatedNonlocal):
            window = min(self.distill_window, len(self.trace_))
            g_inf = distill.distill_gradient(self.trace_, window)
            snapped = distill.rationalize(g_inf, self.denominators,
                                          self.snap_rel_tol)
            bc, witness, certified = distill.classical_bound(
                dataset.scenario, dataset.features, snapped.values,
                method=self.bound_method, seed=self.seed)
            ineq = distill.BellInequality(
                scenario=dataset.scenario, features=tuple(dataset.features),
                coefficients=snapped.values, classical_bound=bc,
                bound_certified=certified, bound_method=self.bound_method,
                fractions=snapped.fractions,
                note="" if snapped.rationalized else "unrationalized")
            value, unc, violated = distill.quantum_value(ineq, dataset,
                                                         self.n_sigma)
            ineq.quantum_value = value
            ineq.quantum_uncertainty = unc
            ineq.violated = violated
            self.inequality_ = ineq
            self.witness_configuration_ = witness
            try:
                self.frustrated_ = distill.frustration_check(ineq)
            except Exception:
                self.frustrated_ = None
        return self

    def decision_value(self, dataset: QuantumDataset):
        """Quantum value of the fitted inequality on (possibly new) data."""
        if self.inequality_ is None:
            raise RuntimeError("no inequality was distilled; call fit on "
                               "nonlocal data first")
        value, unc, violated = distill.quantum_value(
            self.inequality_, validate_dataset(dataset), self.n_sigma)
        return value, unc, violated
