"""Generalized Ising local-variable model and its exact thermodynamics.

The model is H(sigma; K) = -sum_r K_r f_r(sigma) with the inverse
temperature absorbed into the couplings (beta = 1). Exact enumeration over
all 2^V configurations serves as the ground-truth oracle for small systems;
larger systems are handled by the Monte Carlo engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import (Feature, MeasurementScenario, ScenarioError,
                       SpinConfiguration)

ENUMERATION_CAP = 24          # 2^24 ~ 16.8M configurations
_CHUNK_BITS = 18

GS_DEGENERACY_TOL = 1e-9


class TooLarge(ScenarioError):
    pass


@dataclass
class MomentVector:
    """Feature moments, optionally with one-sigma statistical errors."""

    values: np.ndarray
    errors: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.errors is not None:
            self.errors = np.asarray(self.errors, dtype=float)
            if self.errors.shape != self.values.shape:
                raise ScenarioError("errors must align with values")
            if np.any(self.errors < 0):
                raise ScenarioError("errors must be non-negative")


class LvModel:
    """Coupling vector K aligned with a canonical feature list.

    Immutable after construction. Per-slot adjacency lists are precomputed
    so that a single-spin-flip energy difference costs O(features touching
    the slot) instead of O(R).
    """

    def __init__(self, scenario: MeasurementScenario, features, couplings):
        self.scenario = scenario
        self.features = tuple(features)
        self.couplings = np.array(couplings, dtype=float)
        if len(self.features) != self.couplings.shape[0]:
            raise ScenarioError("couplings must align with features")
        if not np.all(np.isfinite(self.couplings)):
            raise ScenarioError("couplings must be finite")
        seen = set()
        for f in self.features:
            if not isinstance(f, Feature):
                raise ScenarioError(f"not a Feature: {f!r}")
            if f in seen:
                raise ScenarioError(f"repeated feature {f}")
            seen.add(f)
        self.feature_slots = [np.array(f.slots(scenario), dtype=np.int64)
                              for f in self.features]
        adjacency = [[] for _ in range(scenario.n_variables)]
        for r, slots in enumerate(self.feature_slots):
            for s in slots:
                adjacency[s].append(r)
        self.slot_features = [np.array(a, dtype=np.int64) for a in adjacency]
        self.couplings.setflags(write=False)

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def n_variables(self) -> int:
        return self.scenario.n_variables

    def with_couplings(self, couplings) -> "LvModel":
        return LvModel(self.scenario, self.features, couplings)

    # -- single-configuration queries -------------------------------------

    def feature_values(self, values: np.ndarray) -> np.ndarray:
        """All f_r evaluated on a dense +-1 slot array."""
        return np.array([np.prod(values[s]) for s in self.feature_slots],
                        dtype=float)

    def energy(self, c: SpinConfiguration) -> float:
        """H(sigma; K) = -sum_r K_r f_r(sigma)."""
        return -float(self.couplings @ self.feature_values(c.values))

    def energy_delta(self, c: SpinConfiguration, slot) -> float:
        """Energy change from flipping one slot; O(degree of the slot).

        ``slot`` is either a flat index or a (site, setting) pair.
        """
        if not np.isscalar(slot):
            slot = self.scenario.slot(*slot)
        touching = self.slot_features[slot]
        if touching.size == 0:
            return 0.0
        delta = 0.0
        for r in touching:
            f_val = np.prod(c.values[self.feature_slots[r]])
            delta += 2.0 * self.couplings[r] * f_val
        return float(delta)

    # -- exact enumeration -------------------------------------------------

    def _check_cap(self, cap):
        cap = ENUMERATION_CAP if cap is None else cap
        if self.n_variables > cap:
            raise TooLarge(
                f"{self.n_variables} variables exceed enumeration cap {cap}")

    def _chunks(self):
        n_conf = 1 << self.n_variables
        step = min(n_conf, 1 << _CHUNK_BITS)
        shifts = np.arange(self.n_variables, dtype=np.uint64)
        for start in range(0, n_conf, step):
            idx = np.arange(start, min(start + step, n_conf), dtype=np.uint64)
            bits = (idx[:, None] >> shifts[None, :]) & np.uint64(1)
            spins = 1.0 - 2.0 * bits.astype(np.float64)
            fvals = np.empty((spins.shape[0], self.n_features))
            for r, slots in enumerate(self.feature_slots):
                fvals[:, r] = np.prod(spins[:, slots], axis=1)
            yield fvals

    def _boltzmann_scan(self, want_hessian=False, cap=None):
        """Streaming log-sum-exp accumulation over all configurations."""
        self._check_cap(cap)
        shift = -np.inf
        z = 0.0
        s1 = np.zeros(self.n_features)
        s2 = np.zeros((self.n_features, self.n_features)) if want_hessian else None
        for fvals in self._chunks():
            logw = fvals @ self.couplings      # = -H
            m = float(logw.max())
            if m > shift:
                scale = np.exp(shift - m) if np.isfinite(shift) else 0.0
                z *= scale
                s1 *= scale
                if s2 is not None:
                    s2 *= scale
                shift = m
            w = np.exp(logw - shift)
            z += float(w.sum())
            s1 += w @ fvals
            if s2 is not None:
                s2 += (fvals * w[:, None]).T @ fvals
        return shift, z, s1, s2

    def exact_log_partition(self, cap=None) -> float:
        """log Z by full enumeration, max-shifted for overflow safety."""
        shift, z, _, _ = self._boltzmann_scan(cap=cap)
        return shift + float(np.log(z))

    def exact_moments(self, cap=None) -> MomentVector:
        """Boltzmann averages <f_r> by full enumeration."""
        _, z, s1, _ = self._boltzmann_scan(cap=cap)
        return MomentVector(values=s1 / z)

    def exact_hessian(self, cap=None) -> np.ndarray:
        """Covariance matrix <f_r f_s> - <f_r><f_s>; symmetric PSD."""
        _, z, s1, s2 = self._boltzmann_scan(want_hessian=True, cap=cap)
        mean = s1 / z
        return s2 / z - np.outer(mean, mean)

    def ground_state_energy(self, cap=None):
        """(minimum energy, number of minimizing configurations)."""
        emin, count, _ = self._ground_state_scan(cap=cap)
        return emin, count

    def ground_state_moments(self, cap=None) -> MomentVector:
        """Feature averages over the ground-state manifold.

        Realizes the beta -> infinity limit of the Boltzmann distribution by
        direct restriction to the minimum-energy configurations.
        """
        _, count, fsum = self._ground_state_scan(cap=cap)
        return MomentVector(values=fsum / count)

    def _ground_state_scan(self, cap=None):
        self._check_cap(cap)
        emin = np.inf
        count = 0
        fsum = np.zeros(self.n_features)
        for fvals in self._chunks():
            energies = -(fvals @ self.couplings)
            chunk_min = float(energies.min())
            tol = GS_DEGENERACY_TOL * max(1.0, abs(min(emin, chunk_min)))
            if chunk_min < emin - tol:
                emin = chunk_min
                count = 0
                fsum[:] = 0.0
            mask = energies <= emin + tol
            count += int(mask.sum())
            fsum += fvals[mask].sum(axis=0)
        return emin, count, fsum


class ExactMomentEngine:
    """Dense-precomputed enumeration engine for repeated moment queries.

    Tabulates the full feature-value matrix once (2^V x R, int8) so that the
    per-iteration cost inside the solver loop is a single matrix product.
    """

    def __init__(self, model: LvModel, cap: int = 20):
        if model.n_variables > cap:
            raise TooLarge(
                f"{model.n_variables} variables exceed dense engine cap {cap}")
        if (1 << model.n_variables) * model.n_features > (1 << 27):
            raise TooLarge("feature table would exceed the memory budget")
        self.model = model
        self.fvals = np.concatenate(list(model._chunks()), axis=0)

    def moments(self, couplings: np.ndarray) -> MomentVector:
        logw = self.fvals @ couplings
        w = np.exp(logw - logw.max())
        z = w.sum()
        return MomentVector(values=(w @ self.fvals) / z)
