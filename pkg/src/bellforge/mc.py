"""Single-spin-flip Metropolis estimation of local-variable moments.

One MC step is a sweep of V flip attempts (V = n_sites * n_settings).
Error bars come from the spread of the per-chain means across independent
chains, which is unbiased for >= 2 chains and embarrassingly parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .lvmodel import LvModel
from .scenario import ScenarioError

DEFAULT_MIN_SWEEPS = 200
DEFAULT_MAX_SWEEPS = 200_000


class NonPositiveInput(ScenarioError):
    pass


@dataclass
class SamplerConfig:
    n_chains: int = 8
    n_steps: int = 1000
    n_burnin: int | None = None   # defaults to 10% of n_steps
    seed: int = 0

    def __post_init__(self):
        if self.n_chains < 2:
            raise ScenarioError("need >= 2 chains for inter-chain error bars")
        if self.n_steps < 1:
            raise ScenarioError("n_steps must be >= 1")
        if self.n_burnin is None:
            self.n_burnin = max(1, self.n_steps // 10)
        if self.n_burnin < 0:
            raise ScenarioError("n_burnin must be >= 0")


@dataclass
class MomentEstimate:
    values: np.ndarray
    errors: np.ndarray
    acceptance_rate: float
    chain_means: np.ndarray            # (n_chains, R)
    final_states: np.ndarray           # (n_chains, V) int8, for warm starts


@njit(cache=True)
def _metropolis_chain(spins, couplings, feat_slots, feat_ptr, adj_feats,
                      adj_ptr, n_sweeps, n_burnin, seed):
    np.random.seed(seed)
    n_vars = spins.shape[0]
    n_feat = feat_ptr.shape[0] - 1
    featvals = np.empty(n_feat, dtype=np.int8)
    for r in range(n_feat):
        v = 1
        for j in range(feat_ptr[r], feat_ptr[r + 1]):
            v *= spins[feat_slots[j]]
        featvals[r] = v
    sums = np.zeros(n_feat)
    accepted = 0
    total = 0
    for sweep in range(n_burnin + n_sweeps):
        for _ in range(n_vars):
            s = np.random.randint(0, n_vars)
            delta = 0.0
            for j in range(adj_ptr[s], adj_ptr[s + 1]):
                delta += 2.0 * couplings[adj_feats[j]] * featvals[adj_feats[j]]
            if delta <= 0.0 or np.random.random() < np.exp(-delta):
                spins[s] = -spins[s]
                for j in range(adj_ptr[s], adj_ptr[s + 1]):
                    featvals[adj_feats[j]] = -featvals[adj_feats[j]]
                accepted += 1
            total += 1
        if sweep >= n_burnin:
            for r in range(n_feat):
                sums[r] += featvals[r]
    return sums / n_sweeps, accepted / total


def _csr_arrays(model: LvModel):
    feat_ptr = np.zeros(model.n_features + 1, dtype=np.int64)
    for r, slots in enumerate(model.feature_slots):
        feat_ptr[r + 1] = feat_ptr[r] + slots.size
    feat_slots = (np.concatenate(model.feature_slots)
                  if model.n_features else np.empty(0, dtype=np.int64))
    adj_ptr = np.zeros(model.n_variables + 1, dtype=np.int64)
    for s, feats in enumerate(model.slot_features):
        adj_ptr[s + 1] = adj_ptr[s] + feats.size
    adj_feats = (np.concatenate(model.slot_features)
                 if model.n_variables else np.empty(0, dtype=np.int64))
    return feat_slots, feat_ptr, adj_feats.astype(np.int64), adj_ptr


def sample_moments(model: LvModel, cfg: SamplerConfig,
                   initial_states: np.ndarray | None = None) -> MomentEstimate:
    """Estimate all feature moments of the model by Metropolis sampling.

    Deterministic for a fixed (model, cfg, initial_states): chain c draws
    from a stream derived from (cfg.seed, c). ``initial_states`` warm-starts
    the chains (e.g. from the previous solver iteration); otherwise chains
    start from independent uniform random configurations.
    """
    feat_slots, feat_ptr, adj_feats, adj_ptr = _csr_arrays(model)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(2 * cfg.n_chains)
    chain_means = np.empty((cfg.n_chains, model.n_features))
    finals = np.empty((cfg.n_chains, model.n_variables), dtype=np.int8)
    acc = 0.0
    for c in range(cfg.n_chains):
        if initial_states is not None:
            spins = np.array(initial_states[c], dtype=np.int8)
        else:
            rng = np.random.default_rng(seeds[c])
            spins = (2 * rng.integers(0, 2, model.n_variables) - 1).astype(np.int8)
        means, acc_c = _metropolis_chain(
            spins, model.couplings, feat_slots, feat_ptr, adj_feats, adj_ptr,
            cfg.n_steps, cfg.n_burnin, int(seeds[cfg.n_chains + c]))
        chain_means[c] = means
        finals[c] = spins
        acc += acc_c
    values = chain_means.mean(axis=0)
    errors = chain_means.std(axis=0, ddof=1) / math.sqrt(cfg.n_chains)
    return MomentEstimate(values=values, errors=errors,
                          acceptance_rate=acc / cfg.n_chains,
                          chain_means=chain_means, final_states=finals)


def required_sweeps(grad_norm_sq: float, eta: float, calib: float = 1.0,
                    min_sweeps: int = DEFAULT_MIN_SWEEPS,
                    max_sweeps: int = DEFAULT_MAX_SWEEPS) -> int:
    """Sweep budget for a target relative precision on |G|^2.

    Follows the scaling N_MC ~ (eta |G|^2)^-2; ``calib`` absorbs the
    unspecified prefactor. The result is clamped to [min_sweeps, max_sweeps].
    """
    if grad_norm_sq <= 0 or eta <= 0 or calib <= 0:
        raise NonPositiveInput(
            "required_sweeps needs positive gradient norm, eta and calib; "
            "use the data-uncertainty floor when the gradient vanishes")
    n = math.ceil(calib * (eta * grad_norm_sq) ** -2)
    return int(min(max(n, min_sweeps), max_sweeps))
