"""Convex descent matching a local-variable model to quantum data.

The cost is L(K) = log Z(K) - sum_r K_r <f_r>_Q, whose gradient is
G_r = <f_r>_LV - <f_r>_Q. Two outcomes matter: convergence inside the
local polytope (data is classical) or saturation of |G|^2 at a positive
plateau with runaway couplings (data is nonlocal; the plateau gradient
defines the violated Bell inequality).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lvmodel import ExactMomentEngine, LvModel, TooLarge
from .mc import SamplerConfig, required_sweeps, sample_moments
from .scenario import QuantumDataset, ScenarioError


class LengthMismatch(ScenarioError):
    pass


class WindowTooShort(ScenarioError):
    pass


@dataclass
class SolverConfig:
    step_size: float = 1e-2
    max_iters: int = 5000
    acceleration: bool = True
    eta: float = 0.05
    saturation_window: int = 50
    saturation_rel_tol: float = 0.02
    uncertainty_floor: float = 1e-3
    mc_chains: int = 8
    mc_calib: float = 1.0
    mc_min_sweeps: int = 200
    mc_max_sweeps: int = 50_000
    seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0:
            raise ScenarioError("step_size must be positive")
        if self.saturation_window < 2:
            raise ScenarioError("saturation_window must be >= 2")
        if self.uncertainty_floor < 0:
            raise ScenarioError("uncertainty_floor must be >= 0")


@dataclass
class GradientTrace:
    """Per-iteration history of the descent."""

    iterations: list = field(default_factory=list)
    grad_norm_sq: list = field(default_factory=list)
    gradients: list = field(default_factory=list)
    coupling_norms: list = field(default_factory=list)
    mc_error_sq: list = field(default_factory=list)   # sum_r err_r^2

    def append(self, it, grad, k_norm, err_sq):
        self.iterations.append(int(it))
        self.gradients.append(np.array(grad))
        self.grad_norm_sq.append(float(grad @ grad))
        self.coupling_norms.append(float(k_norm))
        self.mc_error_sq.append(float(err_sq))

    def __len__(self):
        return len(self.iterations)


@dataclass
class SolverOutcome:
    trace: GradientTrace
    couplings: np.ndarray


@dataclass
class ConvergedLocal(SolverOutcome):
    moments: np.ndarray
    residuals: np.ndarray


@dataclass
class SaturatedNonlocal(SolverOutcome):
    asymptotic_gradient: np.ndarray
    grad_norm_sq_inf: float


@dataclass
class Inconclusive(SolverOutcome):
    reason: str


def gradient(lv_values, q_values) -> np.ndarray:
    """G_r = <f_r>_LV - <f_r>_Q, the distance vector to the quantum data."""
    lv = np.asarray(lv_values, dtype=float)
    q = np.asarray(q_values, dtype=float)
    if lv.shape != q.shape:
        raise LengthMismatch(f"{lv.shape} vs {q.shape}")
    return lv - q


def _window_stats(series, window):
    w = np.asarray(series[-window:], dtype=float)
    half = window // 2
    mean = float(w.mean())
    drift = abs(float(w[half:].mean()) - float(w[:half].mean()))
    return mean, drift


def detect_saturation(trace: GradientTrace, cfg: SolverConfig,
                      noise_floor: float = 0.0) -> str:
    """Classify the tail of a trace: 'saturated', 'converging' or 'undecided'.

    Saturation means the window-mean of |G|^2 sits on a positive plateau
    above the noise floor with relative drift below cfg.saturation_rel_tol.
    """
    w = cfg.saturation_window
    if len(trace) < w:
        raise WindowTooShort(f"trace has {len(trace)} < {w} iterations")
    mean, drift = _window_stats(trace.grad_norm_sq, w)
    if mean <= noise_floor:
        return "converging"
    if mean > 0 and drift <= cfg.saturation_rel_tol * mean:
        return "saturated"
    return "undecided"


class _ExactEngine:
    def __init__(self, model: LvModel):
        try:
            self._dense = ExactMomentEngine(model)
        except TooLarge:
            self._dense = None
        self.model = model

    def moments(self, couplings):
        if self._dense is not None:
            mv = self._dense.moments(couplings)
        else:
            mv = self.model.with_couplings(couplings).exact_moments()
        return mv.values, np.zeros_like(mv.values)


class _McEngine:
    def __init__(self, model: LvModel, cfg: SolverConfig):
        self.model = model
        self.cfg = cfg
        self.states = None
        self.budget = cfg.mc_min_sweeps
        self._iter = 0

    def set_budget(self, grad_norm_sq, boost=1):
        try:
            n = required_sweeps(grad_norm_sq, self.cfg.eta, self.cfg.mc_calib,
                                self.cfg.mc_min_sweeps, self.cfg.mc_max_sweeps)
        except ScenarioError:
            n = self.cfg.mc_max_sweeps
        self.budget = int(min(n * boost, self.cfg.mc_max_sweeps * boost))

    def moments(self, couplings):
        # Warm-started chains need little burn-in: K moves by eps*G per step.
        burnin = max(2, self.budget // 10) if self.states is None else max(2, self.budget // 50)
        scfg = SamplerConfig(n_chains=self.cfg.mc_chains, n_steps=self.budget,
                             n_burnin=burnin,
                             seed=self.cfg.seed + 7919 * self._iter)
        self._iter += 1
        est = sample_moments(self.model.with_couplings(couplings), scfg,
                             initial_states=self.states)
        self.states = est.final_states
        return est.values, est.errors


def solve(dataset: QuantumDataset, features=None, cfg: SolverConfig | None = None,
          engine: str = "exact") -> SolverOutcome:
    """Variationally search for an LV model reproducing the dataset.

    The feature list defaults to (and must index) exactly the dataset
    entries: the model template mirrors the data geometry. Returns one of
    ConvergedLocal, SaturatedNonlocal or Inconclusive; budget exhaustion is
    reported as Inconclusive, never raised.
    """
    cfg = cfg or SolverConfig()
    if features is None:
        features = dataset.features
    features = list(features)
    if features != list(dataset.features):
        raise ScenarioError("features must exactly index the dataset entries")
    q = dataset.values
    unc = dataset.uncertainties
    tol_q = np.maximum(unc, cfg.uncertainty_floor)

    model = LvModel(dataset.scenario, features, np.zeros(len(features)))
    if engine == "exact":
        eng = _ExactEngine(model)
    elif engine == "mc":
        eng = _McEngine(model, cfg)
    else:
        raise ScenarioError(f"unknown engine {engine!r}")

    eps = cfg.step_size
    w = cfg.saturation_window
    k_cur = np.zeros(len(features))
    k_prev = k_cur.copy()
    t_momentum = 1
    trace = GradientTrace()

    for it in range(cfg.max_iters):
        if cfg.acceleration:
            mu = (t_momentum - 1) / (t_momentum + 2)
            y = k_cur + mu * (k_cur - k_prev)
        else:
            y = k_cur
        if isinstance(eng, _McEngine):
            gns_prev = trace.grad_norm_sq[-1] if len(trace) else 1.0
            # The distillation tail deserves extra statistics.
            boost = 4 if _plateau_near(trace, cfg) else 1
            eng.set_budget(gns_prev, boost=boost)
        lv, err = eng.moments(y)
        g = gradient(lv, q)
        trace.append(it, g, np.linalg.norm(y), float(err @ err))

        if np.all(np.abs(g) <= tol_q + err):
            return ConvergedLocal(trace=trace, couplings=y, moments=lv,
                                  residuals=np.abs(g))

        if len(trace) >= 2 * w:
            floor = float((np.maximum(tol_q, err) ** 2).sum())
            m1, d1 = _window_stats(trace.grad_norm_sq[:-w], w)
            m2, d2 = _window_stats(trace.grad_norm_sq, w)
            flat = (d1 <= cfg.saturation_rel_tol * m1
                    and d2 <= cfg.saturation_rel_tol * m2
                    and abs(m2 - m1) <= cfg.saturation_rel_tol * m2)
            if flat and m2 > 4.0 * floor:
                g_inf = np.mean(trace.gradients[-w:], axis=0)
                return SaturatedNonlocal(trace=trace, couplings=y,
                                         asymptotic_gradient=g_inf,
                                         grad_norm_sq_inf=float(g_inf @ g_inf))

        k_next = y - eps * g
        if cfg.acceleration:
            # Gradient restart: drop momentum when it opposes the descent.
            if g @ (k_cur - k_prev) > 0:
                t_momentum = 1
            else:
                t_momentum += 1
        k_prev = k_cur
        k_cur = k_next

    return Inconclusive(trace=trace, couplings=k_cur,
                        reason="iteration budget exhausted before convergence "
                               "or saturation")


def _plateau_near(trace: GradientTrace, cfg: SolverConfig) -> bool:
    w = cfg.saturation_window
    if len(trace) < w:
        return False
    mean, drift = _window_stats(trace.grad_norm_sq, w)
    return mean > 0 and drift <= 2.0 * cfg.saturation_rel_tol * mean
