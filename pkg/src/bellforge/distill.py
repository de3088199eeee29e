"""From asymptotic gradients to certified Bell inequalities.

The inequality convention throughout is sum_r coeff_r <f_r> >= -B_c, with
violation meaning a strictly more negative quantum value. The classical
bound is minus the ground-state energy of the effective Hamiltonian built
from the coefficients.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lvmodel import ENUMERATION_CAP, LvModel, TooLarge
from .mc import _csr_arrays, _metropolis_chain
from .scenario import (Feature, MeasurementScenario, QuantumDataset,
                       ScenarioError)
from .solver import GradientTrace, WindowTooShort

DEFAULT_DENOMINATORS = (1, 2, 3, 4)
SYMMETRIC_MAX_STRATEGIES = 16    # 2^k strategies for the face enumeration
SYMMETRIC_COMPOSITION_CAP = 500_000   # occupation vectors for direct search
_CERT_TOL = 1e-7


class NoCleanPattern(ScenarioError):
    pass


class NotSymmetric(ScenarioError):
    pass


class MissingFeature(ScenarioError):
    pass


@dataclass
class BellInequality:
    """A distilled inequality sum_r coeff_r <f_r> >= -B_c."""

    scenario: MeasurementScenario
    features: tuple
    coefficients: np.ndarray
    classical_bound: float | None = None        # B_c (the inequality bound is -B_c)
    bound_certified: bool = False
    bound_method: str = ""
    quantum_value: float | None = None
    quantum_uncertainty: float | None = None
    violated: bool | None = None
    fractions: tuple | None = None              # exact snapped coefficients, if any
    note: str = ""

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if len(self.features) != self.coefficients.shape[0]:
            raise ScenarioError("coefficients must align with features")
        if not np.any(self.coefficients):
            raise ScenarioError("coefficients must not all vanish")


def distill_gradient(trace: GradientTrace, window: int) -> np.ndarray:
    """Average the gradient components over the last `window` iterations."""
    if window < 1 or len(trace) < window:
        raise WindowTooShort(
            f"trace has {len(trace)} iterations, window is {window}")
    return np.mean(trace.gradients[-window:], axis=0)


@dataclass
class RationalizedCoefficients:
    values: np.ndarray
    fractions: tuple | None
    rationalized: bool
    max_snap_error: float = 0.0


def rationalize(g, denominators=DEFAULT_DENOMINATORS,
                rel_tol: float = 0.05) -> RationalizedCoefficients:
    """Normalize by the largest magnitude and snap entries to small fractions.

    Entries within rel_tol of zero become zero. If some entry refuses to
    snap within rel_tol, the raw normalized vector is returned tagged
    unrationalized (the bound can still be computed on it). An all-zero
    input raises NoCleanPattern.
    """
    g = np.asarray(g, dtype=float)
    scale = np.max(np.abs(g))
    if scale <= 0 or not np.isfinite(scale):
        raise NoCleanPattern("gradient vector is identically zero")
    normalized = g / scale
    snapped = []
    worst = 0.0
    for x in normalized:
        if abs(x) <= rel_tol:
            snapped.append(Fraction(0))
            worst = max(worst, abs(x))
            continue
        best = None
        for q in denominators:
            cand = Fraction(round(x * q), q)
            err = abs(x - float(cand))
            if best is None or err < best[0]:
                best = (err, cand)
        worst = max(worst, best[0])
        snapped.append(best[1])
    if worst > rel_tol:
        return RationalizedCoefficients(values=normalized, fractions=None,
                                        rationalized=False, max_snap_error=worst)
    return RationalizedCoefficients(
        values=np.array([float(f) for f in snapped]),
        fractions=tuple(snapped), rationalized=True, max_snap_error=worst)


# ---------------------------------------------------------------------------
# classical bound
# ---------------------------------------------------------------------------

def classical_bound(scenario: MeasurementScenario, features, coefficients,
                    method: str = "exhaustive", seed: int = 0):
    """Minimize sum_r coeff_r f_r(sigma) over all spin configurations.

    Returns (B_c, witness_configuration, certified). The inequality bound
    is -B_c = min. 'exhaustive' enumerates all configurations (certified,
    <= 24 variables); 'symmetric' certifies permutation-invariant
    inequalities in time polynomial in N; 'anneal' is a stochastic search
    whose result is flagged non-certified.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    if method == "exhaustive":
        emin, config = _exhaustive_minimum(scenario, features, coefficients)
        return -emin, config, True
    if method == "symmetric":
        emin, config, certified = _symmetric_minimum(scenario, features,
                                                     coefficients)
        return -emin, config, certified
    if method == "anneal":
        emin, config = _anneal_minimum(scenario, features, coefficients, seed)
        return -emin, config, False
    raise ScenarioError(f"unknown bound method {method!r}")


def _exhaustive_minimum(scenario, features, coefficients):
    model = LvModel(scenario, features, -coefficients)  # energy = sum coeff f
    if model.n_variables > ENUMERATION_CAP:
        raise TooLarge(f"{model.n_variables} variables exceed exhaustive cap")
    best = np.inf
    best_idx = 0
    offset = 0
    for fvals in model._chunks():
        energies = fvals @ coefficients
        i = int(np.argmin(energies))
        if energies[i] < best:
            best = float(energies[i])
            best_idx = offset + i
        offset += fvals.shape[0]
    bits = (best_idx >> np.arange(model.n_variables)) & 1
    config = (1 - 2 * bits).astype(np.int8)
    return best, config


def _symmetric_structure(scenario, features, coefficients):
    """Extract (alpha_a, c_{ab}) from a site-permutation-invariant inequality.

    Requires full coverage: every site carries every field term present, and
    every unordered site pair carries every setting-pair term present.
    """
    k = scenario.n_settings
    n = scenario.n_sites
    alpha = {}
    cmat = {}
    counts_field = {}
    counts_pair = {}
    for f, coef in zip(features, coefficients):
        if f.degree == 1:
            (i, a), = f.terms
            if a in alpha and abs(alpha[a] - coef) > 1e-12:
                raise NotSymmetric(f"field coefficient for setting {a} varies")
            alpha[a] = coef
            counts_field[a] = counts_field.get(a, 0) + 1
        elif f.degree == 2:
            (i, a), (j, b) = f.terms
            if i == j:
                raise NotSymmetric("same-site pair term breaks the strategy"
                                   " reduction")
            # feature is [(i,a),(j,b)] with i<j; symmetry ties (a,b) to (b,a)
            key = (a, b) if a <= b else (b, a)
            if key in cmat and abs(cmat[key] - coef) > 1e-12:
                raise NotSymmetric(f"pair coefficient for settings {key} varies")
            cmat[key] = coef
            counts_pair[key] = counts_pair.get(key, 0) + 1
        else:
            raise NotSymmetric("symmetric reduction covers degree <= 2 only")
    for a, cnt in counts_field.items():
        if cnt != n:
            raise NotSymmetric(f"field on setting {a} covers {cnt}/{n} sites")
    npairs = n * (n - 1) // 2
    for (a, b), cnt in counts_pair.items():
        expect = npairs if a == b else 2 * npairs
        if cnt != expect:
            raise NotSymmetric(
                f"pair ({a},{b}) covers {cnt}/{expect} site pairs")
    return alpha, cmat


def _symmetric_minimum(scenario, features, coefficients):
    """Exact minimum via the 2^k deterministic-strategy count reduction."""
    alpha_map, cmat = _symmetric_structure(scenario, features, coefficients)
    best_val, best_n, strategies, certified = _symmetric_qp(
        scenario.n_sites, scenario.n_settings, alpha_map, cmat)
    config = _counts_to_config(best_n, strategies, scenario)
    return best_val, config, certified


def _symmetric_qp(n_sites, k, alpha_map, cmat):
    """Minimize a site-permutation-invariant inequality over LV strategies.

    The objective becomes a quadratic n^T A n + b.n over integer occupation
    numbers n_s >= 0 summing to N, one per deterministic single-site
    strategy. A continuous lower bound is obtained by enumerating
    stationary points on every face of the simplex; integer candidates give
    an upper bound. When the two meet, the bound is certified exact.

    ``cmat`` maps unordered setting pairs (a <= b) to the coefficient each
    canonical i<j pair feature carries. Returns (best value, occupation
    vector, strategy table, certified flag).
    """
    m = 1 << k
    n_compositions = math.comb(n_sites + m - 1, m - 1)
    if (m > SYMMETRIC_MAX_STRATEGIES
            and n_compositions > SYMMETRIC_COMPOSITION_CAP):
        raise TooLarge(f"2^{k} strategies exceed the symmetric-method cap")
    alpha = np.array([alpha_map.get(a, 0.0) for a in range(k)])
    Q = np.zeros((k, k))
    diag_sum = 0.0
    for (a, b), c in cmat.items():
        if a == b:
            Q[a, a] += c / 2.0
            diag_sum += c
        else:
            Q[a, b] += c / 2.0
            Q[b, a] += c / 2.0
    strategies = np.array(list(itertools.product([1, -1], repeat=k)), dtype=float)
    S = strategies.T                                    # k x m
    A = S.T @ Q @ S                                     # m x m
    lin = np.empty(m)
    for s in range(m):
        sv = strategies[s]
        pair_term = sum(cmat.get((a, b), 0.0) * sv[a] * sv[b]
                        for a in range(k) for b in range(a + 1, k))
        lin[s] = alpha @ sv - pair_term - diag_sum / 2.0

    def value(n):
        return float(n @ A @ n + lin @ n)

    # When the discrete feasible set itself is small, search it outright:
    # exhaustive over every occupation vector, hence certified.
    if n_compositions <= SYMMETRIC_COMPOSITION_CAP:
        best_val = np.inf
        best_n = None
        for chunk in _composition_chunks(n_sites, m):
            values = np.einsum("ij,jk,ik->i", chunk, A, chunk) + chunk @ lin
            i = int(np.argmin(values))
            if values[i] < best_val:
                best_val = float(values[i])
                best_n = chunk[i]
        return best_val, best_n, strategies, True

    # Continuous lower bound: stationary points on every simplex face,
    # solved in stacks grouped by support size.
    lower = np.inf
    stationary_points = []
    for t in range(1, m + 1):
        idx = np.array(list(itertools.combinations(range(m), t)))
        c = idx.shape[0]
        kkt = np.zeros((c, t + 1, t + 1))
        kkt[:, :t, :t] = 2.0 * A[idx[:, :, None], idx[:, None, :]]
        kkt[:, :t, t] = 1.0
        kkt[:, t, :t] = 1.0
        rhs = np.zeros((c, t + 1))
        rhs[:, :t] = -lin[idx]
        rhs[:, t] = n_sites
        try:
            sol = np.linalg.solve(kkt, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            sol = np.full((c, t + 1), np.nan)
            for i in range(c):
                try:
                    sol[i] = np.linalg.solve(kkt[i], rhs[i])
                except np.linalg.LinAlgError:
                    cand, *_ = np.linalg.lstsq(kkt[i], rhs[i], rcond=None)
                    if np.allclose(kkt[i] @ cand, rhs[i],
                                   atol=1e-7 * max(1.0, n_sites)):
                        sol[i] = cand
        nt = sol[:, :t]
        ok = np.all(np.isfinite(nt), axis=1) & np.all(
            nt >= -1e-9 * n_sites, axis=1)
        if not np.any(ok):
            continue
        n_full = np.zeros((int(ok.sum()), m))
        np.put_along_axis(n_full, idx[ok], np.clip(nt[ok], 0.0, None), axis=1)
        n_full *= n_sites / n_full.sum(axis=1, keepdims=True)
        values = np.einsum("ij,jk,ik->i", n_full, A, n_full) + n_full @ lin
        order = np.argsort(values)[:8]
        stationary_points.extend(n_full[order])
        lower = min(lower, float(values.min()))

    # Integer candidates: vertices, exact two-strategy splits, and local
    # search around rounded stationary points.
    best_val = np.inf
    best_n = None
    for s in range(m):
        n_full = np.zeros(m)
        n_full[s] = n_sites
        v = value(n_full)
        if v < best_val:
            best_val, best_n = v, n_full
    for s in range(m):
        for t in range(s + 1, m):
            # n = (N - x) e_s + x e_t; quadratic in x, minimized exactly.
            a2 = A[s, s] + A[t, t] - 2 * A[s, t]
            b1 = (2 * n_sites * (A[s, t] - A[s, s]) + lin[t] - lin[s])
            cands = {0, n_sites}
            if abs(a2) > 1e-15:
                x_star = -b1 / (2 * a2)
                for x in (int(np.floor(x_star)), int(np.ceil(x_star))):
                    if 0 <= x <= n_sites:
                        cands.add(x)
            for x in cands:
                n_full = np.zeros(m)
                n_full[s] = n_sites - x
                n_full[t] = x
                v = value(n_full)
                if v < best_val:
                    best_val, best_n = v, n_full
    seen = set()
    for pt in sorted(stationary_points, key=value)[:64]:
        n_int = _round_to_sum(pt, n_sites)
        key = tuple(int(x) for x in n_int)
        if key in seen:
            continue
        seen.add(key)
        n_int, v = _greedy_descent(n_int, A, lin)
        if v < best_val:
            best_val, best_n = v, n_int

    certified = best_val <= lower + _CERT_TOL * max(1.0, abs(lower))
    return best_val, best_n, strategies, certified


def _composition_chunks(total, parts, chunk_size=4096):
    """Yield arrays of occupation vectors (compositions of total into parts)."""
    buffer = []

    def recurse(prefix, remaining, left):
        if left == 1:
            buffer.append(prefix + [remaining])
            return
        for first in range(remaining + 1):
            recurse(prefix + [first], remaining - first, left - 1)

    recurse([], total, parts)
    for start in range(0, len(buffer), chunk_size):
        yield np.array(buffer[start:start + chunk_size], dtype=float)


def _round_to_sum(x, total):
    base = np.floor(x).astype(int)
    remainder = int(round(total - base.sum()))
    order = np.argsort(-(x - base))
    out = base.copy()
    for i in range(remainder):
        out[order[i % len(x)]] += 1
    return out.astype(float)


def _greedy_descent(n, A, lin):
    """Steepest single-unit moves n -> n - e_s + e_t until no move helps.

    The move cost is evaluated in closed form for all (s, t) pairs at once:
    delta = 2(An)_t - 2(An)_s + A_ss + A_tt - 2A_st + lin_t - lin_s.
    """
    n = n.copy()
    diag = np.diag(A)
    v = float(n @ A @ n + lin @ n)
    while True:
        an = A @ n
        gain = 2.0 * an + diag + lin
        loss = 2.0 * an - diag + lin
        delta = gain[None, :] - loss[:, None] - 2.0 * A
        delta[n <= 0, :] = np.inf
        np.fill_diagonal(delta, np.inf)
        s, t = np.unravel_index(np.argmin(delta), delta.shape)
        if delta[s, t] >= -1e-12:
            return n, v
        n[s] -= 1
        n[t] += 1
        v += float(delta[s, t])


def _counts_to_config(n_counts, strategies, scenario):
    config = np.empty(scenario.n_variables, dtype=np.int8)
    site = 0
    for s, cnt in enumerate(n_counts):
        for _ in range(int(round(cnt))):
            config[site * scenario.n_settings:(site + 1) * scenario.n_settings] = \
                strategies[s].astype(np.int8)
            site += 1
    return config


def _anneal_minimum(scenario, features, coefficients, seed,
                    n_restarts: int = 8, n_stages: int = 40,
                    sweeps_per_stage: int = 50):
    """Simulated annealing with geometric cooling; upper bound on the minimum."""
    model = LvModel(scenario, features, -coefficients)
    feat_slots, feat_ptr, adj_feats, adj_ptr = _csr_arrays(model)
    betas = np.geomspace(0.05, 20.0, n_stages)
    seeds = np.random.SeedSequence(seed).generate_state(n_restarts * (n_stages + 1))
    best = np.inf
    best_config = None
    si = 0
    for restart in range(n_restarts):
        rng = np.random.default_rng(seeds[si]); si += 1
        spins = (2 * rng.integers(0, 2, model.n_variables) - 1).astype(np.int8)
        for beta in betas:
            _metropolis_chain(spins, -beta * coefficients, feat_slots, feat_ptr,
                              adj_feats, adj_ptr, sweeps_per_stage, 0,
                              int(seeds[si])); si += 1
        v = float(model.feature_values(spins) @ coefficients)
        if v < best:
            best = v
            best_config = spins.copy()
    return best, best_config


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def quantum_value(ineq: BellInequality, dataset: QuantumDataset,
                  n_sigma: float = 3.0):
    """Evaluate sum_r coeff_r <f_r>_Q and decide violation.

    Returns (value, uncertainty, violated). Violation requires the value
    plus n_sigma uncertainties to stay below -B_c.
    """
    lookup = {f: (v, s) for f, v, s in dataset.entries}
    value = 0.0
    var = 0.0
    for f, coef in zip(ineq.features, ineq.coefficients):
        if f not in lookup:
            raise MissingFeature(f"dataset lacks feature {f}")
        v, s = lookup[f]
        value += coef * v
        var += (coef * s) ** 2
    unc = float(np.sqrt(var))
    if ineq.classical_bound is None:
        raise ScenarioError("inequality has no classical bound yet")
    violated = bool(value + n_sigma * unc < -ineq.classical_bound)
    return float(value), unc, violated


def frustration_check(ineq: BellInequality) -> bool:
    """True iff the coefficient terms cannot all be minimized at once."""
    emin, _ = _exhaustive_minimum(ineq.scenario, ineq.features,
                                  ineq.coefficients)
    unfrustrated = -float(np.sum(np.abs(ineq.coefficients)))
    return emin > unfrustrated + 1e-12
