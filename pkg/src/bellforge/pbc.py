"""Closed-form toolkit for the many-body multi-setting Bell inequality.

Implements the symmetric k-setting inequality with classical bound
2N(k-1), its proof ingredients (the tridiagonal-with-twist matrix M' and
its spectrum), the coplanar-axes angle functions, the collective-variance
witness thresholds beta_k, and the maximal quantum violation
B_q = N k [1 + cos(pi/k)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distill import BellInequality, _exhaustive_minimum, _symmetric_qp
from .lvmodel import TooLarge
from .scenario import (Feature, MeasurementScenario, ScenarioError,
                       canonicalize_feature)

ENTANGLEMENT_BOUND = 1.0 / 6.0


class SingularAngle(ScenarioError):
    pass


class NegativeVariance(ScenarioError):
    pass


@dataclass(frozen=True)
class PbcSpec:
    n_sites: int
    n_settings: int
    theta: float | None = None   # defaults to pi/k, the optimal angle

    def __post_init__(self):
        if self.n_sites < 1:
            raise ScenarioError("n_sites must be >= 1")
        if self.n_settings < 3:
            raise ScenarioError("the inequality needs k >= 3 settings")
        if self.theta is None:
            object.__setattr__(self, "theta", math.pi / self.n_settings)


def _pbc_setting_coefficients(k: int):
    """Coefficient of each unordered setting pair {a,b} in the inequality.

    The collective terms are S_ab = sum_{i != j} sigma_a^i sigma_b^j; on
    canonical i<j features the diagonal pairs pick up a factor 2 and each
    off-diagonal pair contributes both orderings.
    """
    coeffs = {}
    for a in range(k):
        coeffs[(a, a)] = 1.0
    for a in range(k - 1):
        coeffs[(a, a + 1)] = 1.0
    coeffs[(0, k - 1)] = coeffs.get((0, k - 1), 0.0) - 1.0
    return coeffs


def pbc_inequality(spec: PbcSpec) -> BellInequality:
    """Expand the k-setting inequality into canonical pairwise features.

    The classical bound B_c = 2N(k-1) is attached as proven (certified)
    rather than recomputed.
    """
    n, k = spec.n_sites, spec.n_settings
    scenario = MeasurementScenario(n_sites=n, n_settings=k)
    setting_coeffs = _pbc_setting_coefficients(k)
    features = []
    coefficients = []
    for i in range(n):
        for j in range(i + 1, n):
            for (a, b), c in sorted(setting_coeffs.items()):
                if a == b:
                    features.append(canonicalize_feature([(i, a), (j, a)], scenario))
                    coefficients.append(2.0 * c)
                else:
                    features.append(canonicalize_feature([(i, a), (j, b)], scenario))
                    coefficients.append(c)
                    features.append(canonicalize_feature([(i, b), (j, a)], scenario))
                    coefficients.append(c)
    return BellInequality(
        scenario=scenario, features=tuple(features),
        coefficients=np.array(coefficients),
        classical_bound=2.0 * n * (k - 1), bound_certified=True,
        bound_method="analytic",
        note=f"k-setting chained inequality, theta = {spec.theta}")


def pbc_bruteforce_bound(spec: PbcSpec) -> float:
    """Exhaustive minimum of the inequality functional over all 2^(Nk) configs."""
    if spec.n_sites * spec.n_settings > 24:
        raise TooLarge("brute force limited to N*k <= 24 variables")
    ineq = pbc_inequality(spec)
    emin, _ = _exhaustive_minimum(ineq.scenario, ineq.features, ineq.coefficients)
    return emin


def pbc_symmetric_bound(spec: PbcSpec):
    """Certified classical bound via the deterministic-strategy reduction.

    Works directly on the (setting pair -> coefficient) structure, so the
    cost is polynomial in N with no pairwise feature expansion; suitable
    for thousands of sites. Returns (B_c, certified).
    """
    setting_coeffs = _pbc_setting_coefficients(spec.n_settings)
    cmat = {key: (2.0 * c if key[0] == key[1] else c)
            for key, c in setting_coeffs.items()}
    emin, _, _, certified = _symmetric_qp(spec.n_sites, spec.n_settings,
                                          {}, cmat)
    return -emin, certified


def mprime_matrix(k: int) -> np.ndarray:
    """The k x k coupling matrix of the collective quadratic form.

    Nearest-neighbour chain of settings with a sign-twisted closing bond.
    """
    m = np.zeros((k, k))
    for a in range(k - 1):
        m[a, a + 1] = m[a + 1, a] = 1.0
    m[k - 1, 0] -= 1.0
    m[0, k - 1] -= 1.0
    return m


def mprime_spectrum(k: int, verify: bool = True) -> np.ndarray:
    """Eigenvalues 2 cos[pi(2q+1)/k], q = 0..k-1, of the twisted chain matrix."""
    if k < 2:
        raise ScenarioError("k must be >= 2")
    eigs = np.array([2.0 * math.cos(math.pi * (2 * q + 1) / k)
                     for q in range(k)])
    if verify:
        numeric = np.linalg.eigvalsh(mprime_matrix(k))
        if not np.allclose(np.sort(eigs), numeric, atol=1e-10):
            raise ScenarioError("analytic spectrum disagrees with eigensolve")
    return eigs


@dataclass(frozen=True)
class AngleFunctions:
    f_x: float
    f_y: float
    f_xy: float
    g: float

    @property
    def f(self) -> float:
        return self.f_x + self.f_y


def angle_functions(k: int, theta: float, limit: bool = False) -> AngleFunctions:
    """Coefficients of the Bell operator in collective-spin form.

    <B>(theta) = F_x <Jx^2> + F_y <Jy^2> + F_xy <{Jx, Jy}> - N (G + k).
    At theta = 0 or pi the 1/sin(theta) terms are singular; with
    ``limit=True`` the analytic limits are returned instead of raising.
    """
    s = math.sin(theta)
    g = (k - 1) * math.cos(theta) - math.cos((k - 1) * theta)
    if abs(s) < 1e-12:
        if not limit:
            raise SingularAngle(
                f"theta = {theta} has sin(theta) = 0; pass limit=True for the "
                "series-expansion limit values")
        at_zero = abs(math.remainder(theta, 2 * math.pi)) < 1e-9
        ratio = (4 * k - 3) if at_zero else 1.0
        f_x = 2 * k + 2 * (k - 1) * math.cos(theta) \
            - 4 * math.cos((k - 1) * theta) + 1 + ratio
        f_y = 2 * k + 2 * (k - 1) * math.cos(theta) - 1 - ratio
        return AngleFunctions(f_x=f_x, f_y=f_y, f_xy=0.0, g=g)
    chord = (math.sin((2 * k - 1) * theta) + math.sin(2 * (k - 1) * theta)) / s
    f_x = 2 * k + 2 * (k - 1) * math.cos(theta) \
        - 4 * math.cos((k - 1) * theta) + 1 + chord
    f_y = 2 * k + 2 * (k - 1) * math.cos(theta) - 1 - chord
    f_xy = -2 * math.sin((k - 1) * theta) + (
        1 + math.cos(theta) - math.cos((2 * k - 1) * theta)
        - math.cos(2 * (k - 1) * theta)) / s
    return AngleFunctions(f_x=f_x, f_y=f_y, f_xy=f_xy, g=g)


def witness_beta(k: int) -> float:
    """Collective-variance threshold below which the inequality is violated."""
    if k < 3:
        raise ScenarioError("witness defined for k >= 3")
    c = math.cos(math.pi / k)
    return (2.0 - k * (1.0 - c)) / (4.0 * k * (1.0 + c))


def max_quantum_violation(n_sites: int, k: int) -> float:
    """-B_q = -N k [1 + cos(pi/k)], the quantum-mechanical floor."""
    if k < 3:
        raise ScenarioError("defined for k >= 3")
    return -n_sites * k * (1.0 + math.cos(math.pi / k))


def witness_verdict(jz2_per_site: float, k: int) -> str:
    """Classify a per-site collective variance: bell_nonlocal, entangled_only
    or none. Assumes the underlying state is U(1)/SU(2) invariant."""
    if jz2_per_site < 0:
        raise NegativeVariance(f"variance {jz2_per_site} < 0")
    if jz2_per_site < witness_beta(k):
        return "bell_nonlocal"
    if jz2_per_site < ENTANGLEMENT_BOUND:
        return "entangled_only"
    return "none"


def bell_expectation_u1(k: int, theta: float, jx2_per_site: float,
                        n_sites: int) -> float:
    """Bell-operator expectation on a U(1)-symmetric state.

    <B>(theta) = F(theta) <Jx^2> - N (G(theta) + k).
    """
    fn = angle_functions(k, theta)
    return fn.f * jx2_per_site * n_sites - n_sites * (fn.g + k)
