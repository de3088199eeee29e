"""Exact-diagonalization sources of quantum data.

Provides analytic Bell-pair correlators, ground/thermal states of small
Heisenberg-antiferromagnet (QHAF) and transverse-field Ising (TFIM)
lattices, the measurement-axis mapping onto datasets, and direct
Bell-operator expectations for cross-checks. Device-independent outputs
only: everything is emitted as moments of +-1 measurement outcomes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .scenario import (MeasurementScenario, QuantumDataset, ScenarioError,
                       ScenarioMismatch, canonicalize_feature)

ED_GROUND_CAP = 16
ED_THERMAL_CAP = 12

# Critical transverse field of the 2d TFIM (in units of J), used as the
# default operating point; overridable wherever it appears.
TFIM_GAMMA_C = 1.52219


class TooLarge(ScenarioError):
    pass


class NonConvergence(ScenarioError):
    pass


class NonPositiveTemperature(ScenarioError):
    pass


# ---------------------------------------------------------------------------
# lattices and Hamiltonians
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpinSystem:
    """A periodic chain or square lattice of S=1/2 spins.

    model is 'qhaf' (H = J sum S_i . S_j, antiferromagnetic for J > 0) or
    'tfim' (H = -J sum S^z_i S^z_j - Gamma sum S^x_i, ferromagnetic J > 0).
    Energies are in units of J.
    """

    n_sites: int
    lattice: str = "chain"
    model: str = "qhaf"
    j: float = 1.0
    gamma: float | None = None

    def __post_init__(self):
        if self.lattice not in ("chain", "square"):
            raise ScenarioError(f"unknown lattice {self.lattice!r}")
        if self.model not in ("qhaf", "tfim"):
            raise ScenarioError(f"unknown model {self.model!r}")
        if self.lattice == "square":
            side = round(math.sqrt(self.n_sites))
            if side * side != self.n_sites:
                raise ScenarioError("square lattice needs a square site count")
        if self.model == "tfim" and self.gamma is None:
            object.__setattr__(self, "gamma", TFIM_GAMMA_C)

    def bonds(self):
        """Deduplicated periodic nearest-neighbour bonds."""
        pairs = set()
        if self.lattice == "chain":
            for i in range(self.n_sites):
                j = (i + 1) % self.n_sites
                if i != j:
                    pairs.add(tuple(sorted((i, j))))
        else:
            side = round(math.sqrt(self.n_sites))
            for x in range(side):
                for y in range(side):
                    i = x * side + y
                    for dx, dy in ((1, 0), (0, 1)):
                        j = ((x + dx) % side) * side + (y + dy) % side
                        if i != j:
                            pairs.add(tuple(sorted((i, j))))
        return sorted(pairs)

    def distance(self, i: int, j: int):
        """Periodic graph distance between two sites."""
        if self.lattice == "chain":
            d = abs(i - j)
            return min(d, self.n_sites - d)
        side = round(math.sqrt(self.n_sites))
        xi, yi = divmod(i, side)
        xj, yj = divmod(j, side)
        dx = min(abs(xi - xj), side - abs(xi - xj))
        dy = min(abs(yi - yj), side - abs(yi - yj))
        return dx + dy


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _site_operator(n_sites: int, site: int, local: np.ndarray) -> sp.csr_matrix:
    op = sp.identity(1, dtype=complex, format="csr")
    for s in range(n_sites):
        block = sp.csr_matrix(local) if s == site else sp.identity(2, dtype=complex, format="csr")
        op = sp.kron(op, block, format="csr")
    return op


def pauli(n_sites: int, site: int, axis) -> sp.csr_matrix:
    """sigma along a named axis ('x','y','z') or a unit 3-vector, at one site."""
    if isinstance(axis, str):
        local = _PAULI[axis]
    else:
        ax = np.asarray(axis, dtype=float)
        local = ax[0] * _PAULI["x"] + ax[1] * _PAULI["y"] + ax[2] * _PAULI["z"]
    return _site_operator(n_sites, site, local)


def hamiltonian(system: SpinSystem) -> sp.csr_matrix:
    n = system.n_sites
    dim = 1 << n
    h = sp.csr_matrix((dim, dim), dtype=complex)
    if system.model == "qhaf":
        for i, j in system.bonds():
            for ax in "xyz":
                # S = sigma / 2
                h = h + 0.25 * system.j * (pauli(n, i, ax) @ pauli(n, j, ax))
    else:
        for i, j in system.bonds():
            h = h - 0.25 * system.j * (pauli(n, i, "z") @ pauli(n, j, "z"))
        for i in range(n):
            h = h - 0.5 * system.gamma * pauli(n, i, "x")
    return sp.csr_matrix(h)


# ---------------------------------------------------------------------------
# state handles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantumStateSpec:
    kind: str = "ground"             # 'ground' | 'thermal'
    temperature: float | None = None   # in J / k_B units, for 'thermal'

    def __post_init__(self):
        if self.kind not in ("ground", "thermal"):
            raise ScenarioError(f"unknown state kind {self.kind!r}")
        if self.kind == "thermal":
            if self.temperature is None or self.temperature <= 0:
                raise NonPositiveTemperature("thermal states need T > 0")


class StateHandle:
    """Either a pure ground state or a full thermal ensemble of a SpinSystem."""

    def __init__(self, system, *, psi=None, energy=None, sectors=None,
                 temperature=None):
        self.system = system
        self.psi = psi
        self.energy = energy
        self.sectors = sectors   # list of (basis indices, energies, vectors, sz)
        self.temperature = temperature
        if sectors is not None:
            all_e = np.concatenate([e for _, e, _, _ in sectors])
            shift = all_e.min()
            self._logz_shift = shift
            self._z = sum(np.exp(-(e - shift) / temperature).sum()
                          for _, e, _, _ in sectors)

    @property
    def dim(self):
        return 1 << self.system.n_sites

    def _weights(self, energies):
        return np.exp(-(energies - self._logz_shift) / self.temperature) / self._z

    def expect(self, op: sp.spmatrix) -> float:
        """<A> on the pure state or Tr(rho A) on the thermal ensemble."""
        if self.psi is not None:
            return float(np.real(np.vdot(self.psi, op @ self.psi)))
        total = 0.0
        for idx, energies, vectors, _ in self.sectors:
            w = self._weights(energies)
            u = np.zeros((self.dim, vectors.shape[1]), dtype=complex)
            u[idx] = vectors
            au = op @ u
            diag = np.real(np.einsum("in,in->n", np.conj(u), au))
            total += float(w @ diag)
        return total

    def collective_sz_moment(self, power: int = 2) -> float:
        """<(J_z)^power> using the diagonal structure of J_z."""
        if self.psi is not None:
            sz = _basis_sz(self.system.n_sites)
            return float(np.sum(np.abs(self.psi) ** 2 * sz ** power))
        total = 0.0
        for idx, energies, vectors, sz in self.sectors:
            w = self._weights(energies)
            if sz is not None:
                total += float(w.sum()) * sz ** power
            else:
                bsz = _basis_sz(self.system.n_sites)[idx]
                diag = (np.abs(vectors) ** 2 * (bsz ** power)[:, None]).sum(axis=0)
                total += float(w @ diag)
        return total


def _basis_sz(n_sites: int) -> np.ndarray:
    idx = np.arange(1 << n_sites, dtype=np.uint64)
    ups = np.zeros(idx.shape, dtype=np.int64)
    for s in range(n_sites):
        ups += ((idx >> np.uint64(s)) & np.uint64(1)).astype(np.int64)
    return ups - 0.5 * n_sites


def ed_solve(system: SpinSystem, spec: QuantumStateSpec) -> StateHandle:
    """Diagonalize the system: iterative for ground states, full spectrum
    (S_z-sector blocked where conserved) for thermal states."""
    n = system.n_sites
    if spec.kind == "ground":
        if n > ED_GROUND_CAP:
            raise TooLarge(f"{n} sites exceed the ground-state cap {ED_GROUND_CAP}")
        h = hamiltonian(system)
        if h.shape[0] <= 64:
            energies, vectors = np.linalg.eigh(h.toarray())
            return StateHandle(system, psi=vectors[:, 0], energy=float(energies[0]))
        try:
            energies, vectors = spla.eigsh(h, k=1, which="SA")
        except spla.ArpackNoConvergence as exc:
            raise NonConvergence(str(exc)) from exc
        return StateHandle(system, psi=vectors[:, 0], energy=float(energies[0]))

    if n > ED_THERMAL_CAP:
        raise TooLarge(f"{n} sites exceed the thermal cap {ED_THERMAL_CAP}")
    h = hamiltonian(system)
    sectors = []
    if system.model == "qhaf":
        bsz = _basis_sz(n)
        for sz in np.unique(bsz):
            idx = np.where(bsz == sz)[0]
            block = h[np.ix_(idx, idx)].toarray()
            energies, vectors = np.linalg.eigh(block)
            sectors.append((idx, energies, vectors, float(sz)))
    else:
        energies, vectors = np.linalg.eigh(h.toarray())
        sectors.append((np.arange(h.shape[0]), energies, vectors, None))
    return StateHandle(system, sectors=sectors, temperature=spec.temperature)


# ---------------------------------------------------------------------------
# measurement layers
# ---------------------------------------------------------------------------

def coplanar_axes(k: int, theta: float):
    """k unit vectors in the xy plane at angles a*theta, a = 0..k-1."""
    if k < 2:
        raise ScenarioError("need k >= 2 axes")
    return [(math.cos(a * theta), math.sin(a * theta), 0.0) for a in range(k)]


def tfim_axes(theta: float):
    """The two squeezed-state axes +-theta about x, in the xy plane."""
    return [(math.cos(theta), math.sin(theta), 0.0),
            (math.cos(theta), -math.sin(theta), 0.0)]


def bell_pair_data(theta: float) -> QuantumDataset:
    """Analytic singlet correlators in the (2,2,2) cross-pair geometry.

    Site 1 measures x and y; site 2 measures cos(theta) x +- sin(theta) y.
    Exact values, uncertainty 0.
    """
    axes = ((( 1.0, 0.0, 0.0), (0.0, 1.0, 0.0)),
            ((math.cos(theta), math.sin(theta), 0.0),
             (math.cos(theta), -math.sin(theta), 0.0)))
    scenario = MeasurementScenario(n_sites=2, n_settings=2, axes=axes)
    entries = (
        (canonicalize_feature([(0, 0), (1, 0)], scenario), -math.cos(theta), 0.0),
        (canonicalize_feature([(0, 1), (1, 1)], scenario), -math.cos(theta), 0.0),
        (canonicalize_feature([(0, 0), (1, 1)], scenario), -math.sin(theta), 0.0),
        (canonicalize_feature([(0, 1), (1, 0)], scenario), math.sin(theta), 0.0),
    )
    return QuantumDataset(scenario=scenario, entries=entries,
                          metadata=f"analytic Bell pair, theta={theta}")


def two_point_dataset(handle: StateHandle, axes, max_distance=None) -> QuantumDataset:
    """Single-site averages and two-point correlators for the given axes.

    ``axes`` is either a list of k unit 3-vectors shared by every site, or a
    per-site list of such lists (e.g. to express a frame rotation of one
    qubit). Pairs are restricted to periodic graph distance <= max_distance
    (None = all). Exact ED values, uncertainty 0.
    """
    system = handle.system
    n = system.n_sites
    if not np.isscalar(axes[0][0]):
        site_axes = [list(a) for a in axes]
        if len(site_axes) != n:
            raise ScenarioMismatch("per-site axes must cover every site")
    else:
        site_axes = [list(axes) for _ in range(n)]
    k = len(site_axes[0])
    for per_site in site_axes:
        if len(per_site) != k:
            raise ScenarioMismatch("every site needs the same setting count")
        for ax in per_site:
            if abs(np.linalg.norm(ax) - 1.0) > 1e-9:
                raise ScenarioMismatch(f"axis {ax} is not unit-norm")
    axes = site_axes
    scenario = MeasurementScenario(n_sites=n, n_settings=k,
                                   axes=tuple(tuple(tuple(float(x) for x in ax)
                                                    for ax in per_site)
                                              for per_site in site_axes))
    entries = []
    if handle.psi is not None:
        # one operator application per (site, axis); correlators are overlaps
        phi = {}
        for i in range(n):
            for a in range(k):
                phi[i, a] = pauli(n, i, axes[i][a]) @ handle.psi
        for i in range(n):
            for a in range(k):
                v = float(np.real(np.vdot(handle.psi, phi[i, a])))
                entries.append((canonicalize_feature([(i, a)], scenario), v, 0.0))
        for i in range(n):
            for j in range(i + 1, n):
                if max_distance is not None and system.distance(i, j) > max_distance:
                    continue
                for a in range(k):
                    for b in range(k):
                        v = float(np.real(np.vdot(phi[i, a], phi[j, b])))
                        entries.append(
                            (canonicalize_feature([(i, a), (j, b)], scenario), v, 0.0))
    else:
        for i in range(n):
            for a in range(k):
                v = handle.expect(pauli(n, i, axes[i][a]))
                entries.append((canonicalize_feature([(i, a)], scenario), v, 0.0))
        for i in range(n):
            for j in range(i + 1, n):
                if max_distance is not None and system.distance(i, j) > max_distance:
                    continue
                for a in range(k):
                    for b in range(k):
                        op = pauli(n, i, axes[i][a]) @ pauli(n, j, axes[j][b])
                        v = handle.expect(op)
                        entries.append(
                            (canonicalize_feature([(i, a), (j, b)], scenario), v, 0.0))
    meta = (f"{system.model} {system.lattice} N={n}, "
            + ("ground state" if handle.psi is not None
               else f"thermal T={handle.temperature}"))
    return QuantumDataset(scenario=scenario, entries=tuple(entries), metadata=meta)


def collective_variance(handle: StateHandle) -> float:
    """<J_z^2> / N of the state (J_z in spin-1/2 units)."""
    return handle.collective_sz_moment(2) / handle.system.n_sites


def susceptibility_to_variance(chi_z: float, temperature: float) -> float:
    """Invert chi_z = <J_z^2> / (k_B T N): returns the per-site variance."""
    if temperature <= 0:
        raise NonPositiveTemperature(f"T = {temperature} must be positive")
    return chi_z * temperature


def bell_operator_matrix(n_sites: int, axes, kind: str = "pbc") -> sp.csr_matrix:
    """Explicit sum-of-products Bell operator for the given axes.

    kind 'pbc': sum_a S_aa + sum_a S_{a,a+1} - S_{k-1,0};
    kind 'tura': -S_0 - S_1 + (1/2) S_00 + (1/2) S_11 - S_01,
    with S_ab = sum_{i != j} sigma_a^i sigma_b^j and S_a = sum_i sigma_a^i.
    """
    k = len(axes)
    dim = 1 << n_sites
    sigma = {(i, a): pauli(n_sites, i, axes[a])
             for i in range(n_sites) for a in range(k)}

    def s_ab(a, b):
        op = sp.csr_matrix((dim, dim), dtype=complex)
        for i in range(n_sites):
            for j in range(n_sites):
                if i != j:
                    op = op + sigma[i, a] @ sigma[j, b]
        return op

    if kind == "pbc":
        if k < 3:
            raise ScenarioMismatch("pbc operator needs k >= 3 axes")
        op = sp.csr_matrix((dim, dim), dtype=complex)
        for a in range(k):
            op = op + s_ab(a, a)
        for a in range(k - 1):
            op = op + s_ab(a, a + 1)
        op = op - s_ab(k - 1, 0)
        return sp.csr_matrix(op)
    if kind == "tura":
        if k != 2:
            raise ScenarioMismatch("tura operator needs exactly 2 axes")
        op = 0.5 * s_ab(0, 0) + 0.5 * s_ab(1, 1) - s_ab(0, 1)
        for i in range(n_sites):
            op = op - sigma[i, 0] - sigma[i, 1]
        return sp.csr_matrix(op)
    raise ScenarioMismatch(f"unknown Bell operator kind {kind!r}")


def bell_operator_expectation(handle: StateHandle, axes, kind: str = "pbc") -> float:
    """Direct expectation of the explicit Bell operator (no collective-spin
    shortcut), for cross-checking the closed-form identities."""
    op = bell_operator_matrix(handle.system.n_sites, axes, kind)
    return handle.expect(op)
