"""Quantum data generation: ED states, measurement layers, Bell operators."""

import math

import numpy as np
import pytest

from bellforge import (SpinSystem, QuantumStateSpec, bell_operator_expectation,
                       bell_pair_data, collective_variance, coplanar_axes,
                       ed_solve, susceptibility_to_variance, two_point_dataset)
from bellforge.oracle import (TFIM_GAMMA_C, NonPositiveTemperature, TooLarge,
                              bell_operator_matrix, pauli, tfim_axes)
from bellforge.pbc import witness_beta
from bellforge.scenario import ScenarioError, ScenarioMismatch

SQ2 = math.sqrt(2.0)


def _lookup(dataset):
    return {f: v for f, v, _ in dataset.entries}


class TestSpinSystem:
    def test_chain_bonds(self):
        assert SpinSystem(n_sites=4).bonds() == [(0, 1), (0, 3), (1, 2), (2, 3)]

    def test_two_site_chain_single_bond(self):
        assert SpinSystem(n_sites=2).bonds() == [(0, 1)]

    def test_square_bond_count(self):
        assert len(SpinSystem(n_sites=16, lattice="square").bonds()) == 32

    def test_square_needs_square_count(self):
        with pytest.raises(ScenarioError):
            SpinSystem(n_sites=6, lattice="square")

    def test_tfim_defaults_to_critical_gamma(self):
        sys_ = SpinSystem(n_sites=4, lattice="square", model="tfim")
        assert sys_.gamma == TFIM_GAMMA_C

    def test_chain_distance_periodic(self):
        s = SpinSystem(n_sites=6)
        assert s.distance(0, 5) == 1
        assert s.distance(0, 3) == 3


class TestEdSolve:
    def test_two_site_singlet_energy(self):
        h = ed_solve(SpinSystem(n_sites=2), QuantumStateSpec("ground"))
        assert h.energy == pytest.approx(-0.75, abs=1e-12)

    def test_four_site_chain_energy(self):
        h = ed_solve(SpinSystem(n_sites=4), QuantumStateSpec("ground"))
        assert h.energy == pytest.approx(-2.0, abs=1e-10)

    def test_tfim_paramagnetic_limit(self):
        sys_ = SpinSystem(n_sites=4, lattice="square", model="tfim",
                          gamma=500.0)
        h = ed_solve(sys_, QuantumStateSpec("ground"))
        mx = np.mean([h.expect(pauli(4, i, (1.0, 0.0, 0.0)))
                      for i in range(4)])
        assert mx == pytest.approx(1.0, abs=1e-3)

    def test_ground_cap(self):
        with pytest.raises(TooLarge):
            ed_solve(SpinSystem(n_sites=18), QuantumStateSpec("ground"))

    def test_thermal_cap(self):
        with pytest.raises(TooLarge):
            ed_solve(SpinSystem(n_sites=14), QuantumStateSpec("thermal", 1.0))

    def test_thermal_needs_positive_t(self):
        with pytest.raises(NonPositiveTemperature):
            QuantumStateSpec("thermal", 0.0)

    def test_thermal_matches_ground_at_low_t(self):
        sys_ = SpinSystem(n_sites=4)
        g = ed_solve(sys_, QuantumStateSpec("ground"))
        t = ed_solve(sys_, QuantumStateSpec("thermal", 0.01))
        op = pauli(4, 0, (0, 0, 1.0)) @ pauli(4, 1, (0, 0, 1.0))
        assert t.expect(op) == pytest.approx(g.expect(op), abs=1e-6)


class TestMeasurementLayers:
    def test_bell_pair_optimal_angle(self):
        d = bell_pair_data(math.pi / 4)
        assert np.allclose(d.values, [-1 / SQ2, -1 / SQ2, -1 / SQ2, 1 / SQ2])
        assert np.all(d.uncertainties == 0)

    def test_bell_pair_theta_zero(self):
        assert np.allclose(bell_pair_data(0.0).values, [-1, -1, 0, 0])

    def test_bell_pair_theta_half_pi(self):
        assert np.allclose(bell_pair_data(math.pi / 2).values, [0, 0, -1, 1])

    def test_coplanar_axes_angles(self):
        axes = coplanar_axes(4, math.pi / 4)
        angles = [math.atan2(ax[1], ax[0]) for ax in axes]
        assert angles == pytest.approx([0, math.pi / 4, math.pi / 2,
                                        3 * math.pi / 4])

    def test_coplanar_axes_unit_norm(self):
        for ax in coplanar_axes(5, math.pi / 5):
            assert np.linalg.norm(ax) == pytest.approx(1.0)

    def test_tfim_axes_symmetric_about_x(self):
        a, b = tfim_axes(0.3)
        assert a[0] == b[0]
        assert a[1] == -b[1]


class TestTwoPointDataset:
    def test_singlet_k3_pattern(self):
        # Singlet correlators C_ab = -cos((a-b) theta) at theta = pi/3.
        handle = ed_solve(SpinSystem(n_sites=2), QuantumStateSpec("ground"))
        d = two_point_dataset(handle, coplanar_axes(3, math.pi / 3))
        c = _lookup(d)
        from bellforge import canonicalize_feature
        def corr(a, b):
            return c[canonicalize_feature([(0, a), (1, b)], d.scenario)]
        for a in range(3):
            for b in range(3):
                assert corr(a, b) == pytest.approx(
                    -math.cos((a - b) * math.pi / 3), abs=1e-10)

    def test_singlet_k3_rotated_frame_pattern(self):
        # After a pi rotation of qubit 0 about x (its axes flip in y) the
        # pattern becomes C_ab = -cos((a+b) theta): at theta = pi/3 that is
        # C00 = -C12 = -1 and C11 = C02 = C22 = -C01 = 1/2.
        handle = ed_solve(SpinSystem(n_sites=2), QuantumStateSpec("ground"))
        theta = math.pi / 3
        rotated = [(ax[0], -ax[1], ax[2]) for ax in coplanar_axes(3, theta)]
        d = two_point_dataset(handle, [rotated, coplanar_axes(3, theta)])
        c = _lookup(d)
        from bellforge import canonicalize_feature
        def corr(a, b):
            return c[canonicalize_feature([(0, a), (1, b)], d.scenario)]
        assert corr(0, 0) == pytest.approx(-1.0, abs=1e-10)
        assert corr(1, 2) == pytest.approx(1.0, abs=1e-10)
        assert corr(1, 1) == pytest.approx(0.5, abs=1e-10)
        assert corr(0, 2) == pytest.approx(0.5, abs=1e-10)
        assert corr(2, 2) == pytest.approx(0.5, abs=1e-10)
        assert corr(0, 1) == pytest.approx(-0.5, abs=1e-10)

    def test_values_in_range(self):
        handle = ed_solve(SpinSystem(n_sites=4), QuantumStateSpec("ground"))
        d = two_point_dataset(handle, coplanar_axes(4, math.pi / 4))
        assert np.all(np.abs(d.values) <= 1 + 1e-9)

    def test_su2_invariant_correlation_form(self):
        handle = ed_solve(SpinSystem(n_sites=4), QuantumStateSpec("ground"))
        theta = math.pi / 4
        d = two_point_dataset(handle, coplanar_axes(4, theta))
        c = _lookup(d)
        from bellforge import canonicalize_feature
        sxsx = {}
        for i in range(4):
            for j in range(i + 1, 4):
                op = pauli(4, i, (1.0, 0, 0)) @ pauli(4, j, (1.0, 0, 0))
                sxsx[i, j] = handle.expect(op) / 4.0
        for (i, j), v in sxsx.items():
            for a in range(4):
                for b in range(4):
                    f = canonicalize_feature([(i, a), (j, b)], d.scenario)
                    expected = 4 * math.cos((a - b) * theta) * v
                    assert c[f] == pytest.approx(expected, abs=1e-10)

    def test_max_distance_filters_pairs(self):
        handle = ed_solve(SpinSystem(n_sites=6), QuantumStateSpec("ground"))
        d = two_point_dataset(handle, coplanar_axes(3, math.pi / 3),
                              max_distance=1)
        pair_feats = [f for f in d.features if f.degree == 2]
        # 6 nearest-neighbour pairs on the periodic chain, 9 setting combos.
        assert len(pair_feats) == 6 * 9

    def test_non_unit_axis_rejected(self):
        handle = ed_solve(SpinSystem(n_sites=2), QuantumStateSpec("ground"))
        with pytest.raises(ScenarioMismatch):
            two_point_dataset(handle, [(2.0, 0, 0), (0, 1.0, 0)])

    def test_thermal_dataset_matches_pure_at_low_t(self):
        sys_ = SpinSystem(n_sites=4)
        axes = coplanar_axes(3, math.pi / 3)
        dg = two_point_dataset(ed_solve(sys_, QuantumStateSpec("ground")), axes)
        dt = two_point_dataset(ed_solve(sys_, QuantumStateSpec("thermal", 0.01)),
                               axes)
        assert np.allclose(dg.values, dt.values, atol=1e-6)


class TestCollectiveVariance:
    def test_singlet_is_zero(self):
        for n in (2, 4, 6):
            h = ed_solve(SpinSystem(n_sites=n), QuantumStateSpec("ground"))
            assert collective_variance(h) == pytest.approx(0.0, abs=1e-10)

    def test_infinite_temperature_quarter(self):
        h = ed_solve(SpinSystem(n_sites=4), QuantumStateSpec("thermal", 1e4))
        assert collective_variance(h) == pytest.approx(0.25, abs=1e-3)

    def test_thermal_monotone_in_t(self):
        sys_ = SpinSystem(n_sites=8)
        grid = [0.1, 0.3, 0.6, 1.0, 2.0]
        values = [collective_variance(
            ed_solve(sys_, QuantumStateSpec("thermal", t))) for t in grid]
        assert np.all(np.diff(values) >= -1e-12)


class TestSusceptibility:
    def test_multiplication(self):
        assert susceptibility_to_variance(0.1, 0.3) == pytest.approx(0.03)

    def test_round_trip_with_thermal_state(self):
        t = 0.7
        h = ed_solve(SpinSystem(n_sites=4), QuantumStateSpec("thermal", t))
        var = collective_variance(h)
        chi = var / t
        assert susceptibility_to_variance(chi, t) == pytest.approx(var,
                                                                   abs=1e-12)

    def test_curie_law(self):
        # A free spin: chi = 1/(4T) in our spin-1/2 units, variance 1/4.
        for t in (0.5, 1.0, 2.0):
            assert susceptibility_to_variance(1 / (4 * t), t) == pytest.approx(
                0.25)

    def test_non_positive_temperature(self):
        with pytest.raises(NonPositiveTemperature):
            susceptibility_to_variance(0.1, 0.0)


class TestBellOperator:
    def test_singlet_k3_saturates_quantum_floor(self):
        h = ed_solve(SpinSystem(n_sites=2), QuantumStateSpec("ground"))
        value = bell_operator_expectation(h, coplanar_axes(3, math.pi / 3))
        assert value == pytest.approx(-9.0, abs=1e-9)

    def test_qhaf4_k4_saturates_quantum_floor(self):
        h = ed_solve(SpinSystem(n_sites=4), QuantumStateSpec("ground"))
        value = bell_operator_expectation(h, coplanar_axes(4, math.pi / 4))
        assert value == pytest.approx(-16 * (1 + 1 / SQ2), abs=1e-9)

    def test_product_state_respects_classical_bound(self):
        sys_ = SpinSystem(n_sites=4, lattice="square", model="tfim",
                          gamma=1e4)
        h = ed_solve(sys_, QuantumStateSpec("ground"))
        value = bell_operator_expectation(h, coplanar_axes(3, math.pi / 3))
        assert value >= -2 * 4 * 2 - 1e-6

    def test_tura_operator_arity(self):
        with pytest.raises(ScenarioMismatch):
            bell_operator_matrix(2, coplanar_axes(3, 0.5), kind="tura")

    def test_pbc_operator_arity(self):
        with pytest.raises(ScenarioMismatch):
            bell_operator_matrix(2, tfim_axes(0.5), kind="pbc")

    def test_su2_collective_identity(self):
        # <B>(pi/k) = 4k(1+cos(pi/k)) <Jz^2> - Nk cos(pi/k) - Nk on
        # SU(2)-invariant states.
        k = 4
        for n, spec in ((4, QuantumStateSpec("ground")),
                        (4, QuantumStateSpec("thermal", 0.5))):
            h = ed_solve(SpinSystem(n_sites=n), spec)
            direct = bell_operator_expectation(h, coplanar_axes(k, math.pi / k))
            jz2 = h.collective_sz_moment(2)
            c = math.cos(math.pi / k)
            assert direct == pytest.approx(
                4 * k * (1 + c) * jz2 - n * k * c - n * k, abs=1e-9)

    def test_witness_chain_consistency(self):
        # A state below beta_4 in collective variance indeed violates the
        # k=4 inequality when measured directly.
        h = ed_solve(SpinSystem(n_sites=4), QuantumStateSpec("ground"))
        assert collective_variance(h) < witness_beta(4)
        value = bell_operator_expectation(h, coplanar_axes(4, math.pi / 4))
        assert value < -2 * 4 * 3
