import itertools

import numpy as np
from django.test import SimpleTestCase, tag
from scipy.optimize import minimize

from simulator.exceptions import ChannelError
from simulator.gate_fidelity import (
    BRANCHES,
    GateChannel,
    GatePhases,
    ideal_gate,
    min_fidelity,
    minimize_output_fidelity,
    occupied_pairs,
    output_fidelity,
    simulate_channel,
    state_from_angles,
    thermal_motional_state,
)
from simulator.trajectory import sigmoid_trajectory, static_trajectory
from simulator.two_particle import InteractionModel


def _simplex_grid(steps=60):
    points = [
        (i, j, k, steps - i - j - k)
        for i, j, k in itertools.product(range(steps + 1), repeat=3)
        if i + j + k <= steps
    ]
    return np.array(points, dtype=float) / steps


SIMPLEX_GRID = _simplex_grid()


def _simplex_minimum(matrix):
    """Brute-force minimum of x^T M x over a grid of the probability simplex"""
    values = np.einsum('ki,ij,kj->k', SIMPLEX_GRID, matrix, SIMPLEX_GRID)
    return float(np.min(np.real(values)))


class IdealGateTests(SimpleTestCase):

    def test_identity_without_phases(self):
        np.testing.assert_allclose(ideal_gate(GatePhases()), np.eye(4))

    def test_collisional_phase_flips_ab_only(self):
        np.testing.assert_allclose(ideal_gate(GatePhases(ab=np.pi)), np.diag([1, -1, 1, 1]), atol=1e-15)

    def test_factorizes_without_collisional_phase(self):
        phases = GatePhases(a=0.3, b=-1.1)
        single = np.diag(np.exp(1j * np.array([0.3, -1.1])))
        np.testing.assert_allclose(ideal_gate(phases), np.kron(single, single), atol=1e-15)

    def test_collision_lookup_is_symmetric(self):
        phases = GatePhases(ab=0.2, ac=0.5, bc=0.7)
        self.assertEqual(phases.collision('c', 'a'), phases.collision('a', 'c'))
        self.assertEqual(phases.collision('a', 'a'), 0.0)
        self.assertAlmostEqual(phases.branch_phase('ab'), 0.2)


class ThermalStateTests(SimpleTestCase):

    def test_zero_temperature(self):
        np.testing.assert_array_equal(thermal_motional_state(0.0, basis_size=4), [1, 0, 0, 0])

    def test_boltzmann_ratio(self):
        populations = thermal_motional_state(0.2)
        self.assertAlmostEqual(populations.sum(), 1.0, places=14)
        self.assertAlmostEqual(populations[1] / populations[0], np.exp(-5.0), places=14)

    def test_negative_temperature(self):
        with self.assertRaises(ValueError):
            thermal_motional_state(-0.1)

    def test_cutoff_keeps_dominant_pairs(self):
        weights = occupied_pairs(thermal_motional_state(0.2), cutoff=1e-6)
        self.assertEqual(set(weights), {(0, 0), (0, 1), (1, 0), (1, 1), (0, 2), (2, 0)})
        self.assertAlmostEqual(sum(weights.values()), 1.0, places=14)


class SyntheticChannelTests(SimpleTestCase):

    def test_ideal_channel(self):
        channel = GateChannel.from_amplitudes({branch: 1.0 for branch in BRANCHES})
        report = min_fidelity(channel)
        self.assertAlmostEqual(report.fidelity, 1.0, delta=1e-12)
        self.assertAlmostEqual(report.average_fidelity, 1.0, delta=1e-12)
        self.assertTrue(report.converged)

    def test_single_branch_phase_error(self):
        eps = 0.3
        amplitudes = {branch: 1.0 for branch in BRANCHES}
        amplitudes['ab'] = np.exp(1j * eps)
        report = min_fidelity(GateChannel.from_amplitudes(amplitudes))
        self.assertAlmostEqual(report.fidelity, np.cos(eps / 2) ** 2, delta=1e-6)
        self.assertAlmostEqual(abs(report.minimizer[1]) ** 2, 0.5, delta=1e-3)

    def test_fidelity_bounds(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            amplitudes = dict(zip(BRANCHES, rng.uniform(0.8, 1.0, 4) * np.exp(1j * rng.uniform(-0.5, 0.5, 4))))
            report = min_fidelity(GateChannel.from_amplitudes(amplitudes), starts=20)
            self.assertLessEqual(report.fidelity, report.average_fidelity + 1e-12)
            self.assertLessEqual(report.average_fidelity, 1.0 + 1e-12)

    def test_single_atom_phase_convention_does_not_matter(self):
        eps, delta_a, delta_b = 0.4, 0.9, -2.1
        plain = {branch: 1.0 for branch in BRANCHES}
        plain['bb'] = np.exp(1j * eps)
        shifted_phases = GatePhases(a=delta_a, b=delta_b)
        shifted = {
            branch: plain[branch] * np.exp(1j * shifted_phases.branch_phase(branch))
            for branch in BRANCHES
        }
        reference = min_fidelity(GateChannel.from_amplitudes(plain)).fidelity
        moved = min_fidelity(GateChannel.from_amplitudes(shifted, shifted_phases)).fidelity
        self.assertAlmostEqual(reference, moved, delta=1e-10)

    def test_reextracted_phases_absorb_a_constant_error(self):
        amplitudes = {branch: 1.0 for branch in BRANCHES}
        amplitudes['ab'] = np.exp(0.5j)
        channel = GateChannel.from_amplitudes(amplitudes)
        self.assertLess(min_fidelity(channel).fidelity, 0.99)
        self.assertAlmostEqual(min_fidelity(channel, reextract_phases=True).fidelity, 1.0, delta=1e-12)

    def test_missing_branch(self):
        channel = GateChannel.from_amplitudes({branch: 1.0 for branch in BRANCHES})
        with self.assertRaises(ChannelError):
            GateChannel({'aa': channel.branches['aa']}, GatePhases())

    def test_weights_need_simulated_pairs(self):
        channel = GateChannel.from_amplitudes({branch: 1.0 for branch in BRANCHES})
        with self.assertRaises(ChannelError):
            min_fidelity(channel, {(0, 0): 0.9, (1, 1): 0.1})

    def test_report_record(self):
        record = min_fidelity(GateChannel.from_amplitudes({branch: 1.0 for branch in BRANCHES})).as_dict()
        self.assertEqual(set(record), {'F', 'F_avg', 'argmin_state', 'leakage', 'norm_loss', 'phases', 'converged'})
        self.assertEqual(len(record['argmin_state']), 4)

    def test_lossy_branch_minimum_is_exact(self):
        lossy = 0.9 * np.exp(0.2j)
        amplitudes = {branch: 1.0 for branch in BRANCHES}
        amplitudes['ab'] = lossy
        report = min_fidelity(GateChannel.from_amplitudes(amplitudes))
        # distance from the origin to the segment [1, lossy] in the complex plane
        step = lossy - 1.0
        t = float(np.clip(-np.real(step) / abs(step) ** 2, 0.0, 1.0))
        self.assertAlmostEqual(report.fidelity, abs(1.0 + t * step) ** 2, delta=1e-10)
        self.assertTrue(report.converged)
        self.assertAlmostEqual(report.norm_loss['ab'], 0.19, places=12)
        self.assertAlmostEqual(report.norm_loss['aa'], 0.0, places=12)

    @tag('slow')
    def test_diagonal_phase_errors_match_analytic_worst_case(self):
        for eps in np.linspace(0.05, 3.1, 25):
            for branch in BRANCHES:
                amplitudes = {other: 1.0 for other in BRANCHES}
                amplitudes[branch] = np.exp(1j * eps)
                report = min_fidelity(GateChannel.from_amplitudes(amplitudes))
                self.assertAlmostEqual(report.fidelity, np.cos(eps / 2) ** 2, delta=1e-4)

    @tag('slow')
    def test_optimizer_matches_simplex_grid(self):
        rng = np.random.default_rng(2024)
        constraint = {'type': 'eq', 'fun': lambda w: np.sum(w) - 1.0}
        for _ in range(100):
            amplitudes = rng.uniform(0.9, 1.0, 4) * np.exp(1j * rng.uniform(-np.pi, np.pi, 4))
            matrix = np.outer(np.conj(amplitudes), amplitudes).T
            value, state, converged = minimize_output_fidelity(matrix, starts=20)
            grid = _simplex_minimum(matrix)
            # |sum w_b a_b|^2 is convex on the simplex: polish the best grid point
            start = SIMPLEX_GRID[np.argmin(np.abs(SIMPLEX_GRID @ amplitudes))]
            polished = minimize(lambda w: abs(w @ amplitudes) ** 2, start, method='SLSQP',
                                bounds=[(0.0, 1.0)] * 4, constraints=[constraint],
                                options={'ftol': 1e-15, 'maxiter': 500})
            self.assertTrue(converged)
            self.assertAlmostEqual(value, output_fidelity(state, matrix), delta=1e-12)
            self.assertLessEqual(value, grid + 1e-9)
            self.assertLessEqual(value, polished.fun + 1e-9)
            self.assertAlmostEqual(value, polished.fun, delta=1e-4)


class StateParameterizationTests(SimpleTestCase):

    def test_states_are_normalized(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            state = state_from_angles(rng.uniform(0.0, 2.0 * np.pi, 6))
            self.assertAlmostEqual(np.linalg.norm(state), 1.0, places=14)


class SimulatedChannelTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.moving = sigmoid_trajectory(12.0, 4.0, 3.0, samples=2001)
        cls.resting = static_trajectory(cls.moving.tau, samples=2001)

    def test_no_interaction_is_a_perfect_gate(self):
        channel = simulate_channel(self.moving, self.resting, InteractionModel(0.0), 3.0, basis_size=4)
        report = min_fidelity(channel)
        self.assertAlmostEqual(report.fidelity, 1.0, delta=1e-6)
        self.assertAlmostEqual(channel.phases.ab, 0.0, delta=1e-8)
        self.assertAlmostEqual(channel.phases.b, 0.0, delta=1e-8)

    def test_swapping_trajectories_swaps_single_atom_phases(self):
        forward = simulate_channel(self.moving, self.resting, InteractionModel(0.0), 3.0, basis_size=4)
        swapped = simulate_channel(self.resting, self.moving, InteractionModel(0.0), 3.0, basis_size=4)
        self.assertAlmostEqual(forward.phases.a, swapped.phases.b, delta=1e-8)
        self.assertAlmostEqual(forward.phases.b, swapped.phases.a, delta=1e-8)
