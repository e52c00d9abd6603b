import itertools

import numpy as np
from django.test import SimpleTestCase
from scipy.linalg import expm

from simulator.exceptions import ConfigError, TransitionError
from simulator.gate_fidelity import GatePhases
from simulator.protocols import (
    FockConfig,
    RegisterState,
    apply_collision,
    apply_pulse,
    epr_protocol,
    estimate_collisional_phase,
    estimate_scattering_length,
    fock_phase_evolution,
    ghz_protocol,
    ramsey_signal,
    run_protocol,
)
from simulator.trajectory import sigmoid_trajectory, static_trajectory
from simulator.two_particle import InteractionModel, collisional_phase_adiabatic


class PulseTests(SimpleTestCase):

    def test_half_pulse_phase(self):
        reg = apply_pulse(RegisterState.uniform(1), (0,), 0.5 * np.pi, 0.3)
        np.testing.assert_allclose(reg.amplitudes, np.array([1.0, np.exp(0.3j)]) / np.sqrt(2), atol=1e-15)

    def test_two_half_pulses_transfer(self):
        reg = RegisterState.uniform(1)
        reg = apply_pulse(apply_pulse(reg, (0,), 0.5 * np.pi), (0,), 0.5 * np.pi)
        self.assertAlmostEqual(reg.population(0, 'b'), 1.0, places=14)

    def test_pulses_preserve_norm(self):
        rng = np.random.default_rng(11)
        reg = RegisterState.uniform(4)
        for _ in range(20):
            atoms = rng.choice(4, size=2, replace=False)
            reg = apply_pulse(reg, atoms, rng.uniform(0, 2 * np.pi), rng.uniform(0, 2 * np.pi))
        self.assertAlmostEqual(reg.norm, 1.0, delta=1e-14)

    def test_missing_level(self):
        with self.assertRaises(TransitionError):
            apply_pulse(RegisterState.uniform(2), (0,), np.pi, transition='a-c')


class CollisionTests(SimpleTestCase):

    def setUp(self):
        self.plus = apply_pulse(RegisterState.uniform(4), range(4), 0.5 * np.pi)

    def test_no_phases_is_identity(self):
        reg = apply_collision(self.plus, (0, 1), GatePhases())
        np.testing.assert_array_equal(reg.amplitudes, self.plus.amplitudes)

    def test_pi_phase_entangles(self):
        reg = apply_collision(self.plus, (0, 1), GatePhases(ab=np.pi))
        self.assertAlmostEqual(reg.reduced_purity(0), 0.5, places=14)
        self.assertAlmostEqual(reg.amplitude('abaa'), -0.25, places=15)
        self.assertAlmostEqual(reg.amplitude('baaa'), 0.25, places=15)

    def test_collisions_are_diagonal(self):
        reg = apply_collision(self.plus, (2, 0), GatePhases(a=0.4, ab=1.3))
        for atom in range(4):
            self.assertAlmostEqual(reg.population(atom, 'a'), 0.5, places=14)

    def test_disjoint_collisions_commute(self):
        phases = GatePhases(a=0.2, b=-0.7, ab=1.1)
        first = apply_collision(apply_collision(self.plus, (0, 1), phases), (2, 3), phases)
        second = apply_collision(apply_collision(self.plus, (2, 3), phases), (0, 1), phases)
        np.testing.assert_allclose(first.amplitudes, second.amplitudes, atol=1e-15)

    def test_pair_needs_two_atoms(self):
        with self.assertRaises(ConfigError):
            apply_collision(self.plus, (1, 1), GatePhases())

    def test_register_size_limit(self):
        with self.assertRaises(ConfigError):
            RegisterState.uniform(13)


class RamseyTests(SimpleTestCase):

    def test_no_phase_returns_to_b(self):
        populations = ramsey_signal(0.0)
        self.assertAlmostEqual(populations[0]['a'], 0.0, places=14)

    def test_half_population_at_pi(self):
        self.assertAlmostEqual(ramsey_signal(np.pi)[0]['a'], 0.5, places=14)

    def test_population_formula(self):
        for phi in (0.3, 1.2, 2.5):
            self.assertAlmostEqual(ramsey_signal(phi)[0]['a'], (1 - np.cos(phi)) / 4, places=14)

    def test_common_axis_is_blind_to_the_sign(self):
        self.assertAlmostEqual(ramsey_signal(0.7)[0]['a'], ramsey_signal(-0.7)[0]['a'], places=15)

    def test_shifted_analysis_axis_resolves_the_sign(self):
        areas = (np.pi / 3, np.pi / 3)
        plus = ramsey_signal(0.5 * np.pi, areas, analysis_phase=0.5 * np.pi)[0]['a']
        minus = ramsey_signal(-0.5 * np.pi, areas, analysis_phase=0.5 * np.pi)[0]['a']
        self.assertAlmostEqual(abs(plus - minus), 0.1875, places=12)

    def test_phase_estimate_inverts_the_signal(self):
        for phi in (0.3, 1.2, 2.5, -1.0):
            self.assertAlmostEqual(estimate_collisional_phase(ramsey_signal(phi)[0]['a']), abs(phi), places=7)

    def test_estimate_rejects_impossible_population(self):
        with self.assertRaises(ValueError):
            estimate_collisional_phase(0.8)

    def test_scattering_length_round_trip(self):
        moving = sigmoid_trajectory(5.0, 5.0, 4.0, samples=2001)
        resting = static_trajectory(moving.tau, samples=2001, base_position=4.0)
        phi = collisional_phase_adiabatic(moving, resting, InteractionModel(0.15))
        self.assertAlmostEqual(estimate_scattering_length(phi, moving, resting) / 0.15, 1.0, places=12)


class EntanglementTests(SimpleTestCase):

    def test_epr_state_at_pi(self):
        reg, fidelity = epr_protocol(np.pi)
        self.assertAlmostEqual(fidelity, 1.0, delta=1e-12)
        self.assertAlmostEqual(reg.amplitude('ab'), -1 / np.sqrt(2), places=14)
        self.assertAlmostEqual(reg.amplitude('ba'), 1 / np.sqrt(2), places=14)

    def test_epr_without_phase_is_a_product(self):
        self.assertAlmostEqual(epr_protocol(0.0)[1], 0.5, delta=1e-12)

    def test_epr_fidelity_peaks_at_pi(self):
        for eps in (-0.6, -0.2, 0.1, 0.5):
            fidelity = epr_protocol(np.pi + eps)[1]
            self.assertAlmostEqual(fidelity, (1 + np.cos(eps / 2)) / 2, places=12)
            self.assertLess(fidelity, 1.0)

    def test_ghz_for_every_register_size(self):
        for atoms in range(2, 9):
            reg, fidelity = ghz_protocol(atoms)
            self.assertAlmostEqual(fidelity, 1.0, delta=1e-12, msg=f'{atoms} atoms')
            self.assertAlmostEqual(reg.norm, 1.0, delta=1e-13)

    def test_ghz_amplitudes(self):
        reg, _ = ghz_protocol(3)
        self.assertAlmostEqual(reg.amplitude('aaa'), 1 / np.sqrt(2), places=14)
        self.assertAlmostEqual(reg.amplitude('bbb'), -1 / np.sqrt(2), places=14)

    def test_ghz_with_one_faulty_collision(self):
        eps = 0.4
        faulty = {1: GatePhases(ac=np.pi), 2: GatePhases(ac=np.pi + eps)}
        _, fidelity = ghz_protocol(3, faulty)
        self.assertAlmostEqual(fidelity, (1 + np.cos(eps / 2)) ** 2 / 4, places=12)

    def test_ghz_collision_order_does_not_matter(self):
        forward, f1 = ghz_protocol(5)
        backward, f2 = ghz_protocol(5, order=[4, 3, 2, 1])
        np.testing.assert_allclose(forward.amplitudes, backward.amplitudes, atol=1e-14)
        self.assertAlmostEqual(f1, f2, places=14)

    def test_ghz_collision_fidelity_multiplies(self):
        _, fidelity = ghz_protocol(4, collision_fidelity=0.99)
        self.assertAlmostEqual(fidelity, 0.99 ** 3, places=12)

    def test_ghz_register_limit(self):
        with self.assertRaises(ConfigError):
            ghz_protocol(13)


class FockPhaseTests(SimpleTestCase):

    def setUp(self):
        self.coefficients = {
            'omega_a': 0.7, 'omega_b': -0.3, 'u_aa': 0.11, 'u_bb': 0.05,
            'u_ab': {(0, 0): 0.2, (1, 1): 0.2, (0, 1): 0.03},
        }

    def test_empty_lattice_has_no_phase(self):
        self.assertEqual(fock_phase_evolution(FockConfig([(0, 0), (0, 0)], **self.coefficients), 3.0), 0.0)

    def test_pair_interaction(self):
        cfg = FockConfig([(2, 0)], u_aa=0.4)
        self.assertAlmostEqual(fock_phase_evolution(cfg, 2.5), -0.4 * 2 * 2.5, places=14)

    def test_additive_in_time(self):
        cfg = FockConfig([(2, 1), (1, 2)], **self.coefficients)
        total = fock_phase_evolution(cfg, 3.0)
        self.assertAlmostEqual(total, fock_phase_evolution(cfg, 1.0) + fock_phase_evolution(cfg, 2.0), places=12)

    def test_occupations_are_conserved(self):
        cfg = FockConfig([(2, 1), (0, 3)], **self.coefficients)
        evolved, phase = cfg.evolve(1.5)
        self.assertEqual(evolved.occupations, cfg.occupations)
        self.assertAlmostEqual(phase, fock_phase_evolution(cfg, 1.5), places=14)

    def test_time_dependent_coefficients(self):
        ramp = FockConfig([(1, 0)], omega_a=lambda t: 1.0 + 0.5 * t)
        sampled = FockConfig([(1, 0)], omega_a=([0.0, 10.0], [1.0, 6.0]))
        self.assertAlmostEqual(fock_phase_evolution(ramp, 4.0), -8.0, places=10)
        self.assertAlmostEqual(fock_phase_evolution(sampled, 4.0), -8.0, places=10)

    def test_negative_occupation(self):
        with self.assertRaises(ConfigError):
            FockConfig([(-1, 0)])

    def test_matches_matrix_exponential(self):
        levels = 3
        lowering = np.diag(np.sqrt(np.arange(1, levels, dtype=float)), k=1)
        identity = np.eye(levels)

        def mode(operator, index):
            factors = [identity] * 4
            factors[index] = operator
            result = factors[0]
            for factor in factors[1:]:
                result = np.kron(result, factor)
            return result

        number = lowering.T @ lowering
        pair = lowering.T @ lowering.T @ lowering @ lowering
        c = self.coefficients
        # mode order: a on site 0, b on site 0, a on site 1, b on site 1
        hamiltonian = (
            c['omega_a'] * (mode(number, 0) + mode(number, 2))
            + c['omega_b'] * (mode(number, 1) + mode(number, 3))
            + c['u_aa'] * (mode(pair, 0) + mode(pair, 2))
            + c['u_bb'] * (mode(pair, 1) + mode(pair, 3))
        )
        for (i, j), value in c['u_ab'].items():
            hamiltonian = hamiltonian + value * mode(number, 2 * i) @ mode(number, 2 * j + 1)

        t = 1.7
        propagator = expm(-1j * hamiltonian * t)
        for occupation in itertools.product(range(levels), repeat=4):
            index = np.ravel_multi_index(occupation, (levels,) * 4)
            cfg = FockConfig([occupation[:2], occupation[2:]], **c)
            self.assertAlmostEqual(
                propagator[index, index], np.exp(1j * fock_phase_evolution(cfg, t)), places=10,
            )


class ProtocolScriptTests(SimpleTestCase):

    def test_builtin_epr(self):
        record = run_protocol({'builtin': 'epr'})
        self.assertAlmostEqual(record['fidelity'], 1.0, delta=1e-12)
        self.assertEqual(record['atoms'], 2)

    def test_large_ghz_omits_amplitude_table(self):
        record = run_protocol({'builtin': 'ghz', 'atoms': 7})
        self.assertNotIn('amplitudes', record)
        self.assertAlmostEqual(record['fidelity'], 1.0, delta=1e-12)

    def test_explicit_steps(self):
        script = {
            'atoms': 2,
            'target': 'epr',
            'steps': [
                {'op': 'pulse', 'area': 0.5 * np.pi},
                {'op': 'collision', 'pair': [0, 1], 'phases': {'ab': np.pi}},
                {'op': 'pulse', 'atoms': [1], 'area': 0.5 * np.pi, 'phase': np.pi},
            ],
        }
        record = run_protocol(script)
        self.assertAlmostEqual(record['fidelity'], 1.0, delta=1e-12)
        self.assertEqual({row['state'] for row in record['amplitudes']}, {'ab', 'ba'})

    def test_builtin_ramsey(self):
        record = run_protocol({'builtin': 'ramsey', 'phi_ab': 1.2})
        self.assertAlmostEqual(record['estimated_phase'], 1.2, places=7)

    def test_unknown_step(self):
        with self.assertRaises(ConfigError) as ctx:
            run_protocol({'atoms': 2, 'steps': [{'op': 'measure'}]})
        self.assertEqual(ctx.exception.errors[0][0], 'protocol.steps[0].op')

    def test_unknown_builtin(self):
        with self.assertRaises(ConfigError):
            run_protocol({'builtin': 'teleport'})
