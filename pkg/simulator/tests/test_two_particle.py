import numpy as np
from django.test import SimpleTestCase, tag
from scipy import constants

from simulator.exceptions import ConfigError, TrajectoryError
from simulator.single_particle import single_particle_propagator
from simulator.trajectory import sigmoid_trajectory, static_trajectory
from simulator.two_particle import (
    InteractionModel,
    TwoParticleHamiltonian,
    calibration_ratio,
    collisional_phase_adiabatic,
    collisional_phase_dressed,
    contact_coupling,
    contact_matrix_elements,
    dressed_ground_shift,
    effective_1d_coupling,
    energy_shift,
    evolve_two_particle,
    gaussian_overlap,
    pair_ground_shift,
    regime_report,
    truncated_pair_shift,
    two_particle_rows,
)
from simulator.units import UnitSystem

RB87_SCATTERING_LENGTH = 5.1e-9


def _wrapped(angle):
    return float(np.angle(np.exp(1j * angle)))


class CouplingTests(SimpleTestCase):

    def test_vanishes_without_scattering(self):
        self.assertEqual(effective_1d_coupling(0.0, 1.0), 0.0)

    def test_si_value_matches_transverse_average(self):
        units = UnitSystem.rubidium87(2 * np.pi * 1e5)
        omega_perp = 2 * np.pi * 1e5
        g = effective_1d_coupling(RB87_SCATTERING_LENGTH, omega_perp, mass=units.mass, hbar=constants.hbar)
        expected = 2.0 * constants.hbar * omega_perp * RB87_SCATTERING_LENGTH
        self.assertAlmostEqual(g / expected, 1.0, places=12)

    def test_linear_in_scattering_length(self):
        self.assertAlmostEqual(effective_1d_coupling(0.3, 2.0), 3.0 * effective_1d_coupling(0.1, 2.0), places=14)

    def test_rejects_flat_transverse_trap(self):
        with self.assertRaises(ValueError):
            effective_1d_coupling(0.1, 0.0)

    def test_rejects_gain(self):
        with self.assertRaises(ConfigError) as ctx:
            InteractionModel(0.1 + 0.01j)
        self.assertEqual(ctx.exception.errors[0][0], 'scattering_length')

    def test_loss_factor(self):
        model = InteractionModel.with_loss(0.1, -0.05)
        self.assertTrue(model.lossy)
        self.assertAlmostEqual(complex(model.g1d), 0.2 * (1 - 0.05j))
        self.assertFalse(InteractionModel(0.1).lossy)


class ContactElementTests(SimpleTestCase):

    def test_ground_overlap_of_separated_wells(self):
        d = 1.5
        tensor = contact_matrix_elements(0.0, d, 1.0, 1.0, 4)
        self.assertAlmostEqual(tensor[0, 0, 0, 0], np.exp(-d ** 2 / 2) / np.sqrt(2 * np.pi), places=14)
        self.assertAlmostEqual(tensor[0, 0, 0, 0], float(gaussian_overlap(0.0, d, 1.0, 1.0)), places=14)

    def test_first_excited_overlap(self):
        tensor = contact_matrix_elements(0.0, 0.0, 1.0, 1.0, 4)
        self.assertAlmostEqual(tensor[1, 0, 1, 0], 0.5 / np.sqrt(2 * np.pi), places=14)

    def test_exchange_symmetry(self):
        tensor = contact_matrix_elements(0.2, 1.1, 1.0, 0.8, 5)
        np.testing.assert_allclose(tensor, tensor.transpose(2, 3, 0, 1), atol=1e-14, rtol=0)


class AdiabaticPhaseTests(SimpleTestCase):

    def test_separated_traps_energy_shift(self):
        a = static_trajectory(5.0, samples=101)
        b = static_trajectory(5.0, samples=101, base_position=10.0)
        shift = energy_shift(a, b, InteractionModel(0.1), 0.0)
        self.assertAlmostEqual(shift, 0.2 * np.exp(-50.0) / np.sqrt(2 * np.pi), places=20)

    def test_overlapping_traps_energy_shift(self):
        a = static_trajectory(5.0, samples=101)
        shift = energy_shift(a, a, InteractionModel(0.1), 0.0)
        self.assertAlmostEqual(shift, np.sqrt(2 / np.pi) * 0.1, places=14)

    def test_sign_follows_scattering_length(self):
        a = static_trajectory(5.0, samples=101)
        repulsive = collisional_phase_adiabatic(a, a, InteractionModel(0.1))
        attractive = collisional_phase_adiabatic(a, a, InteractionModel(-0.1))
        self.assertAlmostEqual(repulsive, -10.0 * np.sqrt(2 / np.pi) * 0.1, places=12)
        self.assertAlmostEqual(attractive, -repulsive, places=14)

    def test_never_overlapping_traps(self):
        a = static_trajectory(5.0, samples=101)
        b = static_trajectory(5.0, samples=101, base_position=50.0)
        self.assertEqual(collisional_phase_adiabatic(a, b, InteractionModel(0.1)), 0.0)

    def test_windows_must_match(self):
        with self.assertRaises(TrajectoryError):
            collisional_phase_adiabatic(static_trajectory(5.0), static_trajectory(6.0), InteractionModel(0.1))

    def test_sample_doubling_converges(self):
        interaction = InteractionModel(0.15)
        moving = sigmoid_trajectory(30.0, 20.0, 10.0)
        resting = static_trajectory(moving.tau, base_position=10.0)
        coarse = collisional_phase_adiabatic(moving, resting, interaction)
        fine = collisional_phase_adiabatic(moving.resampled(16001), resting.resampled(16001), interaction)
        self.assertLess(abs(coarse - fine) / abs(fine), 1e-8)

    def test_regime_report_at_rest(self):
        a = static_trajectory(5.0, samples=101)
        report = regime_report(a, a, InteractionModel(0.1))
        self.assertEqual(report['velocity_over_oscillator'], 0.0)
        self.assertEqual(report['collision_velocity_over_oscillator'], 0.0)
        self.assertAlmostEqual(report['interaction_over_trap'], np.sqrt(2 / np.pi) * 0.1, places=14)


class TwoParticleEvolutionTests(SimpleTestCase):

    def setUp(self):
        self.moving = sigmoid_trajectory(3.0, 3.0, 3.0, samples=2001)
        self.resting = static_trajectory(self.moving.tau, samples=2001, base_position=3.0)

    def test_hamiltonian_is_hermitian(self):
        hamiltonian = TwoParticleHamiltonian(self.moving, self.resting, InteractionModel(0.15), 4)
        for t in (-4.0, 0.0, 2.5):
            h = hamiltonian.matrix(t)
            np.testing.assert_allclose(h, h.conj().T, atol=1e-13)

    def test_no_interaction_gives_product_evolution(self):
        n = 6
        evolution = evolve_two_particle(self.moving, self.resting, InteractionModel(0.0), n)
        u1 = single_particle_propagator(self.moving, n)
        u2 = single_particle_propagator(self.resting, n)
        self.assertLess(abs(evolution.phase), 1e-8)
        np.testing.assert_allclose(evolution.state.amplitudes, np.outer(u1[:, 0], u2[:, 0]), atol=1e-8)

    def test_weak_interaction_phase_is_linear(self):
        full = evolve_two_particle(self.moving, self.resting, InteractionModel(0.01), 6).phase
        half = evolve_two_particle(self.moving, self.resting, InteractionModel(0.005), 6).phase
        self.assertLess(full, 0.0)
        self.assertAlmostEqual(full / half, 2.0, delta=0.02)

    def test_loss_only_removes_norm(self):
        trap = static_trajectory(3.0, samples=121)
        evolution = evolve_two_particle(trap, trap, InteractionModel.with_loss(0.1, -0.5), 4, trace=True)
        norms = np.sum(np.abs(evolution.history['states']) ** 2, axis=(1, 2))
        self.assertGreater(evolution.norm_loss, 0.01)
        self.assertTrue(np.all(np.diff(norms) <= 1e-12))
        rows = two_particle_rows(evolution)
        self.assertEqual(len(rows), trap.samples)
        self.assertAlmostEqual(rows[-1]['norm'], 1.0 - evolution.norm_loss, places=10)

    def test_small_basis_flags_truncation(self):
        kick = sigmoid_trajectory(0.5, 1.0, 3.0, samples=2001)
        rest = static_trajectory(kick.tau, samples=2001, base_position=3.0)
        with self.assertLogs('simulator.two_particle', 'WARNING'):
            evolution = evolve_two_particle(kick, rest, InteractionModel(0.1), 2)
        self.assertTrue(evolution.truncation_warning)

    def test_rejects_pair_outside_basis(self):
        with self.assertRaises(ValueError):
            evolve_two_particle(self.moving, self.resting, InteractionModel(0.1), 3, initial_pairs=[(3, 0)])


class ContactCalibrationTests(SimpleTestCase):

    def test_weak_contact_pair_level(self):
        for g in (0.01, -0.01):
            first = g / np.sqrt(2 * np.pi)
            self.assertAlmostEqual(pair_ground_shift(g), first - np.log(2) * first ** 2, delta=5e-7)

    def test_hard_core_limit(self):
        self.assertGreater(pair_ground_shift(1e6), 0.999)
        self.assertLess(pair_ground_shift(1e6), 1.0)
        self.assertEqual(pair_ground_shift(0.0), 0.0)

    def test_bound_pair_level(self):
        self.assertLess(pair_ground_shift(-2.0), -0.5)

    def test_calibrated_basis_reproduces_pair_level(self):
        for g in (0.3, -0.3):
            ratio = calibration_ratio(g, 6)
            self.assertAlmostEqual(truncated_pair_shift(g * ratio, 6), pair_ground_shift(g), delta=1e-10)

    def test_truncated_level_lies_above(self):
        self.assertGreater(truncated_pair_shift(0.3, 6), pair_ground_shift(0.3))
        self.assertLess(calibration_ratio(0.3, 4), calibration_ratio(0.3, 8))
        self.assertLess(calibration_ratio(0.3, 8), 1.0)
        self.assertGreater(calibration_ratio(-0.3, 8), 1.0)

    def test_uncalibrated_contact_is_bare(self):
        self.assertEqual(contact_coupling(InteractionModel(0.15, calibrated=False), 6), 0.3)
        calibrated = contact_coupling(InteractionModel.with_loss(0.15, -0.05), 6)
        self.assertTrue(0.0 < calibrated.real < 0.3)
        self.assertAlmostEqual(calibrated.imag / calibrated.real, -0.05, places=12)

    def test_dressed_level_of_coincident_traps(self):
        trap = static_trajectory(5.0, samples=101)
        shift = dressed_ground_shift(trap, trap, InteractionModel(0.15), 0.0, 6)
        self.assertAlmostEqual(shift, pair_ground_shift(0.3), delta=1e-10)
        phase = collisional_phase_dressed(trap, trap, InteractionModel(0.15), 6)
        self.assertAlmostEqual(phase, -10.0 * pair_ground_shift(0.3), delta=1e-8)


@tag('slow')
class AdiabaticCollisionTests(SimpleTestCase):

    def setUp(self):
        self.moving = sigmoid_trajectory(30.0, 20.0, 10.0)
        self.resting = static_trajectory(self.moving.tau, base_position=10.0)

    def test_phase_follows_pair_ground_level(self):
        interaction = InteractionModel(0.15)
        evolution = evolve_two_particle(self.moving, self.resting, interaction, 10)
        dressed = collisional_phase_dressed(self.moving, self.resting, interaction, 10)
        adiabatic = collisional_phase_adiabatic(self.moving, self.resting, interaction)
        self.assertLess(abs(_wrapped(evolution.phase - dressed)), 0.02 * abs(dressed))
        self.assertLess(evolution.excitation_leakage, 1e-3)
        # second order lowers the pair level: a repulsive phase falls short of first order
        shortfall = _wrapped(evolution.phase - adiabatic)
        self.assertGreater(shortfall, 0.0)
        self.assertLess(shortfall, 0.15 * abs(adiabatic))

    def test_weak_contact_matches_first_order(self):
        interaction = InteractionModel(0.0375)
        evolution = evolve_two_particle(self.moving, self.resting, interaction, 10)
        adiabatic = collisional_phase_adiabatic(self.moving, self.resting, interaction)
        self.assertLess(abs(_wrapped(evolution.phase - adiabatic)), 0.05 * abs(adiabatic))

    def test_phase_converges_with_basis_size(self):
        interaction = InteractionModel(0.15)
        small = evolve_two_particle(self.moving, self.resting, interaction, 10).phase
        large = evolve_two_particle(self.moving, self.resting, interaction, 14).phase
        self.assertLess(abs(_wrapped(large - small)), 3e-3)
