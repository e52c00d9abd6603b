"""
Two atoms in separate moving traps coupled by a contact pseudopotential
"""
from dataclasses import dataclass, field, replace
from functools import lru_cache
import logging

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.integrate import simpson
from scipy.linalg import eigvalsh
from scipy.optimize import brentq
from scipy.sparse.linalg import LinearOperator
from scipy.special import gamma, rgamma

from .exceptions import ConfigError, TrajectoryError
from .single_particle import (
    DEFAULT_BASIS_SIZE,
    DEFAULT_TOLERANCE,
    comoving_hamiltonian,
    integrate_tdse,
    single_particle_propagator,
    zero_point_phase,
    zero_point_phase_profile,
)

logger = logging.getLogger(__name__)

TRUNCATION_FACTOR = 100.0
DRESSED_SAMPLES = 1001


def effective_1d_coupling(scattering_length, omega_perp, mass=1.0, hbar=1.0):
    """
    Quasi-1D coupling g1D = g3D / (2 pi a_perp^2) = 2 hbar omega_perp a_s.

    Works in any consistent unit system; complex a_s gives a complex coupling
    whose imaginary part models two-body loss.
    """
    if not omega_perp > 0:
        raise ValueError(f'transverse frequency must be positive, got {omega_perp}')
    g3d = 4.0 * np.pi * hbar ** 2 * scattering_length / mass
    transverse_area = 2.0 * np.pi * hbar / (mass * omega_perp)
    return g3d / transverse_area


@dataclass(frozen=True)
class InteractionModel:
    """
    Scattering length (possibly complex) and transverse confinement, internal units.

    With `calibrated` set, the two-atom dynamics uses the contact strength
    that reproduces the exact pair ground level in the truncated basis.
    """

    scattering_length: complex
    omega_perp: float = 1.0
    mass: float = 1.0
    calibrated: bool = True

    def __post_init__(self):
        errors = []
        if complex(self.scattering_length).imag > 0:
            errors.append(('scattering_length', 'imaginary part must be <= 0 (loss, not gain)'))
        if not self.omega_perp > 0:
            errors.append(('omega_perp', 'must be positive'))
        if not self.mass > 0:
            errors.append(('mass', 'must be positive'))
        if errors:
            raise ConfigError(errors)

    @classmethod
    def with_loss(cls, scattering_length, loss_factor=0.0, omega_perp=1.0, mass=1.0, calibrated=True):
        """a_s (1 + i loss_factor); loss_factor = Im a_s / Re a_s"""
        return cls(complex(scattering_length) * (1.0 + 1j * loss_factor), omega_perp, mass, calibrated)

    @property
    def g1d(self):
        g = effective_1d_coupling(self.scattering_length, self.omega_perp, self.mass)
        return g.real if complex(g).imag == 0 else complex(g)

    @property
    def g3d(self):
        return 4.0 * np.pi * self.scattering_length / self.mass

    @property
    def lossy(self):
        return complex(self.scattering_length).imag != 0

    def scaled(self, factor):
        return replace(self, scattering_length=self.scattering_length * factor)


def gaussian_overlap(xa, xb, wa, wb):
    """Integral of |phi0(x - xa)|^2 |phi0(x - xb)|^2 for Gaussians of widths wa, wb"""
    total = np.asarray(wa) ** 2 + np.asarray(wb) ** 2
    return np.exp(-(np.asarray(xa) - np.asarray(xb)) ** 2 / total) / np.sqrt(np.pi * total)


def hermite_functions(basis_size, xi):
    """
    Normalized Hermite functions without their Gaussian factor, h_n(xi) with
    phi_n(x) = h_n(xi) exp(-xi^2/2) / sqrt(a0).

    Returns:
        np.ndarray: shape xi.shape + (basis_size,)
    """
    xi = np.asarray(xi, dtype=float)
    values = np.empty(xi.shape + (basis_size,))
    values[..., 0] = np.pi ** -0.25
    if basis_size > 1:
        values[..., 1] = np.sqrt(2.0) * xi * values[..., 0]
    for n in range(1, basis_size - 1):
        values[..., n + 1] = (np.sqrt(2.0 / (n + 1)) * xi * values[..., n]
                              - np.sqrt(n / (n + 1)) * values[..., n - 1])
    return values


@dataclass(frozen=True)
class ContactFactors:
    """
    Gauss-Hermite factorization of the contact matrix elements:
    T[m', n', m, n] = sum_k w_k u_k[m'] u_k[m] v_k[n'] v_k[n].
    """

    weights: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def apply(self, amplitudes):
        """Action of the contact operator on C[m, n] (optionally with a trailing batch axis)"""
        if amplitudes.ndim == 2:
            projected = np.einsum('km,mn,kn->k', self.u, amplitudes, self.v)
            return np.einsum('k,km,kn->mn', self.weights * projected, self.u, self.v)
        projected = np.einsum('km,mnj,kn->kj', self.u, amplitudes, self.v)
        return np.einsum('kj,km,kn->mnj', self.weights[:, None] * projected, self.u, self.v)

    def tensor(self):
        return np.einsum('k,ka,kb,kc,kd->abcd', self.weights, self.u, self.v, self.u, self.v)


@lru_cache(maxsize=8)
def _quadrature_rule(nodes):
    return hermgauss(nodes)


def contact_factors(xa, xb, wa, wb, basis_size=DEFAULT_BASIS_SIZE, nodes=None):
    """
    Gauss-Hermite factors of the contact overlaps for oscillator bases of
    widths wa and wb centred at xa and xb.

    The product of the two Gaussians is a single Gaussian of precision
    A = 1/wa^2 + 1/wb^2 about c; K >= 2N + 4 nodes integrate the polynomial
    part exactly.
    """
    if nodes is None:
        nodes = 2 * basis_size + 4
    y, w = _quadrature_rule(nodes)
    precision = 1.0 / wa ** 2 + 1.0 / wb ** 2
    centre = (xa / wa ** 2 + xb / wb ** 2) / precision
    x = centre + y / np.sqrt(precision)
    prefactor = np.exp(-(xa - xb) ** 2 / (wa ** 2 + wb ** 2)) / (np.sqrt(precision) * wa * wb)
    u = hermite_functions(basis_size, (x - xa) / wa)
    v = hermite_functions(basis_size, (x - xb) / wb)
    return ContactFactors(weights=prefactor * w, u=u, v=v)


def contact_matrix_elements(xa, xb, wa, wb, basis_size=DEFAULT_BASIS_SIZE):
    """Tensor T[m', n', m, n] = integral phi_m' phi_n' phi_m phi_n (atom 1 index first)"""
    return contact_factors(xa, xb, wa, wb, basis_size).tensor()


def pair_ground_shift(coupling):
    """
    Exact shift of the lowest pair level for two atoms in one trap of unit
    frequency with contact strength g, in units of hbar omega.

    The relative level E = 1/2 + shift is the root of
    Gamma(3/4 - E/2) / Gamma(1/4 - E/2) = -g / (2 sqrt 2).
    """
    g = float(coupling)
    if g == 0.0:
        return 0.0
    target = -g / (2.0 * np.sqrt(2.0))

    def mismatch(energy):
        return gamma(0.75 - 0.5 * energy) * rgamma(0.25 - 0.5 * energy) - target

    if g > 0:
        energy = brentq(mismatch, 0.5, 1.5 - 1e-12, xtol=1e-15, rtol=1e-14)
    else:
        lower = -0.5
        while mismatch(lower) <= 0.0:
            lower = 0.5 - 2.0 * (0.5 - lower)
        energy = brentq(mismatch, lower, 0.5, xtol=1e-15, rtol=1e-14)
    return energy - 0.5


@lru_cache(maxsize=8)
def _coincident_pair(basis_size):
    levels = np.arange(basis_size)
    bare = np.diag(np.add.outer(levels, levels).ravel() + 1.0)
    contact = contact_matrix_elements(0.0, 0.0, 1.0, 1.0, basis_size).reshape(basis_size ** 2, -1)
    return bare, contact


def truncated_pair_shift(coupling, basis_size=DEFAULT_BASIS_SIZE):
    """Lowest level minus hbar omega of the truncated pair Hamiltonian for coincident traps"""
    bare, contact = _coincident_pair(basis_size)
    lowest = eigvalsh(bare + coupling * contact, subset_by_index=[0, 0])[0]
    return float(lowest) - 1.0


@lru_cache(maxsize=64)
def calibration_ratio(coupling, basis_size=DEFAULT_BASIS_SIZE):
    """
    g_N / g for which the truncated coincident pair has the exact ground
    shift of a contact of strength g.

    The truncated level lies above the exact one at equal strength, so a
    repulsive contact is weakened and an attractive one strengthened.
    """
    if coupling == 0.0:
        return 1.0
    target = pair_ground_shift(coupling)

    def mismatch(trial):
        return truncated_pair_shift(trial, basis_size) - target

    if coupling > 0:
        lower, upper = 0.0, coupling
        if mismatch(upper) <= 0.0:
            return 1.0
    else:
        lower, upper = coupling, 0.0
        while mismatch(lower) > 0.0:
            lower *= 2.0
    root = brentq(mismatch, lower, upper, xtol=1e-14 * abs(coupling), rtol=1e-13)
    logger.debug(f'contact calibration for g = {coupling:.6g}, N = {basis_size}: ratio {root / coupling:.10f}')
    return root / coupling


def pair_frequency(traj_1, traj_2, t=0.0):
    return float(np.sqrt(traj_1.omega(t) * traj_2.omega(t)))


def contact_coupling(interaction, basis_size=DEFAULT_BASIS_SIZE, omega=1.0):
    """
    Contact strength of the truncated two-atom Hamiltonian.

    The ratio is computed from the real part of g at the pair frequency
    `omega` (dimensionless strength g / sqrt(omega)) and scales the complex
    coupling as a whole.
    """
    coupling = complex(interaction.g1d)
    if not interaction.calibrated or coupling.real == 0.0:
        return coupling
    return coupling * calibration_ratio(coupling.real / np.sqrt(omega), basis_size)


def _common_grid(traj_a, traj_b, samples=None):
    if not np.isclose(traj_a.tau, traj_b.tau):
        raise TrajectoryError(f'trajectories cover different windows ({traj_a.tau} vs {traj_b.tau})')
    if samples is None:
        samples = max(traj_a.samples, traj_b.samples)
    return np.linspace(-traj_a.tau, traj_a.tau, samples)


def energy_shift(traj_a, traj_b, interaction, t):
    """
    First-order energy shift g1D times the ground-state density overlap.

    Complex for a lossy interaction (imaginary part = -loss rate / 2).
    """
    overlap = gaussian_overlap(
        traj_a.position(t), traj_b.position(t),
        traj_a.ground_state_size(t), traj_b.ground_state_size(t),
    )
    return interaction.g1d * overlap


def collisional_phase_adiabatic(traj_a, traj_b, interaction, samples=None):
    """
    Adiabatic collisional phase -(1/hbar) integral of Re dE over the window.

    This is the phase picked up by the two-atom amplitude C00 ~ exp(-i int dE),
    so it has the opposite sign of the usual magnitude formula
    +(1/hbar) integral of dE: a repulsive interaction gives a negative phase.
    The full dynamics extracts its phase with the same sign.
    """
    times = _common_grid(traj_a, traj_b, samples)
    shift = np.real(energy_shift(traj_a, traj_b, interaction, times))
    return -float(simpson(shift, x=times))


def dressed_ground_shift(traj_a, traj_b, interaction, t, basis_size=DEFAULT_BASIS_SIZE):
    """
    Lowest level of the static truncated pair Hamiltonian at time t minus the
    non-interacting value (omega_a + omega_b) / 2, with the coupling the
    dynamics uses.
    """
    omega_a, omega_b = float(traj_a.omega(t)), float(traj_b.omega(t))
    levels = np.arange(basis_size) + 0.5
    bare = np.add.outer(omega_a * levels, omega_b * levels).ravel()
    coupling = contact_coupling(interaction, basis_size, pair_frequency(traj_a, traj_b)).real
    contact = contact_matrix_elements(
        float(traj_a.position(t)), float(traj_b.position(t)),
        float(traj_a.ground_state_size(t)), float(traj_b.ground_state_size(t)),
        basis_size,
    ).reshape(basis_size ** 2, -1)
    lowest = eigvalsh(np.diag(bare) + coupling * contact, subset_by_index=[0, 0])[0]
    return float(lowest) - 0.5 * (omega_a + omega_b)


def collisional_phase_dressed(traj_a, traj_b, interaction, basis_size=DEFAULT_BASIS_SIZE,
                              samples=DRESSED_SAMPLES):
    """
    Adiabatic collisional phase from the instantaneous pair ground level,
    with the same sign convention as collisional_phase_adiabatic.

    Beyond first order it includes the virtual excitations of the pair, so it
    is what the full integration approaches for slow trap motion.
    """
    times = _common_grid(traj_a, traj_b, samples)
    shifts = np.array([
        dressed_ground_shift(traj_a, traj_b, interaction, t, basis_size) for t in times
    ])
    return -float(simpson(shifts, x=times))


def regime_report(traj_a, traj_b, interaction, samples=None):
    """
    Diagnostics of the validity regime: interaction energy, trap velocities
    and collision velocity, all in oscillator units.
    """
    times = _common_grid(traj_a, traj_b, samples)
    shift = np.abs(energy_shift(traj_a, traj_b, interaction, times))
    omega = np.minimum(traj_a.omega(times), traj_b.omega(times))
    v_osc = np.sqrt(omega)
    va = np.abs(traj_a.velocity(times))
    vb = np.abs(traj_b.velocity(times))
    relative = np.abs(traj_a.velocity(times) - traj_b.velocity(times))
    overlap_weight = np.abs(shift) / max(float(np.max(shift)), 1e-300)
    report = {
        'interaction_over_trap': float(np.max(shift / omega)),
        'velocity_over_oscillator': float(np.max(np.maximum(va, vb) / v_osc)),
        'collision_velocity_over_oscillator': float(np.max(overlap_weight * relative / v_osc)),
    }
    for name, traj in (('a', traj_a), ('b', traj_b)):
        accelerations = np.abs(np.asarray(traj.acceleration(times), dtype=float))
        report[f'acceleration_ratio_{name}'] = float(np.max(accelerations) * traj.tau / np.sqrt(traj.omegas[0]))
    return report


class TwoParticleHamiltonian:
    """
    H = H1 (x) 1 + 1 (x) H2 + g delta(x1 - x2) acting on C[m, n], the
    product of comoving bases of atom 1 (first index) and atom 2.

    g is g1D, or its calibrated value for this basis size (see contact_coupling).
    """

    def __init__(self, traj_1, traj_2, interaction, basis_size=DEFAULT_BASIS_SIZE):
        self.traj_1 = traj_1
        self.traj_2 = traj_2
        self.interaction = interaction
        self.basis_size = basis_size
        self.coupling = contact_coupling(interaction, basis_size, pair_frequency(traj_1, traj_2))

    def contact(self, t):
        return contact_factors(
            float(self.traj_1.position(t)), float(self.traj_2.position(t)),
            float(self.traj_1.ground_state_size(t)), float(self.traj_2.ground_state_size(t)),
            self.basis_size,
        )

    def apply(self, t, amplitudes):
        h1 = comoving_hamiltonian(t, self.traj_1, self.basis_size)
        h2 = comoving_hamiltonian(t, self.traj_2, self.basis_size)
        if amplitudes.ndim == 2:
            result = h1 @ amplitudes + amplitudes @ h2.T
        else:
            result = (np.einsum('ij,jnk->ink', h1, amplitudes)
                      + np.einsum('nj,mjk->mnk', h2, amplitudes))
        if self.coupling != 0:
            result = result + self.coupling * self.contact(t).apply(amplitudes)
        return result

    def operator(self, t):
        """LinearOperator on flattened C (index m * N + n), columns are batch entries"""
        n = self.basis_size

        def matvec(vector):
            return self.apply(t, vector.reshape(n, n)).ravel()

        def matmat(matrix):
            batch = matrix.shape[1]
            return self.apply(t, matrix.reshape(n, n, batch)).reshape(n * n, batch)

        return LinearOperator((n * n, n * n), matvec=matvec, matmat=matmat, dtype=complex)

    def matrix(self, t):
        """Dense N^2 x N^2 matrix"""
        n = self.basis_size
        return self.operator(t) @ np.eye(n * n, dtype=complex)

    def __call__(self, t):
        return self.operator(t)


@dataclass
class TwoParticleState:
    """Joint amplitudes C[m, n] in the product of the two comoving bases"""

    amplitudes: np.ndarray
    time: float = 0.0

    @classmethod
    def product(cls, m, n, basis_size=DEFAULT_BASIS_SIZE):
        amplitudes = np.zeros((basis_size, basis_size), dtype=complex)
        amplitudes[m, n] = 1.0
        return cls(amplitudes)

    @property
    def norm_squared(self):
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    @property
    def ground_amplitude(self):
        return complex(self.amplitudes[0, 0])

    @property
    def excitation_leakage(self):
        return 1.0 - abs(self.amplitudes[0, 0]) ** 2 / self.norm_squared

    @property
    def norm_loss(self):
        return 1.0 - self.norm_squared

    def top_level_population(self):
        top = np.abs(self.amplitudes[-1, :]) ** 2
        return float(np.sum(top) + np.sum(np.abs(self.amplitudes[:-1, -1]) ** 2))


@dataclass
class TwoParticleEvolution:
    """
    Outcome of one two-atom integration.

    `finals` maps each initial pair (m, n) to its final amplitudes in the
    trap gauge; `phases` holds the collisional phase of each pair relative to
    the non-interacting product evolution.
    """

    finals: dict
    phases: dict
    reference: dict
    truncation_warning: bool = False
    history: dict = field(default_factory=dict, repr=False)

    @property
    def state(self):
        return TwoParticleState(self.finals[(0, 0)])

    @property
    def phase(self):
        return self.phases[(0, 0)]

    @property
    def excitation_leakage(self):
        return self.state.excitation_leakage

    @property
    def norm_loss(self):
        return self.state.norm_loss


def evolve_two_particle(traj_1, traj_2, interaction, basis_size=DEFAULT_BASIS_SIZE,
                        tol=DEFAULT_TOLERANCE, initial_pairs=((0, 0),), references=None,
                        trace=False):
    """
    Integrate the two-atom Schrodinger equation for a batch of initial
    product states |m, n>.

    Args:
        traj_1: trajectory carrying atom 1 (first basis index)
        traj_2: trajectory carrying atom 2
        interaction: InteractionModel
        basis_size: oscillator levels per atom
        tol: integration accuracy
        initial_pairs: initial Fock pairs, always including (0, 0)
        references: optional (U1, U2) single-particle propagators in the trap gauge
        trace: keep the evolution on the trajectory sample grid

    Returns:
        TwoParticleEvolution
    """
    initial_pairs = [tuple(pair) for pair in initial_pairs]
    if (0, 0) not in initial_pairs:
        initial_pairs.insert(0, (0, 0))
    for m, n in initial_pairs:
        if max(m, n) >= basis_size:
            raise ValueError(f'initial pair {(m, n)} outside basis of size {basis_size}')
    if not np.isclose(traj_1.tau, traj_2.tau):
        raise TrajectoryError('both atoms must share the integration window')

    if references is None:
        references = (
            single_particle_propagator(traj_1, basis_size, tol),
            single_particle_propagator(traj_2, basis_size, tol),
        )
    u1, u2 = references

    initial = np.zeros((basis_size, basis_size, len(initial_pairs)), dtype=complex)
    for column, (m, n) in enumerate(initial_pairs):
        initial[m, n, column] = 1.0

    hamiltonian = TwoParticleHamiltonian(traj_1, traj_2, interaction, basis_size)
    t_eval = traj_1.times if trace else None
    result = integrate_tdse(
        hamiltonian, initial.reshape(basis_size ** 2, -1), (-traj_1.tau, traj_1.tau),
        tol=tol, t_eval=t_eval, hermitian=not interaction.lossy,
    )
    gauge = np.exp(1j * (zero_point_phase(traj_1) + zero_point_phase(traj_2)))
    finals_array = result.amplitudes.reshape(basis_size, basis_size, -1) * gauge

    finals, phases, reference = {}, {}, {}
    truncation = False
    for column, (m, n) in enumerate(initial_pairs):
        final = finals_array[:, :, column]
        product = complex(u1[m, m] * u2[n, n])
        finals[(m, n)] = final
        reference[(m, n)] = product
        phases[(m, n)] = float(np.angle(final[m, n] * np.conj(product)))
        top = TwoParticleState(final).top_level_population()
        if top > TRUNCATION_FACTOR * tol:
            truncation = True
            logger.warning(
                f'basis of {basis_size} levels may be too small: top-level population {top:.2e} '
                f'for initial pair {(m, n)}'
            )

    history = {}
    if trace:
        times = result.history['times']
        states = result.history['states'][:, :, 0].reshape(times.size, basis_size, basis_size)
        running = zero_point_phase_profile(traj_1, times) + zero_point_phase_profile(traj_2, times)
        states = states * np.exp(1j * running)[:, None, None]
        history = {
            'times': times,
            'states': states,
            'energy_shift': energy_shift(traj_1, traj_2, interaction, times),
        }

    logger.debug(
        f'two-particle {traj_1.label}/{traj_2.label}: phase {phases[(0, 0)]:.6e}, '
        f'leakage {TwoParticleState(finals[(0, 0)]).excitation_leakage:.2e}'
    )
    return TwoParticleEvolution(
        finals=finals, phases=phases, reference=reference,
        truncation_warning=truncation, history=history,
    )


def two_particle_rows(evolution):
    """CSV rows of a traced run from |0, 0>: t, C00, populations, energy shift"""
    history = evolution.history
    if 'times' not in history:
        raise ValueError('evolution carries no trace; run with trace=True')
    rows = []
    for t, amplitudes, shift in zip(history['times'], history['states'], history['energy_shift']):
        norm = float(np.sum(np.abs(amplitudes) ** 2))
        rows.append({
            't': float(t),
            'c00_re': float(amplitudes[0, 0].real),
            'c00_im': float(amplitudes[0, 0].imag),
            'norm': norm,
            'excited_population': norm - float(abs(amplitudes[0, 0]) ** 2),
            'energy_shift': float(np.real(shift)),
        })
    return rows
