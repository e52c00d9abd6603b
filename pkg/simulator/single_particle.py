"""
Motional evolution of one atom in a moving, possibly breathing, harmonic trap
"""
from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.integrate import simpson, solve_ivp

from .exceptions import StiffnessError, TrajectoryError

logger = logging.getLogger(__name__)

DEFAULT_BASIS_SIZE = 10
DEFAULT_TOLERANCE = 1e-9
TRAP_GAUGE = 'trap'
LAB_GAUGE = 'lab'
RTOL_FACTORS = (0.1, 1e-2, 1e-3, 1e-4)
MIN_RTOL = 1e-13


@dataclass
class MotionalState:
    """
    Amplitudes in the comoving oscillator basis.

    `amplitudes` is a vector of length N, or an N x K array holding K states
    propagated together. In the 'trap' gauge the zero-point phase
    integral of omega/2 is removed, so an adiabatic ground state keeps
    only the kinetic phase.
    """

    amplitudes: np.ndarray
    time: float = 0.0
    gauge: str = LAB_GAUGE
    trajectory: object = None
    history: dict = field(default_factory=dict, repr=False)

    @classmethod
    def level(cls, n, basis_size=DEFAULT_BASIS_SIZE, time=0.0):
        if not 0 <= n < basis_size:
            raise ValueError(f'level {n} outside basis of size {basis_size}')
        amplitudes = np.zeros(basis_size, dtype=complex)
        amplitudes[n] = 1.0
        return cls(amplitudes, time=time)

    @classmethod
    def ground(cls, basis_size=DEFAULT_BASIS_SIZE, time=0.0):
        return cls.level(0, basis_size, time)

    @property
    def basis_size(self):
        return self.amplitudes.shape[0]

    @property
    def populations(self):
        return np.abs(self.amplitudes) ** 2

    @property
    def norm(self):
        return np.sqrt(np.sum(self.populations, axis=0))

    @property
    def ground_amplitude(self):
        return self.amplitudes[0]


@dataclass(frozen=True)
class ExactEvolution:
    """Coherent-state solution of the driven oscillator: c_n(t) from alpha(t) and gamma(t)"""

    times: np.ndarray
    alpha: np.ndarray
    phase: np.ndarray
    omega: float

    @property
    def ground_amplitude(self):
        return np.exp(1j * self.phase - 0.5 * np.abs(self.alpha) ** 2)

    def ground_population(self, shift=0.0):
        """
        Ground-state population in a frame displaced by `shift` (length units).

        With shift = 0 this is exp(-|alpha|^2); a sudden displacement d of a
        resting trap gives exp(-d^2 / 2 a0^2).
        """
        displaced = self.alpha - shift * np.sqrt(self.omega / 2.0)
        return np.exp(-np.abs(displaced) ** 2)

    @property
    def final_alpha(self):
        return complex(self.alpha[-1])

    @property
    def final_phase(self):
        return float(self.phase[-1])

    def amplitudes(self, basis_size=DEFAULT_BASIS_SIZE, index=-1):
        """Fock amplitudes of the coherent state at sample `index`"""
        alpha = self.alpha[index]
        amplitudes = np.empty(basis_size, dtype=complex)
        amplitudes[0] = np.exp(1j * self.phase[index] - 0.5 * abs(alpha) ** 2)
        for n in range(1, basis_size):
            amplitudes[n] = amplitudes[n - 1] * alpha / np.sqrt(n)
        return amplitudes


def exact_displaced_evolution(traj, rtol=1e-12):
    """
    Closed-form driven-oscillator solution for a trap of constant frequency.

    alpha(t) = -sqrt(omega/2) e^{-i omega t} I(t) with I the running integral
    of v e^{i omega t'}, and gamma' = -Re(f alpha) with f = i v sqrt(omega/2).
    The phase is reported in the trap gauge.

    Raises:
        TrajectoryError: the trajectory has a time-varying frequency
    """
    if not traj.constant_omega:
        raise TrajectoryError('exact evolution needs a constant trap frequency')
    omega = float(traj.omegas[0])
    scale = np.sqrt(omega / 2.0)

    def rhs(t, y):
        v = float(traj.velocity(t))
        integral = complex(y[0], y[1])
        alpha = -scale * np.exp(-1j * omega * t) * integral
        drive = v * np.exp(1j * omega * t)
        coupling = 1j * v * scale * alpha
        return [drive.real, drive.imag, -coupling.real]

    solution = solve_ivp(
        rhs, (-traj.tau, traj.tau), [0.0, 0.0, 0.0],
        method='DOP853', t_eval=traj.times, rtol=rtol, atol=rtol * 1e-2,
        max_step=2.0 * traj.tau / 200,
    )
    if not solution.success:
        raise StiffnessError(f'exact evolution failed: {solution.message}')

    integral = solution.y[0] + 1j * solution.y[1]
    alpha = -scale * np.exp(-1j * omega * solution.t) * integral
    return ExactEvolution(times=solution.t, alpha=alpha, phase=solution.y[2], omega=omega)


def ladder_operator(basis_size):
    """Annihilation operator a truncated to `basis_size` levels"""
    return np.diag(np.sqrt(np.arange(1, basis_size, dtype=float)), k=1)


def comoving_hamiltonian(t, traj, basis_size=DEFAULT_BASIS_SIZE):
    """
    Hamiltonian in the basis of the instantaneous trap eigenstates.

    H = omega (n + 1/2) + i v sqrt(omega/2) (a - a^dag) - i (omega'/4 omega) (a^2 - a^dag^2)

    The drive term couples |0> and |1> with strength v sqrt(m hbar omega / 2);
    the squeezing term appears only for a breathing trap.
    """
    omega = float(traj.omega(t))
    velocity = float(traj.velocity(t))
    rate = float(traj.omega_rate(t))

    a = ladder_operator(basis_size)
    ad = a.T
    hamiltonian = np.diag(omega * (np.arange(basis_size) + 0.5)).astype(complex)
    hamiltonian += 1j * velocity * np.sqrt(omega / 2.0) * (a - ad)
    if rate != 0.0:
        hamiltonian -= 1j * (rate / (4.0 * omega)) * (a @ a - ad @ ad)
    return hamiltonian


def integrate_tdse(hamiltonian, initial, window, tol=DEFAULT_TOLERANCE, t_eval=None,
                   hermitian=True, max_step=None):
    """
    Integrate i dc/dt = H(t) c with the DOP853 scheme.

    For a Hermitian H the norm must stay within tol at every stored time;
    the solve is repeated with tighter rtol/atol until it does.

    Args:
        hamiltonian: callable t -> operator supporting `@` (ndarray or
            scipy LinearOperator)
        initial: MotionalState or array (vector, or one state per column)
        window: (t0, t1)
        tol: requested accuracy; the first attempt runs at rtol = tol / 10
        t_eval: optional times at which states are stored in `history`
        hermitian: enforce norm conservation to tol
        max_step: largest step; defaults to a hundredth of the window

    Returns:
        MotionalState at t1 (lab gauge) with history keys 'nfev', 'norm_drift',
        'rtol', 'attempts' and, with t_eval, 'times', 'states', 'norms'

    Raises:
        StiffnessError: the solver failed, or the norm drift stays above tol
            at the tightest tolerance
    """
    amplitudes = initial.amplitudes if isinstance(initial, MotionalState) else initial
    amplitudes = np.asarray(amplitudes, dtype=complex)
    shape = amplitudes.shape
    t0, t1 = window
    if max_step is None:
        max_step = (t1 - t0) / 100.0
    initial_norm = np.asarray(np.sum(np.abs(amplitudes) ** 2, axis=0))

    def rhs(t, y):
        return (-1j * (hamiltonian(t) @ y.reshape(shape))).ravel()

    rtols = sorted({max(factor * tol, MIN_RTOL) for factor in RTOL_FACTORS}, reverse=True)
    nfev = 0
    for attempt, rtol in enumerate(rtols, start=1):
        solution = solve_ivp(
            rhs, (t0, t1), amplitudes.ravel(),
            method='DOP853', t_eval=t_eval, rtol=rtol, atol=0.1 * rtol,
            max_step=max_step,
        )
        nfev += int(solution.nfev)
        if not solution.success:
            logger.error(f'integration failed at t={solution.t[-1]:.4f}: {solution.message}')
            raise StiffnessError(f'integration failed: {solution.message}')

        norms = np.sum(np.abs(solution.y.reshape(shape + (-1,))) ** 2, axis=0)
        drift = float(np.max(np.abs(norms - initial_norm[..., None])))
        if not hermitian or drift <= tol:
            break
        logger.info(f'norm drift {drift:.2e} above {tol:.1e} at rtol {rtol:.1e}; tightening')
    else:
        logger.error(f'norm drift {drift:.2e} exceeds tolerance {tol:.1e} at rtol {rtol:.1e}')
        raise StiffnessError(f'norm drift {drift:.2e} exceeds tolerance {tol:.1e}')

    final = solution.y[:, -1].reshape(shape)
    logger.debug(f'tdse: {nfev} evaluations in {attempt} attempt(s), norm drift {drift:.2e}')

    history = {'nfev': nfev, 'norm_drift': drift, 'rtol': rtol, 'attempts': attempt}
    if t_eval is not None:
        states = np.moveaxis(solution.y, -1, 0).reshape((solution.t.size,) + shape)
        history.update({'times': solution.t, 'states': states, 'norms': np.moveaxis(norms, -1, 0)})
    return MotionalState(final, time=float(t1), gauge=LAB_GAUGE, history=history)


def zero_point_phase(traj):
    """Integral of omega(t)/2 over the window"""
    if traj.constant_omega:
        return float(traj.omegas[0] * traj.tau)
    return 0.5 * float(simpson(traj.omegas, x=traj.times))


def zero_point_phase_profile(traj, times):
    """Integral of omega/2 from -tau to each of `times`"""
    times = np.asarray(times, dtype=float)
    if traj.constant_omega:
        return 0.5 * traj.omegas[0] * (times + traj.tau)
    dense = traj.times
    running = np.concatenate([[0.0], np.cumsum(0.25 * (traj.omegas[1:] + traj.omegas[:-1]) * np.diff(dense))])
    return np.interp(times, dense, running)


def evolve_single_particle(traj, basis_size=DEFAULT_BASIS_SIZE, tol=DEFAULT_TOLERANCE,
                           levels=(0,), trace=False):
    """
    Propagate the trap eigenstates in `levels` along a trajectory.

    Returns:
        MotionalState in the trap gauge; amplitudes are a vector for one
        level and an N x len(levels) array otherwise
    """
    initial = np.zeros((basis_size, len(levels)), dtype=complex)
    for column, level in enumerate(levels):
        initial[level, column] = 1.0

    t_eval = traj.times if trace else None
    state = integrate_tdse(
        lambda t: comoving_hamiltonian(t, traj, basis_size),
        initial, (-traj.tau, traj.tau), tol=tol, t_eval=t_eval,
    )
    state.amplitudes = state.amplitudes * np.exp(1j * zero_point_phase(traj))
    state.gauge = TRAP_GAUGE
    state.trajectory = traj
    if trace:
        gauge = np.exp(1j * zero_point_phase_profile(traj, state.history['times']))
        state.history['states'] = state.history['states'] * gauge[:, None, None]
    if len(levels) == 1:
        state.amplitudes = state.amplitudes[:, 0]
    return state


def single_particle_propagator(traj, basis_size=DEFAULT_BASIS_SIZE, tol=DEFAULT_TOLERANCE):
    """Full N x N propagator in the trap gauge; column n evolves from level n"""
    return evolve_single_particle(traj, basis_size, tol, levels=tuple(range(basis_size))).amplitudes


def single_particle_rows(state):
    """CSV rows of a traced single-particle run: t, ground amplitude and populations"""
    history = state.history
    if 'times' not in history:
        raise ValueError('state carries no trace; evolve with trace=True')
    rows = []
    for t, amplitudes in zip(history['times'], history['states']):
        column = amplitudes[:, 0]
        row = {
            't': float(t),
            'c0_re': float(column[0].real),
            'c0_im': float(column[0].imag),
            'ground_population': float(abs(column[0]) ** 2),
            'excited_population': float(np.sum(np.abs(column[1:]) ** 2)),
        }
        rows.append(row)
    return rows
