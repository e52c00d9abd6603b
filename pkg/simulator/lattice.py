"""
lin-angle-lin optical lattice: state-dependent potentials, harmonic well
tracking and the polarization-angle schedule that moves the wells
"""
from dataclasses import dataclass
import logging

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import ConfigError, LostMinimumError
from .trajectory import (
    SampledProfile,
    Trajectory,
    default_half_window,
    sigmoid_shape,
)

logger = logging.getLogger(__name__)

STATES = ('a', 'b')
DEFAULT_PATH_SAMPLES = 1001
CURVATURE_TOLERANCE = 1e-6
NEWTON_STEPS = 8


@dataclass(frozen=True)
class LatticeParams:
    """
    Lattice depth V0 = alpha |E0|^2, wavevector k and atomic mass m.
    """

    depth: float
    k: float
    mass: float = 1.0

    def __post_init__(self):
        errors = [
            (name, 'must be positive')
            for name in ('depth', 'k', 'mass')
            if not getattr(self, name) > 0
        ]
        if errors:
            raise ConfigError(errors)

    @classmethod
    def from_trap_frequency(cls, omega, k, mass=1.0):
        """Depth giving a well frequency omega: V0 = m omega^2 / (2 k^2)"""
        return cls(depth=mass * omega ** 2 / (2.0 * k ** 2), k=k, mass=mass)

    @classmethod
    def from_wavelength(cls, wavelength, omega=1.0, mass=1.0):
        return cls.from_trap_frequency(omega, 2.0 * np.pi / wavelength, mass)

    @property
    def harmonic_frequency(self):
        """Frequency of a pure sin^2 well, k sqrt(2 V0 / m)"""
        return self.k * np.sqrt(2.0 * self.depth / self.mass)

    @property
    def site_spacing(self):
        return np.pi / self.k


@dataclass(frozen=True)
class WellApprox:
    """Harmonic approximation of one lattice well"""

    center: float
    omega: float
    depth: float
    index: int
    theta: float


def _component_derivative(sign, z, theta, p, dz=0, dtheta=0):
    """Derivative d^dz/dz d^dtheta/dtheta of V0 sin^2(kz + sign*theta)"""
    u = 2.0 * p.k * z + sign * 2.0 * theta
    order = dz + dtheta
    if order == 0:
        return p.depth * np.sin(u / 2.0) ** 2
    scale = -0.5 * p.depth * (2.0 * p.k) ** dz * (sign * 2.0) ** dtheta
    return scale * np.cos(u + order * np.pi / 2.0)


def optical_potential(ms, z, theta, p):
    """
    Potential V0 sin^2(kz +- theta) of the fine-structure component m_s = +-1/2.

    Args:
        ms: +0.5 or -0.5
        z: position along the lattice axis
        theta: polarization half-angle
        p: LatticeParams

    Returns:
        energy (same shape as z)
    """
    if ms not in (0.5, -0.5):
        raise ValueError(f'm_s must be +1/2 or -1/2, got {ms}')
    sign = 1.0 if ms > 0 else -1.0
    return _component_derivative(sign, z, theta, p)


def potential_derivative(state, z, theta, p, dz=0, dtheta=0):
    """
    Closed-form partial derivative of the state potential.

    V^a = [V_{+1/2} + 3 V_{-1/2}] / 4 and V^b = V_{+1/2}.
    """
    if state == 'b':
        return _component_derivative(1.0, z, theta, p, dz, dtheta)
    if state == 'a':
        return 0.25 * (_component_derivative(1.0, z, theta, p, dz, dtheta)
                       + 3.0 * _component_derivative(-1.0, z, theta, p, dz, dtheta))
    raise ValueError(f'unknown internal state {state!r}')


def state_potential(state, z, theta, p):
    """Potential seen by an atom in internal state 'a' or 'b'"""
    return potential_derivative(state, z, theta, p)


def _seed_center(state, index, theta, p):
    """Analytic location of well `index` used only to seed the numerical search"""
    if state == 'b':
        return (index * np.pi - theta) / p.k
    phase = np.arctan2(2.0 * np.sin(2.0 * theta), 4.0 * np.cos(2.0 * theta))
    return (0.5 * phase + index * np.pi) / p.k


def _refine_minimum(state, guess, theta, p, window):
    """Golden-section search on [guess - window, guess + window] polished by Newton steps"""
    result = minimize_scalar(
        lambda z: state_potential(state, z, theta, p),
        bounds=(guess - window, guess + window),
        method='bounded',
        options={'xatol': 1e-10 / p.k},
    )
    z = float(result.x)
    for _ in range(NEWTON_STEPS):
        curvature = potential_derivative(state, z, theta, p, dz=2)
        if curvature <= 0:
            break
        step = potential_derivative(state, z, theta, p, dz=1) / curvature
        z -= step
        if abs(step) < 1e-15 / p.k:
            break
    return z


def track_well(state, theta_path, seed_index, p):
    """
    Follow one well of V^state continuously along a path of angles.

    Args:
        state: 'a' or 'b'
        theta_path: sequence of angles (consecutive values close enough that
            the minimum moves less than a quarter period per step)
        seed_index: well index; index 0 of both states meets at z = 0 when theta = 0
        p: LatticeParams

    Returns:
        list: WellApprox per angle

    Raises:
        LostMinimumError: curvature below tolerance or a jump of a quarter period
    """
    quarter = 0.25 * p.site_spacing
    curvature_floor = CURVATURE_TOLERANCE * p.depth * p.k ** 2
    wells = []
    previous = None

    for theta in np.asarray(theta_path, dtype=float):
        guess = _seed_center(state, seed_index, theta, p) if previous is None else previous
        center = _refine_minimum(state, guess, theta, p, quarter)
        curvature = potential_derivative(state, center, theta, p, dz=2)
        slope = potential_derivative(state, center, theta, p, dz=1)

        if curvature < curvature_floor:
            logger.error(f'well {seed_index} of state {state} flattened at theta={theta:.6f}')
            raise LostMinimumError(
                f'curvature {curvature:.3e} below {curvature_floor:.3e} at theta={theta:.6f}'
            )
        if abs(slope) > 1e-8 * p.depth * p.k:
            raise LostMinimumError(f'no stationary point near z={guess:.6e} at theta={theta:.6f}')
        if previous is not None and abs(center - previous) >= quarter:
            raise LostMinimumError(
                f'tracked minimum jumped by {abs(center - previous):.3e} at theta={theta:.6f}'
            )

        wells.append(WellApprox(
            center=center,
            omega=float(np.sqrt(curvature / p.mass)),
            depth=float(state_potential(state, center, theta, p)),
            index=seed_index,
            theta=float(theta),
        ))
        previous = center

    return wells


def theta_schedule(t, tau_r, tau_i):
    """
    Polarization angle theta(t) = pi (1 - s(t)) / 2, with s the sigmoid approach
    profile; theta = 0 at t = 0 and theta -> pi/2 for |t| -> infinity.
    """
    return 0.5 * np.pi * (1.0 - sigmoid_shape(t, tau_r, tau_i)[0])


def theta_schedule_rates(t, tau_r, tau_i):
    """theta(t) and its first two time derivatives"""
    s, ds, d2s = sigmoid_shape(t, tau_r, tau_i)
    return 0.5 * np.pi * (1.0 - s), -0.5 * np.pi * ds, -0.5 * np.pi * d2s


def _well_kinematics(state, wells, theta_dot, theta_ddot, p):
    """Center velocity, acceleration and frequency rate from implicit differentiation"""
    z = np.array([w.center for w in wells])
    theta = np.array([w.theta for w in wells])
    omega = np.array([w.omega for w in wells])

    v_zz = potential_derivative(state, z, theta, p, dz=2)
    v_zt = potential_derivative(state, z, theta, p, dz=1, dtheta=1)
    v_zzz = potential_derivative(state, z, theta, p, dz=3)
    v_zzt = potential_derivative(state, z, theta, p, dz=2, dtheta=1)
    v_ztt = potential_derivative(state, z, theta, p, dz=1, dtheta=2)

    dz_dtheta = -v_zt / v_zz
    d2z_dtheta2 = -(v_ztt + 2.0 * v_zzt * dz_dtheta + v_zzz * dz_dtheta ** 2) / v_zz
    velocity = dz_dtheta * theta_dot
    acceleration = d2z_dtheta2 * theta_dot ** 2 + dz_dtheta * theta_ddot
    omega_rate = (v_zzz * velocity + v_zzt * theta_dot) / (2.0 * p.mass * omega)
    return z, omega, velocity, acceleration, omega_rate


def lattice_to_trajectories(tau_r, tau_i, p, samples=DEFAULT_PATH_SAMPLES, tau=None):
    """
    Trap trajectories of the two colliding wells for the theta(t) sweep.

    The motion axis x points along -z so that the a well moves towards +x and
    the b well towards -x. Atom 1 sits at x = -pi/(2k), atom 2 at +pi/(2k)
    (separation d = pi/k); the a well of atom 1 and the b well of atom 2 meet
    at x = 0 when theta = 0.

    Args:
        tau_r: rise time of the schedule
        tau_i: interaction time of the schedule
        p: LatticeParams
        samples: number of angles sampled over [-tau, tau]
        tau: half window; defaults to default_half_window(tau_r, tau_i)

    Returns:
        tuple: (Trajectory for a, Trajectory for b)
    """
    if tau is None:
        tau = default_half_window(tau_r, tau_i)
    times = np.linspace(-tau, tau, samples)
    theta, theta_dot, theta_ddot = theta_schedule_rates(times, tau_r, tau_i)

    trajectories = []
    for state in STATES:
        wells = track_well(state, theta, 0, p)
        reference = track_well(state, [0.5 * np.pi], 0, p)[0].center
        z, omega, velocity, acceleration, omega_rate = _well_kinematics(
            state, wells, theta_dot, theta_ddot, p
        )
        profile = SampledProfile(
            times,
            offsets=-(z - reference),
            omegas=omega,
            velocities=-velocity,
            accelerations=-acceleration,
            omega_rates=omega_rate,
        )
        trajectories.append(Trajectory(profile, tau, label=f'lattice-{state}'))
        logger.debug(
            f'lattice well {state}: max |offset| {np.max(np.abs(z - reference)):.4e}, '
            f'omega range [{omega.min():.4f}, {omega.max():.4f}]'
        )

    return trajectories[0], trajectories[1]


def lattice_rows(traj_a, traj_b, p, units=None):
    """
    Well displacements and frequencies over time, raw and normalized by
    the site spacing d and the initial frequency.

    Args:
        traj_a: Trajectory of the a well
        traj_b: Trajectory of the b well
        p: LatticeParams
        units: optional UnitSystem adding SI columns
    """
    d = p.site_spacing
    omega0 = p.harmonic_frequency
    rows = []
    for t, xa, xb, wa, wb in zip(traj_a.times, traj_a.offsets, traj_b.offsets,
                                 traj_a.omegas, traj_b.omegas):
        row = {
            't': float(t),
            'delta_x_a': float(xa),
            'delta_x_b': float(xb),
            'omega_a': float(wa),
            'omega_b': float(wb),
            'omega_t': float(omega0 * t),
            'delta_x_a_over_d': float(xa / d),
            'one_plus_delta_x_b_over_d': float(1.0 + xb / d),
            'omega_a_over_omega': float(wa / omega0),
            'omega_b_over_omega': float(wb / omega0),
        }
        if units is not None:
            row.update({
                't_s': float(units.to_si_time(t)),
                'delta_x_a_m': float(units.to_si_length(xa)),
                'delta_x_b_m': float(units.to_si_length(xb)),
                'omega_a_rad_per_s': float(wa * units.omega),
                'omega_b_rad_per_s': float(wb * units.omega),
            })
        rows.append(row)
    return rows
