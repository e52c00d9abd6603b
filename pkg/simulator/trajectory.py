"""
Trap-center and trap-frequency schedules, kinetic phases and adiabaticity

All quantities are in internal oscillator units (hbar = m = omega0 = 1).
"""
from dataclasses import dataclass
import logging

import numpy as np
from scipy.integrate import cumulative_simpson, quad, simpson
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.special import expit

from .exceptions import TrajectoryError

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 8001
ENDPOINT_TOLERANCE = 1e-9


def sigmoid_shape(t, tau_r, tau_i):
    """
    Normalized approach profile s(t) = (1 + e^{-(tau_i/tau_r)^2}) / (1 + e^{(t^2 - tau_i^2)/tau_r^2})
    and its first two time derivatives.

    Args:
        t: time (scalar or array)
        tau_r: rise time, must be positive
        tau_i: interaction time

    Returns:
        tuple: (s, ds/dt, d2s/dt2)
    """
    if tau_r <= 0:
        raise TrajectoryError(f'tau_r must be positive, got {tau_r}')
    t = np.asarray(t, dtype=float)
    norm = 1.0 + np.exp(-(tau_i / tau_r) ** 2)
    sigma = expit((tau_i ** 2 - t ** 2) / tau_r ** 2)
    du = -2.0 * t / tau_r ** 2
    slope = sigma * (1.0 - sigma)
    value = norm * sigma
    first = norm * slope * du
    second = norm * (slope * (1.0 - 2.0 * sigma) * du ** 2 - 2.0 * slope / tau_r ** 2)
    return value[()], first[()], second[()]


def sigmoid_displacement(t, tau_r, tau_i, d):
    """Displacement d * s(t) of the moving trap; the partner trap stays at rest"""
    return d * sigmoid_shape(t, tau_r, tau_i)[0]


def default_half_window(tau_r, tau_i, threshold=ENDPOINT_TOLERANCE):
    """
    Half window tau = 2 tau_i + 5 tau_r, extended until s(tau) < threshold.
    """
    tau = 2.0 * abs(tau_i) + 5.0 * tau_r
    norm = 1.0 + np.exp(-(tau_i / tau_r) ** 2)
    needed = np.sqrt(tau_i ** 2 + tau_r ** 2 * np.log(norm / threshold))
    return max(tau, needed)


def _zeros(t):
    return np.zeros_like(np.asarray(t, dtype=float))[()]


class StaticProfile:
    """Trap at rest with constant frequency"""

    analytic = True
    breakpoints = ()

    def __init__(self, omega=1.0):
        self.omega_value = float(omega)

    def offset(self, t):
        return _zeros(t)

    def velocity(self, t):
        return _zeros(t)

    def acceleration(self, t):
        return _zeros(t)

    def omega(self, t):
        return (_zeros(t) + self.omega_value)[()]

    def omega_rate(self, t):
        return _zeros(t)


class SigmoidProfile(StaticProfile):
    """Closed-form sigmoid approach of amplitude d at constant frequency"""

    def __init__(self, tau_r, tau_i, amplitude, omega=1.0):
        super().__init__(omega)
        self.tau_r = float(tau_r)
        self.tau_i = float(tau_i)
        self.amplitude = float(amplitude)
        self.breakpoints = (-abs(self.tau_i), 0.0, abs(self.tau_i))

    def offset(self, t):
        return self.amplitude * sigmoid_shape(t, self.tau_r, self.tau_i)[0]

    def velocity(self, t):
        return self.amplitude * sigmoid_shape(t, self.tau_r, self.tau_i)[1]

    def acceleration(self, t):
        return self.amplitude * sigmoid_shape(t, self.tau_r, self.tau_i)[2]


class PiecewiseLinearProfile(StaticProfile):
    """Constant-velocity segments between knots (velocity is right-continuous)"""

    def __init__(self, knot_times, knot_offsets, omega=1.0):
        super().__init__(omega)
        self.knot_times = np.asarray(knot_times, dtype=float)
        self.knot_offsets = np.asarray(knot_offsets, dtype=float)
        if self.knot_times.shape != self.knot_offsets.shape or self.knot_times.size < 2:
            raise TrajectoryError('knot_times and knot_offsets need matching lengths >= 2')
        if np.any(np.diff(self.knot_times) <= 0):
            raise TrajectoryError('knot_times must be strictly increasing')
        self.slopes = np.diff(self.knot_offsets) / np.diff(self.knot_times)
        self.breakpoints = tuple(self.knot_times[1:-1])

    def offset(self, t):
        return np.interp(t, self.knot_times, self.knot_offsets)[()]

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        index = np.clip(np.searchsorted(self.knot_times, t, side='right') - 1,
                        0, self.slopes.size - 1)
        inside = (t >= self.knot_times[0]) & (t <= self.knot_times[-1])
        return np.where(inside, self.slopes[index], 0.0)[()]


class SampledProfile:
    """
    Profile interpolated from dense samples.

    Offsets use a cubic Hermite spline on the supplied velocities; when no
    velocities are given they come from centered differences.
    """

    analytic = False
    breakpoints = ()

    def __init__(self, times, offsets, omegas, velocities=None, accelerations=None,
                 omega_rates=None):
        times = np.asarray(times, dtype=float)
        offsets = np.asarray(offsets, dtype=float)
        omegas = np.asarray(omegas, dtype=float)
        if velocities is None:
            velocities = np.gradient(offsets, times, edge_order=2)
        velocities = np.asarray(velocities, dtype=float)

        self._offset = CubicHermiteSpline(times, offsets, velocities)
        if accelerations is None:
            self._velocity = CubicSpline(times, velocities)
        else:
            self._velocity = CubicHermiteSpline(times, velocities, accelerations)
        self._acceleration = self._velocity.derivative()
        if omega_rates is None:
            self._omega = CubicSpline(times, omegas)
        else:
            self._omega = CubicHermiteSpline(times, omegas, omega_rates)
        self._omega_rate = self._omega.derivative()

    def offset(self, t):
        return self._offset(t)[()]

    def velocity(self, t):
        return self._velocity(t)[()]

    def acceleration(self, t):
        return self._acceleration(t)[()]

    def omega(self, t):
        return self._omega(t)[()]

    def omega_rate(self, t):
        return self._omega_rate(t)[()]


class _ReversedProfile:
    """Time-reversed view t -> -t of another profile"""

    def __init__(self, profile):
        self.profile = profile
        self.analytic = profile.analytic
        self.breakpoints = tuple(-b for b in reversed(profile.breakpoints))

    def offset(self, t):
        return self.profile.offset(-np.asarray(t))

    def velocity(self, t):
        return -self.profile.velocity(-np.asarray(t))

    def acceleration(self, t):
        return self.profile.acceleration(-np.asarray(t))

    def omega(self, t):
        return self.profile.omega(-np.asarray(t))

    def omega_rate(self, t):
        return -self.profile.omega_rate(-np.asarray(t))


class Trajectory:
    """
    Time-parameterized trap center x(t) = base_position + offset(t) and trap
    frequency omega(t) over the window [-tau, tau].

    The trajectory is immutable; derived views (shifted, reversed, resampled)
    return new objects.
    """

    def __init__(self, profile, tau, samples=DEFAULT_SAMPLES, base_position=0.0, label=''):
        if tau <= 0:
            raise TrajectoryError(f'half window tau must be positive, got {tau}')
        if samples < 5:
            raise TrajectoryError(f'need at least 5 samples, got {samples}')
        if samples % 2 == 0:
            samples += 1
        self.profile = profile
        self.tau = float(tau)
        self.base_position = float(base_position)
        self.label = label
        self.times = np.linspace(-self.tau, self.tau, samples)
        self.offsets = np.asarray(profile.offset(self.times), dtype=float)
        self.velocities = np.asarray(profile.velocity(self.times), dtype=float)
        self.omegas = np.asarray(profile.omega(self.times), dtype=float)
        for array in (self.times, self.offsets, self.velocities, self.omegas):
            array.setflags(write=False)
        self._validate()

    def _validate(self):
        if np.any(self.omegas <= 0):
            raise TrajectoryError(f'trap frequency must stay positive ({self.label or "trajectory"})')
        scale = float(np.max(np.abs(self.offsets)))
        if scale == 0.0:
            return
        ends = max(abs(self.offsets[0]), abs(self.offsets[-1]))
        if ends > ENDPOINT_TOLERANCE * scale:
            raise TrajectoryError(
                f'offset does not vanish at +-tau: {ends:.3e} vs amplitude {scale:.3e}'
            )

    @classmethod
    def from_samples(cls, times, offsets, omegas, velocities=None, base_position=0.0, label=''):
        """Trajectory from uniformly spaced samples covering [-tau, tau]"""
        times = np.asarray(times, dtype=float)
        if not np.isclose(times[0], -times[-1]):
            raise TrajectoryError('samples must cover a symmetric window [-tau, tau]')
        profile = SampledProfile(times, offsets, omegas, velocities=velocities)
        return cls(profile, tau=times[-1], samples=times.size,
                   base_position=base_position, label=label)

    def position(self, t):
        return self.base_position + self.profile.offset(t)

    def offset(self, t):
        return self.profile.offset(t)

    def velocity(self, t):
        return self.profile.velocity(t)

    def acceleration(self, t):
        return self.profile.acceleration(t)

    def omega(self, t):
        return self.profile.omega(t)

    def omega_rate(self, t):
        return self.profile.omega_rate(t)

    def ground_state_size(self, t):
        """a0(t) = sqrt(hbar / (m omega(t)))"""
        return 1.0 / np.sqrt(self.profile.omega(t))

    def oscillator_velocity(self, t):
        """v_osc ~ a0 omega"""
        return np.sqrt(self.profile.omega(t))

    @property
    def samples(self):
        return self.times.size

    @property
    def constant_omega(self):
        return bool(np.ptp(self.omegas) <= 1e-12 * self.omegas[0])

    @property
    def amplitude(self):
        return float(np.max(np.abs(self.offsets)))

    def shifted(self, base_position):
        return Trajectory(self.profile, self.tau, self.samples, base_position, self.label)

    def reversed(self):
        return Trajectory(_ReversedProfile(self.profile), self.tau, self.samples,
                          self.base_position, self.label)

    def resampled(self, samples):
        return Trajectory(self.profile, self.tau, samples, self.base_position, self.label)

    def __repr__(self):
        return (f'Trajectory(label={self.label!r}, tau={self.tau:g}, samples={self.samples}, '
                f'base={self.base_position:g}, amplitude={self.amplitude:g})')


def static_trajectory(tau, omega=1.0, samples=DEFAULT_SAMPLES, base_position=0.0, label='static'):
    return Trajectory(StaticProfile(omega), tau, samples, base_position, label)


def sigmoid_trajectory(tau_r, tau_i, d, omega=1.0, tau=None, samples=DEFAULT_SAMPLES,
                       base_position=0.0, label='sigmoid'):
    """
    Trajectory whose offset follows the closed-form sigmoid approach.

    Args:
        tau_r: rise time
        tau_i: interaction time
        d: amplitude of the approach (d = 0 gives a trap at rest)
        omega: constant trap frequency
        tau: half window; defaults to default_half_window(tau_r, tau_i)
    """
    if tau is None:
        tau = default_half_window(tau_r, tau_i)
    return Trajectory(SigmoidProfile(tau_r, tau_i, d, omega), tau, samples, base_position, label)


def piecewise_linear_trajectory(knot_times, knot_offsets, omega=1.0, samples=DEFAULT_SAMPLES,
                                base_position=0.0, label='piecewise'):
    """Constant-velocity segments; the first and last knots fix the window [-tau, tau]"""
    knot_times = np.asarray(knot_times, dtype=float)
    if not np.isclose(knot_times[0], -knot_times[-1]):
        raise TrajectoryError('knots must span a symmetric window [-tau, tau]')
    profile = PiecewiseLinearProfile(knot_times, knot_offsets, omega)
    return Trajectory(profile, knot_times[-1], samples, base_position, label)


@dataclass(frozen=True)
class PhaseResult:
    """Kinetic phase of one trajectory together with its adiabaticity diagnostics"""

    kinetic_phase: float
    adiabaticity_peak: float
    adiabaticity_final: float
    acceleration_ratio: float
    approximate: bool = False

    def as_dict(self):
        return {
            'kinetic_phase': self.kinetic_phase,
            'adiabaticity_peak': self.adiabaticity_peak,
            'adiabaticity_final': self.adiabaticity_final,
            'acceleration_ratio': self.acceleration_ratio,
            'approximate': self.approximate,
        }


def kinetic_phase(traj, method='auto'):
    """
    Kinetic phase (m / 2 hbar) * integral of velocity^2 over [-tau, tau].

    Args:
        traj: Trajectory
        method: 'quadrature' (adaptive, split at the profile breakpoints),
            'samples' (composite Simpson on the dense samples) or 'auto'
            (quadrature for closed-form profiles, samples otherwise)

    Returns:
        float: phase in radians
    """
    if method == 'auto':
        method = 'quadrature' if traj.profile.analytic else 'samples'

    if method == 'samples':
        return 0.5 * float(simpson(traj.velocities ** 2, x=traj.times))

    if method == 'quadrature':
        points = [p for p in traj.profile.breakpoints if -traj.tau < p < traj.tau]
        value, error = quad(lambda t: float(traj.velocity(t)) ** 2, -traj.tau, traj.tau,
                            points=points or None, limit=500, epsabs=1e-14, epsrel=1e-13)
        logger.debug(f'kinetic phase quadrature {value:.12e} (error estimate {error:.1e})')
        return 0.5 * value

    raise ValueError(f'unknown kinetic phase method {method!r}')


def _accumulated_trap_phase(traj):
    """Phase Phi(t) with Phi = omega t for constant omega, integral of omega otherwise"""
    if traj.constant_omega:
        return traj.omegas[0] * traj.times
    return traj.omegas[0] * traj.times[0] + cumulative_simpson(traj.omegas, x=traj.times, initial=0.0)


def adiabaticity_profile(traj):
    """
    Adiabaticity functional |integral_{-tau}^{t} v(t') e^{i Phi(t')} dt'| / a0 on the sample grid.

    Returns:
        np.ndarray: values at traj.times
    """
    phase = _accumulated_trap_phase(traj)
    real = cumulative_simpson(traj.velocities * np.cos(phase), x=traj.times, initial=0.0)
    imag = cumulative_simpson(traj.velocities * np.sin(phase), x=traj.times, initial=0.0)
    return np.hypot(real, imag) * np.sqrt(traj.omegas[0])


def adiabaticity_functional(traj, t):
    """
    Adiabaticity functional |integral_{-tau}^{t} v(t') e^{i omega t'} dt'| / a0.

    Exact adaptive quadrature for constant omega. For a breathing trap the
    value uses the accumulated phase of omega(t) and is only a diagnostic.

    Args:
        traj: Trajectory
        t: upper integration limit

    Returns:
        float: dimensionless value
    """
    t = float(np.clip(t, -traj.tau, traj.tau))
    if t <= -traj.tau:
        return 0.0
    if not traj.constant_omega:
        logger.warning(f'adiabaticity of {traj.label or "trajectory"} with time-varying omega is approximate')
        return float(np.interp(t, traj.times, adiabaticity_profile(traj)))

    omega = float(traj.omegas[0])
    real, _ = quad(traj.velocity, -traj.tau, t, weight='cos', wvar=omega, limit=500)
    imag, _ = quad(traj.velocity, -traj.tau, t, weight='sin', wvar=omega, limit=500)
    return abs(complex(real, imag)) * np.sqrt(omega)


def analyze_trajectory(traj):
    """
    Kinetic phase plus adiabaticity and acceleration diagnostics.

    The acceleration ratio max|a| tau / v_osc measures the regime in which the
    kinetic-phase formula holds; no pass/fail threshold is applied.
    """
    profile = adiabaticity_profile(traj)
    if traj.constant_omega:
        final = adiabaticity_functional(traj, traj.tau)
    else:
        final = float(profile[-1])
    accelerations = np.asarray(traj.acceleration(traj.times), dtype=float)
    ratio = float(np.max(np.abs(accelerations)) * traj.tau / np.sqrt(traj.omegas[0]))
    return PhaseResult(
        kinetic_phase=kinetic_phase(traj),
        adiabaticity_peak=float(np.max(profile)),
        adiabaticity_final=float(final),
        acceleration_ratio=ratio,
        approximate=not traj.constant_omega,
    )


def trajectory_rows(traj):
    """CSV-ready rows: t, delta_x, velocity, omega, adiabaticity"""
    adiabaticity = adiabaticity_profile(traj)
    return [
        {
            't': float(t),
            'delta_x': float(x),
            'velocity': float(v),
            'omega': float(w),
            'adiabaticity': float(a),
        }
        for t, x, v, w, a in zip(traj.times, traj.offsets, traj.velocities, traj.omegas, adiabaticity)
    ]
