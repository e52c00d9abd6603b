"""
Four-branch phase gate channel and its minimum fidelity over two-qubit inputs
"""
from dataclasses import dataclass, field
from itertools import combinations
import logging

import numpy as np
from scipy.optimize import minimize

from .exceptions import ChannelError
from .single_particle import DEFAULT_BASIS_SIZE, DEFAULT_TOLERANCE, single_particle_propagator
from .two_particle import TwoParticleState, evolve_two_particle

logger = logging.getLogger(__name__)

BRANCHES = ('aa', 'ab', 'ba', 'bb')
DEFAULT_OCCUPATION_CUTOFF = 1e-6
DEFAULT_OPTIMIZER_SEED = 1234
DEFAULT_OPTIMIZER_STARTS = 24
FACE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class GatePhases:
    """
    Single-atom phases a, b (and c for a third level) and the collisional
    phases of each colliding level pair.
    """

    a: float = 0.0
    b: float = 0.0
    ab: float = 0.0
    c: float = 0.0
    ac: float = 0.0
    bc: float = 0.0

    def single(self, level):
        return getattr(self, level)

    def collision(self, level_1, level_2):
        """Collisional phase when atom 1 is in level_1 and atom 2 in level_2"""
        return {
            ('a', 'b'): self.ab,
            ('a', 'c'): self.ac,
            ('c', 'a'): self.ac,
            ('b', 'c'): self.bc,
            ('c', 'b'): self.bc,
        }.get((level_1, level_2), 0.0)

    def branch_phase(self, branch):
        level_1, level_2 = branch
        return self.single(level_1) + self.single(level_2) + self.collision(level_1, level_2)

    def branch_phases(self):
        return np.array([self.branch_phase(branch) for branch in BRANCHES])

    def as_dict(self):
        return {'a': self.a, 'b': self.b, 'ab': self.ab}


def ideal_gate(phases):
    """Diagonal unitary in the basis (aa, ab, ba, bb)"""
    return np.diag(np.exp(1j * phases.branch_phases()))


@dataclass
class BranchResult:
    """Final motional amplitudes of one internal branch, keyed by initial motional pair"""

    finals: dict
    phase: float = 0.0
    truncation_warning: bool = False

    def amplitude(self, pair=(0, 0)):
        return complex(self.finals[pair][pair])

    @property
    def excitation_leakage(self):
        return TwoParticleState(self.finals[(0, 0)]).excitation_leakage


@dataclass
class GateChannel:
    """Simulated two-qubit channel with the motion still attached to each branch"""

    branches: dict
    phases: GatePhases
    basis_size: int = DEFAULT_BASIS_SIZE
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        missing = [branch for branch in BRANCHES if branch not in self.branches]
        if missing:
            raise ChannelError(f'channel lacks branches {missing}')
        pair_sets = {frozenset(self.branches[branch].finals) for branch in BRANCHES}
        if len(pair_sets) != 1:
            raise ChannelError('branches were evolved from different initial motional pairs')

    @classmethod
    def from_amplitudes(cls, amplitudes, phases=None):
        """Channel without motional structure: one complex amplitude per branch"""
        branches = {
            branch: BranchResult({(0, 0): np.array([[complex(amplitudes[branch])]])})
            for branch in BRANCHES
        }
        return cls(branches, phases or GatePhases(), basis_size=1)

    @property
    def pairs(self):
        return sorted(self.branches['aa'].finals)

    def _check_weights(self, weights):
        missing = [pair for pair in weights if pair not in self.branches['aa'].finals]
        if missing:
            raise ChannelError(f'channel has no evolution for initial motional pairs {missing}')

    def overlap_matrix(self, weights):
        """
        K[b, b'] = sum over (m, n) of p_m p_n <psi_b'^{mn} | psi_b^{mn}>

        Args:
            weights: dict (m, n) -> probability
        """
        self._check_weights(weights)
        overlap = np.zeros((4, 4), dtype=complex)
        for pair, weight in weights.items():
            vectors = [self.branches[branch].finals[pair].ravel() for branch in BRANCHES]
            for i, psi in enumerate(vectors):
                for j, chi in enumerate(vectors):
                    overlap[i, j] += weight * np.vdot(chi, psi)
        return overlap

    def target_phases(self, weights=None, reextract=False):
        """
        Branch phases of the ideal output: from the extracted GatePhases, or
        re-extracted from the thermal mean of the diagonal amplitudes.
        """
        if not reextract:
            return self.phases.branch_phases()
        self._check_weights(weights)
        means = [
            sum(weight * self.branches[branch].amplitude(pair) for pair, weight in weights.items())
            for branch in BRANCHES
        ]
        return np.angle(means)


def simulate_channel(traj_a, traj_b, interaction, separation, basis_size=DEFAULT_BASIS_SIZE,
                     tol=DEFAULT_TOLERANCE, initial_pairs=((0, 0),)):
    """
    Evolve the four internal branches. In branch xy atom 1 rides
    Trajectory^x from x = 0 and atom 2 rides Trajectory^y from x = separation.

    Returns:
        GateChannel with phases a, b from the single-atom evolutions and ab
        from the colliding branch
    """
    trajectories = {'a': traj_a, 'b': traj_b}
    propagators = {
        level: single_particle_propagator(traj, basis_size, tol)
        for level, traj in trajectories.items()
    }

    branches = {}
    for branch in BRANCHES:
        level_1, level_2 = branch
        evolution = evolve_two_particle(
            trajectories[level_1].shifted(0.0),
            trajectories[level_2].shifted(separation),
            interaction, basis_size, tol,
            initial_pairs=initial_pairs,
            references=(propagators[level_1], propagators[level_2]),
        )
        branches[branch] = BranchResult(
            finals=evolution.finals,
            phase=evolution.phase,
            truncation_warning=evolution.truncation_warning,
        )
        logger.info(
            f'branch {branch}: collisional phase {evolution.phase:.6e}, '
            f'leakage {evolution.excitation_leakage:.2e}, norm loss {evolution.norm_loss:.2e}'
        )

    phases = GatePhases(
        a=float(np.angle(propagators['a'][0, 0])),
        b=float(np.angle(propagators['b'][0, 0])),
        ab=branches['ab'].phase,
    )
    return GateChannel(branches, phases, basis_size)


def thermal_motional_state(kt, omega=1.0, basis_size=DEFAULT_BASIS_SIZE):
    """
    Boltzmann occupations p_n ~ exp(-n omega / kT) over the truncated basis.

    Args:
        kt: thermal energy in units of hbar omega0 (0 gives the ground state)
        omega: trap frequency in the same units
    """
    if kt < 0:
        raise ValueError(f'temperature must be non-negative, got {kt}')
    populations = np.zeros(basis_size)
    if kt == 0:
        populations[0] = 1.0
        return populations
    populations = np.exp(-np.arange(basis_size) * omega / kt)
    return populations / populations.sum()


def occupied_pairs(populations, cutoff=DEFAULT_OCCUPATION_CUTOFF):
    """Motional pairs with p_m p_n above the cutoff, renormalized"""
    weights = {
        (m, n): float(pm * pn)
        for m, pm in enumerate(populations)
        for n, pn in enumerate(populations)
        if pm * pn >= cutoff
    }
    total = sum(weights.values())
    return {pair: weight / total for pair, weight in weights.items()}


@dataclass
class FidelityReport:
    """
    Worst-case and Haar-averaged fidelity of a channel.

    `leakage` is per branch for the motional ground pair; `norm_loss` is the
    thermally averaged 1 - <psi_b|psi_b>.
    """

    fidelity: float
    average_fidelity: float
    minimizer: np.ndarray
    leakage: dict
    norm_loss: dict
    phases: GatePhases
    converged: bool = True

    def as_dict(self):
        return {
            'F': self.fidelity,
            'F_avg': self.average_fidelity,
            'argmin_state': [[float(c.real), float(c.imag)] for c in self.minimizer],
            'leakage': dict(self.leakage),
            'norm_loss': dict(self.norm_loss),
            'phases': self.phases.as_dict(),
            'converged': self.converged,
        }


def state_from_angles(angles):
    """
    Normalized two-qubit state from three polar angles and three relative phases
    """
    t1, t2, t3, p1, p2, p3 = angles
    moduli = np.array([
        np.cos(t1),
        np.sin(t1) * np.cos(t2),
        np.sin(t1) * np.sin(t2) * np.cos(t3),
        np.sin(t1) * np.sin(t2) * np.sin(t3),
    ])
    return moduli * np.exp(1j * np.array([0.0, p1, p2, p3]))


def _fidelity_matrix(overlap, target):
    """M[b, b'] = K[b, b'] exp(i (Phi_b' - Phi_b))"""
    return overlap * np.exp(1j * (target[None, :] - target[:, None]))


def output_fidelity(state, matrix):
    """<psi~| rho_out |psi~> for the input `state`"""
    weights = np.abs(state) ** 2
    return float(np.real(weights @ matrix @ weights))


def _face_search(matrix):
    """
    Exact minimum of w^T Re(M) w over the probability simplex (w_b = |psi_b|^2).

    The minimizer is a stationary point inside some face, so solving the
    stationarity system Q_S w = nu 1, sum(w) = 1 on all 15 faces and keeping
    the feasible solutions finds it.

    Returns:
        tuple: (value, state)
    """
    quadratic = 0.5 * np.real(matrix + matrix.T)
    best_value, best_weights = np.inf, None
    for size in range(1, 5):
        for face in combinations(range(4), size):
            index = list(face)
            system = np.zeros((size + 1, size + 1))
            system[:size, :size] = quadratic[np.ix_(index, index)]
            system[:size, size] = -1.0
            system[size, :size] = 1.0
            rhs = np.zeros(size + 1)
            rhs[size] = 1.0
            try:
                solution = np.linalg.solve(system, rhs)
            except np.linalg.LinAlgError:
                continue
            if np.any(solution[:size] < -FACE_TOLERANCE):
                continue
            weights = np.zeros(4)
            weights[index] = np.clip(solution[:size], 0.0, None)
            weights /= weights.sum()
            value = float(weights @ quadratic @ weights)
            if value < best_value:
                best_value, best_weights = value, weights
    return best_value, np.sqrt(best_weights).astype(complex)


def _angles_from_state(state):
    moduli = np.abs(state)
    t1 = np.arccos(np.clip(moduli[0], 0.0, 1.0))
    rest = np.hypot(moduli[2], moduli[3])
    t2 = np.arctan2(rest, moduli[1])
    t3 = np.arctan2(moduli[3], moduli[2])
    return np.array([t1, t2, t3, 0.0, 0.0, 0.0])


def minimize_output_fidelity(matrix, seed=DEFAULT_OPTIMIZER_SEED, starts=DEFAULT_OPTIMIZER_STARTS):
    """
    Minimum of <psi~| rho_out |psi~> over pure inputs: exact face search,
    then seeded multi-start L-BFGS-B on the angle parameterization from the
    face minimum, the four basis states and `starts` random points.

    Returns:
        tuple: (value, state, converged)
    """
    bounds = [(0.0, 0.5 * np.pi)] * 3 + [(0.0, 2.0 * np.pi)] * 3

    def objective(angles):
        return output_fidelity(state_from_angles(angles), matrix)

    rng = np.random.default_rng(seed)
    best_value, best_state = _face_search(matrix)
    initial_points = [_angles_from_state(best_state)]
    initial_points += [_angles_from_state(corner) for corner in np.eye(4)]
    initial_points += [rng.uniform([b[0] for b in bounds], [b[1] for b in bounds]) for _ in range(starts)]

    # only a strictly lower local minimum replaces the face result
    converged = True
    for point in initial_points:
        result = minimize(objective, point, method='L-BFGS-B', bounds=bounds,
                          options={'ftol': 1e-15, 'gtol': 1e-12, 'maxiter': 2000})
        if result.fun < best_value - FACE_TOLERANCE:
            best_value, best_state = float(result.fun), state_from_angles(result.x)
            converged = bool(result.success)
    return best_value, best_state, converged


def min_fidelity(channel, weights=None, seed=DEFAULT_OPTIMIZER_SEED, starts=DEFAULT_OPTIMIZER_STARTS,
                 reextract_phases=False):
    """
    Minimum fidelity after tracing out the motion, with the target built
    from the channel's own phases.

    Args:
        channel: GateChannel
        weights: dict (m, n) -> p_m p_n; defaults to the motional ground state
        seed: optimizer seed
        starts: number of random starts (at least 20 recommended)
        reextract_phases: target phases from the thermal mean amplitudes

    Returns:
        FidelityReport
    """
    if weights is None:
        weights = {(0, 0): 1.0}
    overlap = channel.overlap_matrix(weights)
    target = channel.target_phases(weights, reextract=reextract_phases)
    matrix = _fidelity_matrix(overlap, target)

    value, state, converged = minimize_output_fidelity(matrix, seed, starts)
    average = float(np.real(np.trace(matrix) + np.sum(matrix)) / 20.0)
    if not converged:
        logger.warning(f'fidelity minimization did not converge; best value {value:.8f} is an upper bound')

    return FidelityReport(
        fidelity=value,
        average_fidelity=average,
        minimizer=state,
        leakage={branch: float(channel.branches[branch].excitation_leakage) for branch in BRANCHES},
        norm_loss={branch: 1.0 - float(np.real(overlap[i, i])) for i, branch in enumerate(BRANCHES)},
        phases=channel.phases,
        converged=converged,
    )
