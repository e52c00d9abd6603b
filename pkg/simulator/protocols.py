"""
Internal-state register: laser pulses, collisional phase imprints and the
Ramsey, EPR and GHZ sequences built from them, plus the diagonal Fock-space
phase evolution of the lattice Hamiltonian
"""
from dataclasses import dataclass, field, replace
from itertools import product
import logging

import numpy as np
from scipy.integrate import quad, simpson

from .exceptions import ConfigError, TransitionError
from .gate_fidelity import GatePhases
from .two_particle import InteractionModel, collisional_phase_adiabatic

logger = logging.getLogger(__name__)

MAX_ATOMS = 12
AMPLITUDE_TABLE_LIMIT = 6
QUBIT_LEVELS = ('a', 'b')
ANCILLA_LEVELS = ('a', 'b', 'c')


@dataclass
class RegisterState:
    """
    Amplitudes over the product basis of N atoms; atom i carries the levels
    in levels[i]. `fidelity_bound` accumulates per-collision fidelities of
    imperfect gates.
    """

    levels: tuple
    amplitudes: np.ndarray
    fidelity_bound: float = 1.0

    def __post_init__(self):
        self.levels = tuple(tuple(levels) for levels in self.levels)
        if not 1 <= len(self.levels) <= MAX_ATOMS:
            raise ConfigError([('atoms', f'register holds 1 to {MAX_ATOMS} atoms, got {len(self.levels)}')])
        shape = tuple(len(levels) for levels in self.levels)
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(shape)

    @classmethod
    def product_state(cls, single_atom_states, levels=None):
        """
        Product of single-atom states, each a level name or a dict level -> amplitude.
        """
        if levels is None:
            levels = [QUBIT_LEVELS] * len(single_atom_states)
        vectors = []
        for atom_levels, state in zip(levels, single_atom_states):
            if isinstance(state, str):
                state = {state: 1.0}
            vector = np.zeros(len(atom_levels), dtype=complex)
            for level, amplitude in state.items():
                if level not in atom_levels:
                    raise TransitionError(f'level {level!r} not among {atom_levels}')
                vector[atom_levels.index(level)] = amplitude
            vectors.append(vector / np.linalg.norm(vector))
        amplitudes = vectors[0]
        for vector in vectors[1:]:
            amplitudes = np.multiply.outer(amplitudes, vector)
        return cls(levels, amplitudes)

    @classmethod
    def uniform(cls, atoms, level='a'):
        return cls.product_state([level] * atoms)

    @property
    def atoms(self):
        return len(self.levels)

    @property
    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def amplitude(self, labels):
        """Amplitude of a basis state written as a string such as 'abb'"""
        index = tuple(levels.index(label) for levels, label in zip(self.levels, labels))
        return complex(self.amplitudes[index])

    def population(self, atom, level):
        index = self.levels[atom].index(level)
        return float(np.sum(np.abs(np.take(self.amplitudes, index, axis=atom)) ** 2))

    def populations(self):
        return [
            {level: self.population(atom, level) for level in levels}
            for atom, levels in enumerate(self.levels)
        ]

    def reduced_purity(self, atom):
        """Purity tr(rho_i^2) of one atom's reduced state"""
        matrix = np.moveaxis(self.amplitudes, atom, 0).reshape(len(self.levels[atom]), -1)
        rho = matrix @ matrix.conj().T
        return float(np.real(np.trace(rho @ rho)))

    def table(self, threshold=1e-12):
        """Nonzero amplitudes as rows {'state', 're', 'im'}"""
        rows = []
        for index in product(*(range(len(levels)) for levels in self.levels)):
            value = self.amplitudes[index]
            if abs(value) > threshold:
                label = ''.join(self.levels[atom][i] for atom, i in enumerate(index))
                rows.append({'state': label, 're': float(value.real), 'im': float(value.imag)})
        return rows

    def copy(self):
        return replace(self, amplitudes=self.amplitudes.copy())


def pulse_matrix(area, phase):
    """Rotation |l> -> cos(A/2)|l> + e^{i phase} sin(A/2)|u> of a two-level transition"""
    c, s = np.cos(area / 2.0), np.sin(area / 2.0)
    return np.array([[c, -np.exp(-1j * phase) * s],
                     [np.exp(1j * phase) * s, c]])


def _parse_transition(transition):
    lower, upper = transition.replace('<->', '-').split('-')
    return lower.strip(), upper.strip()


def apply_pulse(reg, atoms, area, phase=0.0, transition='a-b'):
    """
    Resonant pulse of the given area and axis phase on each targeted atom.

    Args:
        reg: RegisterState
        atoms: indices of the addressed atoms
        transition: 'a-b', 'a-c' or 'c-b' (lower level first)

    Raises:
        TransitionError: an addressed atom lacks one of the levels
    """
    lower, upper = _parse_transition(transition)
    rotation = pulse_matrix(area, phase)
    amplitudes = reg.amplitudes.copy()
    for atom in atoms:
        levels = reg.levels[atom]
        if lower not in levels or upper not in levels:
            raise TransitionError(f'atom {atom} with levels {levels} has no {lower}-{upper} transition')
        full = np.eye(len(levels), dtype=complex)
        i, j = levels.index(lower), levels.index(upper)
        full[np.ix_([i, j], [i, j])] = rotation
        amplitudes = np.moveaxis(np.tensordot(full, amplitudes, axes=([1], [atom])), 0, atom)
    return replace(reg, amplitudes=amplitudes)


def apply_collision(reg, pair, phases, fidelity=1.0):
    """
    Imprint the gate phase table on a pair of atoms: the amplitude with atom i
    in level x and atom j in level y gains phi^x + phi^y + phi^{xy}.

    Args:
        reg: RegisterState
        pair: (i, j) with atom i in the role of atom 1
        phases: GatePhases
        fidelity: per-collision fidelity folded into reg.fidelity_bound
    """
    i, j = pair
    if i == j:
        raise ConfigError([('pair', 'collision needs two distinct atoms')])
    pattern = np.array([
        [phases.single(x) + phases.single(y) + phases.collision(x, y) for y in reg.levels[j]]
        for x in reg.levels[i]
    ])
    shape = [1] * reg.atoms
    shape[i], shape[j] = len(reg.levels[i]), len(reg.levels[j])
    if i > j:
        pattern = pattern.T
    factor = np.exp(1j * pattern).reshape(shape)
    return replace(reg, amplitudes=reg.amplitudes * factor, fidelity_bound=reg.fidelity_bound * fidelity)


def ramsey_signal(phi_ab, areas=(0.5 * np.pi, 0.5 * np.pi), analysis_phase=0.0, phases=None):
    """
    Pulse, collide, pulse on two atoms and return each atom's populations.

    With a common real pulse axis the signal is even in phi_ab; a nonzero
    analysis_phase on the second pulse makes it sensitive to the sign.

    Returns:
        list: per-atom dict level -> population
    """
    phases = replace(phases or GatePhases(), ab=phi_ab)
    first, second = areas
    reg = RegisterState.uniform(2)
    reg = apply_pulse(reg, (0, 1), first)
    reg = apply_collision(reg, (0, 1), phases)
    reg = apply_pulse(reg, (0, 1), second, analysis_phase)
    return reg.populations()


def estimate_collisional_phase(population_a):
    """
    |phi_ab| from atom 1's population in a after a pi/2 - collision - pi/2
    sequence, P_a = (1 - cos phi_ab) / 4.
    """
    if not -1e-12 <= population_a <= 0.5 + 1e-12:
        raise ValueError(f'population {population_a} outside the Ramsey range [0, 1/2]')
    return float(np.arccos(np.clip(1.0 - 4.0 * population_a, -1.0, 1.0)))


def estimate_scattering_length(phi_ab, traj_a, traj_b, omega_perp=1.0):
    """Scattering length from a measured |phi_ab| using the adiabatic phase per unit a_s"""
    per_unit = collisional_phase_adiabatic(traj_a, traj_b, InteractionModel(1.0, omega_perp))
    if per_unit == 0:
        raise ValueError('trajectories never overlap; the phase carries no information on a_s')
    return abs(phi_ab) / abs(per_unit)


def singlet_fidelity(reg):
    """
    Best overlap^2 of a two-atom state with a maximally entangled state
    under local unitaries, (sum of Schmidt coefficients)^2 / 2.
    """
    schmidt = np.linalg.svd(reg.amplitudes, compute_uv=False)
    return float(np.sum(schmidt) ** 2 / 2.0)


def epr_protocol(phi_ab, phases=None, collision_fidelity=1.0):
    """
    pi/2 pulses on both atoms, one collision, then a pi/2 pulse of axis phase
    pi on atom 2. phi_ab = pi yields -(|ab> - |ba>)/sqrt(2).

    Returns:
        tuple: (RegisterState, fidelity to the singlet-type target)
    """
    phases = replace(phases or GatePhases(), ab=phi_ab)
    reg = RegisterState.uniform(2)
    reg = apply_pulse(reg, (0, 1), 0.5 * np.pi)
    reg = apply_collision(reg, (0, 1), phases, collision_fidelity)
    reg = apply_pulse(reg, (1,), 0.5 * np.pi, np.pi)
    return reg, singlet_fidelity(reg) * reg.fidelity_bound


def ghz_fidelity(reg):
    """Overlap^2 with (|a..a> - |b..b>)/sqrt(2) maximized over local phases"""
    all_a = reg.amplitude('a' * reg.atoms)
    all_b = reg.amplitude('b' * reg.atoms)
    return float((abs(all_a) + abs(all_b)) ** 2 / 2.0)


def ideal_ghz_phases():
    """a-c and b-c collisions differing by pi, no other phases"""
    return GatePhases(ac=np.pi, bc=0.0)


def ghz_protocol(atoms, collision_phases=None, collision_fidelity=1.0, order=None):
    """
    Atom 1 in (|a> + |c>)/sqrt(2), the others in (|a> + |b>)/sqrt(2); atom 1
    collides with each of the others, then pi/2 pulses on atoms 2..N and a
    c -> b pi pulse on atom 1.

    Args:
        atoms: register size, 2 to 12
        collision_phases: one GatePhases per collision (or a single one for all)
        collision_fidelity: per-collision fidelity multiplier
        order: order in which atoms 2..N collide with atom 1

    Returns:
        tuple: (RegisterState, fidelity to the GHZ target)
    """
    if not 2 <= atoms <= MAX_ATOMS:
        raise ConfigError([('atoms', f'GHZ protocol needs 2 to {MAX_ATOMS} atoms, got {atoms}')])
    partners = list(order) if order is not None else list(range(1, atoms))
    if collision_phases is None:
        collision_phases = ideal_ghz_phases()
    if isinstance(collision_phases, GatePhases):
        collision_phases = {partner: collision_phases for partner in partners}
    elif not isinstance(collision_phases, dict):
        collision_phases = dict(zip(range(1, atoms), collision_phases))

    levels = [ANCILLA_LEVELS] + [QUBIT_LEVELS] * (atoms - 1)
    plus = {'a': 1.0, 'b': 1.0}
    reg = RegisterState.product_state([{'a': 1.0, 'c': 1.0}] + [plus] * (atoms - 1), levels)
    for partner in partners:
        reg = apply_collision(reg, (0, partner), collision_phases[partner], collision_fidelity)
    reg = apply_pulse(reg, range(1, atoms), 0.5 * np.pi, np.pi)
    reg = apply_pulse(reg, (0,), np.pi, np.pi, transition='c-b')
    return reg, ghz_fidelity(reg) * reg.fidelity_bound


def _integrate_coefficient(coefficient, t):
    """Integral from 0 to t of a constant, a callable or sampled (times, values)"""
    if callable(coefficient):
        value, _ = quad(coefficient, 0.0, t, limit=200)
        return value
    if isinstance(coefficient, (tuple, list)) and len(coefficient) == 2:
        times, values = (np.asarray(item, dtype=float) for item in coefficient)
        grid = np.linspace(0.0, t, max(times.size, 3) | 1)
        return float(simpson(np.interp(grid, times, values), x=grid))
    return float(coefficient) * t


@dataclass
class FockConfig:
    """
    Occupations (n_a, n_b) per lattice site and the coefficients of the
    diagonal lattice Hamiltonian. Coefficients may be constants, callables of
    t or sampled (times, values) pairs; u_ab maps (i, j) site pairs to a
    coefficient and defaults to no cross-site terms.
    """

    occupations: list
    omega_a: object = 0.0
    omega_b: object = 0.0
    u_aa: object = 0.0
    u_bb: object = 0.0
    u_ab: dict = field(default_factory=dict)

    def __post_init__(self):
        self.occupations = [tuple(int(n) for n in site) for site in self.occupations]
        if any(n < 0 for site in self.occupations for n in site):
            raise ConfigError([('occupations', 'must be non-negative integers')])

    @property
    def sites(self):
        return len(self.occupations)

    def evolve(self, t):
        """Occupations are conserved; returns (same configuration, accumulated phase)"""
        return replace(self, occupations=list(self.occupations)), fock_phase_evolution(self, t)


def fock_phase_evolution(cfg, t):
    """
    Phase of an occupation-number configuration under the diagonal lattice
    Hamiltonian: minus the time integral of
    sum_i [w_a n_a + w_b n_b + u_aa n_a (n_a - 1) + u_bb n_b (n_b - 1)] + sum_ij u_ab n_a_i n_b_j.
    """
    na = np.array([site[0] for site in cfg.occupations], dtype=float)
    nb = np.array([site[1] for site in cfg.occupations], dtype=float)
    energy = (_integrate_coefficient(cfg.omega_a, t) * na.sum()
              + _integrate_coefficient(cfg.omega_b, t) * nb.sum()
              + _integrate_coefficient(cfg.u_aa, t) * np.sum(na * (na - 1))
              + _integrate_coefficient(cfg.u_bb, t) * np.sum(nb * (nb - 1)))
    for (i, j), coefficient in cfg.u_ab.items():
        energy += _integrate_coefficient(coefficient, t) * na[i] * nb[j]
    return -float(energy)


def _parse_phases(entry, field_name):
    allowed = {'a', 'b', 'ab', 'c', 'ac', 'bc'}
    unknown = set(entry) - allowed
    if unknown:
        raise ConfigError([(field_name, f'unknown phase keys {sorted(unknown)}')])
    return GatePhases(**{key: float(value) for key, value in entry.items()})


def _run_steps(script, phases, collision_fidelity):
    errors = []
    atoms = script.get('atoms')
    if not isinstance(atoms, int) or not 1 <= atoms <= MAX_ATOMS:
        raise ConfigError([('protocol.atoms', f'integer between 1 and {MAX_ATOMS} required')])
    levels = [QUBIT_LEVELS] * atoms
    for key, atom_levels in script.get('levels', {}).items():
        levels[int(key)] = tuple(atom_levels)
    initial = script.get('initial', ['a'] * atoms)
    if len(initial) != atoms:
        errors.append(('protocol.initial', f'needs {atoms} entries'))
    if errors:
        raise ConfigError(errors)

    reg = RegisterState.product_state(initial, levels)
    for index, step in enumerate(script.get('steps', [])):
        name = f'protocol.steps[{index}]'
        op = step.get('op')
        if op == 'pulse':
            reg = apply_pulse(reg, step.get('atoms', range(atoms)), float(step['area']),
                              float(step.get('phase', 0.0)), step.get('transition', 'a-b'))
        elif op == 'collision':
            step_phases = _parse_phases(step['phases'], f'{name}.phases') if 'phases' in step else phases
            reg = apply_collision(reg, tuple(step['pair']), step_phases, collision_fidelity)
        else:
            raise ConfigError([(f'{name}.op', f'unknown operation {op!r}')])
    return reg


def run_protocol(script, phases=None, collision_fidelity=1.0):
    """
    Execute a protocol description: a builtin sequence ('epr', 'ghz',
    'ramsey') or an explicit list of pulse and collision steps.

    Returns:
        dict: JSON-ready summary with the amplitude table for registers of up
        to six atoms and the fidelity when a target is known
    """
    builtin = script.get('builtin')
    fidelity = None
    if builtin == 'epr':
        phi = float(script.get('phi_ab', phases.ab if phases else np.pi))
        reg, fidelity = epr_protocol(phi, phases, collision_fidelity)
    elif builtin == 'ghz':
        table = phases or ideal_ghz_phases()
        if 'phases' in script:
            table = _parse_phases(script['phases'], 'protocol.phases')
        reg, fidelity = ghz_protocol(int(script.get('atoms', 3)), table, collision_fidelity)
    elif builtin == 'ramsey':
        phi = float(script.get('phi_ab', phases.ab if phases else 0.0))
        areas = tuple(script.get('areas', (0.5 * np.pi, 0.5 * np.pi)))
        populations = ramsey_signal(phi, areas, float(script.get('analysis_phase', 0.0)), phases)
        return {
            'builtin': 'ramsey',
            'phi_ab': phi,
            'populations': populations,
            'estimated_phase': estimate_collisional_phase(populations[0]['a'])
            if areas == (0.5 * np.pi, 0.5 * np.pi) and script.get('analysis_phase', 0.0) == 0.0 else None,
        }
    elif builtin is None:
        reg = _run_steps(script, phases or GatePhases(), collision_fidelity)
        if script.get('target') == 'ghz':
            fidelity = ghz_fidelity(reg) * reg.fidelity_bound
        elif script.get('target') == 'epr':
            fidelity = singlet_fidelity(reg) * reg.fidelity_bound
    else:
        raise ConfigError([('protocol.builtin', f'unknown protocol {builtin!r}')])

    record = {'builtin': builtin, 'atoms': reg.atoms, 'norm': reg.norm}
    if reg.atoms <= AMPLITUDE_TABLE_LIMIT:
        record['amplitudes'] = reg.table()
    if fidelity is not None:
        record['fidelity'] = fidelity
    logger.info(f'protocol {builtin or "script"} on {reg.atoms} atoms: fidelity {fidelity}')
    return record
