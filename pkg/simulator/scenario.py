"""
Scenario and sweep descriptions: parsing, field-level validation, presets
and conversion to internal-unit simulation inputs
"""
from copy import deepcopy
from dataclasses import asdict, dataclass, field
from itertools import product
from pathlib import Path
import hashlib
import json
import logging

import numpy as np
from django.conf import settings

from .exceptions import ConfigError
from .lattice import LatticeParams, lattice_to_trajectories
from .trajectory import default_half_window, sigmoid_trajectory, static_trajectory
from .two_particle import InteractionModel
from .units import RB87_MASS_AMU, UnitSystem

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).resolve().parent / 'presets'
PRESET_ALIASES = {
    'moving-trap': 'fig2',
    'lattice-rb87': 'fig3',
}
FAMILIES = ('sigmoid', 'lattice')
MIN_OPTIMIZER_STARTS = 20

BUILTIN_DEFAULTS = {
    'TOLERANCE': 1e-9,
    'BASIS_SIZE': 10,
    'OPTIMIZER_SEED': 1234,
    'OPTIMIZER_STARTS': 24,
    'OCCUPATION_CUTOFF': 1e-6,
}


def simulator_defaults():
    """Defaults from settings.SIMULATOR, falling back to the built-in values"""
    defaults = dict(BUILTIN_DEFAULTS)
    if settings.configured:
        defaults.update(getattr(settings, 'SIMULATOR', {}))
    return defaults


class _Reader:
    """Pulls typed fields out of one config section and collects every error"""

    def __init__(self, data, prefix, errors):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            errors.append((prefix, 'must be an object'))
            data = {}
        self.data = data
        self.prefix = prefix
        self.errors = errors

    def get(self, key, cast=float, default=None, required=False, positive=False, minimum=None):
        name = f'{self.prefix}.{key}'
        value = self.data.get(key, default)
        if value is None:
            if required:
                self.errors.append((name, 'is required'))
            return None
        try:
            value = cast(value)
        except (TypeError, ValueError):
            self.errors.append((name, f'expected {cast.__name__}, got {value!r}'))
            return None
        if positive and not value > 0:
            self.errors.append((name, 'must be positive'))
        if minimum is not None and value < minimum:
            self.errors.append((name, f'must be >= {minimum}'))
        return value

    def get_list(self, key, default, positive=False, nonnegative=False):
        name = f'{self.prefix}.{key}'
        values = self.data.get(key, default)
        # a sweep axis writes one number into a list field
        if isinstance(values, (int, float)) and not isinstance(values, bool):
            values = [values]
        if not isinstance(values, (list, tuple)) or not values:
            self.errors.append((name, 'must be a non-empty list'))
            return list(default)
        try:
            values = [float(v) for v in values]
        except (TypeError, ValueError):
            self.errors.append((name, 'must contain numbers'))
            return list(default)
        if nonnegative and any(v < 0 for v in values):
            self.errors.append((name, 'values must be >= 0'))
        if positive and any(v <= 0 for v in values):
            self.errors.append((name, 'values must be positive'))
        return values

    def unknown(self, allowed):
        for key in self.data:
            if key not in allowed:
                self.errors.append((f'{self.prefix}.{key}', 'unknown field'))


@dataclass(frozen=True)
class Species:
    mass_amu: float = RB87_MASS_AMU
    scattering_length_m: float = 5.1e-9
    loss_factors: tuple = (0.0,)


@dataclass(frozen=True)
class Trap:
    omega_rad_per_s: float = 2.0 * np.pi * 100e3
    omega_perp_rad_per_s: float = None


@dataclass(frozen=True)
class TrajectorySpec:
    family: str = 'sigmoid'
    tau_r_omega: float = 30.0
    tau_i_omega: float = 20.0
    separation_a0: float = None
    separation_m: float = None
    wavelength_m: float = None
    tau_omega: float = None
    samples: int = 8001
    path_samples: int = 1001


@dataclass(frozen=True)
class Numerics:
    basis_size: int = 10
    tolerance: float = 1e-9
    calibrated_contact: bool = True


@dataclass(frozen=True)
class Thermal:
    kT_over_hbar_omega: tuple = (0.0,)


@dataclass(frozen=True)
class FidelitySettings:
    optimizer_seed: int = 1234
    optimizer_starts: int = 24
    occupation_cutoff: float = 1e-6
    reextract_phases: bool = False


@dataclass(frozen=True)
class SimulationSetup:
    """Internal-unit inputs of one scenario"""

    units: UnitSystem
    traj_a: object
    traj_b: object
    interaction: InteractionModel
    separation: float
    lattice: LatticeParams = None


@dataclass(frozen=True)
class Scenario:
    """A complete, validated simulation request"""

    name: str = 'scenario'
    species: Species = field(default_factory=Species)
    trap: Trap = field(default_factory=Trap)
    trajectory: TrajectorySpec = field(default_factory=TrajectorySpec)
    numerics: Numerics = field(default_factory=Numerics)
    thermal: Thermal = field(default_factory=Thermal)
    fidelity: FidelitySettings = field(default_factory=FidelitySettings)
    protocol: dict = None

    @classmethod
    def from_dict(cls, data):
        """
        Build and validate a scenario.

        Raises:
            ConfigError: listing every invalid field
        """
        if not isinstance(data, dict):
            raise ConfigError([('', 'scenario must be a JSON object')])
        defaults = simulator_defaults()
        errors = []
        top = _Reader(data, 'scenario', errors)
        top.unknown({'name', 'species', 'trap', 'trajectory', 'numerics', 'thermal',
                     'fidelity', 'protocol', 'preset'})

        section = _Reader(data.get('species'), 'species', errors)
        section.unknown({'mass_amu', 'scattering_length_m', 'loss_factors'})
        species = Species(
            mass_amu=section.get('mass_amu', default=RB87_MASS_AMU, positive=True),
            scattering_length_m=section.get('scattering_length_m', default=5.1e-9),
            loss_factors=tuple(section.get_list('loss_factors', [0.0])),
        )
        if any(f > 0 for f in species.loss_factors):
            errors.append(('species.loss_factors', 'must be <= 0 (Im a_s <= 0 models loss)'))

        section = _Reader(data.get('trap'), 'trap', errors)
        section.unknown({'omega_rad_per_s', 'omega_perp_rad_per_s'})
        trap = Trap(
            omega_rad_per_s=section.get('omega_rad_per_s', required=True, positive=True),
            omega_perp_rad_per_s=section.get('omega_perp_rad_per_s', positive=True),
        )

        section = _Reader(data.get('trajectory'), 'trajectory', errors)
        section.unknown({f.name for f in TrajectorySpec.__dataclass_fields__.values()})
        family = section.get('family', cast=str, default='sigmoid')
        if family not in FAMILIES:
            errors.append(('trajectory.family', f'must be one of {FAMILIES}'))
        trajectory = TrajectorySpec(
            family=family,
            tau_r_omega=section.get('tau_r_omega', required=True, positive=True),
            tau_i_omega=section.get('tau_i_omega', required=True, minimum=0.0),
            separation_a0=section.get('separation_a0', positive=True),
            separation_m=section.get('separation_m', positive=True),
            wavelength_m=section.get('wavelength_m', positive=True),
            tau_omega=section.get('tau_omega', positive=True),
            samples=section.get('samples', cast=int, default=8001, minimum=5),
            path_samples=section.get('path_samples', cast=int, default=1001, minimum=5),
        )
        given = [name for name in ('separation_a0', 'separation_m', 'wavelength_m')
                 if getattr(trajectory, name) is not None]
        if len(given) != 1:
            errors.append(('trajectory', 'give exactly one of separation_a0, separation_m, wavelength_m'))
        if family == 'sigmoid' and trajectory.wavelength_m is not None:
            errors.append(('trajectory.wavelength_m', 'only used by the lattice family'))

        section = _Reader(data.get('numerics'), 'numerics', errors)
        section.unknown({'basis_size', 'tolerance', 'calibrated_contact'})
        numerics = Numerics(
            basis_size=section.get('basis_size', cast=int, default=defaults['BASIS_SIZE'], minimum=2),
            tolerance=section.get('tolerance', default=defaults['TOLERANCE'], positive=True),
            calibrated_contact=section.get('calibrated_contact', cast=bool, default=True),
        )

        section = _Reader(data.get('thermal'), 'thermal', errors)
        section.unknown({'kT_over_hbar_omega'})
        thermal = Thermal(tuple(section.get_list('kT_over_hbar_omega', [0.0], nonnegative=True)))

        section = _Reader(data.get('fidelity'), 'fidelity', errors)
        section.unknown({'optimizer_seed', 'optimizer_starts', 'occupation_cutoff', 'reextract_phases'})
        fidelity = FidelitySettings(
            optimizer_seed=section.get('optimizer_seed', cast=int, default=defaults['OPTIMIZER_SEED']),
            optimizer_starts=section.get('optimizer_starts', cast=int, default=defaults['OPTIMIZER_STARTS'],
                                         minimum=MIN_OPTIMIZER_STARTS),
            occupation_cutoff=section.get('occupation_cutoff', default=defaults['OCCUPATION_CUTOFF'],
                                          positive=True),
            reextract_phases=section.get('reextract_phases', cast=bool, default=False),
        )

        protocol = data.get('protocol')
        if protocol is not None and not isinstance(protocol, dict):
            errors.append(('protocol', 'must be an object'))

        if errors:
            raise ConfigError(errors)
        return cls(
            name=str(data.get('name', 'scenario')),
            species=species, trap=trap, trajectory=trajectory, numerics=numerics,
            thermal=thermal, fidelity=fidelity, protocol=protocol,
        )

    def to_dict(self):
        data = asdict(self)
        data['species']['loss_factors'] = list(self.species.loss_factors)
        data['thermal']['kT_over_hbar_omega'] = list(self.thermal.kT_over_hbar_omega)
        return data

    @property
    def hash(self):
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    @property
    def units(self):
        return UnitSystem.from_amu(self.species.mass_amu, self.trap.omega_rad_per_s)

    def interaction(self, loss_factor=0.0):
        units = self.units
        omega_perp = self.trap.omega_perp_rad_per_s or self.trap.omega_rad_per_s
        return InteractionModel.with_loss(
            units.to_internal_length(self.species.scattering_length_m),
            loss_factor,
            omega_perp=units.to_internal_frequency(omega_perp),
            calibrated=self.numerics.calibrated_contact,
        )

    def separation(self):
        """Site spacing in units of a0"""
        spec = self.trajectory
        if spec.separation_a0 is not None:
            return spec.separation_a0
        if spec.separation_m is not None:
            return self.units.to_internal_length(spec.separation_m)
        return 0.5 * self.units.to_internal_length(spec.wavelength_m)

    def build(self):
        """Trajectories and interaction in internal units"""
        spec = self.trajectory
        units = self.units
        separation = self.separation()
        tau = spec.tau_omega or default_half_window(spec.tau_r_omega, spec.tau_i_omega)

        if spec.family == 'sigmoid':
            traj_a = sigmoid_trajectory(spec.tau_r_omega, spec.tau_i_omega, separation,
                                        tau=tau, samples=spec.samples, label='sigmoid-a')
            traj_b = static_trajectory(tau, samples=spec.samples, label='static-b')
            lattice = None
        else:
            lattice = LatticeParams.from_wavelength(2.0 * separation)
            traj_a, traj_b = lattice_to_trajectories(
                spec.tau_r_omega, spec.tau_i_omega, lattice, samples=spec.path_samples, tau=tau,
            )
            traj_a = traj_a.resampled(spec.samples)
            traj_b = traj_b.resampled(spec.samples)

        return SimulationSetup(
            units=units, traj_a=traj_a, traj_b=traj_b,
            interaction=self.interaction(0.0), separation=separation, lattice=lattice,
        )


def available_presets():
    return sorted(path.stem for path in PRESET_DIR.glob('*.json'))


def load_preset(name):
    """Preset JSON by name; the descriptive aliases map onto fig2 and fig3"""
    path = PRESET_DIR / f'{PRESET_ALIASES.get(name, name)}.json'
    if not path.exists():
        raise ConfigError([('preset', f'unknown preset {name!r}; available: {available_presets()}')])
    with open(path) as handle:
        return json.load(handle)


def read_config(path):
    try:
        with open(path) as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise ConfigError([('config', f'{path} does not exist')])
    except json.JSONDecodeError as e:
        raise ConfigError([('config', f'{path} is not valid JSON: {e}')])


def merge(base, overrides):
    """Recursive dict merge; values in `overrides` win"""
    result = deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = merge(result[key], value)
        else:
            result[key] = deepcopy(value)
    return result


def scenario_data(config=None, preset=None):
    """
    Raw scenario dict from a preset, a config dict, or a config layered on a
    preset. A config may name its own base with a "preset" key.
    """
    config = dict(config or {})
    named = config.pop('preset', None)
    preset = preset or named
    if preset is None and not config:
        raise ConfigError([('config', 'give a config file or a preset')])
    base = load_preset(preset) if preset else {}
    return merge(base, config)


def load_scenario(config=None, preset=None):
    return Scenario.from_dict(scenario_data(config, preset))


def set_path(data, path, value):
    """Set a dotted path such as 'trajectory.tau_r_omega' in a nested dict"""
    keys = path.split('.')
    target = data
    for key in keys[:-1]:
        if not isinstance(target.get(key), dict):
            target[key] = {}
        target = target[key]
    target[keys[-1]] = value


@dataclass(frozen=True)
class SweepAxis:
    path: str
    values: tuple


@dataclass(frozen=True)
class SweepSpec:
    """One or two swept scenario fields; grid points run in row-major order"""

    axes: tuple

    @classmethod
    def from_dict(cls, data):
        errors = []
        axes_data = data.get('axes') if isinstance(data, dict) else None
        if not isinstance(axes_data, list) or not 1 <= len(axes_data) <= 2:
            raise ConfigError([('sweep.axes', 'one or two axes required')])
        axes = []
        for index, axis in enumerate(axes_data):
            name = f'sweep.axes[{index}]'
            if not isinstance(axis, dict) or not isinstance(axis.get('path'), str):
                errors.append((f'{name}.path', 'dotted scenario path required'))
                continue
            values = axis.get('values')
            if not isinstance(values, list) or not values:
                errors.append((f'{name}.values', 'must be a non-empty list'))
                continue
            try:
                values = [float(v) for v in values]
            except (TypeError, ValueError):
                errors.append((f'{name}.values', 'must contain numbers'))
                continue
            steps = np.diff(values)
            if steps.size and not (np.all(steps > 0) or np.all(steps < 0)):
                errors.append((f'{name}.values', 'must be strictly monotone'))
            axes.append(SweepAxis(axis['path'], tuple(values)))
        if len({axis.path for axis in axes}) != len(axes):
            errors.append(('sweep.axes', 'axes must sweep different fields'))
        if errors:
            raise ConfigError(errors)
        return cls(tuple(axes))

    @property
    def shape(self):
        return tuple(len(axis.values) for axis in self.axes)

    def points(self):
        """List of (grid index, {path: value})"""
        ranges = [range(len(axis.values)) for axis in self.axes]
        return [
            (index, {axis.path: axis.values[i] for axis, i in zip(self.axes, index)})
            for index in product(*ranges)
        ]

    def as_dict(self):
        return {'axes': [{'path': axis.path, 'values': list(axis.values)} for axis in self.axes]}
