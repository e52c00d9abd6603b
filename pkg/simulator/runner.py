"""
Scenario pipeline: trajectories -> gate channel -> fidelity, parameter
sweeps across worker processes and result emission
"""
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
import csv
import io
import json
import logging

import numpy as np

from . import __version__
from .exceptions import ConfigError, EmitError, SimulatorError
from .gate_fidelity import min_fidelity, occupied_pairs, simulate_channel, thermal_motional_state
from .protocols import run_protocol
from .scenario import Scenario, set_path
from .single_particle import evolve_single_particle, single_particle_rows
from .trajectory import analyze_trajectory, trajectory_rows
from .two_particle import (
    collisional_phase_adiabatic,
    collisional_phase_dressed,
    evolve_two_particle,
    regime_report,
    two_particle_rows,
)

logger = logging.getLogger(__name__)

TOOL_NAME = 'collision-gate'
GRID_COLUMNS = ('loss_factor', 'kT_over_hbar_omega', 'F', 'F_avg', 'phi_ab', 'leakage', 'norm_loss')


def units_record(scenario):
    units = scenario.units
    return {
        'length': 'a0',
        'a0_m': float(units.length),
        'time': '1/omega',
        'omega_rad_per_s': float(units.omega),
        'energy': 'hbar*omega',
        'temperature': 'kT/(hbar*omega)',
        'phase': 'rad',
    }


def _thermal_weights(scenario, kt):
    populations = thermal_motional_state(kt, 1.0, scenario.numerics.basis_size)
    return occupied_pairs(populations, scenario.fidelity.occupation_cutoff)


def run_scenario(scenario):
    """
    Run the full pipeline for one scenario.

    Returns:
        dict: JSON-ready record with scenario echo, units, version, the
        extracted phases and one FidelityReport per (loss factor, temperature)
    """
    logger.info(f'running scenario {scenario.name} ({scenario.hash[:12]})')
    setup = scenario.build()
    numerics = scenario.numerics
    options = scenario.fidelity

    colliding = (setup.traj_a.shifted(0.0), setup.traj_b.shifted(setup.separation))
    pairs = sorted(_thermal_weights(scenario, max(scenario.thermal.kT_over_hbar_omega)))

    results = []
    channels = {}
    for loss_factor in scenario.species.loss_factors:
        interaction = scenario.interaction(loss_factor)
        channel = simulate_channel(
            setup.traj_a, setup.traj_b, interaction, setup.separation,
            numerics.basis_size, numerics.tolerance, initial_pairs=pairs,
        )
        channels[loss_factor] = channel
        for kt in scenario.thermal.kT_over_hbar_omega:
            report = min_fidelity(
                channel, _thermal_weights(scenario, kt),
                seed=options.optimizer_seed, starts=options.optimizer_starts,
                reextract_phases=options.reextract_phases,
            )
            logger.info(f'loss {loss_factor:g}, kT {kt:g}: F = {report.fidelity:.6f}')
            results.append({
                'loss_factor': loss_factor,
                'kT_over_hbar_omega': kt,
                'report': report.as_dict(),
            })

    reference = channels[scenario.species.loss_factors[0]]
    record = {
        'tool': TOOL_NAME,
        'version': __version__,
        'scenario': scenario.to_dict(),
        'scenario_hash': scenario.hash,
        'units': units_record(scenario),
        'separation_a0': float(setup.separation),
        'trajectories': {
            'a': analyze_trajectory(setup.traj_a).as_dict(),
            'b': analyze_trajectory(setup.traj_b).as_dict(),
        },
        'regime': regime_report(*colliding, setup.interaction),
        'phases': reference.phases.as_dict(),
        'adiabatic_phase_ab': collisional_phase_adiabatic(*colliding, setup.interaction),
        'dressed_phase_ab': collisional_phase_dressed(*colliding, setup.interaction, numerics.basis_size),
        'truncation_warning': any(
            branch.truncation_warning for channel in channels.values() for branch in channel.branches.values()
        ),
        'results': results,
    }

    if scenario.protocol:
        script = dict(scenario.protocol)
        simulated = script.pop('use_simulated_phases', False)
        branch = reference.branches['ab']
        record['protocol'] = run_protocol(
            script,
            phases=reference.phases if simulated else None,
            collision_fidelity=abs(branch.amplitude()) ** 2 if simulated else 1.0,
        )
    return record


TRACE_KINDS = ('trajectory', 'single', 'pair')


def trace_scenario(scenario, kind):
    """
    Per-sample rows of one scenario instead of the gate pipeline.

    Args:
        kind: 'trajectory' (both trap schedules), 'single' (atom in level a
            from its ground state) or 'pair' (colliding branch ab from |0, 0>)

    Returns:
        list of dict rows
    """
    if kind not in TRACE_KINDS:
        raise ConfigError([('trace', f'unknown trace {kind!r}; use one of {TRACE_KINDS}')])
    setup = scenario.build()
    numerics = scenario.numerics
    logger.info(f'tracing {kind} for scenario {scenario.name}')

    if kind == 'trajectory':
        return [
            {'level': level, **row}
            for level, traj in (('a', setup.traj_a), ('b', setup.traj_b))
            for row in trajectory_rows(traj)
        ]
    if kind == 'single':
        state = evolve_single_particle(setup.traj_a, numerics.basis_size, numerics.tolerance, trace=True)
        return single_particle_rows(state)
    evolution = evolve_two_particle(
        setup.traj_a.shifted(0.0), setup.traj_b.shifted(setup.separation), setup.interaction,
        numerics.basis_size, numerics.tolerance, trace=True,
    )
    return two_particle_rows(evolution)


def _run_point(payload):
    """Worker entry: one sweep point, failures recorded instead of raised"""
    index, values, data = payload
    point = {'index': list(index), 'values': values}
    try:
        point['result'] = run_scenario(Scenario.from_dict(data))
        point['status'] = 'ok'
    except (SimulatorError, ArithmeticError, ValueError) as e:
        logger.error(f'sweep point {values} failed: {e}')
        point['status'] = 'failed'
        point['error'] = f'{type(e).__name__}: {e}'
    return point


def run_sweep(scenario, sweep, workers=1):
    """
    Evaluate the scenario on every grid point of the sweep.

    Points are independent; results come back in row-major grid order for
    any worker count. A failing point is recorded with its error.
    """
    base = scenario.to_dict()
    payloads = []
    for index, values in sweep.points():
        data = json.loads(json.dumps(base))
        for path, value in values.items():
            set_path(data, path, value)
        payloads.append((index, values, data))

    logger.info(f'sweep of {len(payloads)} points over {sweep.shape} with {workers} worker(s)')
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            points = list(executor.map(_run_point, payloads))
    else:
        points = [_run_point(payload) for payload in payloads]

    failed = sum(point['status'] != 'ok' for point in points)
    if failed:
        logger.warning(f'{failed} of {len(points)} sweep points failed')
    return {
        'tool': TOOL_NAME,
        'version': __version__,
        'scenario': base,
        'scenario_hash': scenario.hash,
        'units': units_record(scenario),
        'sweep': sweep.as_dict(),
        'shape': list(sweep.shape),
        'points': points,
    }


def result_rows(record):
    """Flat rows of a run or sweep record: one per (point, loss factor, temperature)"""
    if 'points' not in record:
        return [_summary_row(entry, record) for entry in record['results']]

    rows = []
    for point in record['points']:
        prefix = {path: value for path, value in point['values'].items()}
        if point['status'] != 'ok':
            rows.append({**prefix, 'status': 'failed', **{column: '' for column in GRID_COLUMNS}})
            continue
        for entry in point['result']['results']:
            rows.append({**prefix, 'status': 'ok', **_summary_row(entry, point['result'])})
    return rows


def _summary_row(entry, record):
    report = entry['report']
    return {
        'loss_factor': entry['loss_factor'],
        'kT_over_hbar_omega': entry['kT_over_hbar_omega'],
        'F': report['F'],
        'F_avg': report['F_avg'],
        'phi_ab': record['phases']['ab'],
        'leakage': report['leakage']['ab'],
        'norm_loss': report['norm_loss']['ab'],
    }


def _to_json(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f'{type(value).__name__} is not JSON serializable')


def render(results, fmt):
    """Text of a record (json) or of rows / a record flattened to rows (csv)"""
    if fmt == 'json':
        return json.dumps(results, indent=2, default=_to_json) + '\n'
    if fmt == 'csv':
        rows = results if isinstance(results, list) else result_rows(results)
        if not rows:
            return ''
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=list(rows[0]), lineterminator='\n')
        writer.writeheader()
        writer.writerows(rows)
        return buffer.getvalue()
    raise ConfigError([('format', f'unknown format {fmt!r}; use csv or json')])


def emit(results, fmt, path=None):
    """
    Write results as csv or json; without a path the text is returned.

    Raises:
        EmitError: the file could not be written
    """
    text = render(results, fmt)
    if path is None:
        return text
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        logger.error(f'could not write {path}: {e}')
        raise EmitError(path, e.strerror or str(e))
    logger.info(f'wrote {fmt} results to {path}')
    return text
