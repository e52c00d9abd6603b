from ...exceptions import ConfigError
from ...lattice import lattice_rows
from ...scenario import load_scenario
from ._base import SimulatorCommand


class Command(SimulatorCommand):
    help = 'Emit the well displacements and frequencies of a lattice scenario'
    default_format = 'csv'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--preset', help='shipped scenario (fig3) used as the base')

    def run(self, config, options):
        scenario = load_scenario(config, options.get('preset'))
        if scenario.trajectory.family != 'lattice':
            raise ConfigError([('trajectory.family', 'lattice output needs the lattice family')])
        setup = scenario.build()
        return lattice_rows(setup.traj_a, setup.traj_b, setup.lattice, setup.units)
