from ...runner import TRACE_KINDS, run_scenario, trace_scenario
from ...scenario import load_scenario
from ._base import SimulatorCommand


class Command(SimulatorCommand):
    help = 'Run one scenario: trajectories, four-branch channel and minimum fidelity'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--preset', help='shipped scenario (fig2, fig3) used as the base')
        parser.add_argument('--trace', choices=TRACE_KINDS,
                            help='emit per-sample rows of the trajectories, one atom or the colliding pair')

    def run(self, config, options):
        scenario = load_scenario(config, options.get('preset'))
        if options.get('trace'):
            return trace_scenario(scenario, options['trace'])
        return run_scenario(scenario)
