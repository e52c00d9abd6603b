from django.conf import settings

from ...exceptions import ConfigError
from ...runner import run_sweep
from ...scenario import SweepSpec, load_scenario
from ._base import SimulatorCommand


class Command(SimulatorCommand):
    help = 'Evaluate a scenario over a one- or two-axis parameter grid'
    default_format = 'csv'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--preset', help='shipped scenario (fig2, fig3) used as the base')
        parser.add_argument('--workers', type=int, default=settings.SIMULATOR['WORKERS'])

    def run(self, config, options):
        config = dict(config or {})
        if 'sweep' not in config:
            raise ConfigError([('sweep', 'the config must contain a "sweep" section')])
        sweep = SweepSpec.from_dict(config.pop('sweep'))
        scenario_config = config.pop('scenario', config)
        if options['workers'] < 1:
            raise ConfigError([('workers', 'must be at least 1')])
        return run_sweep(load_scenario(scenario_config, options.get('preset')), sweep, options['workers'])
