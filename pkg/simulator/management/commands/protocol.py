from ...exceptions import ConfigError
from ...protocols import run_protocol
from ._base import SimulatorCommand


class Command(SimulatorCommand):
    help = 'Run an internal-state protocol (Ramsey, EPR, GHZ or an explicit step list)'

    def run(self, config, options):
        if not config:
            raise ConfigError([('config', 'a protocol script is required')])
        script = config.get('protocol', config)
        return run_protocol(script)
