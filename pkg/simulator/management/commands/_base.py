"""
Shared plumbing of the simulator management commands
"""
from django.core.management.base import BaseCommand, CommandError
import logging

from ...exceptions import ConfigError, SimulatorError
from ...runner import emit
from ...scenario import read_config

logger = logging.getLogger(__name__)

CONFIG_ERROR = 1
NUMERIC_ERROR = 2


class SimulatorCommand(BaseCommand):
    """Adds --config/--out/--format and maps simulator failures to exit codes"""

    default_format = 'json'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='JSON configuration file')
        parser.add_argument('--out', help='output file (stdout when omitted)')
        parser.add_argument('--format', choices=['csv', 'json'], default=self.default_format)

    def handle(self, *args, **options):
        try:
            config = read_config(options['config']) if options.get('config') else None
            results = self.run(config, options)
            text = emit(results, options['format'], options.get('out'))
        except ConfigError as e:
            for field, message in e.errors:
                self.stderr.write(f'{field}: {message}' if field else message)
            raise CommandError(f'invalid configuration: {e}', returncode=CONFIG_ERROR)
        except SimulatorError as e:
            logger.error(f'{self.__class__.__module__} failed: {e}')
            raise CommandError(str(e), returncode=NUMERIC_ERROR)

        if options.get('out'):
            self.stdout.write(self.style.SUCCESS(f'wrote {options["out"]}'))
        else:
            self.stdout.write(text, ending='')

    def run(self, config, options):
        raise NotImplementedError
