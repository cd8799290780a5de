import argparse
import logging

from django.core.management.base import BaseCommand, CommandError

from apps.experiments.config import resolve_run_config
from apps.gps.exceptions import (
    ConfigurationError, DataParseError, DegenerateBandwidthError, DescentViolationError, DomainError, GPSError,
    InputError, ModelFormatError, SolverError, UnsupportedOperationError,
)

logger = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_SOLVER = 4


def exit_code_for(error):
    if isinstance(error, (ConfigurationError, DomainError, UnsupportedOperationError)):
        return EXIT_USAGE
    if isinstance(error, (SolverError, DescentViolationError, DegenerateBandwidthError)):
        return EXIT_SOLVER
    if isinstance(error, (DataParseError, ModelFormatError, InputError, OSError)):
        return EXIT_DATA
    return EXIT_SOLVER


def float_list(text):
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected a comma-separated list of numbers, got {text!r}')


def name_list(text):
    return [part.strip() for part in text.split(',') if part.strip()]


class GpsCommand(BaseCommand):
    """Shared options, configuration resolution and error-to-exit-code mapping"""

    def add_arguments(self, parser):
        parser.add_argument('--config', help='TOML file with run configuration overrides')
        parser.add_argument('--seed', type=int, help='Base random seed')
        parser.add_argument('--jobs', type=int, help='Parallel jobs')
        parser.add_argument('--print-config', action='store_true', help='Print the resolved configuration and exit')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def overrides(self, options):
        return {'seed': options.get('seed'), 'jobs': options.get('jobs')}

    def handle(self, *args, **options):
        try:
            run_config = resolve_run_config(self.overrides(options), options.get('config'))
            if options.get('print_config'):
                self.stdout.write(run_config.to_toml(), ending='')
                return
            self.run(run_config, **options)
        except CommandError:
            raise
        except (GPSError, OSError) as error:
            logger.debug('Command failed', exc_info=True)
            raise CommandError(str(error), returncode=exit_code_for(error)) from error

    def run(self, run_config, **options):
        raise NotImplementedError

    def require(self, options, *names):
        missing = [f"--{name.replace('_', '-')}" for name in names if not options.get(name)]
        if missing:
            raise CommandError(f'missing required option(s): {", ".join(missing)}', returncode=EXIT_USAGE)

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(message))
