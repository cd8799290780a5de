from django.core.management.base import CommandError

from apps.experiments.datagen import load_csv, load_features
from apps.experiments.files import atomic_write_text
from apps.experiments.pipeline import fit_model
from apps.gps.serializers import dump_model
from apps.gps.training import METHOD_CHOICES, OCSVM

from ._base import EXIT_USAGE, GpsCommand


def add_training_arguments(parser):
    parser.add_argument('--method', choices=[value for value, _ in METHOD_CHOICES])
    parser.add_argument('--gamma', type=float, help='Target per-class non-coverage rate')
    parser.add_argument('--train', help='Labeled training CSV')
    parser.add_argument('--test', help='Unlabeled (or labeled) test pool CSV')
    parser.add_argument('--out-model', help='Where to write the model file')


def training_overrides(options):
    return {'method': options.get('method'), 'gamma': options.get('gamma')}


def load_training_data(command, run_config, options):
    command.require(options, 'train')
    if run_config.method != OCSVM and not options.get('test'):
        raise CommandError(f'method {run_config.method!r} needs the unlabeled test pool (--test)',
                           returncode=EXIT_USAGE)
    train = load_csv(options['train'], run_config.label_column, run_config.outlier_token)
    pool = load_features(options['test'], run_config.label_column) if options.get('test') else None
    return train, pool


class Command(GpsCommand):
    help = 'Fit a calibrated set-valued classifier and write the model file'

    def add_command_arguments(self, parser):
        add_training_arguments(parser)
        parser.add_argument('--C', type=float, dest='C')
        parser.add_argument('--C1', type=float, dest='C1')
        parser.add_argument('--C2', type=float, dest='C2')
        parser.add_argument('--sigma', type=float, help='Gaussian bandwidth (default: percentile rule)')
        parser.add_argument('--nu', type=float, help='OCSVM nu (default: gamma)')
        parser.add_argument('--plug-in', action='store_true', help='Skip calibration and keep zero thresholds')

    def overrides(self, options):
        values = super().overrides(options)
        values.update(training_overrides(options))
        values.update({key: options.get(key) for key in ('C', 'C1', 'C2', 'sigma', 'nu')})
        if options.get('plug_in'):
            values['calibrate'] = False
        return values

    def run(self, run_config, **options):
        self.require(options, 'out_model')
        train, pool = load_training_data(self, run_config, options)
        fit = fit_model(run_config, train, pool)
        atomic_write_text(options['out_model'], dump_model(fit.model))
        thresholds = ', '.join(f'{name}={tau:.4g}' for name, tau in zip(fit.model.class_names, fit.model.thresholds))
        self.success(f'Trained {run_config.method} model for {fit.model.n_classes} classes ({thresholds})')
