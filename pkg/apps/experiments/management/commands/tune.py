from apps.experiments.files import atomic_write_text
from apps.experiments.pipeline import tune
from apps.gps.serializers import dump_model

from ._base import GpsCommand, float_list
from .train import add_training_arguments, load_training_data, training_overrides


class Command(GpsCommand):
    help = 'Grid-search hyperparameters by calibration-set cardinality'

    def add_command_arguments(self, parser):
        add_training_arguments(parser)
        parser.add_argument('--C-grid', type=float_list, dest='C_grid')
        parser.add_argument('--C1-grid', type=float_list, dest='C1_grid')
        parser.add_argument('--C2-grid', type=float_list, dest='C2_grid')
        parser.add_argument('--sigma-percentiles', type=float_list)
        parser.add_argument('--out-table', help='CSV with the calibration cardinality of every candidate')

    def overrides(self, options):
        values = super().overrides(options)
        values.update(training_overrides(options))
        values.update({key: options.get(key) for key in ('C_grid', 'C1_grid', 'C2_grid', 'sigma_percentiles')})
        return values

    def run(self, run_config, **options):
        train, pool = load_training_data(self, run_config, options)
        result = tune(run_config, train, pool)
        if options.get('out_model'):
            atomic_write_text(options['out_model'], dump_model(result.fit.model))
        if options.get('out_table'):
            atomic_write_text(options['out_table'], result.table().to_csv(index=False, lineterminator='\n'))
        params = ', '.join(f'{key}={value:g}' for key, value in result.best.params.items())
        self.success(
            f'Best of {len(result.candidates)} candidates: {params} '
            f'(calibration cardinality {result.best.cardinality:.4f})'
        )
