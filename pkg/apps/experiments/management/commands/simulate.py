from pathlib import Path

from apps.experiments.datagen import EXAMPLE_1, EXAMPLE_2, SimSpec, save_csv, simulate

from ._base import GpsCommand

EXAMPLES = {1: EXAMPLE_1, 2: EXAMPLE_2}


class Command(GpsCommand):
    help = 'Generate train.csv and test.csv for a synthetic example'

    def add_command_arguments(self, parser):
        parser.add_argument('--example', type=int, choices=sorted(EXAMPLES), default=1)
        parser.add_argument('--n-per-class', type=int)
        parser.add_argument('--n-outlier', type=int)
        parser.add_argument('--n-test-per-class', type=int)
        parser.add_argument('--out', help='Output directory')

    def overrides(self, options):
        values = super().overrides(options)
        values.update(n_per_class=options.get('n_per_class'), n_outlier=options.get('n_outlier'))
        return values

    def run(self, run_config, **options):
        self.require(options, 'out')
        spec = SimSpec(
            example=EXAMPLES[options['example']],
            n_per_class=run_config.n_per_class,
            n_outlier=run_config.n_outlier,
            seed=run_config.seed,
            n_test_per_class=options.get('n_test_per_class'),
        )
        train, test = simulate(spec, tuple(tuple(box) for box in run_config.outlier_rectangles))
        out = Path(options['out'])
        for name, labeled in (('train.csv', train), ('test.csv', test)):
            save_csv(labeled, out / name, run_config.label_column, run_config.outlier_token)
        self.success(
            f'Wrote {len(train)} training and {len(test)} test rows '
            f'({train.n_features} features) to {out}'
        )
