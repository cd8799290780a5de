from django.core.management.base import CommandError

from apps.experiments.datagen import EXAMPLE_1, EXAMPLE_2, load_csv
from apps.experiments.files import atomic_write_text
from apps.experiments.ledger import record_table
from apps.experiments.metrics import format_table
from apps.experiments.pipeline import example_sweep_source, file_sweep_source, run_sweep

from ._base import EXIT_USAGE, GpsCommand, float_list, name_list

EXAMPLES = {1: EXAMPLE_1, 2: EXAMPLE_2}


class Command(GpsCommand):
    help = 'Scree table over a gamma grid, averaged over replications'

    def add_command_arguments(self, parser):
        parser.add_argument('--example', type=int, choices=sorted(EXAMPLES), help='Regenerate data per replication')
        parser.add_argument('--train', help='Labeled training CSV (instead of --example)')
        parser.add_argument('--test', help='Labeled test CSV (instead of --example)')
        parser.add_argument('--methods', type=name_list, help='Comma-separated methods (default: configured method)')
        parser.add_argument('--gammas', type=float_list, help='Comma-separated gamma grid')
        parser.add_argument('--replications', type=int)
        parser.add_argument('--refit', action='store_true', help='Retrain at every gamma instead of recalibrating')
        parser.add_argument('--n-per-class', type=int)
        parser.add_argument('--n-outlier', type=int)
        parser.add_argument('--out', help='Table CSV (default: stdout)')
        parser.add_argument('--record', action='store_true', help='Store the table in the experiment ledger')

    def overrides(self, options):
        values = super().overrides(options)
        values.update(
            sweep_gammas=options.get('gammas'),
            replications=options.get('replications'),
            n_per_class=options.get('n_per_class'),
            n_outlier=options.get('n_outlier'),
        )
        return values

    def run(self, run_config, **options):
        if options.get('example'):
            source = example_sweep_source(run_config, EXAMPLES[options['example']])
        elif options.get('train') and options.get('test'):
            train = load_csv(options['train'], run_config.label_column, run_config.outlier_token)
            test = load_csv(options['test'], run_config.label_column, run_config.outlier_token,
                            class_names=train.class_names)
            source = file_sweep_source(train, test)
        else:
            raise CommandError('give either --example or both --train and --test', returncode=EXIT_USAGE)

        methods = options.get('methods') or [run_config.method]
        result = run_sweep(run_config, source, methods, run_config.sweep_gammas, run_config.replications,
                           refit=options.get('refit', False))
        text = format_table(result.table)
        if options.get('out'):
            atomic_write_text(options['out'], text)
        else:
            self.stdout.write(text, ending='')
        for gamma, method, message in result.errors:
            self.stderr.write(f'gamma={gamma:g} method={method}: {message}')
        if options.get('record'):
            run = record_table('sweep', run_config, result.table, method=methods[0] if len(methods) == 1 else '',
                               replications=run_config.replications)
            self.success(f'Recorded sweep as run #{run.pk}')
