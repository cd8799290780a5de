from pathlib import Path

from apps.experiments.datagen import load_csv
from apps.experiments.files import atomic_write_text
from apps.experiments.ledger import record_table
from apps.experiments.metrics import format_table, metrics_frame, report_rows
from apps.experiments.pipeline import evaluate_predictions, parse_predictions
from apps.gps.serializers import load_model

from ._base import GpsCommand


class Command(GpsCommand):
    help = 'Join predictions with true labels and report coverage, cardinality and detection'

    def add_command_arguments(self, parser):
        parser.add_argument('--predictions', help='Predictions file written by predict')
        parser.add_argument('--truth', help='Labeled CSV aligned row by row with the predictions')
        parser.add_argument('--model', help='Model file; its training test subset is left out of the metrics')
        parser.add_argument('--out', help='Metrics CSV (default: stdout)')
        parser.add_argument('--record', action='store_true', help='Store the table in the experiment ledger')

    def run(self, run_config, **options):
        self.require(options, 'predictions', 'truth')
        model = load_model(Path(options['model']).read_text(encoding='utf-8')) if options.get('model') else None
        truth = load_csv(
            options['truth'], run_config.label_column, run_config.outlier_token,
            class_names=model.class_names if model else None,
        )
        sets = parse_predictions(Path(options['predictions']).read_text(encoding='utf-8'), truth.class_names)
        report = evaluate_predictions(truth, sets, excluded=model.test_subset if model else ())
        gamma = model.gamma if model else run_config.gamma
        method = model.method if model else run_config.method
        frame = metrics_frame(report_rows(report, gamma, method))
        text = format_table(frame)
        if options.get('out'):
            atomic_write_text(options['out'], text)
        else:
            self.stdout.write(text, ending='')
        if options.get('record'):
            run = record_table('evaluate', run_config, frame, method=method, gamma=gamma)
            self.success(f'Recorded evaluation as run #{run.pk}')
