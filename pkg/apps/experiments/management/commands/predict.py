from pathlib import Path

from apps.experiments.datagen import load_features
from apps.experiments.files import atomic_write_text
from apps.experiments.pipeline import format_predictions
from apps.gps.serializers import load_model

from ._base import GpsCommand


class Command(GpsCommand):
    help = 'Write prediction sets (one line per row, empty line = outlier)'

    def add_command_arguments(self, parser):
        parser.add_argument('--model', help='Model file written by train or tune')
        parser.add_argument('--data', help='CSV with the rows to classify')
        parser.add_argument('--out', help='Predictions file')

    def run(self, run_config, **options):
        self.require(options, 'model', 'data', 'out')
        model = load_model(Path(options['model']).read_text(encoding='utf-8'))
        features = load_features(options['data'], run_config.label_column)
        sets = model.predict_sets(features)
        atomic_write_text(options['out'], format_predictions(model, sets))
        outliers = sum(1 for labels in sets if not labels)
        self.success(f'Predicted {len(sets)} rows; {outliers} flagged as outliers')
