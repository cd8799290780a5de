import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from apps.experiments.datagen import load_csv
from apps.experiments.management.commands._base import EXIT_DATA, EXIT_USAGE
from apps.experiments.models import ExperimentRun
from apps.gps.serializers import load_model


class CommandTestCase(TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self._tmp.cleanup)
        self.tmp = Path(self._tmp.name)

    def call(self, name, *args):
        out = StringIO()
        call_command(name, *[str(a) for a in args], stdout=out, stderr=StringIO())
        return out.getvalue()

    def simulate(self):
        self.call('simulate', '--example', 1, '--n-per-class', 20, '--n-outlier', 10, '--seed', 3, '--out', self.tmp)
        return self.tmp / 'train.csv', self.tmp / 'test.csv'


class SimulateCommandTests(CommandTestCase):
    def test_writes_both_files(self):
        train_csv, test_csv = self.simulate()
        self.assertEqual(len(load_csv(train_csv)), 80)
        test = load_csv(test_csv)
        self.assertEqual(len(test), 90)
        self.assertEqual(int(test.outlier_mask.sum()), 10)

    def test_rerun_is_byte_identical(self):
        first, second = self.tmp / 'first', self.tmp / 'second'
        for out in (first, second):
            self.call('simulate', '--example', 2, '--n-per-class', 15, '--n-outlier', 5, '--seed', 7, '--out', out)
        for name in ('train.csv', 'test.csv'):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes())

    def test_missing_out(self):
        with self.assertRaises(CommandError) as caught:
            self.call('simulate', '--example', 2)
        self.assertEqual(caught.exception.returncode, EXIT_USAGE)

    def test_print_config(self):
        output = self.call('simulate', '--n-per-class', 7, '--print-config')
        self.assertIn('n_per_class = 7\n', output)


class TrainPredictEvaluateTests(CommandTestCase):
    def test_full_round(self):
        train_csv, test_csv = self.simulate()
        model_path = self.tmp / 'model.json'
        output = self.call('train', '--method', 'gps', '--gamma', 0.2, '--train', train_csv, '--test', test_csv,
                           '--out-model', model_path)
        self.assertIn('Trained gps model for 4 classes', output)
        model = load_model(model_path.read_text(encoding='utf-8'))
        self.assertEqual(model.class_names, ('1', '2', '3', '4'))
        self.assertEqual(len(model.test_subset), 45)

        predictions = self.tmp / 'predictions.txt'
        self.call('predict', '--model', model_path, '--data', test_csv, '--out', predictions)
        self.assertEqual(len(predictions.read_text(encoding='utf-8').split('\n')), 91)

        metrics_path = self.tmp / 'metrics.csv'
        self.call('evaluate', '--predictions', predictions, '--truth', test_csv, '--model', model_path,
                  '--out', metrics_path)
        lines = metrics_path.read_text(encoding='utf-8').splitlines()
        self.assertEqual(lines[0], 'gamma,method,metric,value,se')
        self.assertTrue(any(line.startswith('0.2,gps,detection_rate,') for line in lines))

        self.call('evaluate', '--predictions', predictions, '--truth', test_csv, '--model', model_path, '--record')
        run = ExperimentRun.objects.get()
        self.assertEqual(run.command, 'evaluate')
        self.assertEqual(run.gamma, 0.2)
        self.assertTrue(run.metrics.filter(metric='cardinality').exists())

    def test_ocsvm_plug_in_without_pool(self):
        train_csv, _ = self.simulate()
        model_path = self.tmp / 'ocsvm.json'
        self.call('train', '--method', 'ocsvm', '--gamma', 0.2, '--train', train_csv, '--plug-in',
                  '--out-model', model_path)
        model = load_model(model_path.read_text(encoding='utf-8'))
        self.assertEqual(model.thresholds, (0.0, 0.0, 0.0, 0.0))

    def test_gps_without_pool_is_a_usage_error(self):
        train_csv, _ = self.simulate()
        with self.assertRaises(CommandError) as caught:
            self.call('train', '--method', 'gps', '--train', train_csv, '--out-model', self.tmp / 'm.json')
        self.assertEqual(caught.exception.returncode, EXIT_USAGE)

    def test_missing_data_file(self):
        with self.assertRaises(CommandError) as caught:
            self.call('train', '--method', 'ocsvm', '--train', self.tmp / 'absent.csv',
                      '--out-model', self.tmp / 'm.json')
        self.assertEqual(caught.exception.returncode, EXIT_DATA)

    def test_corrupt_model(self):
        _, test_csv = self.simulate()
        broken = self.tmp / 'broken.json'
        broken.write_text('{"format": "gps-model/1"}', encoding='utf-8')
        with self.assertRaises(CommandError) as caught:
            self.call('predict', '--model', broken, '--data', test_csv, '--out', self.tmp / 'p.txt')
        self.assertEqual(caught.exception.returncode, EXIT_DATA)

    def test_job_count_does_not_change_model_file(self):
        train_csv, test_csv = self.simulate()
        paths = []
        for jobs in (1, 2):
            path = self.tmp / f'model-{jobs}.json'
            self.call('train', '--method', 'gps', '--gamma', 0.2, '--train', train_csv, '--test', test_csv,
                      '--jobs', jobs, '--out-model', path)
            paths.append(path)
        self.assertEqual(paths[0].read_bytes(), paths[1].read_bytes())

    def test_predict_rejects_wider_data(self):
        train_csv, _ = self.simulate()
        model_path = self.tmp / 'narrow.json'
        self.call('train', '--method', 'ocsvm', '--gamma', 0.2, '--train', train_csv, '--plug-in',
                  '--out-model', model_path)
        wide = self.tmp / 'wide'
        self.call('simulate', '--example', 2, '--n-per-class', 5, '--n-outlier', 2, '--seed', 3, '--out', wide)
        with self.assertRaises(CommandError) as caught:
            self.call('predict', '--model', model_path, '--data', wide / 'test.csv', '--out', self.tmp / 'p.txt')
        self.assertEqual(caught.exception.returncode, EXIT_DATA)
        self.assertIn('expects 10 features, got 100', str(caught.exception))

    def test_invalid_gamma(self):
        with self.assertRaises(CommandError) as caught:
            self.call('train', '--gamma', 1.5, '--print-config')
        self.assertEqual(caught.exception.returncode, EXIT_USAGE)


class TuneCommandTests(CommandTestCase):
    def test_writes_table_and_model(self):
        train_csv, _ = self.simulate()
        table = self.tmp / 'tuning.csv'
        output = self.call('tune', '--method', 'ocsvm', '--gamma', 0.2, '--sigma-percentiles', '25,75',
                           '--train', train_csv, '--out-table', table, '--out-model', self.tmp / 'best.json')
        self.assertIn('Best of 2 candidates', output)
        self.assertEqual(len(table.read_text(encoding='utf-8').splitlines()), 3)
        self.assertTrue((self.tmp / 'best.json').exists())


class SweepCommandTests(CommandTestCase):
    def test_records_replicated_table(self):
        output = self.call('sweep', '--example', 1, '--n-per-class', 20, '--n-outlier', 10, '--methods', 'ocsvm',
                           '--gammas', '0.2,0.1', '--replications', 2, '--record')
        self.assertTrue(output.startswith('gamma,method,metric,value,se\n0.1,ocsvm,'))
        run = ExperimentRun.objects.get()
        self.assertEqual(run.command, 'sweep')
        self.assertEqual(run.replications, 2)
        self.assertEqual(set(run.metrics.values_list('gamma', flat=True)), {0.1, 0.2})

    def test_needs_a_data_source(self):
        with self.assertRaises(CommandError) as caught:
            self.call('sweep', '--methods', 'ocsvm')
        self.assertEqual(caught.exception.returncode, EXIT_USAGE)
