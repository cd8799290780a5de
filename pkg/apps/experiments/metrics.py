"""
Evaluation metrics for set-valued classifiers with outlier detection.

coverage_k       share of class-k records whose set contains k
cardinality      mean set size over all records
conditional      mean set size over records that are not true outliers
detection rate   share of true outliers that receive the empty set

Undefined quantities (empty denominators) are None and serialise as NA.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from apps.gps.conformal import OUTLIER
from apps.gps.exceptions import GPSError, InputError

logger = logging.getLogger(__name__)

NA = 'NA'
TABLE_COLUMNS = ['gamma', 'method', 'metric', 'value', 'se']

CARDINALITY = 'cardinality'
CONDITIONAL_CARDINALITY = 'conditional_cardinality'
DETECTION_RATE = 'detection_rate'
SCREE_METRICS = (CARDINALITY, CONDITIONAL_CARDINALITY, DETECTION_RATE)


@dataclass(frozen=True)
class EvalRecord:
    true_label: int
    predicted_set: tuple


@dataclass(frozen=True)
class MetricsReport:
    coverage: tuple
    cardinality: float
    conditional_cardinality: float
    detection_rate: float
    class_counts: tuple
    n_records: int
    n_inliers: int
    n_outliers: int
    cardinality_distribution: tuple = ()
    class_cardinality: tuple = ()
    outlier_cardinality: float = None
    class_names: tuple = ()

    @property
    def cardinality_from_classes(self):
        """Cardinality rebuilt from the per-class and outlier averages"""
        total = sum(count * avg for count, avg in zip(self.class_counts, self.class_cardinality) if count)
        if self.n_outliers:
            total += self.n_outliers * self.outlier_cardinality
        return total / self.n_records

    def as_dict(self):
        names = self.class_names or tuple(str(k + 1) for k in range(len(self.coverage)))
        values = {f'coverage_{name}': value for name, value in zip(names, self.coverage)}
        values[CARDINALITY] = self.cardinality
        values[CONDITIONAL_CARDINALITY] = self.conditional_cardinality
        values[DETECTION_RATE] = self.detection_rate
        for size, share in enumerate(self.cardinality_distribution):
            values[f'set_size_{size}'] = share
        return values


def _mean_or_none(values):
    return float(np.mean(values)) if len(values) else None


def compute_metrics(records, n_classes, class_names=()):
    records = list(records)
    if not records:
        raise InputError('compute_metrics needs at least one record')
    truth = np.array([r.true_label for r in records], dtype=int)
    for r in records:
        if any(not 0 <= k < n_classes for k in r.predicted_set):
            raise InputError(f'Predicted set {r.predicted_set} is not a subset of {n_classes} classes')
    sizes = np.array([len(set(r.predicted_set)) for r in records], dtype=int)

    coverage, counts, class_cardinality = [], [], []
    for k in range(n_classes):
        members = np.flatnonzero(truth == k)
        counts.append(int(members.size))
        covered = sum(1 for j in members if k in records[j].predicted_set)
        coverage.append(covered / members.size if members.size else None)
        class_cardinality.append(_mean_or_none(sizes[members]))

    inliers = truth != OUTLIER
    outliers = ~inliers
    return MetricsReport(
        coverage=tuple(coverage),
        cardinality=float(sizes.mean()),
        conditional_cardinality=_mean_or_none(sizes[inliers]),
        detection_rate=_mean_or_none(sizes[outliers] == 0),
        class_counts=tuple(counts),
        n_records=len(records),
        n_inliers=int(inliers.sum()),
        n_outliers=int(outliers.sum()),
        cardinality_distribution=tuple(float(v) for v in np.bincount(sizes, minlength=n_classes + 1) / len(records)),
        class_cardinality=tuple(class_cardinality),
        outlier_cardinality=_mean_or_none(sizes[outliers]),
        class_names=tuple(class_names),
    )


@dataclass(frozen=True)
class Summary:
    mean: float
    se: float
    n: int


def replicate(runs):
    """
    Mean and standard error (sample sd / √R) per metric over R runs.
    ``runs`` holds metric -> value mappings; None values are skipped.
    """
    runs = [run.as_dict() if isinstance(run, MetricsReport) else dict(run) for run in runs]
    metrics = []
    for run in runs:
        metrics.extend(name for name in run if name not in metrics)
    summary = {}
    for name in metrics:
        values = np.array([run[name] for run in runs if run.get(name) is not None], dtype=float)
        if values.size == 0:
            summary[name] = Summary(None, None, 0)
        elif values.size == 1:
            summary[name] = Summary(float(values[0]), None, 1)
        else:
            summary[name] = Summary(
                float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size)), int(values.size),
            )
    return summary


def _as_summary(result):
    if isinstance(result, MetricsReport):
        return {name: Summary(value, None, 1) for name, value in result.as_dict().items()}
    return result


def gamma_sweep(callback, gammas, methods=('gps',), metrics=None):
    """
    One row per (γ, method, metric). ``callback(gamma, method)`` returns a
    MetricsReport or a replicate() summary. A failing cell is logged, its rows
    are NA, and the remaining cells still run. Returns (table, errors).
    """
    gammas = [float(g) for g in gammas]
    if any(b < a for a, b in zip(gammas, gammas[1:])):
        raise InputError('gammas must be sorted ascending')
    rows, errors = [], []
    for gamma in gammas:
        for method in methods:
            try:
                summary = _as_summary(callback(gamma, method))
            except GPSError as error:
                logger.warning('Sweep cell gamma=%s method=%s failed: %s', gamma, method, error)
                errors.append((gamma, method, str(error)))
                summary = {}
            names = list(metrics) if metrics is not None else (list(summary) or list(SCREE_METRICS))
            for name in names:
                item = summary.get(name, Summary(None, None, 0))
                rows.append({'gamma': gamma, 'method': method, 'metric': name, 'value': item.mean, 'se': item.se})
    return metrics_frame(rows), errors


def metrics_frame(rows):
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def report_rows(report, gamma, method):
    return [
        {'gamma': gamma, 'method': method, 'metric': name, 'value': value, 'se': None}
        for name, value in report.as_dict().items()
    ]


def format_table(frame):
    return frame.to_csv(index=False, na_rep=NA, lineterminator='\n')
