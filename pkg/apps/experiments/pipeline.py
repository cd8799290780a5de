"""
Orchestration behind the management commands: fit, tune, predict, evaluate
and the γ sweep with replications.
"""
import logging
from dataclasses import dataclass, field
from functools import partial
from itertools import product

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from apps.gps.conformal import fit_conformal
from apps.gps.exceptions import ConfigurationError, DataParseError, GPSError, TrainingError
from apps.gps.training import GPS, GPSKFS, OCSVM

from .datagen import SimSpec, simulate
from .metrics import EvalRecord, compute_metrics, gamma_sweep, replicate

logger = logging.getLogger(__name__)


def fit_model(run_config, train, pool=None, **changes):
    """``pool`` is a LabeledSet or a bare feature matrix of unlabeled rows"""
    fit_config = run_config.fit_config(**changes)
    return fit_conformal(
        train.features,
        train.labels,
        getattr(pool, 'features', pool),
        fit_config,
        class_names=train.class_names,
    )


@dataclass(frozen=True)
class TuneCandidate:
    params: dict
    sigma_index: int
    order: int
    cardinality: float = None
    error: str = None

    def sort_key(self):
        # smaller cardinality, then larger C2, then smaller bandwidth index
        return (round(self.cardinality, 12), -self.params.get('C2', 0.0), self.sigma_index, self.order)


@dataclass(frozen=True)
class TuneResult:
    best: TuneCandidate
    fit: object
    candidates: tuple = field(default_factory=tuple)

    def table(self):
        rows = [
            {**c.params, 'calibration_cardinality': c.cardinality, 'error': c.error or ''}
            for c in self.candidates
        ]
        return pd.DataFrame(rows)


def tuning_grid(run_config):
    """Candidate hyperparameters as (params, bandwidth index) pairs"""
    percentiles = list(run_config.sigma_percentiles)
    if not percentiles:
        raise ConfigurationError('Empty bandwidth grid')
    if run_config.method == GPS:
        grid = [({'C': C}, i) for C, i in product(run_config.C_grid, range(len(percentiles)))]
    elif run_config.method == GPSKFS:
        grid = [
            ({'C1': C1, 'C2': C2}, i)
            for C1, C2, i in product(run_config.C1_grid, run_config.C2_grid, range(len(percentiles)))
        ]
    else:
        grid = [({}, i) for i in range(len(percentiles))]
    if not grid:
        raise ConfigurationError(f'Empty tuning grid for method {run_config.method!r}')
    return [({**params, 'sigma_percentile': percentiles[i]}, i) for params, i in grid]


def tune(run_config, train, pool=None):
    """Pick the grid point with the smallest mean prediction-set size on the calibration rows"""
    candidates, fits = [], {}
    for order, (params, sigma_index) in enumerate(tuning_grid(run_config)):
        try:
            fit = fit_model(run_config, train, pool, sigma=None, **params)
        except GPSError as error:
            logger.warning('Tuning candidate %s failed: %s', params, error)
            candidates.append(TuneCandidate(params, sigma_index, order, error=str(error)))
            continue
        cardinality = fit.calibration_cardinality()
        logger.info('Tuning candidate %s: calibration cardinality %.4f', params, cardinality)
        candidates.append(TuneCandidate(params, sigma_index, order, cardinality=cardinality))
        fits[order] = fit
    succeeded = [c for c in candidates if c.error is None]
    if not succeeded:
        raise TrainingError(f'every tuning candidate failed; last error: {candidates[-1].error}')
    best = min(succeeded, key=TuneCandidate.sort_key)
    return TuneResult(best=best, fit=fits[best.order], candidates=tuple(candidates))


def format_predictions(model, sets):
    """One line per row; comma-separated class names, empty line for an outlier"""
    return ''.join(','.join(model.class_names[k] for k in labels) + '\n' for labels in sets)


def parse_predictions(text, class_names):
    index = {name: k for k, name in enumerate(class_names)}
    lines = text.split('\n')
    if lines and lines[-1] == '':
        lines.pop()
    sets = []
    for number, line in enumerate(lines, start=1):
        line = line.strip()
        labels = []
        for name in filter(None, (part.strip() for part in line.split(','))):
            if name not in index:
                raise DataParseError(f'unknown class {name!r}', line=number)
            labels.append(index[name])
        sets.append(tuple(sorted(set(labels))))
    return sets


def evaluation_rows(n_rows, excluded=()):
    """Row indices kept for evaluation: everything not used as the training test subset"""
    keep = np.ones(n_rows, dtype=bool)
    excluded = np.asarray([i for i in excluded if i < n_rows], dtype=int)
    keep[excluded] = False
    return np.flatnonzero(keep)


def evaluate_predictions(truth, sets, excluded=()):
    if len(sets) != len(truth):
        raise DataParseError(f'{len(sets)} predictions for {len(truth)} truth rows')
    rows = evaluation_rows(len(truth), excluded)
    records = [EvalRecord(int(truth.labels[i]), sets[i]) for i in rows]
    return compute_metrics(records, truth.n_classes, truth.class_names)


def evaluate_fit(fit, test, gamma=None):
    """Metrics of a fitted model on the test rows it did not train on"""
    model = fit.model if gamma is None else fit.recalibrate(gamma)
    sets = model.predict_sets(test.features)
    return evaluate_predictions(test, sets, excluded=model.test_subset)


def example_source(run_config, example, seed):
    spec = SimSpec(example=example, n_per_class=run_config.n_per_class, n_outlier=run_config.n_outlier, seed=seed)
    return simulate(spec, tuple(tuple(box) for box in run_config.outlier_rectangles))


def fixed_source(train, test, seed):
    return train, test


def run_replication(run_config, source, methods, gammas, refit, index):
    """Reports (as metric dicts) or error strings keyed by (method, γ)"""
    seed = run_config.seed + index
    train, test = source(seed)
    outcomes = {}
    for method in methods:
        try:
            base = None if refit else fit_model(run_config, train, test, method=method, seed=seed, jobs=1)
        except GPSError as error:
            for gamma in gammas:
                outcomes[(method, gamma)] = str(error)
            continue
        for gamma in gammas:
            try:
                if refit:
                    fit = fit_model(run_config, train, test, method=method, gamma=gamma, seed=seed, jobs=1)
                    report = evaluate_fit(fit, test)
                else:
                    report = evaluate_fit(base, test, gamma)
                outcomes[(method, gamma)] = report.as_dict()
            except GPSError as error:
                outcomes[(method, gamma)] = str(error)
    logger.info('Replication %d (seed %d) finished', index, seed)
    return outcomes


@dataclass(frozen=True)
class SweepResult:
    table: pd.DataFrame
    errors: tuple = ()


def run_sweep(run_config, source, methods=(GPS,), gammas=None, replications=None, refit=False):
    gammas = sorted(float(g) for g in (gammas or run_config.sweep_gammas))
    replications = replications or run_config.replications
    methods = tuple(methods)
    unknown = [m for m in methods if m not in (GPS, GPSKFS, OCSVM)]
    if unknown:
        raise ConfigurationError(f'Unknown methods: {", ".join(unknown)}')
    outcomes = Parallel(n_jobs=min(run_config.jobs, replications))(
        delayed(run_replication)(run_config, source, methods, gammas, refit, r) for r in range(replications)
    )

    def cell(gamma, method):
        results = [outcome[(method, gamma)] for outcome in outcomes]
        reports = [r for r in results if isinstance(r, dict)]
        if not reports:
            raise TrainingError(results[0])
        if len(reports) < len(results):
            logger.warning('gamma=%s method=%s: %d of %d replications failed',
                           gamma, method, len(results) - len(reports), len(results))
        return replicate(reports)

    table, errors = gamma_sweep(cell, gammas, methods)
    return SweepResult(table=table, errors=tuple(errors))


def example_sweep_source(run_config, example):
    return partial(example_source, run_config, example)


def file_sweep_source(train, test):
    return partial(fixed_source, train, test)
