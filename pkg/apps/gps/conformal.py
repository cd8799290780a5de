"""
Split-conformal calibration and the set-valued classifier.

Each class sample is split once into a training part and a calibration part.
The per-class decision function is trained on the training part (with the
shared unlabeled test subset), and its threshold τ_k is an order statistic of
the calibration scores. A point is accepted by class k when f_k(d∘x) ≥ τ_k;
an empty prediction set flags an outlier.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .exceptions import ConfigurationError, InputError
from .feature_selection import train_gpskfs
from .kernel import GAUSSIAN, KernelSpec, as_points, bandwidth_candidates
from .losses import HUBERIZED, LossSpec
from .ocsvm import train_ocsvm_class
from .solver import DEFAULT_MAX_ITER, DEFAULT_TOL
from .training import GPS, GPSKFS, METHOD_CHOICES, ClassTrainingInput, train_all_classes, train_gps

logger = logging.getLogger(__name__)

OUTLIER = -1
NO_THRESHOLD = -np.inf
MIN_CLASS_SIZE = 4
DEFAULT_TEST_SUBSET_MAX = 500


def calibrate_threshold(scores, gamma):
    """k*-th smallest score with k* = ⌊γ(n+1)⌋; -∞ when k* < 1"""
    ordered = np.sort(np.asarray(scores, dtype=float).ravel())
    if ordered.size == 0:
        raise InputError('Cannot calibrate a threshold on an empty score set')
    # products such as 0.29 * 100 land just below the integer they stand for
    k_star = math.floor(gamma * (ordered.size + 1) + 1e-9)
    if k_star < 1:
        return NO_THRESHOLD
    return float(ordered[min(k_star, ordered.size) - 1])


@dataclass(frozen=True)
class SplitPlan:
    train_indices: tuple
    calibration_indices: tuple
    seed: int = 0

    @property
    def n_classes(self):
        return len(self.train_indices)


def make_split_plan(labels, n_classes, calibration_fraction=0.5, gamma=None, seed=0):
    labels = np.asarray(labels)
    streams = np.random.SeedSequence(seed).spawn(n_classes)
    train_parts, calibration_parts = [], []
    for k in range(n_classes):
        members = np.flatnonzero(labels == k)
        if members.size < MIN_CLASS_SIZE:
            raise ConfigurationError(
                f'Class {k} has {members.size} points; at least {MIN_CLASS_SIZE} are needed to split'
            )
        n_cal = int(round(calibration_fraction * members.size))
        if gamma is not None:
            n_cal = max(n_cal, min(math.ceil(1.0 / gamma) - 1, members.size - 2))
        n_cal = min(max(n_cal, 1), members.size - 2)
        if gamma is not None and n_cal < math.ceil(1.0 / gamma) - 1:
            logger.warning('Class %d: %d calibration points cannot support gamma=%.4g', k, n_cal, gamma)
        shuffled = np.random.default_rng(streams[k]).permutation(members)
        calibration_parts.append(np.sort(shuffled[:n_cal]))
        train_parts.append(np.sort(shuffled[n_cal:]))
    return SplitPlan(train_indices=tuple(train_parts), calibration_indices=tuple(calibration_parts), seed=seed)


def draw_test_subset(n_pool, m_max=DEFAULT_TEST_SUBSET_MAX, seed=0):
    """Indices of the unlabeled rows used in training: min(m_max, ⌊n_pool/2⌋) without replacement"""
    size = min(m_max, n_pool // 2)
    if size < 2:
        raise ConfigurationError(f'Test pool of {n_pool} rows is too small for a training subset')
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n_pool, size=size, replace=False))


@dataclass(frozen=True)
class SetValuedModel:
    functions: tuple
    thresholds: tuple
    gamma: float
    method: str = GPS
    class_names: tuple = ()
    test_subset: tuple = ()

    def __post_init__(self):
        if len(self.functions) != len(self.thresholds):
            raise InputError('Every decision function needs exactly one threshold')
        if not self.class_names:
            object.__setattr__(self, 'class_names', tuple(str(k) for k in range(len(self.functions))))

    @property
    def n_classes(self):
        return len(self.functions)

    @property
    def n_features(self):
        return self.functions[0].n_features

    def score_matrix(self, points):
        X = as_points(points)
        if X.shape[1] != self.n_features:
            raise InputError(f'Model expects {self.n_features} features, got {X.shape[1]}')
        return np.column_stack([f.scores(X) for f in self.functions])

    def acceptance(self, points):
        return self.score_matrix(points) >= np.asarray(self.thresholds, dtype=float)[None, :]

    def predict_sets(self, points):
        return [tuple(int(k) for k in np.flatnonzero(row)) for row in self.acceptance(points)]

    def predict_names(self, points):
        return [tuple(self.class_names[k] for k in labels) for labels in self.predict_sets(points)]

    def recalibrated(self, thresholds, gamma):
        return replace(self, thresholds=tuple(float(t) for t in thresholds), gamma=gamma)


def predict_set(model, x):
    """Prediction set for a single point; the empty tuple marks an outlier"""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InputError(f'predict_set takes a single point, got shape {x.shape}')
    return model.predict_sets(x[None, :])[0]


@dataclass(frozen=True)
class FitConfig:
    method: str = GPS
    gamma: float = 0.05
    C: float = 1.0
    C1: float = 1.0
    C2: float = 1.0
    nu: Optional[float] = None
    sigma: Optional[float] = None
    sigma_percentile: float = 50.0
    huber_delta: float = 0.1
    calibration_fraction: float = 0.5
    test_subset_max: int = DEFAULT_TEST_SUBSET_MAX
    seed: int = 0
    jobs: int = 1
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    theory: Optional[object] = None
    calibrate: bool = True

    def __post_init__(self):
        if self.method not in dict(METHOD_CHOICES):
            raise ConfigurationError(f'Unknown method {self.method!r}')
        if not 0 < self.gamma < 1:
            raise ConfigurationError(f'gamma must lie in (0, 1), got {self.gamma!r}')
        if not 0 < self.calibration_fraction < 1:
            raise ConfigurationError('calibration_fraction must lie in (0, 1)')

    def trainer(self):
        """(per-class trainer, keyword options) for the configured method"""
        if self.method == GPS:
            return train_gps, {'tol': self.tol, 'max_iter': self.max_iter, 'theory': self.theory}
        if self.method == GPSKFS:
            return train_gpskfs, {
                'C1': self.C1, 'C2': self.C2, 'loss_spec': LossSpec(HUBERIZED, self.huber_delta),
                'tol': self.tol, 'max_iter': self.max_iter, 'theory': self.theory,
            }
        return train_ocsvm_class, {'nu': self.nu, 'tol': self.tol, 'max_iter': self.max_iter}


@dataclass(frozen=True)
class ConformalFit:
    model: SetValuedModel
    plan: SplitPlan
    calibration_scores: tuple
    calibration_points: np.ndarray = field(repr=False, default=None)

    def thresholds_for(self, gamma):
        return tuple(calibrate_threshold(scores, gamma) for scores in self.calibration_scores)

    def recalibrate(self, gamma):
        """Same decision functions, thresholds re-drawn for another γ"""
        return self.model.recalibrated(self.thresholds_for(gamma), gamma)

    def calibration_cardinality(self):
        """Mean prediction-set size over the pooled calibration rows"""
        return float(np.mean(np.sum(self.model.acceptance(self.calibration_points), axis=1)))


def resolve_bandwidth(config, points):
    if config.sigma is not None:
        return float(config.sigma)
    return bandwidth_candidates(points, percentiles=(config.sigma_percentile,))[0]


def fit_conformal(train_X, train_y, pool_X, config, class_names=None):
    X = as_points(train_X)
    y = np.asarray(train_y).astype(int).ravel()
    if y.shape[0] != X.shape[0]:
        raise InputError(f'{X.shape[0]} feature rows but {y.shape[0]} labels')
    if np.any(y == OUTLIER):
        raise InputError('Training data must not contain outlier rows')
    n_classes = int(y.max()) + 1 if y.size else 0
    if n_classes < 1:
        raise ConfigurationError('Training data holds no classes')
    class_names = tuple(class_names) if class_names else tuple(str(k) for k in range(n_classes))

    split_stream, subset_stream = np.random.SeedSequence(config.seed).spawn(2)
    plan = make_split_plan(
        y, n_classes, config.calibration_fraction, config.gamma,
        seed=int(split_stream.generate_state(1)[0]),
    )

    subset = ()
    if config.method in (GPS, GPSKFS):
        if pool_X is None:
            raise ConfigurationError(f'Method {config.method!r} needs an unlabeled test pool')
        pool = as_points(pool_X)
        if pool.shape[1] != X.shape[1]:
            raise InputError(f'Test pool has {pool.shape[1]} features, training data has {X.shape[1]}')
        subset = draw_test_subset(pool.shape[0], config.test_subset_max, subset_stream)
        test_pts = pool[subset]
    else:
        test_pts = np.empty((0, X.shape[1]))

    train_rows = np.concatenate(plan.train_indices)
    sigma = resolve_bandwidth(config, X[train_rows])
    kernel = KernelSpec(GAUSSIAN, sigma)
    inputs = [
        ClassTrainingInput(
            train_pts=X[plan.train_indices[k]],
            test_pts=test_pts,
            gamma=config.gamma,
            C=config.C,
            kernel=kernel,
            label=class_names[k],
        )
        for k in range(n_classes)
    ]
    trainer, options = config.trainer()
    functions = train_all_classes(inputs, config.jobs, trainer, **options)

    calibration_scores = tuple(
        f.scores(X[plan.calibration_indices[k]]) for k, f in enumerate(functions)
    )
    if config.calibrate:
        thresholds = tuple(calibrate_threshold(scores, config.gamma) for scores in calibration_scores)
    else:
        thresholds = (0.0,) * n_classes
    model = SetValuedModel(
        functions=tuple(functions),
        thresholds=thresholds,
        gamma=config.gamma,
        method=config.method,
        class_names=class_names,
        test_subset=tuple(int(i) for i in subset),
    )
    logger.info(
        'Fitted %s set-valued model: K=%d sigma=%.4g thresholds=%s',
        config.method, n_classes, sigma, ', '.join(f'{t:.4g}' for t in thresholds),
    )
    return ConformalFit(
        model=model,
        plan=plan,
        calibration_scores=calibration_scores,
        calibration_points=X[np.concatenate(plan.calibration_indices)],
    )
