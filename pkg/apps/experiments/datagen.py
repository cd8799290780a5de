"""
Seeded synthetic examples, CSV ingestion and the train/test subsampling protocol.

Example 1: four gaussian classes in the plane plus an outlier mixture of four
uniform rectangles, padded with eight N(0, 0.1²) noise columns.
Example 2: three concentric rings and an outer outlier ring, padded with 98
N(0, 1) noise columns.
"""
import logging
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from apps.gps.conformal import OUTLIER
from apps.gps.exceptions import ConfigurationError, DataParseError, InputError

from .files import atomic_write_text

logger = logging.getLogger(__name__)

EXAMPLE_1 = 'ex1'
EXAMPLE_2 = 'ex2'

EXAMPLE_CHOICES = [
    (EXAMPLE_1, 'Gaussian classes with rectangle outliers'),
    (EXAMPLE_2, 'Concentric rings with 98 noise coordinates'),
]

LABEL_COLUMN = 'label'
OUTLIER_TOKEN = 'Outlier'

# (xmin, xmax, ymin, ymax), 2×4 boxes centred at (±7, 0) and (0, ±7)
DEFAULT_RECTANGLES = (
    (6.0, 8.0, -2.0, 2.0),
    (-8.0, -6.0, -2.0, 2.0),
    (-2.0, 2.0, 6.0, 8.0),
    (-2.0, 2.0, -8.0, -6.0),
)

EXAMPLE1_CLASSES = 4
EXAMPLE1_NOISE_COLUMNS = 8
EXAMPLE1_NOISE_SD = 0.1

EXAMPLE2_RADII = ((0.0, 5.0), (4.0, 9.0), (8.0, 13.0))
EXAMPLE2_OUTLIER_RADII = (15.0, 20.0)
EXAMPLE2_NOISE_COLUMNS = 98
EXAMPLE2_NOISE_SD = 1.0

ZIPCODE_SIZES = (550, 580, 495, 574)

TRAIN = 'train'
TEST = 'test'


@dataclass(frozen=True)
class SimSpec:
    example: str = EXAMPLE_1
    n_per_class: int = 500
    n_outlier: int = 200
    seed: int = 0
    n_test_per_class: int = None

    def __post_init__(self):
        if self.example not in dict(EXAMPLE_CHOICES):
            raise ConfigurationError(f'Unknown example {self.example!r}')
        if self.n_per_class < 1 or self.n_outlier < 1:
            raise ConfigurationError('Class and outlier counts must be at least 1')
        if self.n_test_per_class is not None and self.n_test_per_class < 1:
            raise ConfigurationError('n_test_per_class must be at least 1')

    @property
    def test_per_class(self):
        return self.n_per_class if self.n_test_per_class is None else self.n_test_per_class


@dataclass(frozen=True)
class ClassParams:
    mean: np.ndarray
    sqrt_cov: np.ndarray


@dataclass(frozen=True)
class LabeledSet:
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple
    provenance: str = TRAIN

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise InputError('Features and labels disagree on the number of rows')

    def __len__(self):
        return int(self.labels.shape[0])

    @property
    def n_features(self):
        return int(self.features.shape[1])

    @property
    def n_classes(self):
        return len(self.class_names)

    @property
    def outlier_mask(self):
        return self.labels == OUTLIER

    def subset(self, rows, provenance=None):
        rows = np.asarray(rows)
        return LabeledSet(
            features=self.features[rows],
            labels=self.labels[rows],
            class_names=self.class_names,
            provenance=provenance or self.provenance,
        )


def _streams(seed, count):
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in seed.spawn(count)]


def _draw_example1_params(rng):
    params = []
    for _ in range(EXAMPLE1_CLASSES):
        radius = rng.uniform(0.0, 6.0)
        angle = rng.uniform(0.0, 2.0 * np.pi)
        sigma = rng.uniform(0.8, 1.2)
        shift = rng.uniform(-0.5, 0.5)
        params.append(ClassParams(
            mean=radius * np.array([np.cos(angle), np.sin(angle)]),
            sqrt_cov=np.diag([sigma, sigma]) + shift,
        ))
    return tuple(params)


def _example1_set(params, n_per_class, n_outlier, rectangles, seed, provenance):
    signal_rng, outlier_rng, noise_rng = _streams(seed, 3)
    blocks, labels = [], []
    for k, p in enumerate(params):
        z = signal_rng.standard_normal((n_per_class, 2))
        blocks.append(p.mean + z @ p.sqrt_cov.T)
        labels.append(np.full(n_per_class, k))
    if n_outlier:
        boxes = np.asarray(rectangles, dtype=float)
        which = outlier_rng.integers(len(boxes), size=n_outlier)
        unit = outlier_rng.uniform(size=(n_outlier, 2))
        chosen = boxes[which]
        blocks.append(np.column_stack([
            chosen[:, 0] + unit[:, 0] * (chosen[:, 1] - chosen[:, 0]),
            chosen[:, 2] + unit[:, 1] * (chosen[:, 3] - chosen[:, 2]),
        ]))
        labels.append(np.full(n_outlier, OUTLIER))
    signal = np.vstack(blocks)
    noise = noise_rng.normal(0.0, EXAMPLE1_NOISE_SD, (signal.shape[0], EXAMPLE1_NOISE_COLUMNS))
    return LabeledSet(
        features=np.hstack([signal, noise]),
        labels=np.concatenate(labels),
        class_names=tuple(str(k + 1) for k in range(len(params))),
        provenance=provenance,
    )


def generate_example1(spec, rectangles=DEFAULT_RECTANGLES):
    """Returns (class parameters, train set without outliers, test set with outliers)"""
    if spec.example != EXAMPLE_1:
        raise ConfigurationError(f'generate_example1 called with example={spec.example!r}')
    params_seq, train_seq, test_seq = np.random.SeedSequence(spec.seed).spawn(3)
    params = _draw_example1_params(np.random.default_rng(params_seq))
    train = _example1_set(params, spec.n_per_class, 0, rectangles, train_seq, TRAIN)
    test = _example1_set(params, spec.test_per_class, spec.n_outlier, rectangles, test_seq, TEST)
    return params, train, test


def sample_example1(params, n_per_class, n_outlier=0, seed=0, rectangles=DEFAULT_RECTANGLES):
    """Fresh test-provenance rows from class parameters drawn earlier"""
    return _example1_set(params, n_per_class, n_outlier, rectangles, seed, TEST)


def _ring_points(rng, radii, count):
    radius = rng.uniform(radii[0], radii[1], count)
    angle = rng.uniform(0.0, 2.0 * np.pi, count)
    return np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])


def _example2_set(n_per_class, n_outlier, seed, provenance):
    signal_rng, noise_rng = _streams(seed, 2)
    blocks = [_ring_points(signal_rng, radii, n_per_class) for radii in EXAMPLE2_RADII]
    labels = [np.full(n_per_class, k) for k in range(len(EXAMPLE2_RADII))]
    if n_outlier:
        blocks.append(_ring_points(signal_rng, EXAMPLE2_OUTLIER_RADII, n_outlier))
        labels.append(np.full(n_outlier, OUTLIER))
    signal = np.vstack(blocks)
    noise = noise_rng.normal(0.0, EXAMPLE2_NOISE_SD, (signal.shape[0], EXAMPLE2_NOISE_COLUMNS))
    return LabeledSet(
        features=np.hstack([signal, noise]),
        labels=np.concatenate(labels),
        class_names=tuple(str(k + 1) for k in range(len(EXAMPLE2_RADII))),
        provenance=provenance,
    )


def generate_example2(spec):
    """Returns (train set without outliers, test set with outliers)"""
    if spec.example != EXAMPLE_2:
        raise ConfigurationError(f'generate_example2 called with example={spec.example!r}')
    train_seq, test_seq = np.random.SeedSequence(spec.seed).spawn(2)
    return (
        _example2_set(spec.n_per_class, 0, train_seq, TRAIN),
        _example2_set(spec.test_per_class, spec.n_outlier, test_seq, TEST),
    )


def simulate(spec, rectangles=DEFAULT_RECTANGLES):
    """(train, test) for either example"""
    if spec.example == EXAMPLE_1:
        _, train, test = generate_example1(spec, rectangles)
        return train, test
    return generate_example2(spec)


def to_frame(labeled, label_column=LABEL_COLUMN, outlier_token=OUTLIER_TOKEN):
    columns = [f'x{t + 1}' for t in range(labeled.n_features)]
    frame = pd.DataFrame(labeled.features, columns=columns)
    names = np.array(list(labeled.class_names) + [outlier_token], dtype=object)
    frame[label_column] = names[labeled.labels]  # OUTLIER = -1 picks the token
    return frame


def save_csv(labeled, path, label_column=LABEL_COLUMN, outlier_token=OUTLIER_TOKEN):
    text = to_frame(labeled, label_column, outlier_token).to_csv(index=False, lineterminator='\n')
    atomic_write_text(path, text)


def _natural_key(name):
    try:
        return 0, float(name), name
    except ValueError:
        return 1, 0.0, name


def _read_frame(path):
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as error:
        raise DataParseError('file is empty', line=1) from error
    except pd.errors.ParserError as error:
        match = re.search(r'line (\d+)', str(error))
        raise DataParseError(str(error), line=int(match.group(1)) if match else None) from error


def _numeric_block(frame, columns):
    if not columns:
        raise DataParseError('no feature columns', line=1)
    raw = frame[columns]
    missing = raw.isna().any(axis=1)
    if missing.any():
        row = int(np.flatnonzero(missing.to_numpy())[0])
        raise DataParseError(f'expected {len(frame.columns)} fields', line=row + 2)
    values = raw.apply(pd.to_numeric, errors='coerce')
    bad = values.isna()
    if bad.to_numpy().any():
        row, col = np.argwhere(bad.to_numpy())[0]
        raise DataParseError(
            f'non-numeric value {raw.iat[row, col]!r} in column {columns[col]!r}', line=int(row) + 2
        )
    return values.to_numpy(dtype=float)


def load_csv(path, label_column=LABEL_COLUMN, outlier_token=OUTLIER_TOKEN, class_names=None, provenance=None):
    frame = _read_frame(path)
    if label_column not in frame.columns:
        raise DataParseError(f'unknown label column {label_column!r}', line=1)
    features = _numeric_block(frame, [c for c in frame.columns if c != label_column])

    raw_labels = frame[label_column].fillna('').astype(str).str.strip()
    outlier = (raw_labels == outlier_token).to_numpy()
    if (raw_labels == '').any():
        row = int(np.flatnonzero((raw_labels == '').to_numpy())[0])
        raise DataParseError('missing label', line=row + 2)
    observed = sorted(set(raw_labels[~outlier]), key=_natural_key)
    names = tuple(class_names) if class_names else tuple(observed)
    index = {name: k for k, name in enumerate(names)}
    labels = np.full(len(frame), OUTLIER, dtype=int)
    for row, (name, is_outlier) in enumerate(zip(raw_labels, outlier)):
        if is_outlier:
            continue
        if name not in index:
            raise DataParseError(f'unknown class label {name!r}', line=row + 2)
        labels[row] = index[name]
    logger.debug('Loaded %s: %d rows, %d features, %d outliers', path, len(frame), features.shape[1], outlier.sum())
    return LabeledSet(
        features=features,
        labels=labels,
        class_names=names,
        provenance=provenance or Path(path).stem,
    )


def load_features(path, label_column=LABEL_COLUMN):
    """Feature matrix of a CSV, ignoring the label column when it is present"""
    frame = _read_frame(path)
    return _numeric_block(frame, [c for c in frame.columns if c != label_column])


def subsample_protocol(data, sizes, seed=0):
    """
    Draw sizes[k] rows of every normal class for training; the remaining
    normal rows and all outlier rows form the test pool.
    """
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != data.n_classes:
        raise ConfigurationError(f'{len(sizes)} subsample sizes given for {data.n_classes} classes')
    streams = _streams(seed, data.n_classes)
    chosen = []
    for k, size in enumerate(sizes):
        members = np.flatnonzero(data.labels == k)
        if size < 0 or size > members.size:
            raise ConfigurationError(
                f'Class {data.class_names[k]!r} has {members.size} rows, cannot draw {size}'
            )
        chosen.append(streams[k].choice(members, size=size, replace=False))
    train_rows = np.sort(np.concatenate(chosen)) if chosen else np.empty(0, dtype=int)
    test_rows = np.setdiff1d(np.arange(len(data)), train_rows)
    return data.subset(train_rows, TRAIN), data.subset(test_rows, TEST)
