"""
Weighted kernels: K_d(x, x') = K(d∘x, d∘x').

The gaussian family is exp(-||x - x'||² / σ²); σ and the feature weights d
are independent knobs. Gram matrices are computed on whole point sets with
scipy's distance routines.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .exceptions import DegenerateBandwidthError, InputError, UnsupportedOperationError

logger = logging.getLogger(__name__)

GAUSSIAN = 'gaussian'
LINEAR = 'linear'

KERNEL_CHOICES = [
    (GAUSSIAN, 'Gaussian'),
    (LINEAR, 'Linear'),
]

DEFAULT_PERCENTILES = (25.0, 37.5, 50.0, 62.5, 75.0)

PSD_TOLERANCE = 1e-8


@dataclass(frozen=True)
class KernelSpec:
    family: str = GAUSSIAN
    sigma: float = 1.0

    def __post_init__(self):
        if self.family not in dict(KERNEL_CHOICES):
            raise InputError(f'Unknown kernel family: {self.family!r}')
        if self.family == GAUSSIAN and not (np.isfinite(self.sigma) and self.sigma > 0):
            raise InputError(f'Gaussian bandwidth must be positive, got {self.sigma!r}')

    @property
    def differentiable(self):
        return self.family == GAUSSIAN

    def sup_norm(self, d=None, points=None):
        """κ = sup sqrt(K_d(x, x)); 1 for gaussian, data-dependent for linear"""
        if self.family == GAUSSIAN:
            return 1.0
        if points is None:
            raise InputError('The linear kernel sup-norm needs the point set')
        X = as_points(points)
        d = as_weights(d, X.shape[1])
        return float(np.sqrt(np.max(np.sum((X * d) ** 2, axis=1))))


@dataclass(frozen=True)
class GramBlocks:
    G1: np.ndarray  # train/train
    G2: np.ndarray  # test/test
    G3: np.ndarray  # train/test

    def stacked(self):
        """Full (n_k+m)×(n_k+m) matrix over the train rows followed by test rows"""
        return np.block([[self.G1, self.G3], [self.G3.T, self.G2]])


def as_points(points):
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise InputError(f'Expected a 2-D point array, got shape {X.shape}')
    return X


def as_weights(d, p):
    """Validate a feature-weight vector; None means all ones"""
    if d is None:
        return np.ones(p)
    d = np.asarray(d, dtype=float).ravel()
    if d.shape[0] != p:
        raise InputError(f'Weight vector has length {d.shape[0]}, data has {p} features')
    if np.any(d < 0) or np.any(d > 1) or not np.all(np.isfinite(d)):
        raise InputError('Feature weights must lie in [0, 1]')
    return d


def _check_dims(X, Y):
    if X.shape[1] != Y.shape[1]:
        raise InputError(f'Dimension mismatch: {X.shape[1]} vs {Y.shape[1]} features')


def weighted_sq_distances(d, X, Y):
    """Σ_t d_t²(x_t - x'_t)² for every pair of rows"""
    return cdist(X * d, Y * d, 'sqeuclidean')


def gram(kernel, d, X, Y=None):
    X = as_points(X)
    Y = X if Y is None else as_points(Y)
    _check_dims(X, Y)
    d = as_weights(d, X.shape[1])
    if kernel.family == LINEAR:
        return (X * d) @ (Y * d).T
    return np.exp(-weighted_sq_distances(d, X, Y) / kernel.sigma ** 2)


def eval_weighted(kernel, d, x, x_other):
    x = np.asarray(x, dtype=float).ravel()
    x_other = np.asarray(x_other, dtype=float).ravel()
    if x.shape != x_other.shape:
        raise InputError(f'Dimension mismatch: {x.shape[0]} vs {x_other.shape[0]} features')
    return float(gram(kernel, d, x[None, :], x_other[None, :])[0, 0])


def gram_blocks(kernel, d, train_pts, test_pts):
    train = as_points(train_pts)
    test = as_points(test_pts)
    if train.shape[0] == 0 or test.shape[0] == 0:
        raise InputError('Gram blocks need nonempty train and test point sets')
    _check_dims(train, test)
    return GramBlocks(
        G1=gram(kernel, d, train),
        G2=gram(kernel, d, test),
        G3=gram(kernel, d, train, test),
    )


def grad_d(kernel, d, x, x_other):
    """∂K_d(x, x')/∂d; component t is K_d(x, x')·(-2 d_t (x_t - x'_t)²/σ²)"""
    if not kernel.differentiable:
        raise UnsupportedOperationError('Weight gradients are only defined for the gaussian kernel')
    x = np.asarray(x, dtype=float).ravel()
    x_other = np.asarray(x_other, dtype=float).ravel()
    d = as_weights(d, x.shape[0])
    value = eval_weighted(kernel, d, x, x_other)
    return value * (-2.0 * d * (x - x_other) ** 2 / kernel.sigma ** 2)


def gram_gradient(kernel, d, X):
    """Dense N×N×p tensor of weight gradients; intended for small point sets"""
    if not kernel.differentiable:
        raise UnsupportedOperationError('Weight gradients are only defined for the gaussian kernel')
    X = as_points(X)
    d = as_weights(d, X.shape[1])
    K = gram(kernel, d, X)
    diff_sq = (X[:, None, :] - X[None, :, :]) ** 2
    return K[:, :, None] * (-2.0 * d / kernel.sigma ** 2) * diff_sq


def bandwidth_candidates(points, d=None, percentiles=DEFAULT_PERCENTILES):
    """Percentiles of the pairwise weighted distances ||d∘(x - x')||₂"""
    X = as_points(points)
    if X.shape[0] < 2:
        raise InputError('Bandwidth candidates need at least two points')
    d = as_weights(d, X.shape[1])
    distances = pdist(X * d, 'euclidean')
    positive = distances[distances > 0]
    if positive.size == 0:
        raise DegenerateBandwidthError(
            'Pairwise distances collapse to zero; no usable gaussian bandwidth'
        )
    candidates = np.percentile(distances, list(percentiles))
    if np.any(candidates <= 0):
        # low percentiles land on duplicate pairs; use the smallest nonzero distance
        logger.warning('Zero bandwidth percentile replaced by %.6g', positive.min())
        candidates = np.where(candidates > 0, candidates, positive.min())
    logger.debug('Bandwidth candidates %s from %d points', candidates, X.shape[0])
    return tuple(float(c) for c in candidates)


def is_psd(matrix, tolerance=PSD_TOLERANCE):
    """Symmetric with smallest eigenvalue ≥ -tolerance·trace"""
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if not np.allclose(M, M.T, rtol=0.0, atol=1e-12 * scale):
        return False
    if M.shape[0] == 0:
        return True
    smallest = float(np.linalg.eigvalsh((M + M.T) / 2.0)[0])
    return smallest >= -tolerance * max(float(np.trace(M)), 1.0)
