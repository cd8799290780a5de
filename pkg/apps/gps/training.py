"""
Per-class GPS training.

One decision function per class k is learned against class-k training rows and
a shared unlabeled test subset:

    f(x) = Σᵢ αᵢ K_d(x, xᵢ) - Σⱼ βⱼ K_d(x, xⱼ) - ρ

The dual is solved by ``solver.solve_dual_qp`` and ρ is recovered from the
piecewise-linear primal with ``solver.recover_rho``.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from joblib import Parallel, delayed

from .exceptions import ClassTrainingError, DomainError, GPSError, InputError, TrainingError
from .kernel import KernelSpec, as_points, as_weights, gram, gram_blocks
from .solver import DEFAULT_MAX_ITER, DEFAULT_TOL, INFEASIBLE, MAX_ITER, QpProblem, recover_rho, solve_dual_qp

logger = logging.getLogger(__name__)

GPS = 'gps'
GPSKFS = 'gpskfs'
OCSVM = 'ocsvm'

METHOD_CHOICES = [
    (GPS, 'Generalized prediction set'),
    (GPSKFS, 'GPS with kernel feature selection'),
    (OCSVM, 'One-class SVM'),
]

PRUNE_TOLERANCE = 1e-8

# the adjusted constraint level never drops below this share of γ
GAMMA_FLOOR_SHARE = 0.1


@dataclass(frozen=True)
class ClassTrainingInput:
    train_pts: np.ndarray
    test_pts: np.ndarray
    gamma: float
    C: float = 1.0
    kernel: KernelSpec = field(default_factory=KernelSpec)
    d: Optional[np.ndarray] = None
    label: Optional[str] = None

    def check(self):
        """Return a normalised copy, raising InputError on a malformed class"""
        train = as_points(self.train_pts)
        test = as_points(self.test_pts)
        name = self.label if self.label is not None else 'class'
        if train.shape[0] < 2:
            raise InputError(f'{name}: need at least 2 training points, got {train.shape[0]}')
        if test.shape[0] < 2:
            raise InputError(f'{name}: need at least 2 test-subset points, got {test.shape[0]}')
        if train.shape[1] != test.shape[1]:
            raise InputError(f'{name}: train has {train.shape[1]} features, test has {test.shape[1]}')
        if not 0 < self.gamma < 1:
            raise InputError(f'{name}: gamma must lie in (0, 1), got {self.gamma!r}')
        if not self.C > 0:
            raise InputError(f'{name}: C must be positive, got {self.C!r}')
        return replace(self, train_pts=train, test_pts=test, d=as_weights(self.d, train.shape[1]))

    @property
    def n_train(self):
        return len(self.train_pts)

    @property
    def stacked_points(self):
        return np.vstack([self.train_pts, self.test_pts])


@dataclass(frozen=True)
class DecisionFunction:
    """score(x) = Σ coef[s]·K_d(x, support[s]) - rho"""
    kernel: KernelSpec
    d: np.ndarray
    support: np.ndarray
    coef: np.ndarray
    rho: float
    label: Optional[str] = None
    method: str = GPS

    @property
    def n_features(self):
        return int(self.d.shape[0])

    @property
    def n_support(self):
        return int(self.coef.shape[0])

    def scores(self, points):
        X = as_points(points)
        if X.shape[1] != self.n_features:
            raise InputError(
                f'Decision function for {self.label!r} expects {self.n_features} features, got {X.shape[1]}'
            )
        if self.n_support == 0:
            return np.full(X.shape[0], -self.rho)
        return gram(self.kernel, self.d, X, self.support) @ self.coef - self.rho

    def score(self, x):
        return float(self.scores(np.asarray(x, dtype=float).ravel()[None, :])[0])


def package_decision_function(kernel, d, points, coef, rho, label=None, method=GPS):
    """Drop representer rows whose coefficient is numerically zero"""
    coef = np.asarray(coef, dtype=float)
    keep = np.abs(coef) > PRUNE_TOLERANCE
    return DecisionFunction(
        kernel=kernel,
        d=np.asarray(d, dtype=float),
        support=np.asarray(points, dtype=float)[keep],
        coef=coef[keep],
        rho=float(rho),
        label=label,
        method=method,
    )


@dataclass(frozen=True)
class TheoryParams:
    s: float = 1.0
    s_prime: float = 1.0
    c: float = 1.0
    kappa: float = 1.0
    zeta: float = 0.05

    def __post_init__(self):
        if self.s < 0 or self.s_prime < 0:
            raise DomainError('Radius parameters s and s_prime must be nonnegative')
        if not (self.c > 0 and self.kappa > 0):
            raise DomainError('Lipschitz constant c and kernel bound kappa must be positive')
        if not 0 < self.zeta < 1:
            raise DomainError(f'Confidence level zeta must lie in (0, 1), got {self.zeta!r}')


def complexity_radius(params):
    """r(ζ) = (√2·s + 2)·c·κ·(2 + 3√(2·ln(2/ζ)))"""
    return (
        (math.sqrt(2.0) * params.s + 2.0) * params.c * params.kappa
        * (2.0 + 3.0 * math.sqrt(2.0 * math.log(2.0 / params.zeta)))
    )


def gamma_adjustment(params, n1):
    """ε = r(ζ)/√n1, the amount the empirical constraint is tightened by"""
    if n1 < 1:
        raise DomainError(f'n1 must be at least 1, got {n1!r}')
    return complexity_radius(params) / math.sqrt(n1)


def effective_gamma(gamma, params, n1):
    if params is None:
        return gamma
    return max(gamma - gamma_adjustment(params, n1), GAMMA_FLOOR_SHARE * gamma)


def estimation_error_bound(params, n1, m, gamma, delta):
    """2r/√m + (4+δ)·r/(√n1·γ - 2r); finite only once √n1·γ exceeds 2r"""
    if n1 < 1 or m < 1:
        raise DomainError('Sample sizes n1 and m must be at least 1')
    r = complexity_radius(params)
    denominator = math.sqrt(n1) * gamma - 2.0 * r
    if denominator <= 0:
        raise DomainError(
            f'Bound undefined: sqrt(n1)*gamma={math.sqrt(n1) * gamma:.4g} does not exceed 2r={2 * r:.4g}'
        )
    return 2.0 * r / math.sqrt(m) + (4.0 + delta) * r / denominator


def train_gps(input, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, theory=None):
    inp = input.check()
    n_k = inp.n_train
    gamma = effective_gamma(inp.gamma, theory, n_k)
    blocks = gram_blocks(inp.kernel, inp.d, inp.train_pts, inp.test_pts)
    K = blocks.stacked()
    problem = QpProblem(kernel_matrix=K, n_train=n_k, gamma=gamma, C=inp.C)
    solution, report = solve_dual_qp(problem, tol=tol, max_iter=max_iter)
    if solution is None or report.status == INFEASIBLE:
        raise TrainingError(f'{inp.label or "class"}: dual QP is infeasible', report)
    if report.status == MAX_ITER:
        logger.warning('%s: dual QP stopped at the iteration limit (gap %.3g)', inp.label, report.dual_residual)

    coef = solution.coefficients
    g = K @ coef
    rho = recover_rho(g[:n_k], g[n_k:], inp.C, gamma, n_k)
    function = package_decision_function(inp.kernel, inp.d, inp.stacked_points, coef, rho, inp.label, GPS)
    logger.info(
        'Trained GPS for %s: n_k=%d m=%d gamma=%.4g C=%.4g rho=%.6g supports=%d',
        inp.label, n_k, len(inp.test_pts), gamma, inp.C, rho, function.n_support,
    )
    return function


def _guarded(trainer, inp, options):
    try:
        return trainer(inp, **options), None
    except GPSError as error:
        return None, str(error)


def train_all_classes(inputs, parallelism=1, trainer=train_gps, **options):
    """Train every class independently; output order follows ``inputs``"""
    inputs = list(inputs)
    if not inputs:
        raise InputError('train_all_classes needs at least one class')
    n_jobs = max(1, min(int(parallelism), len(inputs)))
    outcomes = Parallel(n_jobs=n_jobs)(delayed(_guarded)(trainer, inp, options) for inp in inputs)
    failures = {
        inp.label if inp.label is not None else index: error
        for index, (inp, (_, error)) in enumerate(zip(inputs, outcomes))
        if error is not None
    }
    if failures:
        raise ClassTrainingError(failures)
    return [function for function, _ in outcomes]
