"""One-class SVM baseline, one model per class, sharing the GPS SMO routine."""
import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InputError, TrainingError
from .kernel import KernelSpec, as_points, gram, is_psd
from .solver import DEFAULT_MAX_ITER, DEFAULT_TOL, MAX_ITER, smo_box_qp
from .training import OCSVM, package_decision_function

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OcsvmConfig:
    nu: float = 0.05
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        if not 0 < self.nu <= 1:
            raise InputError(f'nu must lie in (0, 1], got {self.nu!r}')


def ocsvm_offset(alpha, g, cap):
    """ρ from the KKT conditions: free multipliers sit on the margin g = ρ"""
    free = (alpha > 0) & (alpha < cap)
    if free.any():
        return float(np.mean(g[free]))
    at_cap = alpha >= cap
    at_zero = alpha <= 0
    if not at_zero.any():
        return float(np.max(g[at_cap]))
    if not at_cap.any():
        return float(np.min(g[at_zero]))
    return float(0.5 * (np.max(g[at_cap]) + np.min(g[at_zero])))


def train_ocsvm(points, config, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, d=None, label=None):
    """
    Dual: min ½αᵀKα  s.t. 0 ≤ α ≤ 1/(mν), Σα = 1.
    Returns f(x) = Σαᵢ K(x, xᵢ) - ρ.
    """
    X = as_points(points)
    m = X.shape[0]
    if m < 2:
        raise InputError(f'{label or "OCSVM"}: need at least 2 points, got {m}')
    K = gram(config.kernel, d, X)
    if not is_psd(K):
        raise InputError('OCSVM kernel matrix is not positive semidefinite')

    cap = 1.0 / (m * config.nu)
    alpha, _, iterations, gap, status = smo_box_qp(
        K, np.ones(m), np.zeros(m), np.full(m, cap), np.full(m, 1.0 / m), tol, max_iter,
    )
    if not np.isclose(alpha.sum(), 1.0, atol=1e-9):
        raise TrainingError(f'{label or "OCSVM"}: multipliers drifted off the simplex')
    if status == MAX_ITER:
        logger.warning('%s: OCSVM stopped at the iteration limit (gap %.3g)', label, gap)

    rho = ocsvm_offset(alpha, K @ alpha, cap)
    function = package_decision_function(config.kernel, np.ones(X.shape[1]) if d is None else d,
                                         X, alpha, rho, label, OCSVM)
    logger.info('Trained OCSVM for %s: m=%d nu=%.4g rho=%.6g supports=%d iterations=%d',
                label, m, config.nu, rho, function.n_support, iterations)
    return function


def train_ocsvm_class(input, nu=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Per-class adapter used by ``train_all_classes``; ν defaults to the class γ"""
    config = OcsvmConfig(nu=input.gamma if nu is None else nu, kernel=input.kernel)
    return train_ocsvm(input.train_pts, config, tol=tol, max_iter=max_iter, d=input.d, label=input.label)
