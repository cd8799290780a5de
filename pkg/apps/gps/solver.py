"""
Convex solvers used by training.

* ``solve_dual_qp`` -- the GPS dual. The objective is linear increasing in θ
  with θ ≥ max(α), so θ is searched on a bounded interval while the remaining
  box + single-equality problem in (α, β) is solved by maximal-violating-pair
  SMO, warm-started between θ evaluations. The returned θ is max(α).
* ``recover_rho`` -- exact breakpoint scan of the piecewise-linear ρ problem.
* ``solve_smooth_constrained`` -- augmented Lagrangian around L-BFGS-B for a
  smooth objective, one smooth inequality and box bounds.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import Bounds, minimize, minimize_scalar

from .exceptions import InputError
from .kernel import is_psd

logger = logging.getLogger(__name__)

CONVERGED = 'converged'
MAX_ITER = 'max_iter'
INFEASIBLE = 'infeasible'

STATUS_CHOICES = [
    (CONVERGED, 'Converged'),
    (MAX_ITER, 'Iteration limit reached'),
    (INFEASIBLE, 'Infeasible'),
]

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 10_000

AL_PENALTY_INIT = 10.0
AL_PENALTY_GROWTH = 10.0
AL_MAX_ROUNDS = 8

# curvature floor for SMO pair updates on singular Gram matrices
TAU = 1e-12


@dataclass(frozen=True)
class SolverReport:
    objective: float
    primal_residual: float
    dual_residual: float
    iterations: int
    status: str
    merit_history: tuple = ()

    @property
    def converged(self):
        return self.status == CONVERGED

    @property
    def feasible(self):
        return self.status != INFEASIBLE


@dataclass(frozen=True)
class QpProblem:
    """
    min ½(αᵀG₁α + βᵀG₂β - 2αᵀG₃β) - 1ᵀα - 1ᵀβ + n_k·γ·θ
    s.t. 0 ≤ α ≤ θ, 0 ≤ β ≤ C, 1ᵀα - 1ᵀβ = 1, θ ≥ 0
    """
    kernel_matrix: np.ndarray  # stacked Gram: class-k rows first, then test rows
    n_train: int
    gamma: float
    C: float

    def __post_init__(self):
        K = np.asarray(self.kernel_matrix, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise InputError(f'QP kernel matrix must be square, got shape {K.shape}')
        if not 0 <= self.n_train <= K.shape[0]:
            raise InputError('n_train exceeds the number of stacked points')
        if not self.C > 0:
            raise InputError(f'C must be positive, got {self.C!r}')
        if not 0 < self.gamma < 1:
            raise InputError(f'gamma must lie in (0, 1), got {self.gamma!r}')
        object.__setattr__(self, 'kernel_matrix', K)

    @property
    def n_test(self):
        return self.kernel_matrix.shape[0] - self.n_train

    @property
    def signs(self):
        return np.concatenate([np.ones(self.n_train), -np.ones(self.n_test)])

    @property
    def theta_cost(self):
        return self.n_train * self.gamma


@dataclass(frozen=True)
class DualSolution:
    alpha: np.ndarray
    beta: np.ndarray
    theta: float
    objective: float

    @property
    def coefficients(self):
        """Signed representer coefficients (+α on class rows, -β on test rows)"""
        return np.concatenate([self.alpha, -self.beta])


def dual_objective(problem, alpha, beta, theta):
    c = np.concatenate([alpha, -np.asarray(beta)])
    K = problem.kernel_matrix
    return float(0.5 * c @ K @ c - np.sum(alpha) - np.sum(beta) + problem.theta_cost * theta)


def smo_box_qp(K, y, linear, upper, start, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """
    Minimise ½(y∘z)ᵀK(y∘z) + linearᵀz over 0 ≤ z ≤ upper, keeping yᵀz at its
    starting value. y holds ±1 entries. Returns (z, gradient, iterations,
    violation gap, status).
    """
    z = np.array(start, dtype=float)
    grad = y * (K @ (y * z)) + linear
    iterations = 0
    while True:
        score = -y * grad
        up = np.where(y > 0, z < upper, z > 0)
        low = np.where(y > 0, z > 0, z < upper)
        if not up.any() or not low.any():
            return z, grad, iterations, 0.0, CONVERGED
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        gap = float(score[i] - score[j])
        if gap <= tol:
            return z, grad, iterations, max(gap, 0.0), CONVERGED
        if iterations >= max_iter:
            return z, grad, iterations, gap, MAX_ITER

        curvature = K[i, i] + K[j, j] - 2.0 * K[i, j]
        room_i = upper[i] - z[i] if y[i] > 0 else z[i]
        room_j = z[j] if y[j] > 0 else upper[j] - z[j]
        step = min(gap / max(curvature, TAU), room_i, room_j)

        z[i] += y[i] * step
        z[j] -= y[j] * step
        if step == room_i:
            z[i] = upper[i] if y[i] > 0 else 0.0
        if step == room_j:
            z[j] = 0.0 if y[j] > 0 else upper[j]
        grad += step * y * (K[i] - K[j])
        iterations += 1


def _feasible_start(previous, n_train, upper):
    """Clip a previous iterate into the box and restore 1ᵀα - 1ᵀβ = 1"""
    if previous is None:
        z = np.zeros(upper.shape[0])
        z[:n_train] = 1.0 / n_train
        return z
    z = np.clip(previous, 0.0, upper)
    alpha, beta = z[:n_train], z[n_train:]
    deficit = 1.0 - (alpha.sum() - beta.sum())
    if deficit > 0:
        # shrink β first, then raise α toward its cap
        take = min(deficit, beta.sum())
        if take > 0:
            beta *= 1.0 - take / beta.sum()
            deficit -= take
        if deficit > 0:
            room = upper[:n_train] - alpha
            alpha += deficit * room / room.sum()
    elif deficit < 0:
        alpha *= 1.0 + deficit / alpha.sum()
    return np.concatenate([alpha, beta])


def _reduced_objective(K, y, z):
    c = y * z
    return float(0.5 * c @ K @ c - z.sum())


def solve_dual_qp(problem, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, start=None):
    """Solve the GPS dual; returns (DualSolution or None, SolverReport)"""
    K = problem.kernel_matrix
    if not is_psd(K):
        raise InputError('QP kernel matrix is not positive semidefinite')
    n, m = problem.n_train, problem.n_test
    if n == 0:
        report = SolverReport(np.inf, np.inf, np.inf, 0, INFEASIBLE)
        logger.warning('Dual QP has no class rows; 1ᵀα - 1ᵀβ = 1 cannot hold')
        return None, report

    y = problem.signs
    linear = -np.ones(n + m)
    theta_lo = 1.0 / n
    theta_hi = 1.0 + m * problem.C
    state = {'z': start, 'iterations': 0, 'best': None}

    def profile(theta):
        upper = np.concatenate([np.full(n, theta), np.full(m, problem.C)])
        z0 = _feasible_start(state['z'], n, upper)
        z, _, iterations, gap, status = smo_box_qp(K, y, linear, upper, z0, tol, max_iter)
        state['z'] = z
        state['iterations'] += iterations
        value = _reduced_objective(K, y, z) + problem.theta_cost * theta
        if state['best'] is None or value < state['best'][0]:
            state['best'] = (value, theta, z.copy(), gap, status)
        return value

    profile(theta_lo)
    if theta_hi > theta_lo:
        minimize_scalar(
            profile,
            bounds=(theta_lo, theta_hi),
            method='bounded',
            options={'xatol': 1e-10, 'maxiter': 500},
        )

    _, _, z, gap, status = state['best']
    alpha, beta = z[:n].copy(), z[n:].copy()
    theta = float(max(0.0, alpha.max()))
    objective = dual_objective(problem, alpha, beta, theta)
    primal_residual = float(max(
        abs(alpha.sum() - beta.sum() - 1.0),
        max(0.0, -z.min()),
        max(0.0, beta.max(initial=0.0) - problem.C),
    ))
    if status == CONVERGED and primal_residual > tol:
        status = INFEASIBLE
    report = SolverReport(
        objective=objective,
        primal_residual=primal_residual,
        dual_residual=gap,
        iterations=state['iterations'],
        status=status,
    )
    logger.debug(
        'Dual QP n_k=%d m=%d: objective=%.8g theta=%.6g status=%s iterations=%d',
        n, m, objective, theta, status, report.iterations,
    )
    return DualSolution(alpha=alpha, beta=beta, theta=theta, objective=objective), report


def rho_objective(rho, g_test, C):
    """-ρ + C·Σⱼ[1 + g_test[j] - ρ]₊, vectorised over ρ"""
    rho = np.asarray(rho, dtype=float)
    slack = np.maximum(0.0, 1.0 + np.asarray(g_test)[None, :] - rho.reshape(-1, 1))
    values = -rho.reshape(-1) + C * slack.sum(axis=1)
    return values.reshape(rho.shape) if rho.ndim else float(values[0])


def hinge_budget_usage(rho, g_train):
    """Σᵢ[1 - g_train[i] + ρ]₊"""
    return float(np.sum(np.maximum(0.0, 1.0 - np.asarray(g_train) + rho)))


def budget_boundary(g_train, budget):
    """Largest ρ with Σᵢ[1 - g_train[i] + ρ]₊ ≤ budget"""
    knots = np.sort(np.asarray(g_train, dtype=float) - 1.0)
    if budget <= 0:
        return float(knots[0])
    prefix = np.concatenate([[0.0], np.cumsum(knots)])
    # usage evaluated at each knot, knots[k] activates k earlier terms
    usage_at_knots = np.arange(knots.size) * knots - prefix[:-1]
    beyond = np.nonzero(usage_at_knots >= budget)[0]
    active = int(beyond[0]) if beyond.size else knots.size
    return float((budget + prefix[active]) / active)


def recover_rho(g_train, g_test, C, gamma, n_k):
    """
    ρ minimising -ρ + C·Σⱼ[1 + g_test[j] - ρ]₊ subject to
    Σᵢ[1 - g_train[i] + ρ]₊ ≤ n_k·γ. Ties resolve to the largest ρ.
    """
    g_train = np.asarray(g_train, dtype=float).ravel()
    g_test = np.asarray(g_test, dtype=float).ravel()
    if g_train.size == 0:
        raise InputError('recover_rho needs at least one class-k score')
    boundary = budget_boundary(g_train, n_k * gamma)
    breakpoints = np.concatenate([g_train - 1.0, g_test + 1.0])
    candidates = np.concatenate([[boundary], breakpoints[breakpoints <= boundary]])
    values = rho_objective(candidates, g_test, C)
    best = values.min()
    ties = candidates[values <= best + 1e-12 * max(1.0, abs(best))]
    return float(ties.max())


@dataclass(frozen=True)
class SmoothConstrainedProblem:
    """
    min objective(x) + l1_weight·Σx  s.t. constraint(x) ≤ bound, lower ≤ x ≤ upper

    ``objective`` and ``constraint`` return (value, gradient). The ℓ1 term is
    only accepted on a nonnegative box, where it is the linear function Σx.
    """
    objective: Callable
    constraint: Optional[Callable] = None
    bound: float = 0.0
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    l1_weight: float = 0.0

    def box(self, size):
        lower = np.full(size, -np.inf) if self.lower is None else np.asarray(self.lower, dtype=float)
        upper = np.full(size, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        if lower.shape != (size,) or upper.shape != (size,):
            raise InputError('Box bounds do not match the number of variables')
        return lower, upper


def _projected_gradient_norm(x, gradient, lower, upper):
    return float(np.max(np.abs(x - np.clip(x - gradient, lower, upper)), initial=0.0))


def solve_smooth_constrained(problem, start, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Augmented-Lagrangian outer loop around L-BFGS-B; returns (x, SolverReport)"""
    x = np.array(start, dtype=float).ravel()
    lower, upper = problem.box(x.size)
    if problem.l1_weight and np.any(lower < 0):
        raise InputError('An ℓ1 weight needs a nonnegative box')
    x = np.clip(x, lower, upper)
    bounds = Bounds(lower, upper)
    l1 = float(problem.l1_weight)

    def smooth_part(v):
        value, gradient = problem.objective(v)
        return value + l1 * v.sum(), np.asarray(gradient, dtype=float) + l1

    def violation(v):
        if problem.constraint is None:
            return 0.0, np.zeros_like(v)
        value, gradient = problem.constraint(v)
        return value - problem.bound, np.asarray(gradient, dtype=float)

    multiplier = 0.0
    penalty = AL_PENALTY_INIT
    traces = []
    iterations = 0
    for _ in range(AL_MAX_ROUNDS):

        def merit(v, lam=multiplier, mu=penalty):
            value, gradient = smooth_part(v)
            if problem.constraint is None:
                return value, gradient
            excess, constraint_gradient = violation(v)
            shifted = lam + mu * excess
            if shifted > 0:
                return value + (shifted ** 2 - lam ** 2) / (2.0 * mu), gradient + shifted * constraint_gradient
            return value - lam ** 2 / (2.0 * mu), gradient

        trace = [merit(x)[0]]
        result = minimize(
            merit, x, jac=True, method='L-BFGS-B', bounds=bounds,
            callback=lambda xk: trace.append(merit(xk)[0]),
            options={'maxiter': max_iter, 'gtol': tol * 1e-2, 'ftol': 1e-15},
        )
        iterations += int(result.nit)
        if result.fun <= trace[0]:
            x = np.clip(result.x, lower, upper)
        traces.append(tuple(trace))
        if problem.constraint is None:
            break
        excess, _ = violation(x)
        multiplier = max(0.0, multiplier + penalty * excess)
        _, gradient = smooth_part(x)
        _, constraint_gradient = violation(x)
        kkt = _projected_gradient_norm(x, gradient + multiplier * constraint_gradient, lower, upper)
        if excess <= tol and kkt <= tol:
            break
        if excess > tol:
            penalty *= AL_PENALTY_GROWTH

    objective, gradient = smooth_part(x)
    excess, constraint_gradient = violation(x)
    kkt = _projected_gradient_norm(x, gradient + multiplier * constraint_gradient, lower, upper)
    if excess > tol:
        status = INFEASIBLE
    elif kkt <= tol * max(1.0, abs(objective)):
        status = CONVERGED
    else:
        status = MAX_ITER
    report = SolverReport(
        objective=float(objective),
        primal_residual=float(max(0.0, excess)),
        dual_residual=kkt,
        iterations=iterations,
        status=status,
        merit_history=tuple(traces),
    )
    logger.debug('Smooth constrained solve: objective=%.8g status=%s iterations=%d',
                 objective, status, iterations)
    return x, report
