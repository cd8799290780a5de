"""
GPS with weighted-kernel feature selection (GPSKFS).

Alternating minimisation of

    Ψ(α, ρ, d) = ½αᵀK_dα - ρ + C1·Σⱼ ℓ(ρ - (K_dα)ⱼ) + C2·Σd
    s.t. (1/n_k)·Σᵢ ℓ((K_dα)ᵢ - ρ) ≤ γ,  0 ≤ d ≤ 1

over representer coefficients α on all n_k + m stacked rows (class rows
first, then the test subset). With d fixed the problem is convex in (α, ρ).
With α fixed the kernel is linearised in d around the current weights and the
convex surrogate is solved jointly in (d, ρ); a backtracking line search on the
true Ψ picks the step. Ψ falls strictly as ρ grows, so for any (α, d) the best
ρ is the largest one meeting the class constraint, and every accepted iterate
keeps ρ there.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .exceptions import DescentViolationError, TrainingError, UnsupportedOperationError
from .kernel import KernelSpec, as_points, as_weights, gram, weighted_sq_distances
from .losses import HUBERIZED_LOSS, loss, loss_grad
from .solver import (
    DEFAULT_MAX_ITER, DEFAULT_TOL, INFEASIBLE, MAX_ITER, SmoothConstrainedProblem, SolverReport,
    solve_smooth_constrained,
)
from .training import GPSKFS, effective_gamma, package_decision_function

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-6
DESCENT_TOL = 1e-10
STEP_TOL = 1e-4
MAX_OUTER = 50
MAX_INNER = 20
MIN_STEP = 1e-6
MIN_DECREASE = 1e-12
BISECTION_ROUNDS = 100


@dataclass(frozen=True)
class KfsState:
    alpha: np.ndarray
    rho: float
    d: np.ndarray
    objective: float
    constraint: float = 0.0

    def as_dict(self):
        return {
            'alpha': self.alpha.tolist(),
            'rho': self.rho,
            'd': self.d.tolist(),
            'objective': self.objective,
            'constraint': self.constraint,
        }


@dataclass(frozen=True)
class LinearizationMatrices:
    A: np.ndarray  # N×N
    B: np.ndarray  # p×N

    def kernel_rows(self, alpha, d):
        """First-order model of K_d·α"""
        return self.A @ alpha + self.B.T @ d


@dataclass(frozen=True)
class KfsProblem:
    points: np.ndarray
    n_train: int
    gamma: float
    C1: float
    C2: float
    kernel: KernelSpec
    loss: object = HUBERIZED_LOSS

    def kernel_matrix(self, d):
        return gram(self.kernel, d, self.points)

    def objective(self, alpha, rho, d, K=None):
        K = self.kernel_matrix(d) if K is None else K
        u = K @ alpha
        return float(
            0.5 * alpha @ u - rho
            + self.C1 * np.sum(loss(self.loss, rho - u[self.n_train:]))
            + self.C2 * np.sum(d)
        )

    def constraint(self, alpha, rho, d, K=None):
        K = self.kernel_matrix(d) if K is None else K
        u = K[:self.n_train] @ alpha
        return float(np.mean(loss(self.loss, u - rho)))

    def feasible(self, alpha, rho, d, K=None):
        return self.constraint(alpha, rho, d, K) <= self.gamma + FEASIBILITY_TOL

    def state(self, alpha, rho, d):
        K = self.kernel_matrix(d)
        return KfsState(
            alpha=alpha, rho=float(rho), d=d,
            objective=self.objective(alpha, rho, d, K),
            constraint=self.constraint(alpha, rho, d, K),
        )

    def boundary_rho(self, alpha, d, K=None):
        """Largest ρ with (1/n_k)·Σᵢ ℓ((K_dα)ᵢ - ρ) ≤ γ, by bisection"""
        K = self.kernel_matrix(d) if K is None else K
        u = K[:self.n_train] @ alpha
        low = float(np.min(u)) - 1.0 - self.loss.delta  # every class term is zero here
        high = float(np.max(u)) + 1.0 + self.loss.delta  # every class term exceeds 1 here
        for _ in range(BISECTION_ROUNDS):
            middle = 0.5 * (low + high)
            if np.mean(loss(self.loss, u - middle)) <= self.gamma:
                low = middle
            else:
                high = middle
        return low

    def profiled_state(self, alpha, d):
        """State at (α, d) with ρ on the class-constraint boundary"""
        K = self.kernel_matrix(d)
        rho = self.boundary_rho(alpha, d, K)
        return KfsState(
            alpha=alpha, rho=rho, d=d,
            objective=self.objective(alpha, rho, d, K),
            constraint=self.constraint(alpha, rho, d, K),
        )


@dataclass(frozen=True)
class DStepResult:
    d: np.ndarray
    rho: float
    report: Optional[SolverReport]
    stalled: bool


@dataclass(frozen=True)
class LineSearchResult:
    step: float
    d: np.ndarray
    stalled: bool


@dataclass(frozen=True)
class KfsResult:
    function: object
    states: tuple = field(default_factory=tuple)
    stalled: bool = False

    @property
    def objectives(self):
        return [state.objective for state in self.states]


def solve_alpha_rho(problem, d, start=None, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Minimise Ψ over (α, ρ) with d fixed; returns (alpha, rho, report)"""
    K = problem.kernel_matrix(d)
    n_k, n_all = problem.n_train, K.shape[0]
    spec, C1 = problem.loss, problem.C1

    def objective(x):
        alpha, rho = x[:-1], x[-1]
        u = K @ alpha
        slope = loss_grad(spec, rho - u[n_k:])
        value = 0.5 * alpha @ u - rho + C1 * np.sum(loss(spec, rho - u[n_k:]))
        gradient = np.empty_like(x)
        gradient[:-1] = u - C1 * (K[:, n_k:] @ slope)
        gradient[-1] = -1.0 + C1 * np.sum(slope)
        return value, gradient

    def constraint(x):
        alpha, rho = x[:-1], x[-1]
        margin = K[:n_k] @ alpha - rho
        slope = loss_grad(spec, margin)
        gradient = np.empty_like(x)
        gradient[:-1] = K[:, :n_k] @ slope / n_k
        gradient[-1] = -np.mean(slope)
        return np.mean(loss(spec, margin)), gradient

    x0 = np.zeros(n_all + 1) if start is None else np.concatenate([start[0], [start[1]]])
    x, report = solve_smooth_constrained(
        SmoothConstrainedProblem(objective=objective, constraint=constraint, bound=problem.gamma),
        x0, tol=tol, max_iter=max_iter,
    )
    alpha = x[:-1]
    rho = problem.boundary_rho(alpha, d, K)
    if report.status == INFEASIBLE:
        logger.warning('(alpha, rho) solve ended infeasible; rho lowered to %.6g', rho)
    report = replace(
        report,
        objective=problem.objective(alpha, rho, d, K),
        primal_residual=0.0,
        status=MAX_ITER if report.status == INFEASIBLE else report.status,
    )
    return alpha, rho, report


def linearize(kernel, d_prime, alpha, points):
    """
    A = K_{d'} - ∇K_{d'}ᵀd' entrywise and B[:, i] = Σⱼ αⱼ∇K_{d'}[i, j].

    For the gaussian kernel ∇K[i, j]ᵀd' = -2·K[i, j]·‖d'∘(xᵢ - xⱼ)‖²/σ², and the
    columns of B reduce to three matrix products over α-weighted feature moments.
    """
    if not kernel.differentiable:
        raise UnsupportedOperationError('Kernel linearisation needs the gaussian kernel')
    X = as_points(points)
    d_prime = as_weights(d_prime, X.shape[1])
    alpha = np.asarray(alpha, dtype=float)
    scale = 2.0 / kernel.sigma ** 2
    K = gram(kernel, d_prime, X)
    A = K * (1.0 + scale * weighted_sq_distances(d_prime, X, X))
    Ka = K @ alpha
    moments = X ** 2 * Ka[:, None] - 2.0 * X * (K @ (alpha[:, None] * X)) + K @ (alpha[:, None] * X ** 2)
    B = (-scale * d_prime[None, :] * moments).T
    return LinearizationMatrices(A=A, B=B)


def solve_d_step(lin, alpha, rho, C1, C2, gamma, n_train, loss_spec=HUBERIZED_LOSS, start=None,
                 tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, rho_free=False):
    """
    Convex surrogate in d on the box [0, 1]ᵖ with α fixed.

    With ``rho_free`` the offset is a variable of the surrogate as well, ``rho``
    is its starting value and the objective gains the -ρ term; otherwise ρ is
    held at ``rho``.
    """
    alpha = np.asarray(alpha, dtype=float)
    base = lin.A @ alpha
    Bt = lin.B.T
    linear_cost = 0.5 * (lin.B @ alpha)
    p = lin.B.shape[0]

    def split(x):
        return (x[:p], x[p]) if rho_free else (x, rho)

    def objective(x):
        d, r = split(x)
        u = base[n_train:] + Bt[n_train:] @ d
        slope = loss_grad(loss_spec, r - u)
        value = linear_cost @ d + C1 * np.sum(loss(loss_spec, r - u))
        gradient = linear_cost - C1 * (lin.B[:, n_train:] @ slope)
        if not rho_free:
            return value, gradient
        return value + C2 * np.sum(d) - r, np.append(gradient + C2, C1 * np.sum(slope) - 1.0)

    def constraint(x):
        d, r = split(x)
        margin = base[:n_train] + Bt[:n_train] @ d - r
        slope = loss_grad(loss_spec, margin)
        value, gradient = np.mean(loss(loss_spec, margin)), lin.B[:, :n_train] @ slope / n_train
        if not rho_free:
            return value, gradient
        return value, np.append(gradient, -np.mean(slope))

    previous = np.ones(p) if start is None else np.asarray(start, dtype=float)
    if rho_free:
        # ℓ1 on d is written out in the objective since ρ has no lower bound
        problem = SmoothConstrainedProblem(
            objective=objective, constraint=constraint, bound=gamma,
            lower=np.append(np.zeros(p), -np.inf), upper=np.append(np.ones(p), np.inf),
        )
        x0 = np.append(previous, rho)
    else:
        problem = SmoothConstrainedProblem(
            objective=objective, constraint=constraint, bound=gamma,
            lower=np.zeros(p), upper=np.ones(p), l1_weight=C2,
        )
        x0 = previous
    x, report = solve_smooth_constrained(problem, x0, tol=tol, max_iter=max_iter)
    if report.status == INFEASIBLE:
        logger.debug('Weight step infeasible (violation %.3g); keeping previous d', report.primal_residual)
        return DStepResult(d=previous, rho=float(rho), report=report, stalled=True)
    d, r = split(x)
    return DStepResult(d=np.clip(d, 0.0, 1.0), rho=float(r), report=report, stalled=False)


def line_search(state, d_cv, objective_fn, feasible_fn=None):
    """Backtracking by halving from ν = 1; ν = 0 with a stall flag when nothing decreases"""
    direction = np.asarray(d_cv, dtype=float) - state.d
    if not np.any(direction):
        return LineSearchResult(step=0.0, d=state.d, stalled=True)
    step = 1.0
    while step >= MIN_STEP:
        candidate = np.clip(state.d + step * direction, 0.0, 1.0)
        if objective_fn(candidate) < state.objective - MIN_DECREASE:
            if feasible_fn is None or feasible_fn(candidate):
                return LineSearchResult(step=step, d=candidate, stalled=False)
        step *= 0.5
    return LineSearchResult(step=0.0, d=state.d, stalled=True)


def _update_weights(problem, state, tol, max_iter):
    """Inner loop over d with α fixed; ρ follows d along the class-constraint boundary"""
    alpha = state.alpha
    current = state
    for _ in range(MAX_INNER):
        lin = linearize(problem.kernel, current.d, alpha, problem.points)
        step = solve_d_step(
            lin, alpha, current.rho, problem.C1, problem.C2, problem.gamma,
            problem.n_train, problem.loss, start=current.d, tol=tol, max_iter=max_iter, rho_free=True,
        )
        if step.stalled:
            break
        search = line_search(current, step.d, lambda w: problem.profiled_state(alpha, w).objective)
        if search.stalled:
            break
        change = float(np.max(np.abs(search.d - current.d)))
        current = problem.profiled_state(alpha, search.d)
        if change < STEP_TOL:
            break
    return current


def run_gpskfs(input, C1=1.0, C2=1.0, loss_spec=HUBERIZED_LOSS, tol=DEFAULT_TOL,
               max_iter=DEFAULT_MAX_ITER, theory=None, max_outer=MAX_OUTER):
    """Alternating optimisation; returns the packaged function and every accepted iterate"""
    inp = input.check()
    if not inp.kernel.differentiable:
        raise UnsupportedOperationError('GPSKFS needs the gaussian kernel')
    if not loss_spec.differentiable:
        raise UnsupportedOperationError('GPSKFS needs the huberized loss')
    if C1 < 0 or C2 < 0:
        raise TrainingError(f'{inp.label}: C1 and C2 must be nonnegative')
    problem = KfsProblem(
        points=inp.stacked_points,
        n_train=inp.n_train,
        gamma=effective_gamma(inp.gamma, theory, inp.n_train),
        C1=C1,
        C2=C2,
        kernel=inp.kernel,
        loss=loss_spec,
    )

    d = inp.d
    alpha, rho, _ = solve_alpha_rho(problem, d, tol=tol, max_iter=max_iter)
    state = problem.state(alpha, rho, d)
    states = [state]
    stalled = False
    for outer in range(max_outer):
        moved = _update_weights(problem, state, tol, max_iter)
        if np.array_equal(moved.d, state.d):
            stalled = True
            break
        alpha, rho, _ = solve_alpha_rho(problem, moved.d, start=(moved.alpha, moved.rho), tol=tol, max_iter=max_iter)
        candidate = problem.state(alpha, rho, moved.d)
        if candidate.constraint > problem.gamma + FEASIBILITY_TOL or candidate.objective > moved.objective:
            candidate = moved
        if candidate.objective > state.objective + DESCENT_TOL:
            raise DescentViolationError(
                f'{inp.label}: objective rose from {state.objective:.12g} to {candidate.objective:.12g} '
                f'at outer iteration {outer + 1}',
                iterates=[s.as_dict() for s in states + [candidate]],
            )
        change = max(
            float(np.max(np.abs(candidate.alpha - state.alpha))),
            abs(candidate.rho - state.rho),
            float(np.max(np.abs(candidate.d - state.d))),
        )
        states.append(candidate)
        state = candidate
        logger.debug('GPSKFS %s outer %d: objective=%.8g change=%.3g', inp.label, outer + 1, state.objective, change)
        if change < STEP_TOL:
            break

    function = package_decision_function(
        inp.kernel, state.d, problem.points, state.alpha, state.rho, inp.label, GPSKFS,
    )
    logger.info(
        'Trained GPSKFS for %s: outer=%d objective=%.6g active features=%d/%d%s',
        inp.label, len(states) - 1, state.objective, int(np.count_nonzero(state.d > 1e-6)),
        state.d.shape[0], ' (stalled)' if stalled else '',
    )
    return KfsResult(function=function, states=tuple(states), stalled=stalled)


def train_gpskfs(input, C1=1.0, C2=1.0, loss_spec=HUBERIZED_LOSS, tol=DEFAULT_TOL,
                 max_iter=DEFAULT_MAX_ITER, theory=None):
    return run_gpskfs(input, C1, C2, loss_spec, tol, max_iter, theory).function
