import numpy as np
from django.test import SimpleTestCase
from scipy.optimize import minimize_scalar

from apps.gps.exceptions import UnsupportedOperationError
from apps.gps.feature_selection import (
    KfsProblem, KfsState, LinearizationMatrices, line_search, linearize, run_gpskfs, solve_alpha_rho,
    solve_d_step, train_gpskfs,
)
from apps.gps.kernel import GAUSSIAN, LINEAR, KernelSpec, gram
from apps.gps.losses import HINGE, HUBERIZED, HUBERIZED_LOSS, LossSpec, loss
from apps.gps.training import GPSKFS, ClassTrainingInput, train_gps

KERNEL = KernelSpec(GAUSSIAN, 1.5)
WIDE_HUBER = LossSpec(HUBERIZED, 0.9)
LINE_GRID = np.linspace(-3, 3, 13)[:, None]


def noisy_input(seed=0, n=12, m=12, gamma=0.2):
    """Two informative coordinates plus one coordinate of small noise"""
    rng = np.random.default_rng(seed)

    def rows(count, center):
        signal = rng.normal(loc=center, scale=0.7, size=(count, 2))
        return np.column_stack([signal, rng.normal(scale=0.05, size=count)])

    train = rows(n, 0.0)
    test = np.vstack([rows(m // 2, 0.0), rows(m - m // 2, 3.0)])
    return ClassTrainingInput(train, test, gamma=gamma, C=1.0, kernel=KERNEL, label='k')


def separable_surrogate():
    """
    One class row and two test rows over two features, with α = e₁ so only the
    first column of A matters. Under WIDE_HUBER every test term stays quadratic
    on the whole box; the minimiser is (0.4, 0.7) without the class constraint
    and (0.55, 0.85) with it, where it reads d₁ + d₂ ≥ 1.4 at γ = 0.1, ρ = 0.
    """
    A = np.zeros((3, 3))
    A[:, 0] = [1.16, -1.16, -1.01]
    B = np.array([[0.1, -0.5, 0.0], [0.1, 0.0, -0.5]])
    return LinearizationMatrices(A=A, B=B), np.array([1.0, 0.0, 0.0])


def surrogate_grid_minimum(lin, alpha, rho, C1, C2, gamma, n_train, loss_spec, step=1e-3):
    ticks = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)
    x1, x2 = np.meshgrid(ticks, ticks, indexing='ij')
    D = np.column_stack([x1.ravel(), x2.ravel()])
    U = lin.A @ alpha + D @ lin.B
    values = (
        D @ (0.5 * lin.B @ alpha)
        + C1 * loss(loss_spec, rho - U[:, n_train:]).sum(axis=1)
        + C2 * D.sum(axis=1)
    )
    values[loss(loss_spec, U[:, :n_train] - rho).mean(axis=1) > gamma] = np.inf
    return D[np.argmin(values)]


class LinearizeTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(1)
        self.X = rng.normal(size=(6, 3))
        self.alpha = rng.normal(size=6)
        self.d = np.array([0.9, 0.4, 0.7])

    def test_exact_at_expansion_point(self):
        lin = linearize(KERNEL, self.d, self.alpha, self.X)
        np.testing.assert_allclose(
            lin.kernel_rows(self.alpha, self.d), gram(KERNEL, self.d, self.X) @ self.alpha, atol=1e-10,
        )

    def test_zero_alpha_gives_zero_b(self):
        lin = linearize(KERNEL, self.d, np.zeros(6), self.X)
        self.assertEqual(lin.B.shape, (3, 6))
        np.testing.assert_array_equal(lin.B, 0.0)

    def test_b_matches_finite_differences(self):
        lin = linearize(KERNEL, self.d, self.alpha, self.X)
        h = 1e-6
        for t in range(3):
            step = np.zeros(3)
            step[t] = h
            numeric = (gram(KERNEL, self.d + step, self.X) - gram(KERNEL, self.d - step, self.X)) @ self.alpha / (2 * h)
            np.testing.assert_allclose(lin.B[t], numeric, atol=1e-6)

    def test_linear_kernel_unsupported(self):
        with self.assertRaises(UnsupportedOperationError):
            linearize(KernelSpec(LINEAR), self.d, self.alpha, self.X)


class AlphaRhoTests(SimpleTestCase):
    def test_solution_is_feasible(self):
        inp = noisy_input().check()
        problem = KfsProblem(inp.stacked_points, inp.n_train, inp.gamma, 1.0, 1.0, KERNEL)
        alpha, rho, report = solve_alpha_rho(problem, np.ones(3))
        self.assertEqual(alpha.shape, (24,))
        self.assertTrue(problem.feasible(alpha, rho, np.ones(3)))
        self.assertTrue(report.feasible)

    def test_zero_test_penalty_pushes_rho_to_boundary(self):
        inp = noisy_input(2).check()
        problem = KfsProblem(inp.stacked_points, inp.n_train, inp.gamma, 0.0, 0.0, KERNEL)
        alpha, rho, _ = solve_alpha_rho(problem, np.ones(3))
        self.assertAlmostEqual(problem.constraint(alpha, rho, np.ones(3)), inp.gamma, delta=1e-3)

    def test_boundary_rho_meets_budget_exactly(self):
        inp = noisy_input(7).check()
        problem = KfsProblem(inp.stacked_points, inp.n_train, inp.gamma, 1.0, 0.5, KERNEL)
        d = np.array([0.8, 0.6, 0.3])
        alpha = np.random.default_rng(7).normal(scale=0.2, size=inp.stacked_points.shape[0])
        rho = problem.boundary_rho(alpha, d)
        self.assertAlmostEqual(problem.constraint(alpha, rho, d), inp.gamma, delta=1e-9)
        self.assertGreater(problem.constraint(alpha, rho + 1e-6, d), inp.gamma)


class DStepTests(SimpleTestCase):
    def test_large_l1_weight_zeroes_weights(self):
        inp = noisy_input(3).check()
        d = np.ones(3)
        alpha = np.full(inp.stacked_points.shape[0], 0.05)
        lin = linearize(KERNEL, d, alpha, inp.stacked_points)
        # rho far below every margin keeps the class constraint slack at d = 0
        step = solve_d_step(lin, alpha, -100.0, 1.0, 1e6, inp.gamma, inp.n_train, start=d)
        self.assertFalse(step.stalled)
        np.testing.assert_allclose(step.d, 0.0, atol=1e-8)

    def test_infeasible_step_keeps_previous_weights(self):
        inp = noisy_input(4).check()
        d = np.full(3, 0.5)
        alpha = np.zeros(inp.stacked_points.shape[0])
        lin = linearize(KERNEL, d, alpha, inp.stacked_points)
        # zero alpha and rho = 100 put every class margin deep in the linear branch
        step = solve_d_step(lin, alpha, 100.0, 1.0, 1.0, inp.gamma, inp.n_train, start=d)
        self.assertTrue(step.stalled)
        np.testing.assert_array_equal(step.d, d)

    def test_fixed_rho_step_matches_grid_search(self):
        lin, alpha = separable_surrogate()
        step = solve_d_step(lin, alpha, 0.0, 1.0, 0.1, 0.1, 1, loss_spec=WIDE_HUBER)
        self.assertFalse(step.stalled)
        best = surrogate_grid_minimum(lin, alpha, 0.0, 1.0, 0.1, 0.1, 1, WIDE_HUBER)
        np.testing.assert_allclose(step.d, best, atol=2e-3)
        np.testing.assert_allclose(step.d, [0.55, 0.85], atol=2e-3)

    def test_slack_class_constraint_leaves_unconstrained_minimiser(self):
        lin, alpha = separable_surrogate()
        step = solve_d_step(lin, alpha, 0.0, 1.0, 0.1, 0.5, 1, loss_spec=WIDE_HUBER)
        best = surrogate_grid_minimum(lin, alpha, 0.0, 1.0, 0.1, 0.5, 1, WIDE_HUBER)
        np.testing.assert_allclose(step.d, best, atol=2e-3)
        np.testing.assert_allclose(step.d, [0.4, 0.7], atol=2e-3)

    def test_free_rho_never_does_worse_than_fixed_rho(self):
        lin, alpha = separable_surrogate()
        fixed = solve_d_step(lin, alpha, 0.0, 1.0, 0.1, 0.1, 1, loss_spec=WIDE_HUBER)
        joint = solve_d_step(lin, alpha, 0.0, 1.0, 0.1, 0.1, 1, loss_spec=WIDE_HUBER, rho_free=True)
        self.assertFalse(joint.stalled)
        # the fixed-rho objective leaves out the -rho term, which is zero here
        self.assertLessEqual(joint.report.objective, fixed.report.objective + 1e-6)
        self.assertTrue(np.all((joint.d >= 0) & (joint.d <= 1)))


class LineSearchTests(SimpleTestCase):
    def state(self, d):
        return KfsState(alpha=np.zeros(2), rho=0.0, d=np.asarray(d, dtype=float), objective=float(np.sum(d)))

    def test_full_step_accepted_when_descending(self):
        result = line_search(self.state([1.0, 1.0]), np.zeros(2), lambda w: float(np.sum(w)))
        self.assertEqual(result.step, 1.0)
        self.assertFalse(result.stalled)
        np.testing.assert_array_equal(result.d, [0.0, 0.0])

    def test_stalls_when_nothing_decreases(self):
        result = line_search(self.state([0.0, 0.0]), np.ones(2), lambda w: float(np.sum(w)))
        self.assertTrue(result.stalled)
        self.assertEqual(result.step, 0.0)

    def test_infeasible_trials_are_skipped(self):
        result = line_search(
            self.state([1.0, 1.0]), np.zeros(2), lambda w: float(np.sum(w)), lambda w: w[0] >= 0.5,
        )
        self.assertEqual(result.step, 0.5)

    def test_step_within_one_halving_of_valley_floor(self):
        for floor in (0.05, 0.1, 0.3, 0.7):
            center = np.full(2, 1.0 - floor)

            def valley(w, center=center):
                return float(np.sum((w - center) ** 2))

            start = KfsState(alpha=np.zeros(2), rho=0.0, d=np.ones(2), objective=valley(np.ones(2)))
            result = line_search(start, np.zeros(2), valley)
            reference = minimize_scalar(
                lambda nu: valley((1.0 - nu) * np.ones(2)), bounds=(0.0, 1.0), method='bounded',
            ).x
            self.assertFalse(result.stalled)
            self.assertGreaterEqual(result.step, reference / 2 - 1e-9)
            self.assertLessEqual(result.step, 2 * reference + 1e-9)


class RunGpskfsTests(SimpleTestCase):
    def test_objective_never_increases(self):
        result = run_gpskfs(noisy_input(5), C1=1.0, C2=0.5, max_outer=5)
        objectives = result.objectives
        self.assertTrue(all(b <= a + 1e-10 for a, b in zip(objectives, objectives[1:])))
        self.assertEqual(result.function.method, GPSKFS)
        self.assertTrue(np.all((result.function.d >= 0) & (result.function.d <= 1)))

    def test_iterates_stay_feasible(self):
        inp = noisy_input(6)
        result = run_gpskfs(inp, C1=1.0, C2=0.5, max_outer=5)
        for state in result.states:
            self.assertLessEqual(state.constraint, inp.gamma + 1e-6)

    def test_weights_move_off_the_noise_coordinate(self):
        result = run_gpskfs(noisy_input(7), C1=1.0, C2=0.1, max_outer=5)
        self.assertGreaterEqual(len(result.states), 2)
        self.assertFalse(np.array_equal(result.states[1].d, result.states[0].d))
        d = result.function.d
        self.assertLess(d[2], d[:2].mean() - 0.1)

    def test_unpenalised_single_feature_matches_fixed_weight_solve(self):
        inp = ClassTrainingInput([[1.0], [1.0]], [[-1.0], [-1.0]], gamma=0.05, C=1.0, kernel=KernelSpec(GAUSSIAN, 1.0))
        result = run_gpskfs(inp, C1=1.0, C2=0.0)
        np.testing.assert_array_equal(result.function.d, [1.0])

        checked = inp.check()
        problem = KfsProblem(checked.stacked_points, checked.n_train, inp.gamma, 1.0, 0.0, inp.kernel)
        alpha, rho, _ = solve_alpha_rho(problem, np.ones(1))
        expected = gram(inp.kernel, np.ones(1), LINE_GRID, checked.stacked_points) @ alpha - rho
        np.testing.assert_allclose(result.function.scores(LINE_GRID), expected, atol=1e-6)

        gps = train_gps(inp)
        ends = np.array([[1.0], [-1.0]])
        np.testing.assert_array_equal(np.sign(result.function.scores(ends)), np.sign(gps.scores(ends)))
        np.testing.assert_array_equal(np.sign(gps.scores(ends)), [1.0, -1.0])

    def test_hinge_loss_unsupported(self):
        with self.assertRaises(UnsupportedOperationError):
            train_gpskfs(noisy_input(), loss_spec=LossSpec(HINGE))

    def test_linear_kernel_unsupported(self):
        inp = ClassTrainingInput(np.zeros((3, 2)), np.ones((3, 2)), gamma=0.1, kernel=KernelSpec(LINEAR))
        with self.assertRaises(UnsupportedOperationError):
            train_gpskfs(inp, loss_spec=HUBERIZED_LOSS)
