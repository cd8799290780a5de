import math
import pickle

import numpy as np
from django.test import SimpleTestCase

from apps.gps.exceptions import ClassTrainingError, DomainError, InputError
from apps.gps.kernel import GAUSSIAN, LINEAR, KernelSpec, bandwidth_candidates, gram
from apps.gps.losses import LossSpec, loss
from apps.gps.solver import QpProblem, recover_rho, rho_objective, solve_dual_qp
from apps.gps.training import (
    GPS, ClassTrainingInput, DecisionFunction, TheoryParams, complexity_radius, effective_gamma,
    estimation_error_bound, gamma_adjustment, package_decision_function, train_all_classes, train_gps,
)

LINE_GRID = np.linspace(-3, 3, 13)[:, None]


def blob_input(seed, label='a', n=20, m=20, gamma=0.1, C=1.0, shift=0.0):
    rng = np.random.default_rng(seed)
    train = rng.normal(loc=shift, size=(n, 2))
    test = np.vstack([rng.normal(loc=shift, size=(m // 2, 2)), rng.uniform(-4, 4, size=(m - m // 2, 2))])
    sigma = bandwidth_candidates(train, percentiles=(50,))[0]
    return ClassTrainingInput(train, test, gamma=gamma, C=C, kernel=KernelSpec(GAUSSIAN, sigma), label=label)


class TrainGpsTests(SimpleTestCase):
    def test_analytic_linear_instance(self):
        # duplicated 1+1 instance: f(x) = x - γ
        inp = ClassTrainingInput([[1.0], [1.0]], [[-1.0], [-1.0]], gamma=0.05, C=1.0, kernel=KernelSpec(LINEAR))
        f = train_gps(inp)
        np.testing.assert_allclose(f.scores(LINE_GRID), LINE_GRID[:, 0] - 0.05, atol=1e-8)
        self.assertAlmostEqual(f.score([1.0]), 0.95, places=8)
        self.assertAlmostEqual(f.score([-1.0]), -1.05, places=8)
        self.assertEqual(f.method, GPS)

    def test_empirical_hinge_risk_within_budget(self):
        inp = blob_input(0, gamma=0.1)
        f = train_gps(inp)
        risk = np.mean(loss(LossSpec(), f.scores(inp.train_pts)))
        self.assertLessEqual(risk, inp.gamma + 1e-6)

    def test_scores_reproduce_on_reevaluation(self):
        f = train_gps(blob_input(1))
        again = DecisionFunction(f.kernel, f.d, f.support.copy(), f.coef.copy(), f.rho, f.label)
        np.testing.assert_array_equal(f.scores(f.support), again.scores(f.support))

    def test_too_few_training_points(self):
        inp = ClassTrainingInput([[0.0, 0.0]], [[1.0, 1.0], [2.0, 2.0]], gamma=0.1)
        with self.assertRaises(InputError):
            train_gps(inp)

    def test_feature_mismatch(self):
        inp = ClassTrainingInput(np.zeros((3, 2)), np.zeros((3, 3)), gamma=0.1)
        with self.assertRaises(InputError):
            train_gps(inp)

    def test_score_rejects_wrong_width(self):
        f = train_gps(blob_input(2))
        with self.assertRaises(InputError):
            f.scores(np.zeros((2, 3)))

    def test_pruning_drops_zero_coefficients(self):
        f = package_decision_function(
            KernelSpec(LINEAR), np.ones(1), [[1.0], [2.0], [3.0]], [0.5, 1e-12, -0.2], rho=0.1,
        )
        self.assertEqual(f.n_support, 2)
        np.testing.assert_array_equal(f.support, [[1.0], [3.0]])


class DualityTests(SimpleTestCase):
    """Optimality conditions linking the dual solution to the trained function"""

    def dual(self, inp):
        K = gram(inp.kernel, inp.d, inp.stacked_points)
        return K, solve_dual_qp(QpProblem(K, n_train=inp.n_train, gamma=inp.gamma, C=inp.C))[0]

    def test_free_test_coefficients_sit_on_the_margin(self):
        free_rows = 0
        for seed in range(5):
            inp = blob_input(seed, n=12, m=12, C=0.37).check()
            _, solution = self.dual(inp)
            f = train_gps(inp)
            free = (solution.beta > 1e-6) & (solution.beta < inp.C - 1e-6)
            free_rows += int(free.sum())
            np.testing.assert_allclose(f.scores(inp.test_pts[free]), -1.0, atol=1e-4)
        self.assertGreater(free_rows, 0)

    def test_primal_value_matches_dual_value(self):
        for seed in range(5):
            inp = blob_input(seed, n=12, m=12, C=0.37).check()
            K, solution = self.dual(inp)
            coef = solution.coefficients
            g = K @ coef
            n_k = inp.n_train
            rho = recover_rho(g[:n_k], g[n_k:], inp.C, inp.gamma, n_k)
            primal = 0.5 * coef @ g + rho_objective(rho, g[n_k:], inp.C)
            self.assertLessEqual(np.mean(np.maximum(0.0, 1.0 - g[:n_k] + rho)), inp.gamma + 1e-9)
            self.assertAlmostEqual(primal, -solution.objective, delta=1e-4)

    def test_duplicating_class_rows_keeps_the_function(self):
        # agreement is limited by the dual stopping tolerance, not by rounding
        points = LINE_GRID.repeat(2, axis=1)
        for seed in range(3):
            inp = blob_input(seed, n=10, m=10)
            doubled = ClassTrainingInput(
                np.vstack([inp.train_pts, inp.train_pts]), inp.test_pts, gamma=inp.gamma, C=inp.C, kernel=inp.kernel,
            )
            np.testing.assert_allclose(train_gps(doubled).scores(points), train_gps(inp).scores(points), atol=1e-5)

    def test_rho_follows_gamma_on_analytic_instance(self):
        rhos = []
        for gamma in (0.01, 0.05, 0.2, 0.5, 0.8):
            inp = ClassTrainingInput([[1.0], [1.0]], [[-1.0], [-1.0]], gamma=gamma, C=1.0, kernel=KernelSpec(LINEAR))
            rhos.append(train_gps(inp).rho)
            self.assertAlmostEqual(rhos[-1], gamma, places=8)
        self.assertEqual(rhos, sorted(rhos))


class TrainAllClassesTests(SimpleTestCase):
    def test_single_class_matches_train_gps(self):
        inp = blob_input(3)
        (f,) = train_all_classes([inp])
        np.testing.assert_array_equal(f.scores(LINE_GRID.repeat(2, axis=1)), train_gps(inp).scores(LINE_GRID.repeat(2, axis=1)))

    def test_parallel_matches_serial(self):
        inputs = [blob_input(s, label=str(s), shift=s) for s in range(3)]
        serial = train_all_classes(inputs, parallelism=1)
        parallel = train_all_classes(inputs, parallelism=3)
        points = np.random.default_rng(9).normal(size=(25, 2))
        for a, b in zip(serial, parallel):
            self.assertEqual(a.label, b.label)
            np.testing.assert_allclose(a.scores(points), b.scores(points), atol=1e-10)

    def test_failures_are_aggregated(self):
        bad = ClassTrainingInput(np.empty((0, 2)), np.zeros((4, 2)), gamma=0.1, label='empty')
        with self.assertRaises(ClassTrainingError) as caught:
            train_all_classes([blob_input(4, label='ok'), bad])
        self.assertEqual(list(caught.exception.failures), ['empty'])
        self.assertIn('empty', str(caught.exception))

    def test_aggregate_error_pickles(self):
        error = pickle.loads(pickle.dumps(ClassTrainingError({'x': 'boom'})))
        self.assertEqual(error.failures, {'x': 'boom'})

    def test_no_inputs(self):
        with self.assertRaises(InputError):
            train_all_classes([])


class TheoryTests(SimpleTestCase):
    def test_gamma_adjustment_reference_value(self):
        self.assertAlmostEqual(gamma_adjustment(TheoryParams(zeta=0.05), 10000), 0.3465, places=4)

    def test_radius_at_zeta_two_over_e(self):
        self.assertAlmostEqual(
            complexity_radius(TheoryParams(zeta=2 / math.e)), (math.sqrt(2) + 2) * (2 + 3 * math.sqrt(2)), places=10,
        )

    def test_quadrupling_n1_halves_adjustment(self):
        params = TheoryParams(s=0.5, zeta=0.1)
        self.assertAlmostEqual(gamma_adjustment(params, 400), 2 * gamma_adjustment(params, 1600), places=12)

    def test_zeta_must_be_a_probability(self):
        for zeta in (0.0, 1.0, 2.5):
            with self.assertRaises(DomainError):
                TheoryParams(zeta=zeta)

    def test_n1_must_be_positive(self):
        with self.assertRaises(DomainError):
            gamma_adjustment(TheoryParams(), 0)

    def test_effective_gamma_floor(self):
        self.assertEqual(effective_gamma(0.05, None, 10), 0.05)
        self.assertAlmostEqual(effective_gamma(0.05, TheoryParams(), 100), 0.005, places=12)

    def test_estimation_bound_undefined_for_small_n1(self):
        with self.assertRaises(DomainError):
            estimation_error_bound(TheoryParams(), n1=100, m=100, gamma=0.05, delta=0.1)

    def test_estimation_bound_shrinks_with_samples(self):
        params = TheoryParams(s=0.0, zeta=0.5)
        small = estimation_error_bound(params, n1=10 ** 6, m=10 ** 6, gamma=0.5, delta=0.1)
        large = estimation_error_bound(params, n1=10 ** 8, m=10 ** 8, gamma=0.5, delta=0.1)
        self.assertLess(large, small)

    def test_adjusted_training_still_respects_budget(self):
        inp = blob_input(5, n=40, gamma=0.2)
        f = train_gps(inp, theory=TheoryParams(s=0.0, zeta=0.5))
        risk = np.mean(loss(LossSpec(), f.scores(inp.train_pts)))
        self.assertLessEqual(risk, effective_gamma(0.2, TheoryParams(s=0.0, zeta=0.5), 40) + 1e-6)
