import math

import numpy as np
from django.test import SimpleTestCase

from alphavb.exceptions import DomainError, ShapeError
from alphavb.metrics import evaluate, point_estimate, select
from alphavb.model_core import VariationalParams, precompute
from alphavb.simgen import SimConfig, SimInstance, generate


def params_with(mu, gamma):
    return VariationalParams(mu=mu, sigma=np.ones(len(mu)), gamma=gamma)


class SelectTests(SimpleTestCase):
    def test_strict_threshold(self):
        params = params_with([1.0, 1.0, 1.0, 1.0], [0.9, 0.5, 0.51, 0.1])
        self.assertEqual(select(params).tolist(), [0, 2])

    def test_custom_threshold(self):
        params = params_with([1.0, 1.0, 1.0], [0.9, 0.5, 0.7])
        self.assertEqual(select(params, 0.8).tolist(), [0])

    def test_threshold_domain(self):
        params = params_with([1.0], [0.5])
        with self.assertRaises(DomainError):
            select(params, 1.0)
        with self.assertRaises(DomainError):
            select(params, 0.0)


class PointEstimateTests(SimpleTestCase):
    def test_posterior_mean(self):
        params = params_with([2.0, -4.0], [0.5, 0.25])
        np.testing.assert_allclose(point_estimate(params), [1.0, -1.0])

    def test_selected_mu(self):
        params = params_with([2.0, -4.0, 3.0], [0.9, 0.25, 0.6])
        np.testing.assert_array_equal(point_estimate(params, "mu-selected"), [2.0, 0.0, 3.0])

    def test_unknown_estimator(self):
        with self.assertRaises(DomainError):
            point_estimate(params_with([1.0], [0.5]), "median")


class EvaluateTests(SimpleTestCase):
    def handmade_instance(self):
        theta = np.array([2.0, 0.0, -1.0, 0.0, 0.0, 0.0])
        test = precompute(np.eye(6), theta.copy())
        return SimInstance(train=test, test=test, theta_true=theta, support=np.array([0, 2]))

    def test_hand_computed_metrics(self):
        params = params_with([2.0, 1.0, -1.0, 0.0, 0.0, 0.0], [0.9, 0.6, 0.2, 0.1, 0.1, 0.1])
        bundle = evaluate(params, self.handmade_instance())
        self.assertAlmostEqual(bundle.fdr, 0.5)
        self.assertAlmostEqual(bundle.tpr, 0.5)
        self.assertAlmostEqual(bundle.l2_error, math.sqrt(1.04), places=12)
        self.assertAlmostEqual(bundle.mspe, 1.04 / 6, places=12)
        self.assertEqual(set(bundle.as_row()), {"l2", "fdr", "tpr", "mspe"})

    def test_nothing_selected(self):
        params = params_with(np.zeros(6), np.full(6, 0.1))
        bundle = evaluate(params, self.handmade_instance())
        self.assertEqual(bundle.fdr, 0.0)
        self.assertEqual(bundle.tpr, 0.0)

    def test_perfect_recovery(self):
        instance = generate(SimConfig(n=50, p=20, s=4, seed=3, test_n=400))
        gamma = np.where(instance.theta_true != 0, 1.0, 0.0)
        params = params_with(instance.theta_true, gamma)
        bundle = evaluate(params, instance)
        self.assertAlmostEqual(bundle.l2_error, 0.0, places=8)
        self.assertEqual(bundle.fdr, 0.0)
        self.assertEqual(bundle.tpr, 1.0)
        self.assertTrue(0.7 <= bundle.mspe <= 1.3)

    def test_mspe_falls_back_to_training_rows(self):
        instance = generate(SimConfig(n=30, p=5, s=2, seed=6))
        no_test = SimInstance(train=instance.train, test=None, theta_true=instance.theta_true, support=instance.support)
        params = params_with(np.zeros(5), np.full(5, 0.1))
        bundle = evaluate(params, no_test)
        self.assertAlmostEqual(bundle.mspe, instance.train.yty / 30, places=12)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            evaluate(params_with([1.0, 2.0], [0.5, 0.5]), self.handmade_instance())
