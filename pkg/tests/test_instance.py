import unittest
import os
import logging
import sys
import tempfile

import numpy as np

# Dynamically add the root directory of the project to sys.path
current_dir = os.path.dirname(os.path.abspath(__file__))
root_dir = os.path.abspath(os.path.join(current_dir, '..'))
sys.path.insert(0, root_dir)

from momclust.geometry import Cover, grid_cover
from momclust.instance import (ClusterInstance, ClusterSolution, assemble_w, assignment_matrix, as_labels,
                               optimal_centers, objective, fit_center, cluster_statistics, lift_affine,
                               solution_for, gen_euclidean, gen_hyperplane, gen_affine, save_instance,
                               load_instance)


class TestInstance(unittest.TestCase):

    def setUp(self):
        logging.basicConfig(level=logging.DEBUG, format='%(asctime)s - %(levelname)s - %(message)s')
        self.logger = logging.getLogger(__name__)
        self.rng = np.random.default_rng(11)

    def test_assemble_w_scalar_examples(self):
        self.logger.info("Testing W assembly on scalar examples.")
        segment = Cover([[[0.0], [1.0]]])
        W = assemble_w(ClusterInstance([[[1.0]]], [[2.0]], 1), segment)[0]
        np.testing.assert_allclose(W, [[4.0, 2.0], [2.0, 1.0]])
        for lam, expected in (([1, 0], 4.0), ([0, 1], 1.0), ([0.5, 0.5], 2.25)):
            self.assertAlmostEqual(np.array(lam) @ W @ np.array(lam), expected)
        zero = assemble_w(ClusterInstance([[[0.0]]], [[0.0]], 1), segment)[0]
        np.testing.assert_array_equal(zero, np.zeros((2, 2)))
        W = assemble_w(ClusterInstance([[[1.0]]], [[-1.0]], 1), Cover([[[-1.0], [1.0]]]))[0]
        np.testing.assert_allclose(W, [[0.0, 0.0], [0.0, 4.0]])

    def test_homogenization_identity(self):
        self.logger.info("Testing <lambda, W lambda> = ||A V lambda - b||^2.")
        for trial in range(20):
            n, l, d = 4, int(self.rng.integers(1, 3)), int(self.rng.integers(1, 3))
            instance = ClusterInstance(self.rng.standard_normal((n, l, d)), self.rng.standard_normal((n, l)), 2)
            cover = grid_cover(-np.ones(d), np.ones(d), 2)
            W = assemble_w(instance, cover)
            for _ in range(10):
                lam = self.rng.dirichlet(np.ones(cover.m))
                for i in range(n):
                    direct = np.sum((instance.A[i] @ cover.V @ lam - instance.b[i]) ** 2)
                    self.assertLessEqual(abs(lam @ W[i] @ lam - direct), 1e-9 * (1 + instance.b[i] @ instance.b[i]))

    def test_assemble_w_dimension_mismatch(self):
        instance = ClusterInstance.euclidean([[0.0, 1.0], [1.0, 0.0]], 1)
        with self.assertRaises(ValueError):
            assemble_w(instance, grid_cover([0.0], [1.0], 1))

    def test_optimal_centers_mean_and_min_norm(self):
        instance = ClusterInstance.euclidean([0.0, 1.0, 10.0], 2)
        centers, empty = optimal_centers(instance, [0, 0, 1])
        np.testing.assert_allclose(centers[:, 0], [0.5, 10.0])
        self.assertEqual(empty, ())
        single = ClusterInstance([[[1.0, 0.0]]], [[3.0]], 1)
        centers, _ = optimal_centers(single, [0])
        np.testing.assert_allclose(centers[0], [3.0, 0.0], atol=1e-12)

    def test_optimal_centers_stationarity_and_perturbation(self):
        self.logger.info("Testing closed-form centers against perturbations.")
        instance = ClusterInstance(self.rng.standard_normal((6, 2, 3)), self.rng.standard_normal((6, 2)), 2)
        labels = np.array([0, 1, 0, 1, 1, 0])
        centers, _ = optimal_centers(instance, labels)
        for j in range(2):
            members = labels == j
            residual = np.einsum('nld,d->nl', instance.A[members], centers[j]) - instance.b[members]
            gradient = np.einsum('nld,nl->d', instance.A[members], residual)
            self.assertLessEqual(np.linalg.norm(gradient), 1e-8)
        base = objective(instance, labels, centers)
        for _ in range(100):
            self.assertLessEqual(base, objective(instance, labels, centers + 0.1 * self.rng.standard_normal(centers.shape)))

    def test_empty_cluster_flag(self):
        instance = ClusterInstance.euclidean([1.0, 2.0], 2)
        centers, empty = optimal_centers(instance, [0, 0])
        self.assertEqual(empty, (1,))
        np.testing.assert_array_equal(centers[1], [0.0])

    def test_objective_examples(self):
        instance = ClusterInstance.euclidean([-1.0, 1.0], 1)
        self.assertEqual(objective(instance, [0, 0], [[0.0]]), 2.0)
        three = ClusterInstance.euclidean([0.0, 1.0, 10.0], 2)
        self.assertAlmostEqual(objective(three, [0, 0, 1], [[0.5], [10.0]]), 0.5)
        self.assertEqual(objective(three, [0, 1, 1], [[0.0], [1.0]]), 81.0)
        with self.assertRaises(ValueError):
            objective(three, [0, 0, 1], [[0.5, 0.0], [1.0, 0.0]])

    def test_objective_permutation_symmetry(self):
        instance = ClusterInstance(self.rng.standard_normal((7, 1, 2)), self.rng.standard_normal((7, 1)), 3)
        labels = self.rng.integers(0, 3, 7)
        centers = self.rng.standard_normal((3, 2))
        for _ in range(10):
            perm = self.rng.permutation(3)
            relabeled = np.argsort(perm)[labels]
            self.assertEqual(objective(instance, labels, centers), objective(instance, relabeled, centers[perm]))

    def test_assignment_conversion(self):
        U = assignment_matrix([2, 0, 1], 3)
        np.testing.assert_array_equal(U.sum(axis=1), np.ones(3))
        np.testing.assert_array_equal(as_labels(U, n=3, k=3), [2, 0, 1])
        with self.assertRaises(ValueError):
            as_labels(np.array([[1, 1], [0, 1]]))
        with self.assertRaises(ValueError):
            as_labels([0, 3], k=3)
        with self.assertRaises(ValueError):
            as_labels([0, 1], n=3)

    def test_lift_affine(self):
        self.logger.info("Testing homogeneous lift.")
        lifted = lift_affine([[1.0, 2.0]])
        np.testing.assert_array_equal(lifted.A[0], [[1.0, 2.0, 1.0]])
        np.testing.assert_array_equal(lifted.b[0], [0.0])
        self.assertEqual(objective(lifted, [0], [[0.0, 0.0, 0.0]]), 0.0)
        points = self.rng.standard_normal((5, 2))
        instance = lift_affine(points)
        x, z = self.rng.standard_normal(2), 0.4
        direct = np.sum((points @ x + z) ** 2)
        self.assertAlmostEqual(objective(instance, np.zeros(5, dtype=int), [np.append(x, z)]), direct, delta=1e-12 * (1 + direct))

    def test_lift_affine_normalized_fit(self):
        points = np.array([[0.0, 0.5], [1.0, 0.5], [-2.0, 0.5], [0.3, 0.5]])
        instance = lift_affine(points, 1, normalized=2)
        centers, _ = optimal_centers(instance, np.zeros(4, dtype=int))
        np.testing.assert_allclose(centers[0], [0.0, 1.0, -0.5], atol=1e-10)
        self.assertAlmostEqual(objective(instance, np.zeros(4, dtype=int), centers), 0.0, places=12)

    def test_fit_center_normalized_sign(self):
        H = np.array([[1.0, 0.0], [0.0, 4.0]])
        x, cost = fit_center(H, np.zeros(2), 0.0, normalized=2)
        np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-12)
        self.assertAlmostEqual(cost, 1.0)

    def test_invalid_instances(self):
        with self.assertRaises(ValueError):
            ClusterInstance(np.ones((2, 1, 1)), np.ones((3, 1)), 1)
        with self.assertRaises(ValueError):
            ClusterInstance(np.ones((2, 1, 1)), np.ones((2, 1)), 3)
        with self.assertRaises(ValueError):
            ClusterInstance(np.ones((2, 1, 2)), np.ones((2, 1)), 1, normalized=2)
        with self.assertRaises(ValueError):
            ClusterInstance.from_terms([(np.eye(2), [0, 0]), (np.eye(3), [0, 0, 0])], 1)

    def test_gen_euclidean(self):
        self.logger.info("Testing Euclidean generator.")
        instance, truth = gen_euclidean(3, 60, 2, seed=4)
        self.assertEqual((instance.n, instance.d, instance.k), (60, 2, 3))
        np.testing.assert_array_equal(instance.A[0], np.eye(2))
        dists = [np.linalg.norm(truth.centers[a] - truth.centers[b]) for a in range(3) for b in range(a + 1, 3)]
        self.assertGreaterEqual(min(dists), 0.8)
        again, _ = gen_euclidean(3, 60, 2, seed=4)
        np.testing.assert_array_equal(instance.b, again.b)
        exact, truth0 = gen_euclidean(3, 12, 2, spread=0.0, seed=1)
        self.assertEqual(truth0.objective, 0.0)
        self.assertAlmostEqual(solution_for(exact, truth0.labels).objective, 0.0, places=12)

    def test_gen_hyperplane(self):
        instance, truth = gen_hyperplane(3, 60, 2, seed=2)
        self.assertEqual((instance.n, instance.l, instance.d, instance.normalized), (60, 1, 2, 2))
        np.testing.assert_array_equal(instance.b, np.zeros((60, 1)))
        np.testing.assert_allclose(np.linalg.norm(truth.centers, axis=1), np.ones(3))
        clean, truth0 = gen_hyperplane(3, 30, 2, noise=0.0, seed=2)
        self.assertAlmostEqual(truth0.objective, 0.0, places=20)
        again, _ = gen_hyperplane(3, 60, 2, seed=2)
        np.testing.assert_array_equal(instance.A, again.A)

    def test_gen_affine(self):
        instance, truth = gen_affine(3, 30, 2, noise=0.0, seed=5)
        self.assertEqual((instance.d, instance.normalized), (3, 2))
        self.assertEqual(instance.points.shape, (30, 2))
        self.assertAlmostEqual(truth.objective, 0.0, places=20)
        self.assertTrue(np.all(np.abs(truth.centers[:, 2]) <= 0.3))

    def test_solution_dict_round_trip(self):
        solution = ClusterSolution(np.array([0, 1, 0]), np.array([[0.0], [1.0]]), 0.25, (1,))
        again = ClusterSolution.from_dict(solution.to_dict())
        np.testing.assert_array_equal(again.labels, solution.labels)
        np.testing.assert_array_equal(again.U, solution.U)
        self.assertEqual(again.empty, (1,))

    def test_instance_file_round_trip(self):
        instance, truth = gen_affine(2, 8, 2, seed=3)
        with tempfile.TemporaryDirectory() as folder:
            path = os.path.join(folder, 'instance.json')
            save_instance(path, instance, truth)
            loaded, loaded_truth = load_instance(path)
            np.testing.assert_array_equal(loaded.A, instance.A)
            np.testing.assert_array_equal(loaded.points, instance.points)
            self.assertEqual((loaded.family, loaded.normalized, loaded.k), ('affine', 2, 2))
            np.testing.assert_array_equal(loaded_truth.labels, truth.labels)
            with open(path, 'w') as f:
                f.write('{"k": 1')
            with self.assertRaises(ValueError):
                load_instance(path)

    def test_cluster_statistics(self):
        instance = ClusterInstance.euclidean([[1.0, 2.0], [3.0, 4.0]], 1)
        H, g, c = cluster_statistics(instance, [0, 1])
        np.testing.assert_allclose(H, 2 * np.eye(2))
        np.testing.assert_allclose(g, [4.0, 6.0])
        self.assertEqual(c, 30.0)

    def test_center_box_for_coincident_points(self):
        instance = ClusterInstance.euclidean(np.full((4, 2), 0.3), 2)
        lower, upper = instance.center_box()
        self.assertTrue(np.all(lower < 0.3) and np.all(upper > 0.3))
        self.assertTrue(np.all(upper - lower >= 1e-3))
        cover = grid_cover(lower, upper, 1)
        self.assertEqual(cover.q, 2)
        self.assertEqual(cover.locate([0.3, 0.3]), [0, 1])

    def test_with_k(self):
        instance = ClusterInstance.euclidean([0.0, 1.0, 2.0], 1, name='line')
        self.assertEqual(instance.with_k(3).k, 3)
        self.assertEqual(instance.with_k(3).name, 'line')
        with self.assertRaises(ValueError):
            instance.with_k(4)


if __name__ == '__main__':
    unittest.main()
