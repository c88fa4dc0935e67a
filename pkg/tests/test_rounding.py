import unittest
import os
import logging
import sys

import numpy as np

# Dynamically add the root directory of the project to sys.path
current_dir = os.path.dirname(os.path.abspath(__file__))
root_dir = os.path.abspath(os.path.join(current_dir, '..'))
sys.path.insert(0, root_dir)

from momclust.config import RELAXATION_R2PP1
from momclust.errors import SolverStatusError
from momclust.geometry import grid_cover
from momclust.instance import ClusterInstance, assemble_w, gen_euclidean, solution_for
from momclust.oracle import exact_kcenter
from momclust.relaxation import RelaxationSolution, assemble_r2pp1, solve_relaxation
from momclust.rounding import NORMS, SPACE_LAMBDA, SPACE_X, distance_matrix, fpc, lloyd_polish, round_solution
from momclust.solver import SolverStatus


def fixed_solution(lambdas, status=SolverStatus.OPTIMAL):
    """RelaxationSolution over a single block whose Lambda_ii are outer products of `lambdas`."""
    blocks = tuple((np.outer(lam, lam),) for lam in np.asarray(lambdas, dtype=float))
    star = (sum(block[0] for block in blocks),)
    return RelaxationSolution(blocks, star, 0.0, status, RELAXATION_R2PP1, 0)


class TestRounding(unittest.TestCase):

    def setUp(self):
        logging.basicConfig(level=logging.DEBUG, format='%(asctime)s - %(levelname)s - %(message)s')
        self.logger = logging.getLogger(__name__)
        self.rng = np.random.default_rng(17)

    def test_fpc_examples(self):
        points = [[0.0], [1.0], [10.0], [11.0]]
        result = fpc(points, 2)
        self.assertEqual(result.radius, 1.0)
        np.testing.assert_array_equal(result.partition, [0, 0, 1, 1])
        single = fpc(points, 1)
        self.assertEqual(single.radius, 10.0)
        np.testing.assert_array_equal(single.centers, [1])
        every = fpc(points, 4)
        self.assertEqual(every.radius, 0.0)
        np.testing.assert_array_equal(np.sort(every.partition), [0, 1, 2, 3])

    def test_fpc_ties_go_to_lowest_center(self):
        grid = np.array([[x, y] for x in range(3) for y in range(3)], dtype=float)
        for points, k in (([[0.0], [2.0], [1.0]], 2), (grid, 2), (grid[::-1], 3), (grid, 4)):
            points = np.asarray(points)
            for norm in NORMS:
                result = fpc(points, k, norm)
                self.assertTrue(np.all(np.diff(result.centers) > 0))
                dist = distance_matrix(points, norm)[:, result.centers]
                nearest = np.isclose(dist, dist.min(axis=1, keepdims=True), rtol=0.0, atol=1e-12)
                expected = result.centers[np.argmax(nearest, axis=1)]
                np.testing.assert_array_equal(result.centers[result.partition], expected)
        np.testing.assert_array_equal(fpc([[0.0], [2.0], [1.0]], 2).partition, [0, 1, 0])

    def test_fpc_two_approximation(self):
        self.logger.info("Testing the FPC radius against exact k-center.")
        for trial in range(50):
            points = self.rng.uniform(-1.0, 1.0, (9, 2))
            k = int(self.rng.integers(1, 5))
            for norm in NORMS:
                result = fpc(points, k, norm)
                _, optimum = exact_kcenter(points, k, norm)
                self.assertGreaterEqual(result.radius, optimum - 1e-12)
                self.assertLessEqual(result.radius, 2.0 * optimum + 1e-12)

    def test_fpc_permutation_invariance(self):
        points = self.rng.uniform(-1.0, 1.0, (12, 3))
        base = fpc(points, 3, 'l2').radius
        for _ in range(5):
            order = self.rng.permutation(12)
            self.assertAlmostEqual(fpc(points[order], 3, 'l2').radius, base, places=12)

    def test_fpc_guards(self):
        with self.assertRaises(ValueError):
            fpc([[0.0], [1.0]], 3)
        with self.assertRaises(ValueError):
            fpc([[0.0], [1.0]], 1, 'l3')

    def test_round_hand_case(self):
        instance = ClusterInstance.euclidean([[-1.0], [1.0]], 1)
        cover = grid_cover([-1.0], [1.0], 1)
        rounded = round_solution(instance, cover, fixed_solution([[0.5, 0.5], [0.5, 0.5]]))
        np.testing.assert_array_equal(rounded.labels, [0, 0])
        np.testing.assert_allclose(rounded.centers, [[0.0]], atol=1e-12)
        self.assertAlmostEqual(rounded.objective, 2.0)

    def test_round_separates_estimates(self):
        instance = ClusterInstance.euclidean([[0.1], [0.2], [0.8], [0.9]], 2)
        cover = grid_cover([0.0], [1.0], 1)
        estimates = [[0.9, 0.1], [0.8, 0.2], [0.2, 0.8], [0.1, 0.9]]
        for space in (SPACE_LAMBDA, SPACE_X):
            rounded = round_solution(instance, cover, fixed_solution(estimates), space)
            self.assertEqual(rounded.labels[0], rounded.labels[1])
            self.assertEqual(rounded.labels[2], rounded.labels[3])
            self.assertNotEqual(rounded.labels[0], rounded.labels[2])
            self.assertAlmostEqual(rounded.objective, 0.01, delta=1e-12)
        with self.assertRaises(ValueError):
            round_solution(instance, cover, fixed_solution(estimates), 'y')

    def test_round_rejects_infeasible(self):
        instance = ClusterInstance.euclidean([[-1.0], [1.0]], 1)
        cover = grid_cover([-1.0], [1.0], 1)
        with self.assertRaises(SolverStatusError):
            round_solution(instance, cover, fixed_solution([[0.5, 0.5], [0.5, 0.5]], SolverStatus.INFEASIBLE))

    def test_round_relaxation_output(self):
        self.logger.info("Testing rounding of a solved relaxation.")
        instance, truth = gen_euclidean(2, 6, seed=4, spread=0.05)
        cover = grid_cover(*instance.center_box(), 1)
        solution = solve_relaxation(assemble_r2pp1(assemble_w(instance, cover), cover, 2))
        rounded = round_solution(instance, cover, solution)
        self.assertGreaterEqual(rounded.objective, solution.bound - 1e-6)
        self.assertEqual(rounded.centers.shape, (2, 2))

    def test_lloyd_polish(self):
        instance, truth = gen_euclidean(3, 12, seed=8, spread=0.05)
        start = solution_for(instance, np.arange(12) % 2)
        polished = lloyd_polish(instance, start)
        self.assertLessEqual(polished.objective, start.objective + 1e-12)
        self.assertEqual(polished.centers.shape, (3, 2))
        settled = lloyd_polish(instance, solution_for(instance, truth.labels))
        self.assertLessEqual(settled.objective, truth.objective + 1e-12)


if __name__ == '__main__':
    unittest.main()
