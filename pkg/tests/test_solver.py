import unittest
import os
import logging
import math
import sys

import numpy as np

# Dynamically add the root directory of the project to sys.path
current_dir = os.path.dirname(os.path.abspath(__file__))
root_dir = os.path.abspath(os.path.join(current_dir, '..'))
sys.path.insert(0, root_dir)

from momclust.blocksdp import BlockSDPBuilder
from momclust.solver import (SolverStatus, SolverConfig, ConeLayout, InteriorPointSolver, presolve, solve)


def trace_program(rhs=1.0, cost=(1.0, 2.0), duplicate=None):
    """min <diag(cost), X> s.t. trace X = rhs, X 2x2 PSD; optional off-diagonal and repeated trace rows."""
    builder = BlockSDPBuilder()
    block = builder.add_psd_block(2)
    row = builder.add_row(rhs)
    builder.add_matrix(row, block, np.eye(2))
    if duplicate is not None:
        row = builder.add_row(0.2)
        builder.add_entry(row, block, 0, 1, 2.0)
        row = builder.add_row(duplicate)
        builder.add_matrix(row, block, np.eye(2))
    builder.add_cost_matrix(block, np.diag(cost))
    return builder.build()


def random_program(rng, sizes=(3, 2), nonneg=2, rows=5):
    """Program with a known strictly complementary primal-dual optimum."""
    builder = BlockSDPBuilder()
    blocks = [builder.add_psd_block(p) for p in sizes]
    first = builder.add_nonneg(nonneg)
    X, S = [], []
    for p in sizes:
        Q = np.linalg.qr(rng.normal(size=(p, p)))[0]
        r = p // 2 + 1
        X.append(Q[:, :r] @ np.diag(rng.uniform(0.5, 2.0, r)) @ Q[:, :r].T)
        S.append(Q[:, r:] @ np.diag(rng.uniform(0.5, 2.0, p - r)) @ Q[:, r:].T)
    x = np.zeros(nonneg)
    s = np.zeros(nonneg)
    x[::2] = rng.uniform(0.5, 2.0, x[::2].size)
    s[1::2] = rng.uniform(0.5, 2.0, s[1::2].size)
    y = rng.normal(size=rows)
    C = [Sb.copy() for Sb in S]
    c = s.copy()
    for r in range(rows):
        coefs = []
        for b, p in zip(blocks, sizes):
            G = rng.normal(size=(p, p))
            coefs.append((G + G.T) / 2.0)
        a = rng.normal(size=nonneg)
        rhs = sum(float(np.sum(Ab * Xb)) for Ab, Xb in zip(coefs, X)) + float(a @ x)
        row = builder.add_row(rhs)
        for b, Ab in zip(blocks, coefs):
            builder.add_matrix(row, b, Ab)
            C[b] += y[r] * Ab
        for i in range(nonneg):
            builder.add_nonneg_entry(row, first + i, a[i])
        c += y[r] * a
    for b, Cb in zip(blocks, C):
        builder.add_cost_matrix(b, Cb)
    for i in range(nonneg):
        builder.add_cost_nonneg(first + i, c[i])
    optimum = sum(float(np.sum(Cb * Xb)) for Cb, Xb in zip(C, X)) + float(c @ x)
    return builder.build(), optimum


class TestSolver(unittest.TestCase):

    def setUp(self):
        logging.basicConfig(level=logging.DEBUG, format='%(asctime)s - %(levelname)s - %(message)s')
        self.logger = logging.getLogger(__name__)
        self.rng = np.random.default_rng(11)

    def test_trace_example(self):
        self.logger.info("Testing min <diag(1,2), X> with unit trace.")
        solution = solve(trace_program())
        self.assertEqual(solution.status, SolverStatus.OPTIMAL)
        self.assertAlmostEqual(solution.primal_objective, 1.0, places=6)
        self.assertAlmostEqual(solution.dual_objective, 1.0, places=6)
        np.testing.assert_allclose(solution.X[0], [[1.0, 0.0], [0.0, 0.0]], atol=1e-5)

    def test_linear_program(self):
        builder = BlockSDPBuilder()
        first = builder.add_nonneg(3)
        row = builder.add_row(1.0)
        for i, cost in enumerate((3.0, 1.0, 2.0)):
            builder.add_nonneg_entry(row, first + i, 1.0)
            builder.add_cost_nonneg(first + i, cost)
        solution = solve(builder.build())
        self.assertEqual(solution.status, SolverStatus.OPTIMAL)
        self.assertAlmostEqual(solution.dual_objective, 1.0, places=6)
        np.testing.assert_allclose(solution.x, [0.0, 1.0, 0.0], atol=1e-5)

    def test_random_programs(self):
        self.logger.info("Testing random programs with a planted optimum.")
        for trial in range(5):
            sdp, optimum = random_program(self.rng)
            solution = InteriorPointSolver().solve(sdp)
            self.assertEqual(solution.status, SolverStatus.OPTIMAL)
            scale = 1.0 + abs(optimum)
            self.assertLessEqual(abs(solution.primal_objective - optimum), 1e-5 * scale)
            self.assertLessEqual(abs(solution.dual_objective - optimum), 1e-5 * scale)
            _, residual = sdp.evaluate(solution.X, solution.x)
            self.assertLessEqual(np.linalg.norm(residual), 1e-5 * (1.0 + np.linalg.norm(sdp.rhs)))
            for Xb in solution.X:
                self.assertGreaterEqual(np.linalg.eigvalsh(Xb).min(), -1e-8)
            self.assertTrue(np.all(solution.x >= -1e-8))

    def test_large_blocks_reach_optimal(self):
        self.logger.info("Testing three large blocks where the primal residual used to stall.")
        sdp, optimum = random_program(np.random.default_rng(99), sizes=(6, 8, 7), nonneg=3, rows=11)
        solution = solve(sdp)
        self.assertEqual(solution.status, SolverStatus.OPTIMAL)
        self.assertLessEqual(abs(solution.dual_objective - optimum), 1e-6 * (1.0 + abs(optimum)))
        final = solution.history[-1]
        self.assertLessEqual(max(final['pinf'], final['dinf'], final['gap']), 1e-7)

    def test_weak_duality(self):
        for trial in range(3):
            sdp, _ = random_program(self.rng, sizes=(4,), nonneg=3, rows=4)
            solution = solve(sdp)
            self.assertEqual(solution.status, SolverStatus.OPTIMAL)
            slack = sum(float(np.sum(Xb * Sb)) for Xb, Sb in zip(solution.X, solution.S)) + float(solution.x @ solution.s)
            self.assertGreaterEqual(slack, -1e-8)
            self.assertLessEqual(solution.dual_objective, solution.primal_objective + 1e-6)

    def test_history(self):
        solution = solve(trace_program())
        self.assertEqual(len(solution.history), solution.iterations + 1)
        for key in ('pobj', 'dobj', 'pinf', 'dinf', 'gap', 'mu'):
            self.assertIn(key, solution.history[0])

    def test_presolve_drops_duplicate_row(self):
        self.logger.info("Testing removal of a repeated trace row.")
        sdp = trace_program(duplicate=1.0)
        result = presolve(sdp)
        self.assertFalse(result.infeasible)
        self.assertEqual(result.sdp.num_rows, 2)
        self.assertIn(1, result.row_map.tolist())
        solution = solve(sdp)
        self.assertEqual(solution.status, SolverStatus.OPTIMAL)
        self.assertEqual(len(solution.dropped_rows), 1)
        self.assertEqual(solution.y.size, 3)
        self.assertAlmostEqual(solution.X[0][0, 1], 0.1, places=5)
        _, residual = sdp.evaluate(solution.X)
        self.assertLessEqual(np.abs(residual).max(), 1e-6)

    def test_presolve_full_rank_identity(self):
        sdp, _ = random_program(self.rng)
        result = presolve(sdp)
        self.assertIs(result.sdp, sdp)
        np.testing.assert_array_equal(result.row_map, np.arange(sdp.num_rows))

    def test_presolve_contradiction(self):
        sdp = trace_program(duplicate=2.0)
        result = presolve(sdp)
        self.assertTrue(result.infeasible)
        ray = result.certificate
        self.assertAlmostEqual(float(sdp.rhs @ ray), 1.0, places=10)
        A = ConeLayout(sdp.psd_sizes, sdp.nonneg_count).operator(sdp)
        self.assertLessEqual(np.abs(A.T @ ray).max(), 1e-10)
        solution = solve(sdp)
        self.assertEqual(solution.status, SolverStatus.INFEASIBLE)
        self.assertTrue(math.isnan(solution.primal_objective))

    def test_empty_row_contradiction(self):
        builder = BlockSDPBuilder()
        builder.add_psd_block(1)
        builder.add_row(3.0)
        result = presolve(builder.build())
        self.assertTrue(result.infeasible)
        self.assertAlmostEqual(float(result.certificate[0] * 3.0), 1.0)

    def test_infeasible_trace(self):
        self.logger.info("Testing detection of trace X = -1.")
        sdp = trace_program(rhs=-1.0)
        solution = solve(sdp)
        self.assertEqual(solution.status, SolverStatus.INFEASIBLE)
        ray = solution.certificate
        self.assertIsNotNone(ray)
        self.assertAlmostEqual(float(sdp.rhs @ ray), 1.0, places=8)
        self.assertLessEqual(ray[0], 1e-6)

    def test_iteration_limit(self):
        sdp, _ = random_program(self.rng)
        solution = solve(sdp, SolverConfig(max_iterations=1))
        self.assertEqual(solution.status, SolverStatus.MAX_ITERATIONS)
        self.assertEqual(solution.status.value, 'max-iterations')
        self.assertEqual(len(solution.X), 2)

    def test_config_validation(self):
        with self.assertRaises(ValueError):
            SolverConfig(max_iterations=0)
        with self.assertRaises(ValueError):
            SolverConfig(gap_tolerance=0.0)
        with self.assertRaises(ValueError):
            SolverConfig(step_fraction=1.5)
        with self.assertRaises(ValueError):
            SolverConfig(sigma_floor=0.0)


if __name__ == '__main__':
    unittest.main()
