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

from momclust.moments import (MonomialBasis, Poly, MomentVector, riesz, localizing_matrix, moment_matrix,
                              assemble_lmm)
from momclust.solver import SolverStatus


class TestMoments(unittest.TestCase):

    def setUp(self):
        logging.basicConfig(level=logging.DEBUG, format='%(asctime)s - %(levelname)s - %(message)s')
        self.logger = logging.getLogger(__name__)
        self.rng = np.random.default_rng(3)
        self.x = Poly.variable(0, 1)

    def test_basis_size(self):
        for d in range(1, 5):
            for t in range(0, 5):
                self.assertEqual(len(MonomialBasis(d, t)), math.comb(d + t, d))
        basis = MonomialBasis(2, 2)
        self.assertEqual(basis.exponents[:3], ((0, 0), (1, 0), (0, 1)))
        with self.assertRaises(ValueError):
            MonomialBasis(0, 1)

    def test_poly_arithmetic(self):
        x, y = Poly.variable(0, 2), Poly.variable(1, 2)
        p = (x + 1) * (x - 1) - y ** 2
        self.assertEqual(p.degree, 2)
        self.assertAlmostEqual(p([2.0, 3.0]), 3.0 - 9.0)
        self.assertEqual((p - p).coefficients, {})
        self.assertEqual((x ** 3).half_degree, 2)
        with self.assertRaises(ValueError):
            x + Poly.variable(0, 1)

    def test_riesz_examples(self):
        y = MomentVector.dirac([2.0], 1)
        np.testing.assert_allclose(y.values, [1.0, 2.0, 4.0])
        self.assertEqual(riesz(y, self.x ** 2), 4.0)
        self.assertEqual(riesz(y, Poly.constant(1.0, 1)), y.y0)
        mix = MomentVector.mixture([MomentVector.dirac([0.0], 1), MomentVector.dirac([1.0], 1)], [0.5, 0.5])
        self.assertAlmostEqual(riesz(mix, self.x), 0.5)
        with self.assertRaises(ValueError):
            riesz(y, self.x ** 3)

    def test_moment_matrix(self):
        y = MomentVector([1.0, 0.0, 1.0], 1, 1)
        np.testing.assert_allclose(moment_matrix(y), np.eye(2))
        np.testing.assert_allclose(localizing_matrix(y, Poly.constant(1.0, 1)), moment_matrix(y))

    def test_dirac_rank_one(self):
        self.logger.info("Testing moment matrices of point masses.")
        for d, t in ((1, 2), (2, 2), (3, 1), (2, 3)):
            point = self.rng.uniform(-1.0, 1.0, d)
            M = moment_matrix(MomentVector.dirac(point, t))
            v = MonomialBasis(d, t).vector(point)
            eigenvalues = np.linalg.eigvalsh(M)
            self.assertAlmostEqual(eigenvalues[-1], float(v @ v), delta=1e-8)
            np.testing.assert_allclose(eigenvalues[:-1], 0.0, atol=1e-8)

    def test_mixture_linearity(self):
        points = self.rng.uniform(-1.0, 1.0, (3, 2))
        weights = [0.2, 0.5, 0.3]
        mix = MomentVector.mixture([MomentVector.dirac(p, 2) for p in points], weights)
        expected = sum(w * MonomialBasis(2, 4).vector(p) for p, w in zip(points, weights))
        np.testing.assert_allclose(mix.values, expected)

    def test_localizing_matrix(self):
        f = 1 - self.x ** 2
        np.testing.assert_allclose(localizing_matrix(MomentVector.dirac([0.5], 1), f), [[0.75]])
        point = np.array([0.3, -0.4])
        g = 1 - Poly.variable(0, 2) ** 2 - Poly.variable(1, 2) ** 2
        L = localizing_matrix(MomentVector.dirac(point, 2), g)
        v = MonomialBasis(2, 1).vector(point)
        np.testing.assert_allclose(L, g(point) * np.outer(v, v), atol=1e-12)
        self.assertGreaterEqual(np.linalg.eigvalsh(L).min(), -1e-12)
        with self.assertRaises(ValueError):
            localizing_matrix(MomentVector.dirac([0.5], 1), self.x ** 3)

    def test_lmm_linear_objective(self):
        value, solution = assemble_lmm(self.x, ineqs=[self.x * (1 - self.x)], t=1).solve()
        self.assertEqual(solution.status, SolverStatus.OPTIMAL)
        self.assertAlmostEqual(value, 0.0, delta=1e-6)

    def test_lmm_unconstrained(self):
        program = assemble_lmm(self.x ** 2, t=1)
        value, solution = program.solve()
        self.assertAlmostEqual(value, 0.0, delta=1e-6)
        moments = program.moments(solution)
        self.assertAlmostEqual(moments.y0, 1.0, delta=1e-6)
        self.assertAlmostEqual(moments[(1,)], 0.0, delta=1e-3)

    def test_lmm_cubic_hierarchy(self):
        self.logger.info("Testing rho_2 <= rho_3 <= min on a cubic over [0, 2].")
        f = self.x ** 3 - 3 * self.x ** 2 + 2 * self.x
        g = self.x * (2 - self.x)
        minimum = -2.0 / (3.0 * math.sqrt(3.0))
        rho2, first = assemble_lmm(f, ineqs=[g], t=2).solve()
        rho3, second = assemble_lmm(f, ineqs=[g], t=3).solve()
        self.assertEqual(first.status, SolverStatus.OPTIMAL)
        self.assertEqual(second.status, SolverStatus.OPTIMAL)
        self.assertAlmostEqual(rho2, minimum, delta=1e-5)
        self.assertLessEqual(rho2, rho3 + 1e-6)
        self.assertLessEqual(rho3, minimum + 1e-5)

    def test_lmm_bilinear_hierarchy(self):
        x1, x2 = Poly.variable(0, 2), Poly.variable(1, 2)
        box = [1 - x1 ** 2, 1 - x2 ** 2]
        rho1, _ = assemble_lmm(x1 * x2, ineqs=box, t=1).solve()
        rho2, _ = assemble_lmm(x1 * x2, ineqs=box, t=2).solve()
        self.assertLessEqual(rho1, rho2 + 1e-6)
        self.assertLessEqual(rho2, -1.0 + 1e-5)
        self.assertAlmostEqual(rho1, -1.0, delta=1e-5)

    def test_lmm_equality(self):
        # min x subject to x^2 = 1 gives -1.
        value, _ = assemble_lmm(self.x, eqs=[self.x ** 2 - 1], t=1).solve()
        self.assertAlmostEqual(value, -1.0, delta=1e-5)

    def test_lmm_order_checks(self):
        with self.assertRaises(ValueError):
            assemble_lmm(self.x ** 3, t=1)
        program = assemble_lmm(self.x ** 2, ineqs=[1 - self.x ** 4], t=1)
        self.assertEqual(len(program.skipped), 1)
        self.assertEqual(len(program.sdp.psd_sizes), 1)
        with self.assertRaises(ValueError):
            assemble_lmm(self.x, ineqs=[Poly.variable(0, 2)], t=1)


if __name__ == '__main__':
    unittest.main()
