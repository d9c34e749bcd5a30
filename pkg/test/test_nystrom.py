import math
import unittest

import numpy as np

from src.data_models import DesingularizationScheme
from src.errors import ConfigurationError
from src.greens import nystrom
from src.potentials.quadrature import quadrature_grid


def ball_potential(r: np.ndarray, kappa: float, radius: float) -> np.ndarray:
    # 一様密度 1 の球の Yukawa ポテンシャル(球内)
    x = kappa * r
    ratio = np.where(x > 0, np.sinh(x) / np.where(x > 0, x, 1.0), 1.0)
    return (1.0 - (1.0 + kappa * radius) * math.exp(-kappa * radius) * ratio) / kappa**2


class TestMultipoleOperator(unittest.TestCase):
    def setUp(self):
        self.grid = quadrature_grid(1.0, 8, 4)

    def test_uniform_ball_yukawa_potential_at_nodes(self):
        operator = nystrom.NystromOperator(self.grid, 2.0)
        radii = np.linalg.norm(self.grid.nodes, axis=1)

        values = operator.apply(np.ones(self.grid.size))

        np.testing.assert_allclose(values, ball_potential(radii, 2.0, 1.0), rtol=1e-9)

    def test_uniform_ball_laplace_potential_at_nodes(self):
        operator = nystrom.NystromOperator(self.grid, 0.0)
        radii = np.linalg.norm(self.grid.nodes, axis=1)

        values = operator.apply(np.ones(self.grid.size))

        np.testing.assert_allclose(values, (3.0 - radii**2) / 6.0, rtol=1e-9)

    def test_evaluate_at_origin(self):
        operator = nystrom.NystromOperator(self.grid, 1.5)

        value = operator.evaluate_at(np.zeros((1, 3)), np.ones(self.grid.size))

        self.assertAlmostEqual(float(value[0]), float(ball_potential(np.array(0.0), 1.5, 1.0)), places=9)

    def test_evaluate_outside_support_uses_direct_sum(self):
        operator = nystrom.NystromOperator(self.grid, 0.0)

        value = operator.evaluate_at(np.array([[3.0, 0.0, 0.0]]), np.ones(self.grid.size))

        self.assertAlmostEqual(float(value[0]), 1.0 / 9.0, places=5)

    def test_large_kappa_radius_raises(self):
        with self.assertRaises(ConfigurationError):
            nystrom.NystromOperator(self.grid, nystrom.MAX_KAPPA_RADIUS)

    def test_negative_kappa_raises(self):
        with self.assertRaises(ConfigurationError):
            nystrom.NystromOperator(self.grid, -1.0)


class TestBallOperator(unittest.TestCase):
    def test_weighted_form_is_symmetric(self):
        grid = quadrature_grid(1.0, 6, 3)
        operator = nystrom.NystromOperator(grid, 1.0, DesingularizationScheme.BALL)

        symmetric = operator.weighted_symmetric()

        np.testing.assert_allclose(symmetric, symmetric.T, rtol=1e-12, atol=1e-15)

    def test_uniform_ball_potential_is_approximate(self):
        grid = quadrature_grid(1.0, 12, 6)
        operator = nystrom.NystromOperator(grid, 1.0, "ball")
        radii = np.linalg.norm(grid.nodes, axis=1)

        values = operator.apply(np.ones(grid.size))

        relative = np.max(np.abs(values - ball_potential(radii, 1.0, 1.0))) / np.max(ball_potential(radii, 1.0, 1.0))
        self.assertLess(relative, 0.25)


if __name__ == "__main__":
    unittest.main()
