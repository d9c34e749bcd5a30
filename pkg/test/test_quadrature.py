import math
import unittest

import numpy as np

from src.errors import ConfigurationError, UnsupportedQuadratureError
from src.potentials import quadrature


class TestAngularRule(unittest.TestCase):
    def test_weights_sum_to_sphere_area(self):
        for order in quadrature.ANGULAR_ORDERS:
            _, weights = quadrature.angular_rule(order)
            self.assertAlmostEqual(float(weights.sum()), 4.0 * math.pi, places=12)

    def test_integrates_low_degree_harmonics_exactly(self):
        directions, weights = quadrature.angular_rule(3)

        # ∫ z² dΩ = 4π/3, ∫ x²y² dΩ = 4π/15, odd moments vanish
        self.assertAlmostEqual(float(weights @ directions[:, 2] ** 2), 4.0 * math.pi / 3.0, places=12)
        self.assertAlmostEqual(float(weights @ (directions[:, 0] ** 2 * directions[:, 1] ** 2)), 4.0 * math.pi / 15.0, places=12)
        self.assertAlmostEqual(float(weights @ directions[:, 0] ** 3), 0.0, places=12)

    def test_unsupported_order_raises(self):
        with self.assertRaises(UnsupportedQuadratureError):
            quadrature.angular_rule(7)


class TestQuadratureGrid(unittest.TestCase):
    def test_weights_sum_to_ball_volume(self):
        grid = quadrature.quadrature_grid(2.0, 6, 4)

        self.assertEqual(grid.size, 6 * 4 * 8)
        self.assertAlmostEqual(float(grid.weights.sum()), 4.0 * math.pi * 8.0 / 3.0, places=10)

    def test_radial_polynomial_moments_are_exact(self):
        grid = quadrature.quadrature_grid(1.0, 5, 2)
        radii = np.linalg.norm(grid.nodes, axis=1)

        # ∫_B |x|⁴ dx = 4π/7
        self.assertAlmostEqual(grid.integrate(radii**4), 4.0 * math.pi / 7.0, places=12)

    def test_nodes_are_radial_major(self):
        grid = quadrature.quadrature_grid(1.0, 3, 2)
        radii = np.linalg.norm(grid.nodes, axis=1).reshape(grid.n_radial, grid.n_directions)

        np.testing.assert_allclose(radii, np.repeat(grid.radii[:, None], grid.n_directions, axis=1))

    def test_invalid_inputs_raise(self):
        with self.assertRaises(UnsupportedQuadratureError):
            quadrature.quadrature_grid(1.0, 1, 4)
        with self.assertRaises(ConfigurationError):
            quadrature.quadrature_grid(0.0, 4, 4)

    def test_scaled_grid_scales_nodes_and_weights(self):
        grid = quadrature.quadrature_grid(1.0, 4, 2)

        small = quadrature.scaled_grid(grid, 0.25)

        np.testing.assert_allclose(small.nodes, grid.nodes * 0.25, rtol=1e-14, atol=1e-16)
        np.testing.assert_allclose(small.weights, grid.weights * 0.25**3, rtol=1e-12)

    def test_matches_compares_nodes(self):
        first = quadrature.quadrature_grid(1.0, 4, 2)

        self.assertTrue(first.matches(quadrature.quadrature_grid(1.0, 4, 2)))
        self.assertFalse(first.matches(quadrature.quadrature_grid(1.0, 4, 3)))

    def test_next_angular_order(self):
        self.assertEqual(quadrature.next_angular_order(6), 8)
        self.assertEqual(quadrature.next_angular_order(16), 16)


if __name__ == "__main__":
    unittest.main()
