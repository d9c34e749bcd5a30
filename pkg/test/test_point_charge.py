import math
import unittest

import numpy as np

from src.analysis import convergence, field_distance
from src.data_models import DensityFamily, DensitySpec, ObstacleConfig, SourceSpec
from src.errors import ConfigurationError, DuplicatePointsError, LambdaMismatchError, SingularKernelError
from src.point_charge import aghh, charges
from src.point_charge.green_field import GreenField, source_field
from src.random_field.sampling import sample_configuration

LAM = 4.0


def source(lam: float = LAM) -> SourceSpec:
    return SourceSpec(g0=1.0, center=(0.0, 0.0, 0.0), width=0.8, lam=lam)


class TestPointCharges(unittest.TestCase):
    def setUp(self):
        self.config = sample_configuration(DensitySpec(family=DensityFamily.UNIFORM_BALL), 12, 3)

    def test_single_obstacle_charge(self):
        config = ObstacleConfig(points=np.array([[0.2, 0.1, 0.0]]))

        result = charges.solve_point_charges(config, 0.3, LAM, source())

        expected = -4.0 * math.pi * 0.3 * float(source().h(config.points)[0])
        self.assertAlmostEqual(float(result.values[0]), expected, places=14)

    def test_scaled_system_matches_raw_system(self):
        result = charges.solve_point_charges(self.config, 0.5, LAM, source())

        raw = charges.solve_point_charges_raw(self.config, 0.5, LAM, source())

        np.testing.assert_allclose(result.values, raw, rtol=1e-10, atol=1e-14)
        self.assertLess(result.residual, 1e-12)

    def test_minres_matches_dense(self):
        dense = charges.solve_point_charges(self.config, -0.4, LAM, source())

        iterative = charges.solve_point_charges(self.config, -0.4, LAM, source(), iterative=True)

        np.testing.assert_allclose(iterative.values, dense.values, rtol=1e-6, atol=1e-10)

    def test_zero_scattering_length(self):
        result = charges.solve_point_charges(self.config, 0.0, LAM, source())

        np.testing.assert_array_equal(result.values, np.zeros(12))
        self.assertTrue(result.zero_scattering_length)

    def test_lambda_mismatch_raises(self):
        with self.assertRaises(LambdaMismatchError):
            charges.solve_point_charges(self.config, 0.5, LAM, source(9.0))

    def test_duplicate_points_raise(self):
        config = ObstacleConfig(points=np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))

        with self.assertRaises(DuplicatePointsError):
            charges.solve_point_charges(config, 0.5, LAM, source())

    def test_charge_sum_bound_holds(self):
        result = charges.solve_point_charges(self.config, 0.5, LAM, source())

        bound = charges.charge_sum_bound(result, source())

        self.assertLessEqual(abs(float(result.values.sum())), bound * (1.0 + 1e-12))

    def test_lambda0_warning_is_on_by_default(self):
        config = ObstacleConfig(points=np.array([[0.0, 0.0, 0.0], [0.001, 0.0, 0.0]]))

        with self.assertLogs("src.point_charge.charges", level="WARNING") as logs:
            charges.solve_point_charges(config, 0.5, LAM, source())

        self.assertIn("λ₀", logs.output[0])

    def test_lambda0_warning_can_be_disabled(self):
        config = ObstacleConfig(points=np.array([[0.0, 0.0, 0.0], [0.001, 0.0, 0.0]]))

        with self.assertNoLogs("src.point_charge.charges", level="WARNING"):
            charges.solve_point_charges(config, 0.5, LAM, source(), check_lambda0=False)

    def test_no_lambda0_warning_for_spread_obstacles(self):
        config = ObstacleConfig(points=np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))

        with self.assertNoLogs("src.point_charge.charges", level="WARNING"):
            charges.solve_point_charges(config, 0.5, LAM, source())

    def test_raw_system_rejects_zero_scattering_length(self):
        with self.assertRaises(ConfigurationError):
            charges.solve_point_charges_raw(self.config, 0.0, LAM, source())


class TestAghh(unittest.TestCase):
    def test_shifted_strength_reproduces_point_charges(self):
        config = sample_configuration(DensitySpec(family=DensityFamily.UNIFORM_BALL), 8, 5)
        a = 0.5
        alpha = aghh.alpha_for_scattering_length(a) - math.sqrt(LAM) / (4.0 * math.pi * config.n_points)

        resolvent_charges, _ = aghh.aghh_resolvent(config, alpha, LAM, source())

        expected = charges.solve_point_charges(config, a, LAM, source())
        np.testing.assert_allclose(resolvent_charges.values, expected.values, rtol=1e-10, atol=1e-14)

    def test_unshifted_resolvent_approaches_point_charge_field(self):
        a = 0.5
        n_values = [64, 256, 1024]
        scaled = []
        relative = []
        for n in n_values:
            config = sample_configuration(DensitySpec(family=DensityFamily.UNIFORM_BALL), n, 17)
            point = charges.solve_point_charges(config, a, LAM, source())
            point_field = charges.assemble_point_field(point, config, source())
            _, resolvent_field = aghh.aghh_resolvent(config, aghh.alpha_for_scattering_length(a), LAM, source())

            gap = field_distance.l2_distance(resolvent_field, point_field).value
            ratio = gap / field_distance.l2_norm(point_field - source_field(source()))
            relative.append([ratio])
            scaled.append(ratio * n / (math.sqrt(LAM) * a))

        fit = convergence.fit_rate(n_values, relative)
        self.assertTrue(all(value < 3.0 for value in scaled), scaled)
        self.assertLess(fit.slope, -0.7)
        self.assertGreater(fit.slope, -1.3)

    def test_alpha_for_zero_scattering_length_raises(self):
        with self.assertRaises(ConfigurationError):
            aghh.alpha_for_scattering_length(0.0)

    def test_xi_diagonal(self):
        config = ObstacleConfig(points=np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))

        xi = aghh.xi_matrix(config, 0.25, LAM)

        self.assertAlmostEqual(xi[0, 0], 0.5 + 2.0 / (4.0 * math.pi))
        self.assertAlmostEqual(xi[0, 1], -math.exp(-2.0) / (4.0 * math.pi))


class TestGreenField(unittest.TestCase):
    def test_point_field_far_from_charges(self):
        config = ObstacleConfig(points=np.array([[0.0, 0.0, 0.0]]))
        result = charges.solve_point_charges(config, 0.2, LAM, source())

        field = charges.assemble_point_field(result, config, source())

        point = np.array([[0.0, 0.0, 1.0]])
        expected = float(source().h(point)[0]) + float(result.values[0]) * math.exp(-2.0) / (4.0 * math.pi)
        self.assertAlmostEqual(float(field.evaluate(point)[0]), expected, places=14)

    def test_evaluation_on_charge_raises(self):
        field = GreenField(lam=LAM, atom_points=np.zeros((1, 3)), atom_charges=np.ones(1))

        with self.assertRaises(SingularKernelError):
            field.evaluate(np.zeros((1, 3)))

    def test_difference_of_equal_fields_vanishes(self):
        field = GreenField(lam=LAM, base_terms=((1.0, source()),), atom_points=np.ones((1, 3)), atom_charges=np.array([2.0]))

        difference = field - field

        self.assertEqual(difference.base_terms, ())
        self.assertAlmostEqual(float(difference.evaluate(np.zeros((1, 3)))[0]), 0.0, places=14)

    def test_lambda_mismatch_raises(self):
        with self.assertRaises(LambdaMismatchError):
            source_field(source()) + GreenField(lam=9.0)


if __name__ == "__main__":
    unittest.main()
