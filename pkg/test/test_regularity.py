import math
import unittest

import numpy as np

from src.data_models import DensityFamily, DensitySpec, ObstacleConfig
from src.errors import ConfigurationError
from src.random_field import regularity
from src.random_field.sampling import sample_configuration


class TestRegularityReport(unittest.TestCase):
    def test_two_point_sums(self):
        config = ObstacleConfig(points=np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]]))

        report = regularity.regularity_report(config, nu=0.1, xi=1.0, y1_constant=0.1)

        self.assertEqual(report.min_pair_distance, 0.5)
        self.assertAlmostEqual(report.y1_threshold, 0.1 * 2.0**-0.9)
        self.assertTrue(report.y1_ok)
        self.assertAlmostEqual(report.y2_sum, 2.0)
        self.assertAlmostEqual(report.y3_sum, 32.0 / 2.0**2.99)

    def test_single_point(self):
        report = regularity.regularity_report(ObstacleConfig(points=np.zeros((1, 3))), nu=0.1, xi=0.5)

        self.assertEqual(report.min_pair_distance, math.inf)
        self.assertTrue(report.y1_ok)
        self.assertEqual(report.y2_sum, 0.0)
        self.assertEqual(report.y3_pointwise_bound, 0.0)

    def test_duplicate_points_fail_y1(self):
        config = ObstacleConfig(points=np.array([[0.1, 0.1, 0.1], [0.1, 0.1, 0.1], [0.5, 0.0, 0.0]]))

        with self.assertLogs("src.random_field.regularity", level="WARNING"):
            report = regularity.regularity_report(config, nu=0.1, xi=1.0)

        self.assertFalse(report.y1_ok)
        self.assertEqual(report.min_pair_distance, 0.0)
        self.assertEqual(report.y3_pointwise_bound, math.inf)

    def test_nu_outside_range_raises(self):
        config = ObstacleConfig(points=np.zeros((1, 3)), density=DensitySpec(family=DensityFamily.UNIFORM_BALL, p=6.0))

        with self.assertRaises(ConfigurationError):
            regularity.regularity_report(config, nu=0.25, xi=1.0)

    def test_xi_outside_range_raises(self):
        with self.assertRaises(ConfigurationError):
            regularity.regularity_report(ObstacleConfig(points=np.zeros((1, 3))), nu=0.1, xi=1.5)


class TestWilsonInterval(unittest.TestCase):
    def test_symmetric_at_half(self):
        lower, upper = regularity.wilson_interval(5, 10)

        self.assertAlmostEqual(lower + upper, 1.0, places=12)
        self.assertLess(lower, 0.5)

    def test_all_successes(self):
        lower, upper = regularity.wilson_interval(30, 30)

        self.assertAlmostEqual(upper, 1.0, places=12)
        self.assertGreater(lower, 0.85)

    def test_no_trials_raise(self):
        with self.assertRaises(ConfigurationError):
            regularity.wilson_interval(0, 0)


class TestRegularityProbability(unittest.TestCase):
    def setUp(self):
        self.spec = DensitySpec(family=DensityFamily.UNIFORM_BALL)

    def test_zero_constant_always_holds(self):
        estimate = regularity.regularity_probability(self.spec, 20, nu=0.1, y1_constant=0.0, trials=30, seed=4)

        self.assertEqual(estimate.probability, 1.0)
        self.assertEqual(estimate.successes, 30)

    def test_huge_constant_never_holds(self):
        estimate = regularity.regularity_probability(self.spec, 20, nu=0.1, y1_constant=1e6, trials=30, seed=4)

        self.assertEqual(estimate.probability, 0.0)
        self.assertEqual(estimate.lower, 0.0)

    def test_too_few_trials_raise(self):
        with self.assertRaises(ConfigurationError):
            regularity.regularity_probability(self.spec, 20, nu=0.1, y1_constant=0.1, trials=10, seed=4)

    def test_calibrated_constant_passes_most_trials(self):
        constant = regularity.calibrate_y1_constant(self.spec, 30, nu=0.1, pilot_trials=100, seed=9)

        estimate = regularity.regularity_probability(self.spec, 30, nu=0.1, y1_constant=constant, trials=100, seed=9)

        self.assertGreater(constant, 0.0)
        self.assertGreaterEqual(estimate.probability, 0.98)

    def test_fixed_constant_probability_grows_with_n(self):
        pilot = regularity.sample_min_distances(self.spec, 100, trials=100, seed=21)
        constant = float(np.median(np.asarray(pilot) * 100 ** (1.0 - 0.05)))

        estimates = [
            regularity.regularity_probability(self.spec, n, nu=0.05, y1_constant=constant, trials=80, seed=22 + n)
            for n in (100, 400, 1600)
        ]

        for earlier, later in zip(estimates, estimates[1:]):
            self.assertGreaterEqual(later.upper, earlier.lower)
            self.assertGreaterEqual(later.probability, earlier.probability - 0.1)
        self.assertGreater(estimates[-1].lower, estimates[0].upper)

    def test_sweep_constant_is_calibrated_once_at_smallest_n(self):
        constant = regularity.sweep_y1_constant(self.spec, [400, 100, 1600], nu=0.05, y1_constant=None, seed=6)

        expected = regularity.calibrate_y1_constant(self.spec, 100, nu=0.05, seed=6)
        self.assertEqual(constant, expected)

    def test_sweep_constant_keeps_given_value(self):
        self.assertEqual(regularity.sweep_y1_constant(self.spec, [100, 400], nu=0.05, y1_constant=0.3), 0.3)


class TestRegularityByN(unittest.TestCase):
    def test_groups_rows_by_n(self):
        rows = [
            {"n": 10, "y1_ok": True, "y2_sum": 1.0},
            {"n": 10, "y1_ok": False, "y2_sum": 3.0},
            {"n": 20, "y1_ok": True, "y2_sum": 2.0},
        ]

        summary = regularity.regularity_by_n(rows)

        self.assertEqual(list(summary), ["10", "20"])
        self.assertEqual(summary["10"]["y1"]["successes"], 1)
        self.assertEqual(summary["10"]["y1"]["probability"], 0.5)
        self.assertEqual(summary["10"]["y2_sum_mean"], 2.0)
        self.assertEqual(summary["10"]["y2_sum_max"], 3.0)
        self.assertEqual(summary["20"]["y1"]["trials"], 1)


class TestRegularityProperties(unittest.TestCase):
    def setUp(self):
        self.spec = DensitySpec(family=DensityFamily.UNIFORM_BALL)

    def test_statistics_ignore_point_order(self):
        for seed in range(5):
            config = sample_configuration(self.spec, 40, seed)
            order = np.random.default_rng(seed).permutation(40)
            shuffled = ObstacleConfig(points=config.points[order], density=config.density)

            report = regularity.regularity_report(config, nu=0.05, xi=0.5, y1_constant=0.01)
            other = regularity.regularity_report(shuffled, nu=0.05, xi=0.5, y1_constant=0.01)

            self.assertEqual(report.min_pair_distance, other.min_pair_distance)
            self.assertEqual(report.y1_ok, other.y1_ok)
            self.assertAlmostEqual(report.y2_sum, other.y2_sum, delta=1e-12 * report.y2_sum)
            self.assertAlmostEqual(report.y3_sum, other.y3_sum, delta=1e-12 * report.y3_sum)

    def test_y2_scales_with_dilation(self):
        xi = 0.5
        for seed, scale in ((1, 0.5), (2, 2.5), (3, 7.0)):
            config = sample_configuration(self.spec, 30, seed)
            dilated = ObstacleConfig(points=scale * config.points)

            report = regularity.regularity_report(config, nu=0.05, xi=xi, y1_constant=0.01)
            scaled = regularity.regularity_report(dilated, nu=0.05, xi=xi, y1_constant=0.01)

            expected = scale ** (-(3.0 - xi)) * report.y2_sum
            self.assertAlmostEqual(scaled.y2_sum, expected, delta=1e-10 * expected)

    def test_y3_bounds_are_ordered_when_y1_holds(self):
        for seed in range(8):
            config = sample_configuration(self.spec, 60, seed)

            report = regularity.regularity_report(config, nu=0.05, xi=1.0, y1_constant=0.001)

            self.assertTrue(report.y1_ok)
            self.assertLessEqual(report.y3_sum, report.y3_pointwise_bound * (1.0 + 1e-12))
            self.assertLessEqual(report.y3_pointwise_bound, report.y3_chain_bound * (1.0 + 1e-12))


if __name__ == "__main__":
    unittest.main()
