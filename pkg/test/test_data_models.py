import math
import unittest

import numpy as np

from src.data_models import (
    ChargeVector,
    DensityFamily,
    DensitySpec,
    ExperimentRecord,
    ObstacleConfig,
    PotentialShape,
    PotentialSpec,
    RateFit,
    RemainderTerms,
    SourceSpec,
)


class TestSpecs(unittest.TestCase):
    def test_potential_spec_round_trip(self):
        spec = PotentialSpec(shape=PotentialShape.TABULATED_RADIAL, amplitude=2.0, table_r=(0.0, 0.5, 1.0), table_v=(1.0, 0.5, 0.0))

        recreated = PotentialSpec.from_dict(spec.to_dict())

        self.assertEqual(recreated, spec)

    def test_density_spec_round_trip_keeps_infinite_p_as_none(self):
        spec = DensitySpec(family=DensityFamily.GAUSSIAN, sigma=0.3)

        recreated = DensitySpec.from_dict(spec.to_dict())

        self.assertEqual(recreated, spec)
        self.assertIsNone(recreated.p)

    def test_obstacle_config_round_trip(self):
        config = ObstacleConfig(points=np.array([[0.0, 0.1, 0.2], [0.3, 0.4, 0.5]]), seed=7, density=DensitySpec(family=DensityFamily.UNIFORM_BALL))

        recreated = ObstacleConfig.from_dict(config.to_dict())

        np.testing.assert_array_equal(recreated.points, config.points)
        self.assertEqual(recreated.seed, 7)
        self.assertEqual(recreated.density, config.density)

    def test_obstacle_points_are_read_only(self):
        config = ObstacleConfig(points=np.zeros((2, 3)))

        with self.assertRaises(ValueError):
            config.points[0, 0] = 1.0


class TestSourceSpec(unittest.TestCase):
    def test_profile_peaks_at_center(self):
        src = SourceSpec(g0=2.0, center=(0.1, 0.0, 0.0), width=0.5, lam=25.0)

        self.assertAlmostEqual(float(src.h(np.array([[0.1, 0.0, 0.0]]))[0]), 2.0)
        self.assertAlmostEqual(float(src.h(np.array([[0.6, 0.0, 0.0]]))[0]), 2.0 * math.exp(-1.0))

    def test_f_matches_finite_difference_laplacian(self):
        src = SourceSpec(g0=1.0, center=(0.0, 0.0, 0.0), width=0.7, lam=3.0)
        x = np.array([0.2, -0.1, 0.3])
        step = 1e-4

        laplacian = 0.0
        for axis in range(3):
            offset = np.zeros(3)
            offset[axis] = step
            laplacian += (src.h(x + offset) - 2.0 * src.h(x) + src.h(x - offset)) / step**2

        self.assertAlmostEqual(float(src.f(x)), float(-laplacian + 3.0 * src.h(x)), places=5)

    def test_overlap_is_symmetric(self):
        f = SourceSpec(g0=1.0, center=(0.0, 0.0, 0.0), width=0.5, lam=25.0)
        g = SourceSpec(g0=0.7, center=(0.3, 0.1, 0.0), width=0.8, lam=25.0)

        self.assertAlmostEqual(f.overlap(g), g.overlap(f), places=12)

    def test_overlap_with_itself_is_h_norm_in_graph_form(self):
        src = SourceSpec(g0=1.0, center=(0.0, 0.0, 0.0), width=1.0, lam=0.0)

        # (∇h, ∇h) = 3π^{3/2}/(2√2) for h = exp(−|x|²)
        self.assertAlmostEqual(src.overlap(src), 3.0 * math.pi**1.5 / (2.0 * math.sqrt(2.0)), places=12)

    def test_rejects_non_positive_width(self):
        with self.assertRaises(ValueError):
            SourceSpec(g0=1.0, center=(0.0, 0.0, 0.0), width=0.0, lam=1.0)

    def test_source_round_trip(self):
        src = SourceSpec(g0=1.5, center=(0.0, 1.0, 2.0), width=0.4, lam=9.0)

        self.assertEqual(SourceSpec.from_dict(src.to_dict()), src)


class TestResultModels(unittest.TestCase):
    def test_charge_vector_rows(self):
        config = ObstacleConfig(points=np.array([[1.0, 2.0, 3.0]]))
        charges = ChargeVector(values=np.array([-0.5]), lam=1.0, a=0.1, config=config)

        rows = charges.to_rows()

        self.assertEqual(rows, [{"i": 0, "x": 1.0, "y": 2.0, "z": 3.0, "q": -0.5}])

    def test_remainder_terms_sum_and_equation_form(self):
        terms = RemainderTerms(
            A=np.array([1.0, 2.0]), B=np.array([0.5, 0.0]), D=np.array([0.0, -1.0]), A_verbatim=np.zeros(2), a=0.25, n_obstacles=2
        )

        np.testing.assert_allclose(terms.R, [1.5, 1.0])
        np.testing.assert_allclose(terms.equation_remainder, -(2.0 / math.pi) * np.array([1.5, 1.0]))

    def test_remainder_equation_form_vanishes_at_zero_scattering_length(self):
        terms = RemainderTerms(A=np.ones(1), B=np.zeros(1), D=np.zeros(1), A_verbatim=np.ones(1), a=0.0, n_obstacles=1)

        np.testing.assert_array_equal(terms.equation_remainder, np.zeros(1))

    def test_rate_fit_round_trip(self):
        fit = RateFit(n_values=[4, 8, 16], error_values=[1.0, 0.5, 0.25], slope=-1.0, slope_stderr=0.0, intercept=1.386)

        self.assertEqual(RateFit.from_dict(fit.to_dict()), fit)

    def test_experiment_record_round_trip(self):
        record = ExperimentRecord(subcommand="converge", config_hash="abc", version="0.1.0", rows=[{"n": 4}], summary={"slope": -0.5})

        recreated = ExperimentRecord.from_dict(record.to_dict())

        self.assertEqual(recreated.to_dict(), record.to_dict())


if __name__ == "__main__":
    unittest.main()
