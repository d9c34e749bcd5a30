import math
import unittest

import numpy as np

from src.analysis import field_distance
from src.data_models import SourceSpec
from src.errors import LambdaMismatchError, UnequalBaseError
from src.point_charge.green_field import ChargeCloud, GreenField, source_field

LAM = 4.0


class TestL2Distance(unittest.TestCase):
    def test_single_atom_norm(self):
        field = GreenField(lam=LAM, atom_points=np.array([[0.3, 0.0, 0.0]]), atom_charges=np.array([-1.5]))

        norm = field_distance.l2_norm(field)

        self.assertAlmostEqual(norm, 1.5 / math.sqrt(8.0 * math.pi * 2.0), places=14)

    def test_dipole_norm(self):
        field = GreenField(lam=LAM, atom_points=np.array([[0.0, 0.0, 0.0], [0.0, 0.5, 0.0]]), atom_charges=np.array([1.0, -1.0]))

        norm = field_distance.l2_norm(field)

        expected = math.sqrt((2.0 - 2.0 * math.exp(-1.0)) / (16.0 * math.pi))
        self.assertAlmostEqual(norm, expected, places=14)

    def test_equal_fields_have_zero_distance(self):
        src = SourceSpec(g0=1.0, center=(0.0, 0.0, 0.0), width=0.5, lam=LAM)
        field = source_field(src) + GreenField(lam=LAM, atom_points=np.ones((2, 3)) * [[1.0], [2.0]], atom_charges=np.array([0.3, 0.4]))

        result = field_distance.l2_distance(field, field)

        self.assertEqual(result.value, 0.0)

    def test_atom_and_cloud_parts(self):
        atoms = GreenField(lam=LAM, atom_points=np.zeros((1, 3)), atom_charges=np.ones(1))
        cloud = GreenField(lam=LAM, clouds=(ChargeCloud(points=np.zeros((1, 3)), charges=np.ones(1)),))

        result = field_distance.l2_distance(atoms, cloud)

        self.assertAlmostEqual(result.atom_cloud, -2.0 / (16.0 * math.pi), places=14)
        self.assertAlmostEqual(result.value, 0.0, places=7)

    def test_unequal_base_raises(self):
        src = SourceSpec(g0=1.0, center=(0.0, 0.0, 0.0), width=0.5, lam=LAM)

        with self.assertRaises(UnequalBaseError):
            field_distance.l2_distance(source_field(src), GreenField(lam=LAM))

    def test_lambda_mismatch_raises(self):
        with self.assertRaises(LambdaMismatchError):
            field_distance.l2_distance(GreenField(lam=LAM), GreenField(lam=1.0))


def random_field(rng: np.random.Generator) -> GreenField:
    cloud = ChargeCloud(points=rng.uniform(-1.0, 1.0, (4, 3)), charges=rng.standard_normal(4))
    return GreenField(lam=LAM, atom_points=rng.uniform(-1.0, 1.0, (5, 3)), atom_charges=rng.standard_normal(5), clouds=(cloud,))


def scaled(field: GreenField, factor: float) -> GreenField:
    clouds = tuple(ChargeCloud(points=cloud.points, charges=factor * cloud.charges) for cloud in field.clouds)
    return GreenField(lam=field.lam, atom_points=field.atom_points, atom_charges=factor * field.atom_charges, clouds=clouds)


def inner(field_a: GreenField, field_b: GreenField) -> float:
    plus = field_distance.l2_distance(field_a, -field_b).value
    minus = field_distance.l2_distance(field_a, field_b).value
    return (plus**2 - minus**2) / 4.0


class TestDistanceProperties(unittest.TestCase):
    def test_triangle_inequality(self):
        for seed in range(6):
            rng = np.random.default_rng(seed)
            first, second, third = random_field(rng), random_field(rng), random_field(rng)

            direct = field_distance.l2_distance(first, third).value
            detour = field_distance.l2_distance(first, second).value + field_distance.l2_distance(second, third).value

            self.assertLessEqual(direct, detour * (1.0 + 1e-12))

    def test_symmetry(self):
        rng = np.random.default_rng(11)
        first, second = random_field(rng), random_field(rng)

        self.assertAlmostEqual(
            field_distance.l2_distance(first, second).value, field_distance.l2_distance(second, first).value, places=14
        )

    def test_inner_product_is_bilinear(self):
        for seed in range(4):
            rng = np.random.default_rng(100 + seed)
            first, second, third = random_field(rng), random_field(rng), random_field(rng)
            scale = field_distance.l2_norm(first) * field_distance.l2_norm(second) + field_distance.l2_norm(third) ** 2

            additive = inner(first + third, second) - inner(first, second) - inner(third, second)
            homogeneous = inner(scaled(first, 2.5), second) - 2.5 * inner(first, second)

            self.assertAlmostEqual(additive, 0.0, delta=1e-10 * scale)
            self.assertAlmostEqual(homogeneous, 0.0, delta=1e-10 * scale)

    def test_norm_is_absolutely_homogeneous(self):
        field = random_field(np.random.default_rng(7))

        self.assertAlmostEqual(field_distance.l2_norm(scaled(field, -3.0)), 3.0 * field_distance.l2_norm(field), places=12)


class TestHelpers(unittest.TestCase):
    def test_merge_coincident(self):
        points = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])

        merged_points, merged_charges = field_distance.merge_coincident(points, np.array([1.0, 2.0, -1.0]))

        np.testing.assert_array_equal(merged_points, [[1.0, 0.0, 0.0]])
        np.testing.assert_array_equal(merged_charges, [2.0])

    def test_hat_tilde_constant(self):
        self.assertAlmostEqual(field_distance.hat_tilde_constant(4, LAM), math.sqrt(4.0 / (16.0 * math.pi)), places=14)


if __name__ == "__main__":
    unittest.main()
