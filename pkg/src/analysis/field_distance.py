"""K2 核による GreenField 間の厳密な L² 距離。

‖Σ c_i 𝒢^λ(· − z_i)‖² = Σ_{ij} c_i c_j e^{−√λ|z_i−z_j|}/(8π√λ) を分割して和を取る。
"""

import logging
import math

import numpy as np
from scipy.spatial.distance import cdist

from src.data_models import FieldDistance
from src.errors import LambdaMismatchError, UnequalBaseError
from src.greens.kernels import EIGHT_PI, resolvent_squared_kernel
from src.point_charge.green_field import GreenField

CHUNK_SIZE = 1024

logger = logging.getLogger(__name__)


def merge_coincident(points: np.ndarray, charges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """同一点の電荷を合算し、零電荷を除く"""
    if charges.size == 0:
        return points.reshape(0, 3), charges
    unique, inverse = np.unique(points, axis=0, return_inverse=True)
    merged = np.zeros(unique.shape[0])
    np.add.at(merged, inverse.ravel(), charges)
    keep = merged != 0.0
    return unique[keep], merged[keep]


def pair_sum(points_a: np.ndarray, charges_a: np.ndarray, points_b: np.ndarray, charges_b: np.ndarray, lam: float) -> float:
    """Σ_{i,j} c_i c′_j K2(|z_i − z′_j|) を行ブロックごとに計算し fsum で集計"""
    if charges_a.size == 0 or charges_b.size == 0:
        return 0.0
    kappa = math.sqrt(lam)
    partials = []
    for start in range(0, charges_a.size, CHUNK_SIZE):
        stop = start + CHUNK_SIZE
        kernel = np.exp(-kappa * cdist(points_a[start:stop], points_b)) / (EIGHT_PI * kappa)
        partials.append(float(charges_a[start:stop] @ (kernel @ charges_b)))
    return math.fsum(partials)


def l2_distance(field_a: GreenField, field_b: GreenField) -> FieldDistance:
    """
    二つの場の L² 距離を K2 のペア和で計算する。

    Args:
        field_a: 1 つ目の場
        field_b: 2 つ目の場(λ が等しく、基底項は相殺すること)

    Returns:
        FieldDistance(値と内訳)
    """
    if field_a.lam != field_b.lam:
        raise LambdaMismatchError("Fields have different lambda", {"left": field_a.lam, "right": field_b.lam})
    difference = field_a - field_b
    if difference.base_terms:
        raise UnequalBaseError(
            "Base parts do not cancel", {"remaining": [source.to_dict() for _, source in difference.base_terms]}
        )
    lam = difference.lam
    resolvent_squared_kernel(0.0, lam)
    atom_points, atom_charges = merge_coincident(difference.atom_points, difference.atom_charges)
    cloud_points, cloud_charges = merge_coincident(difference.cloud_points, difference.cloud_charges)

    atom_atom = pair_sum(atom_points, atom_charges, atom_points, atom_charges, lam)
    atom_cloud = 2.0 * pair_sum(atom_points, atom_charges, cloud_points, cloud_charges, lam)
    cloud_cloud = pair_sum(cloud_points, cloud_charges, cloud_points, cloud_charges, lam)
    squared = math.fsum([atom_atom, atom_cloud, cloud_cloud])
    if squared < 0.0:
        logger.debug("negative squared norm %.3e from rounding; clamped", squared)
    return FieldDistance(
        value=math.sqrt(max(squared, 0.0)), atom_atom=atom_atom, atom_cloud=atom_cloud, cloud_cloud=cloud_cloud, lam=lam
    )


def l2_norm(field: GreenField) -> float:
    """基底項を持たない場の L² ノルム"""
    return l2_distance(field, GreenField(lam=field.lam)).value


def hat_tilde_constant(n_points: int, lam: float) -> float:
    """‖Σ(Q_i − q_i)𝒢(· − y_i)‖ ≤ c‖Q − q‖ の定数 c = (N·K2(0))^{1/2}"""
    return math.sqrt(n_points * resolvent_squared_kernel(0.0, lam))
