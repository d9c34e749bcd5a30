"""障害物間の相互作用行列 G^λ と λ₀ の診断。"""

from collections.abc import Sequence
from dataclasses import dataclass
import logging
import math

import numpy as np
from scipy.spatial.distance import pdist, squareform

from src.data_models import ObstacleConfig
from src.errors import ConfigurationError, DuplicatePointsError
from src.greens.kernels import yukawa_radial

POWER_ITERATION_TOL = 1e-8
POWER_ITERATION_MAX = 10000
FROBENIUS_FALLBACK_N = 8192
NORM_SEED = 0

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """
    G^λ_ij = e^{−√λ|y_i−y_j|}/(4π|y_i−y_j|)(i ≠ j)、対角 0

    Attributes:
        entries (np.ndarray): N×N の対称行列
        lam (float): λ
        opnorm_over_N (float): (1/N)‖G^λ‖
        norm_kind (str): "spectral" または "frobenius"
    """

    entries: np.ndarray
    lam: float
    opnorm_over_N: float
    norm_kind: str = "spectral"

    @property
    def n_points(self) -> int:
        return int(self.entries.shape[0])


def pair_distances(config: ObstacleConfig) -> np.ndarray:
    """凝縮形の点間距離。重複点があれば DuplicatePointsError"""
    distances = pdist(config.points)
    if distances.size and distances.min() == 0.0:
        raise DuplicatePointsError("Obstacle configuration has duplicate points", {"n_points": config.n_points})
    return distances


def yukawa_matrix(distances: np.ndarray, lam: float) -> np.ndarray:
    """凝縮形距離から対角 0 の G^λ を作る"""
    return squareform(yukawa_radial(distances, math.sqrt(lam)))


def spectral_norm(matrix: np.ndarray, tol: float = POWER_ITERATION_TOL, max_iter: int = POWER_ITERATION_MAX) -> float:
    """
    対称行列のスペクトルノルムを G² の冪乗法で求める。

    ±の固有値対(N = 2 など)でも収束するように G² に対して反復する。

    Args:
        matrix: 対称行列
        tol: 相対変化の許容誤差
        max_iter: 最大反復回数

    Returns:
        ‖G‖₂ の推定値
    """
    n = matrix.shape[0]
    if n == 0 or not np.any(matrix):
        return 0.0
    vector = np.random.default_rng(NORM_SEED).standard_normal(n)
    vector /= np.linalg.norm(vector)
    estimate = 0.0
    for iteration in range(max_iter):
        image = matrix @ (matrix @ vector)
        new_estimate = float(np.linalg.norm(image))
        if new_estimate == 0.0:
            return 0.0
        vector = image / new_estimate
        if abs(new_estimate - estimate) <= tol * new_estimate:
            logger.debug("power iteration converged after %d steps", iteration + 1)
            return math.sqrt(new_estimate)
        estimate = new_estimate
    logger.warning("power iteration did not reach tol=%.1e in %d steps", tol, max_iter)
    return math.sqrt(estimate)


def opnorm_over_n(entries: np.ndarray, norm: str = "spectral") -> tuple[float, str]:
    """
    (1/N)‖G^λ‖ を返す。N が大きいときは Frobenius ノルムの上界に切り替える。

    Args:
        entries: 対角 0 の G^λ
        norm: "spectral" または "frobenius"

    Returns:
        (値, 実際に使ったノルムの種類)
    """
    n = entries.shape[0]
    if norm == "spectral" and n > FROBENIUS_FALLBACK_N:
        logger.info("N=%d > %d: Frobenius bound に切り替え", n, FROBENIUS_FALLBACK_N)
        norm = "frobenius"
    value = spectral_norm(entries) if norm == "spectral" else float(np.linalg.norm(entries, "fro"))
    return value / n, norm


def interaction_matrix(config: ObstacleConfig, lam: float, norm: str = "spectral") -> InteractionMatrix:
    """
    配置から相互作用行列を組み立てる。

    Args:
        config: 障害物配置(重複点なし)
        lam: λ > 0
        norm: "spectral"(冪乗法)または "frobenius"

    Returns:
        InteractionMatrix
    """
    if not (lam > 0 and math.isfinite(lam)):
        raise ConfigurationError(f"Interaction matrix needs lambda > 0, got {lam}")
    if norm not in ("spectral", "frobenius"):
        raise ConfigurationError(f"Unknown norm {norm!r}")
    distances = pair_distances(config)
    entries = yukawa_matrix(distances, lam) if config.n_points > 1 else np.zeros((1, 1))
    value, norm = opnorm_over_n(entries, norm)
    logger.debug("interaction matrix N=%d lam=%.4g opnorm/N=%.6g", config.n_points, lam, value)
    return InteractionMatrix(entries=entries, lam=float(lam), opnorm_over_N=value, norm_kind=norm)


def lambda0_search(config: ObstacleConfig, lam_grid: Sequence[float], norm: str = "spectral") -> float | None:
    """
    (1/N)‖G^λ‖ < 1 となる最小のグリッド λ を探す。

    Args:
        config: 障害物配置
        lam_grid: 増加列の λ 候補
        norm: ノルムの種類

    Returns:
        条件を満たす最初の λ。見つからなければ None。
    """
    grid = [float(lam) for lam in lam_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError("lambda grid must be strictly increasing", {"lam_grid": grid})
    for lam in grid:
        if interaction_matrix(config, lam, norm=norm).opnorm_over_N < 1.0:
            return lam
    logger.info("lambda0_search: no grid point satisfies opnorm/N < 1")
    return None
