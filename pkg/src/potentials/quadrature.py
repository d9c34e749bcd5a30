"""球 |x| ≤ R 上の直積求積則。

動径方向は [0, R] 上の Gauss–Legendre(r² のヤコビアンを重みに含める)、
角度方向は cosθ の Gauss–Legendre と φ の台形則の直積。
角度則は次数 2·n_angular − 1 以下の球面調和関数を厳密に積分する。
"""

from dataclasses import dataclass
import logging
import math

import numpy as np
from scipy.special import roots_legendre

from src.errors import ConfigurationError, UnsupportedQuadratureError

ANGULAR_ORDERS = (1, 2, 3, 4, 5, 6, 8, 10, 12, 16)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Grid3D:
    """
    球上の求積グリッド。ノードは動径優先(index = i·n_directions + a)で並ぶ。

    Attributes:
        nodes (np.ndarray): 形状 (M, 3) のノード
        weights (np.ndarray): 形状 (M,) の正の重み
        radii (np.ndarray): 動径ノード
        radial_weights (np.ndarray): 動径重み(r² を含む)
        directions (np.ndarray): 形状 (n_directions, 3) の単位ベクトル
        angular_weights (np.ndarray): 角度重み(総和 4π)
        support_radius (float): 球の半径 R
        n_radial (int): 動径ノード数
        n_angular (int): cosθ のノード数
    """

    nodes: np.ndarray
    weights: np.ndarray
    radii: np.ndarray
    radial_weights: np.ndarray
    directions: np.ndarray
    angular_weights: np.ndarray
    support_radius: float
    n_radial: int
    n_angular: int

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    @property
    def n_directions(self) -> int:
        return int(self.directions.shape[0])

    @property
    def exactness_degree(self) -> dict[str, int]:
        """動径(∫p(r)r²dr の p の次数)と角度の厳密次数"""
        return {"radial": 2 * self.n_radial - 3, "angular": 2 * self.n_angular - 1}

    def integrate(self, values: np.ndarray) -> float:
        """ノード値の求積和 Σ w_k f(x_k)"""
        return float(np.dot(self.weights, np.asarray(values, dtype=float)))

    def matches(self, other: "Grid3D") -> bool:
        """同じノードと重みを持つか"""
        return (
            self.size == other.size
            and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.weights, other.weights)
        )

    def describe(self) -> dict[str, float | int]:
        """辞書形式に変換(配列は含めない)"""
        return {"support_radius": self.support_radius, "n_radial": self.n_radial, "n_angular": self.n_angular, "size": self.size}


def angular_rule(n_angular: int) -> tuple[np.ndarray, np.ndarray]:
    """
    単位球面上の直積則を返す。

    Args:
        n_angular: cosθ の Gauss–Legendre 点数(φ は 2·n_angular 点の台形則)

    Returns:
        (directions, weights) のタプル。重みの総和は 4π。
    """
    if n_angular not in ANGULAR_ORDERS:
        raise UnsupportedQuadratureError(
            f"Unsupported angular order {n_angular}", {"n_angular": n_angular, "supported": list(ANGULAR_ORDERS)}
        )
    cos_theta, cos_weights = roots_legendre(n_angular)
    n_phi = 2 * n_angular
    phi = (np.arange(n_phi) + 0.5) * (2.0 * math.pi / n_phi)
    sin_theta = np.sqrt(1.0 - cos_theta**2)

    directions = np.stack(
        [
            np.outer(sin_theta, np.cos(phi)).ravel(),
            np.outer(sin_theta, np.sin(phi)).ravel(),
            np.repeat(cos_theta, n_phi),
        ],
        axis=1,
    )
    weights = np.repeat(cos_weights, n_phi) * (2.0 * math.pi / n_phi)
    return directions, weights


def radial_rule(support_radius: float, n_radial: int) -> tuple[np.ndarray, np.ndarray]:
    """[0, R] 上の Gauss–Legendre 則(重みに r² を含む)"""
    x, w = roots_legendre(n_radial)
    radii = 0.5 * support_radius * (x + 1.0)
    weights = 0.5 * support_radius * w * radii**2
    return radii, weights


def quadrature_grid(support_radius: float, n_radial: int, n_angular: int) -> Grid3D:
    """
    半径 R の球上の直積求積グリッドを作成する。

    Args:
        support_radius: 球の半径 R
        n_radial: 動径ノード数(2 以上)
        n_angular: 角度次数(ANGULAR_ORDERS のいずれか)

    Returns:
        Grid3D。重みの総和は 4πR³/3。
    """
    if not (support_radius > 0 and math.isfinite(support_radius)):
        raise ConfigurationError(f"Support radius must be positive, got {support_radius}")
    if n_radial < 2:
        raise UnsupportedQuadratureError(f"n_radial must be at least 2, got {n_radial}", {"n_radial": n_radial})
    directions, angular_weights = angular_rule(n_angular)
    radii, radial_weights = radial_rule(support_radius, n_radial)

    nodes = (radii[:, None, None] * directions[None, :, :]).reshape(-1, 3)
    weights = np.outer(radial_weights, angular_weights).ravel()
    for array in (nodes, weights, radii, radial_weights, directions, angular_weights):
        array.setflags(write=False)
    logger.debug("quadrature grid R=%.4g n_radial=%d n_angular=%d size=%d", support_radius, n_radial, n_angular, weights.size)
    return Grid3D(
        nodes=nodes,
        weights=weights,
        radii=radii,
        radial_weights=radial_weights,
        directions=directions,
        angular_weights=angular_weights,
        support_radius=float(support_radius),
        n_radial=n_radial,
        n_angular=n_angular,
    )


def next_angular_order(n_angular: int) -> int:
    """ANGULAR_ORDERS 中の次の次数(最大ならそのまま)"""
    index = ANGULAR_ORDERS.index(n_angular)
    return ANGULAR_ORDERS[min(index + 1, len(ANGULAR_ORDERS) - 1)]


def scaled_grid(grid: Grid3D, factor: float) -> Grid3D:
    """全体を factor 倍した同型グリッド(重みは factor³ 倍)"""
    return quadrature_grid(grid.support_radius * factor, grid.n_radial, grid.n_angular)
