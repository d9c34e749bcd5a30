"""Yukawa / Laplace 体積ポテンシャルの Nyström 離散化。

(K c)_k ≈ ∫_{|z|<R} 𝒢^κ(x_k − z) c(z) dz をノード値 c から計算する行列 K を組み立てる。
弱特異な対角の扱いは二通り:

* multipole: 核を Legendre 展開し、動径方向は密度の Lagrange 補間に対して
  区分 Gauss–Legendre で積分する(積分点 s = r で分割)。l ≤ n_angular − 1。
* ball: 非対角は 𝒢(x_k − x_m)·w_m、対角は体積 w_k の球上の ∫𝒢。
"""

import logging
import math

import numpy as np
from scipy.interpolate import BarycentricInterpolator
from scipy.spatial.distance import cdist
from scipy.special import eval_legendre, roots_legendre, spherical_in, spherical_kn

from src.data_models import DesingularizationScheme
from src.errors import ConfigurationError
from src.greens.kernels import FOUR_PI, ball_self_integral, yukawa_radial
from src.potentials.quadrature import Grid3D

MAX_KAPPA_RADIUS = 300.0
INNER_PIECES = 2
OUTER_PIECES = 6
OUTSIDE_PIECES = 4
BOUNDARY_SLACK = 1e-12

logger = logging.getLogger(__name__)


class NystromOperator:
    """
    球グリッド上の体積ポテンシャル演算子

    Attributes:
        grid (Grid3D): 求積グリッド
        kappa (float): 減衰率 κ = √λ(0 で Laplace)
        scheme (DesingularizationScheme): 対角処理
    """

    def __init__(self, grid: Grid3D, kappa: float, scheme: DesingularizationScheme | str = DesingularizationScheme.MULTIPOLE):
        if not (kappa >= 0 and math.isfinite(kappa)):
            raise ConfigurationError(f"kappa must be finite and non-negative, got {kappa}")
        self.grid = grid
        self.kappa = float(kappa)
        self.scheme = DesingularizationScheme(scheme)
        if self.scheme is DesingularizationScheme.MULTIPOLE and self.kappa * grid.support_radius >= MAX_KAPPA_RADIUS:
            raise ConfigurationError(
                "kappa·R too large for the multipole rule",
                {"kappa": self.kappa, "support_radius": grid.support_radius, "limit": MAX_KAPPA_RADIUS},
            )
        self._l_values = np.arange(grid.n_angular)
        self._lagrange = BarycentricInterpolator(grid.radii, np.eye(grid.n_radial))
        self._n_sub = max(16, grid.n_radial + 8)
        self._matrix: np.ndarray | None = None

    def __getstate__(self) -> dict:
        state = self.__dict__.copy()
        state["_matrix"] = None
        return state

    @property
    def matrix(self) -> np.ndarray:
        """形状 (M, M) の Nyström 行列"""
        if self._matrix is None:
            if self.scheme is DesingularizationScheme.MULTIPOLE:
                self._matrix = self._assemble_multipole()
            else:
                self._matrix = self._assemble_ball()
            logger.debug("Nyström matrix assembled: scheme=%s kappa=%.4g size=%d", self.scheme.value, self.kappa, self.grid.size)
        return self._matrix

    def apply(self, density: np.ndarray) -> np.ndarray:
        """ノード上で K c を計算"""
        return self.matrix @ np.asarray(density, dtype=float)

    def weighted_symmetric(self) -> np.ndarray:
        """D^{1/2} K D^{−1/2}(w 重み付き L² での表現)"""
        sqrt_w = np.sqrt(self.grid.weights)
        return sqrt_w[:, None] * self.matrix / sqrt_w[None, :]

    def _sub_quadrature(self, r: float) -> tuple[np.ndarray, np.ndarray]:
        R = self.grid.support_radius
        if r >= R:
            edges = np.linspace(0.0, R, OUTSIDE_PIECES + 1)
        else:
            inner = np.linspace(0.0, r, INNER_PIECES + 1) if r > 0 else np.array([0.0])
            outer = r + (R - r) * 2.0 ** (np.arange(1, OUTER_PIECES + 1) - float(OUTER_PIECES))
            edges = np.concatenate([inner, outer])
        lower, upper = edges[:-1], edges[1:]
        keep = upper > lower
        lower, upper = lower[keep], upper[keep]
        x, w = roots_legendre(self._n_sub)
        half = 0.5 * (upper - lower)
        nodes = (half[:, None] * (x[None, :] + 1.0) + lower[:, None]).ravel()
        weights = (half[:, None] * w[None, :]).ravel()
        return nodes, weights

    def _radial_kernel(self, r: float, s: np.ndarray) -> np.ndarray:
        l_col = self._l_values[:, None]
        r_lt = np.minimum(r, s)[None, :]
        r_gt = np.maximum(r, s)[None, :]
        if self.kappa == 0.0:
            return r_lt**l_col / ((2 * l_col + 1) * r_gt ** (l_col + 1))
        return (2.0 * self.kappa / math.pi) * spherical_in(l_col, self.kappa * r_lt) * spherical_kn(l_col, self.kappa * r_gt)

    def radial_weights(self, targets: np.ndarray) -> np.ndarray:
        """
        W_l[t, j] = ∫_0^R ℓ_j(s) s² k_l(r_t, s) ds を計算する。

        Args:
            targets: 動径 r_t の配列

        Returns:
            形状 (L, n_targets, n_radial) の配列
        """
        targets = np.atleast_1d(np.asarray(targets, dtype=float))
        out = np.empty((self._l_values.size, targets.size, self.grid.n_radial))
        for t, r in enumerate(targets):
            s, sw = self._sub_quadrature(float(r))
            basis = self._lagrange(s)
            kernel = self._radial_kernel(float(r), s) * (sw * s**2)[None, :]
            out[:, t, :] = kernel @ basis
        return out

    def _angular_factors(self, cosines: np.ndarray) -> np.ndarray:
        l_values = self._l_values.reshape((-1,) + (1,) * cosines.ndim)
        legendre = eval_legendre(l_values, np.clip(cosines, -1.0, 1.0)[None, ...])
        return (2 * l_values + 1) / FOUR_PI * legendre * self.grid.angular_weights

    def _assemble_multipole(self) -> np.ndarray:
        radial = self.radial_weights(self.grid.radii)
        angular = self._angular_factors(self.grid.directions @ self.grid.directions.T)
        matrix = np.zeros((self.grid.size, self.grid.size))
        for l_index in range(self._l_values.size):
            matrix += np.kron(radial[l_index], angular[l_index])
        return matrix

    def _assemble_ball(self) -> np.ndarray:
        nodes, weights = self.grid.nodes, self.grid.weights
        distances = cdist(nodes, nodes)
        np.fill_diagonal(distances, 1.0)
        matrix = yukawa_radial(distances, self.kappa) * weights[None, :]
        rho = (3.0 * weights / FOUR_PI) ** (1.0 / 3.0)
        np.fill_diagonal(matrix, ball_self_integral(rho, self.kappa))
        return matrix

    def _direct_sum(self, points: np.ndarray, density: np.ndarray) -> np.ndarray:
        distances = cdist(points, self.grid.nodes)
        charges = self.grid.weights * density
        coincident = distances == 0.0
        safe = np.where(coincident, 1.0, distances)
        values = np.where(coincident, 0.0, yukawa_radial(safe, self.kappa)) @ charges
        if np.any(coincident):
            rho = (3.0 * self.grid.weights / FOUR_PI) ** (1.0 / 3.0)
            values += coincident.astype(float) @ (ball_self_integral(rho, self.kappa) * density)
        return values

    def evaluate_at(self, points: np.ndarray, density: np.ndarray) -> np.ndarray:
        """
        任意点で ∫𝒢^κ(x − z) c(z) dz を評価する。

        Args:
            points: 形状 (P, 3) の評価点
            density: グリッドノード上の密度 c

        Returns:
            形状 (P,) の値。台の外の点は直接和で評価する。
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        density = np.asarray(density, dtype=float)
        values = np.empty(points.shape[0])
        radii = np.linalg.norm(points, axis=1)
        inside = radii <= self.grid.support_radius * (1.0 + BOUNDARY_SLACK)
        if self.scheme is DesingularizationScheme.BALL or not np.any(inside):
            return self._direct_sum(points, density)

        values[~inside] = self._direct_sum(points[~inside], density) if np.any(~inside) else 0.0
        inner_radii = radii[inside]
        safe_radii = np.where(inner_radii > 0, inner_radii, 1.0)
        unit = points[inside] / safe_radii[:, None]
        unit[inner_radii == 0] = (0.0, 0.0, 1.0)
        radial = self.radial_weights(inner_radii)
        angular = self._angular_factors(unit @ self.grid.directions.T)
        grid_density = density.reshape(self.grid.n_radial, self.grid.n_directions)
        total = np.zeros(inner_radii.size)
        for l_index in range(self._l_values.size):
            total += np.sum((radial[l_index] @ grid_density) * angular[l_index], axis=1)
        values[inside] = total
        return values
