"""Birman–Schwinger 形式 μ + v𝒢⁰uμ = v の Nyström 解法と共鳴チェック。"""

from dataclasses import dataclass
import logging
import math
from typing import Any
import warnings

import numpy as np
from scipy.linalg import LinAlgError, LinAlgWarning, lu_factor, lu_solve, svdvals

from src.data_models import DesingularizationScheme, ScatteringMethod
from src.errors import NonConvergenceError, ResonanceDetectedError
from src.greens.kernels import FOUR_PI
from src.greens.nystrom import NystromOperator
from src.potentials.potential_model import PotentialModel, default_grid
from src.potentials.quadrature import Grid3D
from src.scattering.radial_ode import RESONANCE_THRESHOLD, scattering_length_radial_ode

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ScatteringSolution:
    """
    ゼロエネルギー問題の解

    Attributes:
        mu (np.ndarray): グリッドノード上の μ
        a (float): 散乱長 (1/4π)Σ w u μ
        bs_margin (float): (I + v𝒢⁰u) の最小特異値
        method (ScatteringMethod): 手法
        grid (Grid3D): 求積グリッド
        potential (PotentialModel): ポテンシャル
        operator (NystromOperator): 𝒢⁰ の離散化
        residual (float): ‖μ + v𝒢⁰uμ − v‖_w
    """

    mu: np.ndarray
    a: float
    bs_margin: float
    method: ScatteringMethod
    grid: Grid3D
    potential: PotentialModel
    operator: NystromOperator
    residual: float = 0.0

    def phi0(self, points: np.ndarray) -> np.ndarray:
        """φ₀ = 1 − 𝒢⁰(uμ) を評価"""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        density = self.potential.u(self.grid.nodes) * self.mu
        return 1.0 - self.operator.evaluate_at(points, density)

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換(配列は含めない)"""
        return {
            "a": self.a,
            "bs_margin": self.bs_margin,
            "method": self.method.value,
            "residual": self.residual,
            "grid": self.grid.describe(),
        }


def birman_schwinger_matrix(pot: PotentialModel, operator: NystromOperator) -> np.ndarray:
    """ノード上の I + diag(v) K⁰ diag(u)"""
    nodes = operator.grid.nodes
    u_values, v_values = pot.u(nodes), pot.v(nodes)
    return np.eye(operator.grid.size) + v_values[:, None] * operator.matrix * u_values[None, :]


def resonance_check(
    pot: PotentialModel,
    grid: Grid3D | None = None,
    scheme: DesingularizationScheme | str = DesingularizationScheme.MULTIPOLE,
    operator: NystromOperator | None = None,
) -> float:
    """
    離散化した (I + v𝒢⁰u) の最小特異値を返す。

    重み付き L² に合わせて D^{1/2}(·)D^{−1/2} の形で評価するので V ≡ 0 では厳密に 1。

    Args:
        pot: ポテンシャル
        grid: 求積グリッド(省略時は既定グリッド)
        scheme: 対角処理
        operator: 既に組み立てた 𝒢⁰ 演算子

    Returns:
        bs_margin(0 も正当な戻り値)
    """
    grid = grid if grid is not None else default_grid(pot)
    if pot.is_zero:
        return 1.0
    operator = operator if operator is not None else NystromOperator(grid, 0.0, scheme)
    sqrt_w = np.sqrt(grid.weights)
    matrix = sqrt_w[:, None] * birman_schwinger_matrix(pot, operator) / sqrt_w[None, :]
    margin = float(svdvals(matrix).min())
    logger.debug("bs_margin=%.6g (size=%d)", margin, grid.size)
    return margin


def solve_mu_nystrom(
    pot: PotentialModel,
    grid: Grid3D | None = None,
    tol: float = 1e-10,
    resonance_threshold: float = RESONANCE_THRESHOLD,
    scheme: DesingularizationScheme | str = DesingularizationScheme.MULTIPOLE,
) -> ScatteringSolution:
    """
    μ + v𝒢⁰uμ = v を Nyström 法で解き、散乱長を計算する。

    Args:
        pot: ポテンシャル
        grid: 求積グリッド(省略時は n_radial=24, n_angular=4)
        tol: 相対残差の許容値
        resonance_threshold: bs_margin の閾値
        scheme: 対角処理

    Returns:
        ScatteringSolution
    """
    grid = grid if grid is not None else default_grid(pot)
    operator = NystromOperator(grid, 0.0, scheme)
    if pot.is_zero:
        return ScatteringSolution(
            mu=np.zeros(grid.size), a=0.0, bs_margin=1.0, method=ScatteringMethod.NYSTROM, grid=grid, potential=pot, operator=operator
        )

    margin = resonance_check(pot, grid, operator=operator)
    if margin <= resonance_threshold:
        raise ResonanceDetectedError(
            "Zero-energy resonance or eigenvalue detected", {"bs_margin": margin, "threshold": resonance_threshold}
        )

    matrix = birman_schwinger_matrix(pot, operator)
    v_values = pot.v(grid.nodes)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            mu = lu_solve(lu_factor(matrix), v_values)
    except (LinAlgError, LinAlgWarning) as exc:
        raise NonConvergenceError("Birman–Schwinger system is ill-conditioned", {"bs_margin": margin}) from exc

    weighted = np.sqrt(grid.weights)
    residual = float(np.linalg.norm(weighted * (matrix @ mu - v_values)))
    scale = max(float(np.linalg.norm(weighted * v_values)), 1e-300)
    if residual > tol * scale:
        raise NonConvergenceError("Nyström residual above tolerance", {"residual": residual, "scale": scale, "tol": tol})

    a = float(np.dot(grid.weights, pot.u(grid.nodes) * mu)) / FOUR_PI
    logger.info("Nyström scattering length a=%.10g (bs_margin=%.4g)", a, margin)
    return ScatteringSolution(
        mu=mu,
        a=a,
        bs_margin=margin,
        method=ScatteringMethod.NYSTROM,
        grid=grid,
        potential=pot,
        operator=operator,
        residual=residual / scale,
    )


def scattering_length(pot: PotentialModel, method: ScatteringMethod | str = ScatteringMethod.NYSTROM, **kwargs: Any) -> float:
    """手法を選んで散乱長だけを返す"""
    method = ScatteringMethod(method)
    if method is ScatteringMethod.NYSTROM:
        return solve_mu_nystrom(pot, **kwargs).a
    a, flag = scattering_length_radial_ode(pot, **kwargs)
    if flag or not math.isfinite(a):
        raise ResonanceDetectedError("Radial ODE flags a zero-energy resonance", {"a": a})
    return a
