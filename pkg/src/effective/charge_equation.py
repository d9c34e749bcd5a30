"""極限問題 ψ = (−Δ + 4πaW + λ)⁻¹f の電荷方程式。

q = −4πaψ とおくと ψ = h + 𝒢^λ(Wq) から

    (1/4πa)q + 𝒢^λ(Wq) + h = 0

となる。supp W 上のグリッドで Nyström 離散化 (I + 4πa·K·diag(W))q = −4πa·h を解く。
"""

from collections.abc import Callable
from dataclasses import dataclass, field
import logging
import math
from typing import Any
import warnings

import numpy as np
from scipy.linalg import LinAlgError, LinAlgWarning, lu_factor, lu_solve, svdvals

from src.data_models import DensitySpec, DesingularizationScheme, EffectiveSolver, SourceSpec
from src.errors import BornDivergedError, ConfigurationError, LambdaMismatchError, NonConvergenceError, SingularSystemError
from src.greens.kernels import FOUR_PI
from src.greens.nystrom import NystromOperator
from src.point_charge.green_field import ChargeCloud, GreenField
from src.potentials.quadrature import Grid3D, quadrature_grid
from src.random_field.density import DensityModel, make_density

DEFAULT_N_RADIAL = 16
DEFAULT_N_ANGULAR = 8
BORN_TOL = 1e-10
BORN_MAX_ITER = 500
EXACT_NORM_LIMIT = 3000
POWER_ITERATION_MAX = 2000
POWER_ITERATION_TOL = 1e-10

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EffectiveCharge:
    """
    有効電荷 q のノード値

    Attributes:
        grid (Grid3D): supp W 上のグリッド
        q_values (np.ndarray): q(x_k)
        a (float): 散乱長
        lam (float): λ
        solver (EffectiveSolver): 解法
        residual (float): 重み付き相対残差
        density (DensityModel): W
        source (SourceSpec): ソース f
        operator (NystromOperator): 𝒢^λ の離散化
        w_values (np.ndarray): W(x_k)
        h_values (np.ndarray): 右辺に使った h(x_k)
        contraction (float | None): Born 反復の縮小率の推定
        history (tuple[float, ...]): Born 反復の差分 ‖q^{k+1} − q^k‖_w
    """

    grid: Grid3D
    q_values: np.ndarray
    a: float
    lam: float
    solver: EffectiveSolver
    residual: float
    density: DensityModel
    source: SourceSpec
    operator: NystromOperator
    w_values: np.ndarray
    h_values: np.ndarray
    contraction: float | None = None
    history: tuple[float, ...] = field(default_factory=tuple)

    @property
    def cloud_density(self) -> np.ndarray:
        """W·q"""
        return self.w_values * self.q_values

    @property
    def psi_values(self) -> np.ndarray:
        """ノード上の ψ = h + K(Wq)"""
        return self.h_values + self.operator.apply(self.cloud_density)

    def psi(self, points: np.ndarray) -> np.ndarray:
        """任意点の ψ(x) = h(x) + 𝒢^λ(Wq)(x)"""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self.source.h(points) + self.operator.evaluate_at(points, self.cloud_density)

    def evaluate_q(self, points: np.ndarray) -> np.ndarray:
        """Nyström 補間 q(x) = −4πa(h(x) + 𝒢^λ(Wq)(x))"""
        return -FOUR_PI * self.a * self.psi(points)

    def to_rows(self) -> list[dict[str, Any]]:
        """CSV 用の行に変換"""
        psi = self.psi_values
        return [
            {"k": k, "x": float(x[0]), "y": float(x[1]), "z": float(x[2]), "w": float(w), "W": float(wv), "q": float(q), "psi": float(p)}
            for k, (x, w, wv, q, p) in enumerate(zip(self.grid.nodes, self.grid.weights, self.w_values, self.q_values, psi))
        ]

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換(配列は含めない)"""
        return {
            "a": self.a,
            "lam": self.lam,
            "solver": self.solver.value,
            "residual": self.residual,
            "contraction": self.contraction,
            "iterations": len(self.history),
            "grid": self.grid.describe(),
        }


def _weighted_norm(values: np.ndarray, weights: np.ndarray) -> float:
    return math.sqrt(float(np.dot(weights, values**2)))


def born_contraction(operator: NystromOperator, w_values: np.ndarray, a: float) -> float:
    """
    Born 反復 q ↦ −4πa·K(Wq) の w 重み付き L² での作用素ノルム。

    Args:
        operator: 𝒢^λ の離散化
        w_values: W のノード値
        a: 散乱長

    Returns:
        4π|a|·‖D^{1/2} K diag(W) D^{−1/2}‖₂
    """
    if a == 0.0 or not np.any(w_values):
        return 0.0
    sqrt_w = np.sqrt(operator.grid.weights)
    matrix = sqrt_w[:, None] * operator.matrix * (w_values / sqrt_w)[None, :]
    if matrix.shape[0] <= EXACT_NORM_LIMIT:
        norm = float(svdvals(matrix)[0])
    else:
        vector = np.random.default_rng(0).standard_normal(matrix.shape[0])
        vector /= np.linalg.norm(vector)
        norm = 0.0
        for _ in range(POWER_ITERATION_MAX):
            image = matrix.T @ (matrix @ vector)
            estimate = math.sqrt(float(np.linalg.norm(image)))
            vector = image / np.linalg.norm(image)
            if abs(estimate - norm) <= POWER_ITERATION_TOL * estimate:
                norm = estimate
                break
            norm = estimate
    return FOUR_PI * abs(a) * norm


def manufactured_rhs(
    psi_star: Callable[[np.ndarray], np.ndarray] | np.ndarray,
    W: DensitySpec | DensityModel,
    grid: Grid3D,
    a: float,
    lam: float,
    scheme: DesingularizationScheme | str = DesingularizationScheme.MULTIPOLE,
) -> np.ndarray:
    """
    製造解 ψ* に対応する右辺 h* = ψ* + 4πa·K(Wψ*) をノード上で作る。

    Args:
        psi_star: ψ* の関数(点列 → 値)またはノード値
        W: 密度
        grid: グリッド
        a: 散乱長
        lam: λ
        scheme: 対角処理

    Returns:
        h* のノード値
    """
    density = W if isinstance(W, DensityModel) else make_density(W)
    values = psi_star(grid.nodes) if callable(psi_star) else np.asarray(psi_star, dtype=float)
    operator = NystromOperator(grid, math.sqrt(lam), scheme)
    return values + FOUR_PI * a * operator.apply(density.evaluate(grid.nodes) * values)


def solve_effective_charge(
    W: DensitySpec | DensityModel,
    grid: Grid3D | None,
    a: float,
    lam: float,
    src: SourceSpec,
    solver: EffectiveSolver | str = EffectiveSolver.DIRECT,
    tol: float = BORN_TOL,
    max_iter: int = BORN_MAX_ITER,
    scheme: DesingularizationScheme | str = DesingularizationScheme.MULTIPOLE,
    h_values: np.ndarray | None = None,
    w_values: np.ndarray | None = None,
) -> EffectiveCharge:
    """
    有効電荷の方程式を解く。

    Args:
        W: 密度
        grid: supp W 上のグリッド(None なら半径 = W の台、次数 (16, 8))
        a: 散乱長
        lam: λ > 0
        src: ソース
        solver: born(不動点反復)または direct(LU)
        tol: Born 反復の相対残差
        max_iter: Born 反復の上限
        scheme: 対角処理
        h_values: 右辺 h のノード値を差し替える(製造解の照合用)
        w_values: W のノード値を差し替える

    Returns:
        EffectiveCharge
    """
    if not (lam > 0 and math.isfinite(lam)):
        raise ConfigurationError(f"The effective problem needs lambda > 0, got {lam}")
    if src.lam != lam:
        raise LambdaMismatchError("Source lambda differs from solve lambda", {"source": src.lam, "lam": lam})
    solver = EffectiveSolver(solver)
    density = W if isinstance(W, DensityModel) else make_density(W)
    grid = grid if grid is not None else quadrature_grid(density.support_radius, DEFAULT_N_RADIAL, DEFAULT_N_ANGULAR)
    operator = NystromOperator(grid, math.sqrt(lam), scheme)
    weights = grid.weights
    h = np.asarray(h_values, dtype=float) if h_values is not None else src.h(grid.nodes)
    w_nodes = np.asarray(w_values, dtype=float) if w_values is not None else density.evaluate(grid.nodes)

    def build(q_values: np.ndarray, residual: float, contraction: float | None = None, history: tuple = ()) -> EffectiveCharge:
        return EffectiveCharge(
            grid=grid,
            q_values=q_values,
            a=a,
            lam=lam,
            solver=solver,
            residual=residual,
            density=density,
            source=src,
            operator=operator,
            w_values=w_nodes,
            h_values=h,
            contraction=contraction,
            history=history,
        )

    if a == 0.0:
        logger.info("a = 0: q ≡ 0, ψ = h")
        return build(np.zeros(grid.size), 0.0, 0.0)

    rhs = -FOUR_PI * a * h
    scale = max(_weighted_norm(rhs, weights), 1e-300)

    def residual_of(q_values: np.ndarray) -> float:
        return _weighted_norm(q_values + FOUR_PI * a * operator.apply(w_nodes * q_values) - rhs, weights) / scale

    if not np.any(w_nodes):
        return build(rhs, residual_of(rhs), 0.0)

    if solver is EffectiveSolver.DIRECT:
        matrix = np.eye(grid.size) + FOUR_PI * a * operator.matrix * w_nodes[None, :]
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("error", LinAlgWarning)
                q_values = lu_solve(lu_factor(matrix), rhs)
        except (LinAlgError, LinAlgWarning) as exc:
            raise SingularSystemError("Effective charge system is singular", {"a": a, "lam": lam}) from exc
        residual = residual_of(q_values)
        logger.info("effective charge (direct) M=%d residual=%.3e", grid.size, residual)
        return build(q_values, residual)

    contraction = born_contraction(operator, w_nodes, a)
    logger.debug("Born contraction estimate %.6g", contraction)
    if contraction >= 1.0:
        raise BornDivergedError(
            "Born iteration does not contract; use a larger lambda or the direct solver", {"contraction": contraction, "lam": lam}
        )
    q_values = rhs.copy()
    history: list[float] = []
    for _ in range(max_iter):
        updated = rhs - FOUR_PI * a * operator.apply(w_nodes * q_values)
        history.append(_weighted_norm(updated - q_values, weights))
        q_values = updated
        residual = residual_of(q_values)
        if residual <= tol:
            logger.info("effective charge (born) %d iterations residual=%.3e", len(history), residual)
            return build(q_values, residual, contraction, tuple(history))
    raise NonConvergenceError("Born iteration hit max_iter", {"max_iter": max_iter, "residual": residual, "contraction": contraction})


def effective_field(q: EffectiveCharge, src: SourceSpec) -> GreenField:
    """
    ψ = h + 𝒢^λ(Wq) を電荷雲として組み立てる。

    Args:
        q: 有効電荷
        src: ソース

    Returns:
        GreenField(雲の電荷は w_k W_k q_k)
    """
    if q.lam != src.lam:
        raise LambdaMismatchError("Effective charge and source lambda differ", {"charge": q.lam, "source": src.lam})
    cloud = ChargeCloud(
        points=q.grid.nodes, charges=q.grid.weights * q.cloud_density, operator=q.operator, density=q.cloud_density
    )
    return GreenField(lam=src.lam, base_terms=((1.0, src),), clouds=(cloud,))


def effective_inner_product(src_g: SourceSpec, eff_f: EffectiveCharge) -> float:
    """(g, ψ_f) = (g, h_f) + Σ_m w_m h_g(z_m) W_m q_m"""
    if src_g.lam != eff_f.lam:
        raise LambdaMismatchError("Probe and effective charge lambda differ", {"probe": src_g.lam, "charge": eff_f.lam})
    cloud = float(np.dot(eff_f.grid.weights * src_g.h(eff_f.grid.nodes), eff_f.cloud_density))
    return src_g.overlap(eff_f.source) + cloud
