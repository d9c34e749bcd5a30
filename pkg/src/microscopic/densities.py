"""スケールした密度 ρ̂_i の連立系と、それから作る場 ψ_N, ψ̃_N。

ρ̂_i(ξ) = N^{−1}ρ_i(y_i + ξ/N) とおくと連立系は

    (I + u𝒢^{λ/N²}v)ρ̂_i + (1/N)Σ_{j≠i} u𝒢^λ(y_i − y_j + (ξ−ζ)/N)vρ̂_j = −u·h(y_i + ξ/N)

となり、単極電荷は Q_i = (v_i, ρ_i) = N^{−1}∫vρ̂_i。対角ブロックは i によらないので一度だけ LU 分解し、
ブロック Jacobi 前処理付き GMRES で全体を解く。
"""

from dataclasses import dataclass
import logging
import math
from typing import Any
import warnings

import numpy as np
from scipy.linalg import LinAlgError, LinAlgWarning, lu_factor, lu_solve
from scipy.sparse.linalg import LinearOperator, gmres
from scipy.spatial.distance import cdist

from src.data_models import DesingularizationScheme, ObstacleConfig, SourceSpec
from src.errors import (
    CapExceededError,
    GridMismatchError,
    LambdaMismatchError,
    NonConvergenceError,
    SingularBlockSystemError,
)
from src.greens.interaction import pair_distances
from src.greens.kernels import yukawa_radial
from src.greens.nystrom import NystromOperator
from src.point_charge.green_field import ChargeCloud, GreenField
from src.potentials.potential_model import PotentialModel
from src.potentials.quadrature import Grid3D, quadrature_grid
from src.scattering.nystrom_solver import ScatteringSolution, solve_mu_nystrom
from src.scattering.radial_ode import RESONANCE_THRESHOLD

UNKNOWN_CAP = 16000
DENSE_LIMIT = 4096
BLOCK_TOL = 1e-9
GMRES_RTOL = 1e-12
GMRES_RESTART = 100
CHUNK_ROWS = 512

logger = logging.getLogger(__name__)


class MicroscopicSystem:
    """
    連立系の組み立てと作用

    Attributes:
        config (ObstacleConfig): 障害物配置
        potential (PotentialModel): 非スケールポテンシャル
        grid (Grid3D): supp V 上のグリッド
        lam (float): λ
        nodes (np.ndarray): 形状 (N, M, 3) のノード y_i + ξ_k/N
    """

    def __init__(
        self,
        config: ObstacleConfig,
        pot: PotentialModel,
        grid: Grid3D,
        lam: float,
        scheme: DesingularizationScheme | str = DesingularizationScheme.MULTIPOLE,
        dense_limit: int = DENSE_LIMIT,
    ):
        self.config = config
        self.potential = pot
        self.grid = grid
        self.lam = float(lam)
        self.scheme = DesingularizationScheme(scheme)
        self.n = config.n_points
        self.m = grid.size
        self.kappa = math.sqrt(lam)

        distances = pair_distances(config)
        if distances.size and distances.min() < 2.0 * pot.support_radius / self.n:
            logger.warning(
                "rescaled supports overlap: min distance %.3e < 2R/N = %.3e", distances.min(), 2.0 * pot.support_radius / self.n
            )

        self.nodes = config.points[:, None, :] + grid.nodes[None, :, :] / self.n
        self.u = pot.u(grid.nodes)
        self.v = pot.v(grid.nodes)
        self.diag_operator = NystromOperator(grid, self.kappa / self.n, self.scheme)
        self.diag_block = np.eye(self.m) + self.u[:, None] * self.diag_operator.matrix * self.v[None, :]
        self._owner = np.repeat(np.arange(self.n), self.m)
        self._flat_nodes = self.nodes.reshape(-1, 3)
        self._flat_weights = np.tile(grid.weights, self.n)
        self._dense_offdiag = self._assemble_offdiag() if self.n > 1 and self.n * self.m <= dense_limit else None

    def _offdiag_rows(self, rows: slice) -> np.ndarray:
        distances = cdist(self._flat_nodes[rows], self._flat_nodes)
        same = self._owner[rows][:, None] == self._owner[None, :]
        kernel = np.where(same, 0.0, yukawa_radial(np.where(same, 1.0, distances), self.kappa))
        return kernel * self._flat_weights[None, :]

    def _assemble_offdiag(self) -> np.ndarray:
        return self._offdiag_rows(slice(None))

    def apply_offdiag(self, values: np.ndarray) -> np.ndarray:
        """
        t_i = Σ_{j≠i} O_ij c_j を計算する(O_ij[k,m] = 𝒢^λ(y_i − y_j + (ξ_k − ξ_m)/N)·w_m)。

        Args:
            values: 形状 (N, M) のノード値 c

        Returns:
            形状 (N, M) の配列
        """
        flat = np.asarray(values, dtype=float).reshape(-1)
        if self.n == 1:
            return np.zeros((1, self.m))
        if self._dense_offdiag is not None:
            return (self._dense_offdiag @ flat).reshape(self.n, self.m)
        out = np.empty(flat.size)
        for start in range(0, flat.size, CHUNK_ROWS):
            rows = slice(start, min(start + CHUNK_ROWS, flat.size))
            out[rows] = self._offdiag_rows(rows) @ flat
        return out.reshape(self.n, self.m)

    def coupling(self, rho_hat: np.ndarray) -> np.ndarray:
        """(1/N)Σ_{j≠i} u O_ij v ρ̂_j"""
        return self.u[None, :] * self.apply_offdiag(self.v[None, :] * rho_hat) / self.n

    def apply(self, rho_hat: np.ndarray) -> np.ndarray:
        """連立系の左辺"""
        return rho_hat @ self.diag_block.T + self.coupling(rho_hat)

    def source_values(self, src: SourceSpec) -> np.ndarray:
        """h(y_i + ξ_k/N)"""
        return src.h(self._flat_nodes).reshape(self.n, self.m)

    def rhs(self, src: SourceSpec) -> np.ndarray:
        """−u·h(y_i + ξ/N)"""
        return -self.u[None, :] * self.source_values(src)

    def monolithic_matrix(self) -> np.ndarray:
        """全体の (NM × NM) 行列(照合用の素朴な組み立て)"""
        matrix = np.kron(np.eye(self.n), self.diag_block)
        if self.n > 1:
            offdiag = self._dense_offdiag if self._dense_offdiag is not None else self._assemble_offdiag()
            u_flat = np.tile(self.u, self.n)
            v_flat = np.tile(self.v, self.n)
            matrix += u_flat[:, None] * offdiag * v_flat[None, :] / self.n
        return matrix


@dataclass(frozen=True, eq=False)
class DensitySolution:
    """
    連立系の解

    Attributes:
        rho_hat (np.ndarray): 形状 (N, M) の ρ̂_i のノード値
        mu_hat (np.ndarray): ノード上の μ(全障害物で共通)
        Q (np.ndarray): 単極電荷 Q_i
        a (float): 同じグリッド上の離散散乱長
        lam (float): λ
        block_residuals (np.ndarray): ブロックごとの相対残差
        mu_norm (float): ‖μ̂‖
        rho_norm_ratio (float): Σ‖ρ̂_i‖²/(N‖f‖²)
        system (MicroscopicSystem): 組み立て済みの系
        scattering (ScatteringSolution): μ の解
        method (str): "gmres" または "monolithic"
        iterations (int): GMRES の反復回数
    """

    rho_hat: np.ndarray
    mu_hat: np.ndarray
    Q: np.ndarray
    a: float
    lam: float
    block_residuals: np.ndarray
    mu_norm: float
    rho_norm_ratio: float
    system: MicroscopicSystem
    scattering: ScatteringSolution
    method: str = "gmres"
    iterations: int = 0

    @property
    def n_points(self) -> int:
        return int(self.Q.shape[0])

    @property
    def cloud_points(self) -> np.ndarray:
        return self.system.nodes.reshape(-1, 3)

    @property
    def cloud_charges(self) -> np.ndarray:
        """w_k v_k ρ̂_ik / N(障害物ごとの和が Q_i)"""
        grid = self.system.grid
        return (grid.weights[None, :] * self.system.v[None, :] * self.rho_hat / self.n_points).reshape(-1)

    def diagnostics(self) -> dict[str, Any]:
        """辞書形式に変換(配列は含めない)"""
        return {
            "n_points": self.n_points,
            "a": self.a,
            "lam": self.lam,
            "max_block_residual": float(self.block_residuals.max()) if self.block_residuals.size else 0.0,
            "mu_norm": self.mu_norm,
            "rho_norm_ratio": self.rho_norm_ratio,
            "method": self.method,
            "iterations": self.iterations,
        }


def _factor_block(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            return lu_factor(block)
    except (LinAlgError, LinAlgWarning) as exc:
        raise SingularBlockSystemError("Diagonal block is singular") from exc


def _check_cap(n_unknowns: int, cap: int) -> None:
    if n_unknowns > cap:
        raise CapExceededError(f"{n_unknowns} unknowns exceed the cap {cap}", {"unknowns": n_unknowns, "cap": cap})


def solve_densities(
    config: ObstacleConfig,
    pot: PotentialModel,
    grid: Grid3D,
    lam: float,
    src: SourceSpec,
    scheme: DesingularizationScheme | str = DesingularizationScheme.MULTIPOLE,
    tol: float = BLOCK_TOL,
    cap: int = UNKNOWN_CAP,
    dense_limit: int = DENSE_LIMIT,
    monolithic: bool = False,
    resonance_threshold: float = RESONANCE_THRESHOLD,
) -> DensitySolution:
    """
    ρ̂_i の連立系を解き、単極電荷 Q_i を求める。

    Args:
        config: 障害物配置
        pot: 非スケールポテンシャル V
        grid: supp V 上のグリッド
        lam: λ
        src: ソース
        scheme: 対角処理
        tol: ブロック残差の許容値(右辺ノルム比)
        cap: 未知数 N·M の上限
        dense_limit: 非対角ブロックを保持する N·M の上限
        monolithic: 全体行列を組んで直接解くか
        resonance_threshold: bs_margin の閾値

    Returns:
        DensitySolution
    """
    if src.lam != lam:
        raise LambdaMismatchError("Source lambda differs from solve lambda", {"source": src.lam, "lam": lam})
    n = config.n_points
    _check_cap(n * grid.size, cap)
    scattering = solve_mu_nystrom(pot, grid, resonance_threshold=resonance_threshold, scheme=scheme)
    system = MicroscopicSystem(config, pot, grid, lam, scheme=scheme, dense_limit=dense_limit)
    rhs = system.rhs(src)
    iterations = 0

    if pot.is_zero:
        rho_hat = np.zeros((n, grid.size))
        method = "trivial"
    elif monolithic:
        factors = _factor_block(system.monolithic_matrix())
        rho_hat = lu_solve(factors, rhs.reshape(-1)).reshape(n, grid.size)
        method = "monolithic"
    else:
        factors = _factor_block(system.diag_block)
        preconditioned_rhs = lu_solve(factors, rhs.T).T
        if n == 1:
            rho_hat = preconditioned_rhs
        else:
            def matvec(flat: np.ndarray) -> np.ndarray:
                rho = flat.reshape(n, grid.size)
                return (rho + lu_solve(factors, system.coupling(rho).T).T).reshape(-1)

            counter = {"iterations": 0}

            def count(_: Any) -> None:
                counter["iterations"] += 1

            operator = LinearOperator((n * grid.size, n * grid.size), matvec=matvec, dtype=float)
            solution, info = gmres(
                operator,
                preconditioned_rhs.reshape(-1),
                rtol=GMRES_RTOL,
                atol=0.0,
                restart=min(n * grid.size, GMRES_RESTART),
                maxiter=200,
                callback=count,
                callback_type="pr_norm",
            )
            if info != 0:
                raise NonConvergenceError("GMRES did not converge on the density system", {"info": int(info), "n_points": n})
            rho_hat = solution.reshape(n, grid.size)
            iterations = counter["iterations"]
        method = "gmres"

    residual_blocks = np.linalg.norm(system.apply(rho_hat) - rhs, axis=1)
    scale = max(float(np.linalg.norm(rhs, axis=1).max()), 1e-300)
    block_residuals = residual_blocks / scale
    if block_residuals.size and block_residuals.max() > tol:
        raise NonConvergenceError(
            "Block residual above tolerance", {"max_block_residual": float(block_residuals.max()), "tol": tol}
        )

    weights = grid.weights
    Q = (rho_hat * system.v[None, :]) @ weights / n
    mu_norm = math.sqrt(float(np.dot(weights, scattering.mu**2)))
    f_norm = src.f_norm()
    rho_norm_ratio = float(np.sum((rho_hat**2) @ weights)) / (n * f_norm**2) if f_norm > 0 else 0.0
    logger.info("microscopic solve N=%d M=%d method=%s max residual=%.2e", n, grid.size, method, block_residuals.max())
    return DensitySolution(
        rho_hat=rho_hat,
        mu_hat=scattering.mu,
        Q=Q,
        a=scattering.a,
        lam=float(lam),
        block_residuals=block_residuals,
        mu_norm=mu_norm,
        rho_norm_ratio=rho_norm_ratio,
        system=system,
        scattering=scattering,
        method=method,
        iterations=iterations,
    )


def solve_unrescaled_densities(
    config: ObstacleConfig,
    pot: PotentialModel,
    grid: Grid3D,
    lam: float,
    src: SourceSpec,
    scheme: DesingularizationScheme | str = DesingularizationScheme.MULTIPOLE,
) -> np.ndarray:
    """
    ポテンシャル N²V(N·) と半径 R/N のグリッドで ρ_i の系を素朴に組んで解き、Q_i を返す(照合用)。

    Args:
        config: 障害物配置
        pot: 非スケールポテンシャル V
        grid: supp V 上のグリッド(次数だけを使う)
        lam: λ
        src: ソース
        scheme: 対角処理

    Returns:
        Q_i の配列
    """
    n = config.n_points
    scaled_pot = pot.rescaled(n)
    small = quadrature_grid(grid.support_radius / n, grid.n_radial, grid.n_angular)
    u, v = scaled_pot.u(small.nodes), scaled_pot.v(small.nodes)
    kernel = NystromOperator(small, math.sqrt(lam), scheme).matrix
    block = np.eye(small.size) + u[:, None] * kernel * v[None, :]

    nodes = (config.points[:, None, :] + small.nodes[None, :, :]).reshape(-1, 3)
    owner = np.repeat(np.arange(n), small.size)
    matrix = np.kron(np.eye(n), block)
    if n > 1:
        distances = cdist(nodes, nodes)
        same = owner[:, None] == owner[None, :]
        coupling = np.where(same, 0.0, yukawa_radial(np.where(same, 1.0, distances), math.sqrt(lam)))
        matrix += np.tile(u, n)[:, None] * coupling * np.tile(small.weights * v, n)[None, :]
    rhs = -np.tile(u, n) * src.h(nodes)
    rho = lu_solve(_factor_block(matrix), rhs).reshape(n, small.size)
    return (rho * v[None, :]) @ small.weights


def monopole_field(sol: DensitySolution, config: ObstacleConfig, src: SourceSpec) -> GreenField:
    """ψ̃_N = h + Σ Q_i 𝒢^λ(· − y_i)"""
    if sol.lam != src.lam:
        raise LambdaMismatchError("Solution and source lambda differ", {"solution": sol.lam, "source": src.lam})
    return GreenField(lam=src.lam, base_terms=((1.0, src),), atom_points=config.points, atom_charges=sol.Q)


def microscopic_field(
    sol: DensitySolution, config: ObstacleConfig, pot: PotentialModel, grid: Grid3D, src: SourceSpec
) -> GreenField:
    """
    ψ_N = h + Σ_i 𝒢^λ v_i ρ_i を電荷雲として組み立てる。

    Args:
        sol: 連立系の解
        config: 配置
        pot: ポテンシャル(解と同じもの)
        grid: グリッド(解と同じもの)
        src: ソース

    Returns:
        ノード y_i + ξ_k/N、電荷 w_k v_k ρ̂_ik / N の雲を持つ GreenField
    """
    if sol.lam != src.lam:
        raise LambdaMismatchError("Solution and source lambda differ", {"solution": sol.lam, "source": src.lam})
    if not grid.matches(sol.system.grid):
        raise GridMismatchError("Grid differs from the one used by the density solve")
    if pot is not sol.system.potential and not np.array_equal(pot.V(grid.nodes), sol.system.potential.V(grid.nodes)):
        raise GridMismatchError("Potential differs from the one used by the density solve")
    cloud = ChargeCloud(points=sol.cloud_points, charges=sol.cloud_charges)
    return GreenField(lam=src.lam, base_terms=((1.0, src),), clouds=(cloud,))
