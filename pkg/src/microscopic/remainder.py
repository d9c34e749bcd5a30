"""電荷比較の剰余項 A_i, B_i, D_i。

μ̂ の方程式の転置を ρ̂_i の方程式に掛けると

    N·Q_i + 4πa(GQ)_i = −4πa·h(y_i) − N(A_i + B_i + D_i)

が離散レベルで厳密に成り立ち、点電荷 q と比べて Γ(Q − q) = −R となる。
"""

import logging
import math
from typing import Any

import numpy as np

from src.data_models import ChargeVector, ObstacleConfig, RemainderTerms, SourceSpec
from src.errors import GridMismatchError, LambdaMismatchError
from src.greens.interaction import pair_distances, yukawa_matrix
from src.greens.nystrom import NystromOperator
from src.microscopic.densities import DensitySolution
from src.point_charge.charges import gamma_matrix
from src.potentials.potential_model import PotentialModel
from src.potentials.quadrature import Grid3D

logger = logging.getLogger(__name__)


def remainder_terms(
    sol: DensitySolution, config: ObstacleConfig, pot: PotentialModel, grid: Grid3D, lam: float, src: SourceSpec
) -> RemainderTerms:
    """
    解いた ρ̂_i と μ̂ から A_i, B_i, D_i を計算する。

    Args:
        sol: solve_densities の結果
        config: 配置
        pot: ポテンシャル
        grid: グリッド(解と同じもの)
        lam: λ
        src: ソース

    Returns:
        RemainderTerms
    """
    if sol.lam != lam or src.lam != lam:
        raise LambdaMismatchError("Remainder lambda differs", {"solution": sol.lam, "source": src.lam, "lam": lam})
    if not grid.matches(sol.system.grid):
        raise GridMismatchError("Grid differs from the one used by the density solve")
    system = sol.system
    n = config.n_points
    weights = grid.weights
    u, v = pot.u(grid.nodes), pot.v(grid.nodes)
    weighted_u_mu = weights * u * sol.mu_hat
    v_rho = v[None, :] * sol.rho_hat

    shifted = system.diag_operator.matrix @ v_rho.T
    free_term = v_rho @ (weights * (sol.scattering.operator.matrix @ (u * sol.mu_hat)))
    A = (shifted.T @ weighted_u_mu - free_term) / n

    verbatim = NystromOperator(grid, lam / n, system.scheme).matrix @ v_rho.T
    A_verbatim = (verbatim.T @ weighted_u_mu - free_term) / n

    if n > 1:
        coupling = system.apply_offdiag(v_rho) @ weighted_u_mu / n
        monopole = 4.0 * math.pi * sol.a * (yukawa_matrix(pair_distances(config), lam) @ sol.Q)
        B = (coupling - monopole) / n
    else:
        B = np.zeros(1)

    local = system.source_values(src) - src.h(config.points)[:, None]
    D = local @ weighted_u_mu / n

    terms = RemainderTerms(A=A, B=B, D=D, A_verbatim=A_verbatim, a=sol.a, n_obstacles=n)
    logger.debug("remainder N=%d |A|=%.3e |B|=%.3e |D|=%.3e", n, np.linalg.norm(A), np.linalg.norm(B), np.linalg.norm(D))
    return terms


def charge_comparison_residual(sol: DensitySolution, remainder: RemainderTerms, charges: ChargeVector) -> dict[str, Any]:
    """
    Γ(Q − q) = −R の残差を計算する。

    Args:
        sol: 微視的解(Q と a)
        remainder: 剰余項
        charges: 同じ a, λ で解いた点電荷 q

    Returns:
        identity_residual(‖Γ(Q−q) + R‖)、literal_residual(‖Γ(Q−q) − (4πa/N)·equation_remainder‖)と尺度
    """
    if charges.lam != sol.lam:
        raise LambdaMismatchError("Charge and solution lambda differ", {"charges": charges.lam, "solution": sol.lam})
    n = sol.n_points
    gamma = gamma_matrix(charges.config, sol.a, sol.lam)
    lhs = gamma @ (sol.Q - charges.values)
    literal = (4.0 * math.pi * sol.a / n) * remainder.equation_remainder
    return {
        "identity_residual": float(np.linalg.norm(lhs + remainder.R)),
        "literal_residual": float(np.linalg.norm(lhs - literal)),
        "remainder_norm": remainder.norm,
        "charge_difference": float(np.linalg.norm(sol.Q - charges.values)),
    }
