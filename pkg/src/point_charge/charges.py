"""点電荷系 (N/4πa)q_i + Σ_{j≠i} G^λ_ij q_j = −h(y_i) の解法。

Γ^λ = I + (4πa/N)G^λ でスケールした対称系を解く。
"""

import logging
import math
import warnings

import numpy as np
from scipy.linalg import LinAlgError, LinAlgWarning, lu_factor, lu_solve, solve
from scipy.sparse.linalg import minres

from src.data_models import ChargeVector, ObstacleConfig, SourceSpec
from src.errors import ConfigurationError, LambdaMismatchError, NonConvergenceError, SingularSystemError
from src.greens.interaction import opnorm_over_n, pair_distances, yukawa_matrix
from src.point_charge.green_field import GreenField

DENSE_LIMIT = 4096
ITERATIVE_RTOL = 1e-10

logger = logging.getLogger(__name__)


def _interaction_entries(config: ObstacleConfig, lam: float) -> np.ndarray:
    return yukawa_matrix(pair_distances(config), lam) if config.n_points > 1 else np.zeros((1, 1))


def gamma_matrix(config: ObstacleConfig, a: float, lam: float) -> np.ndarray:
    """Γ^λ_ij = δ_ij + (4πa/N)(1 − δ_ij)G^λ_ij"""
    n = config.n_points
    return np.eye(n) + (4.0 * math.pi * a / n) * _interaction_entries(config, lam)


def _solve_dense(matrix: np.ndarray, rhs: np.ndarray, details: dict) -> np.ndarray:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            return solve(matrix, rhs, assume_a="sym")
    except (LinAlgError, LinAlgWarning) as exc:
        raise SingularSystemError("Point-charge system is numerically singular", details) from exc


def solve_point_charges(
    config: ObstacleConfig,
    a: float,
    lam: float,
    src: SourceSpec,
    iterative: bool = False,
    dense_limit: int = DENSE_LIMIT,
    check_lambda0: bool = True,
) -> ChargeVector:
    """
    点電荷 q_i を求める。

    Args:
        config: 障害物配置(重複点なし)
        a: 散乱長(0 なら零電荷をフラグ付きで返す)
        lam: λ > 0
        src: 製造解ソース(h(y_i) を厳密に与える)
        iterative: MINRES を使うか(N > dense_limit では常に使う)
        dense_limit: 直接法の上限
        check_lambda0: (1/N)‖G^λ‖ ≥ 1(λ < λ₀)なら警告するか

    Returns:
        ChargeVector
    """
    if src.lam != lam:
        raise LambdaMismatchError("Source lambda differs from solve lambda", {"source": src.lam, "lam": lam})
    if not (lam > 0 and math.isfinite(lam)):
        raise ConfigurationError(f"Point-charge solve needs lambda > 0, got {lam}")
    n = config.n_points
    if a == 0.0:
        pair_distances(config)
        logger.info("a = 0: 零電荷を返す")
        return ChargeVector(values=np.zeros(n), lam=lam, a=a, config=config, method="pointcharge", zero_scattering_length=True)

    entries = _interaction_entries(config, lam)
    if check_lambda0 and n > 1:
        opnorm, _ = opnorm_over_n(entries)
        if opnorm >= 1.0:
            logger.warning("λ=%.4g is below the λ₀ diagnostic: opnorm/N=%.4g", lam, opnorm)

    gamma = np.eye(n) + (4.0 * math.pi * a / n) * entries
    rhs = -(4.0 * math.pi * a / n) * src.h(config.points)
    if iterative or n > dense_limit:
        values, info = minres(gamma, rhs, rtol=ITERATIVE_RTOL, maxiter=10 * n)
        if info != 0:
            raise NonConvergenceError("MINRES did not converge", {"info": int(info), "n_points": n})
    else:
        values = _solve_dense(gamma, rhs, {"n_points": n, "a": a, "lam": lam})
    residual = float(np.linalg.norm(gamma @ values - rhs))
    logger.debug("point charges N=%d residual=%.3e", n, residual)
    return ChargeVector(values=values, lam=lam, a=a, config=config, residual=residual, method="pointcharge")


def solve_point_charges_raw(config: ObstacleConfig, a: float, lam: float, src: SourceSpec) -> np.ndarray:
    """
    スケール前の系 ((N/4πa)I + G)q = −h を LU 分解で解く(照合用)。

    Args:
        config: 障害物配置
        a: 散乱長(非零)
        lam: λ
        src: ソース

    Returns:
        q の配列
    """
    if a == 0.0:
        raise ConfigurationError("The raw system is undefined for a = 0")
    n = config.n_points
    entries = _interaction_entries(config, lam)
    matrix = (n / (4.0 * math.pi * a)) * np.eye(n) + entries
    return lu_solve(lu_factor(matrix), -src.h(config.points))


def charge_sum_bound(charges: ChargeVector, src: SourceSpec) -> float:
    """
    |Σq_i| の上界 (4π|a|/N)·Σ|h(y_i)|·‖(Γ^λ)^{-1}‖₁。

    Args:
        charges: 解いた電荷
        src: ソース

    Returns:
        上界の値(a = 0 では 0)
    """
    if charges.a == 0.0:
        return 0.0
    config = charges.config
    gamma_inverse = np.linalg.inv(gamma_matrix(config, charges.a, charges.lam))
    n = config.n_points
    return 4.0 * math.pi * abs(charges.a) / n * float(np.sum(np.abs(src.h(config.points)))) * float(np.linalg.norm(gamma_inverse, 1))


def assemble_point_field(charges: ChargeVector, config: ObstacleConfig, src: SourceSpec) -> GreenField:
    """
    ψ̂_N = h + Σ_i q_i 𝒢^λ(· − y_i) を組み立てる。

    Args:
        charges: 点電荷
        config: 配置
        src: ソース

    Returns:
        GreenField
    """
    if charges.lam != src.lam:
        raise LambdaMismatchError("Charge and source lambda differ", {"charges": charges.lam, "source": src.lam})
    return GreenField(lam=src.lam, base_terms=((1.0, src),), atom_points=config.points, atom_charges=charges.values)
