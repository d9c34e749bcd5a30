"""N 個の点相互作用の resolvent(Ξ 行列による明示公式)。"""

import logging
import math
import warnings

import numpy as np
from scipy.linalg import LinAlgError, LinAlgWarning, solve

from src.data_models import ChargeVector, ObstacleConfig, SourceSpec
from src.errors import ConfigurationError, LambdaMismatchError, SingularXiError
from src.greens.interaction import pair_distances, yukawa_matrix
from src.point_charge.green_field import GreenField

logger = logging.getLogger(__name__)


def alpha_for_scattering_length(a: float) -> float:
    """散乱長 a に対応する強さ α = −1/(4πa)"""
    if a == 0.0:
        raise ConfigurationError("a = 0 corresponds to infinite point-interaction strength")
    return -1.0 / (4.0 * math.pi * a)


def xi_matrix(config: ObstacleConfig, alpha: float, lam: float) -> np.ndarray:
    """Ξ_ij = (Nα + √λ/4π)δ_ij − (1 − δ_ij)G^λ_ij"""
    n = config.n_points
    entries = yukawa_matrix(pair_distances(config), lam) if n > 1 else np.zeros((1, 1))
    return (n * alpha + math.sqrt(lam) / (4.0 * math.pi)) * np.eye(n) - entries


def aghh_resolvent(config: ObstacleConfig, alpha: float, lam: float, src: SourceSpec) -> tuple[ChargeVector, GreenField]:
    """
    Ξ q̃ = h(y) を解き、φ_N = h + Σ q̃_i 𝒢^λ(· − y_i) を返す。

    Args:
        config: 障害物配置
        alpha: 点相互作用の強さ(N 倍して対角に入る)
        lam: λ > 0
        src: ソース

    Returns:
        (q̃, φ_N) のタプル。Ξ が特異なら SingularXiError。
    """
    if not (lam > 0 and math.isfinite(lam)):
        raise ConfigurationError(f"AGHH resolvent needs lambda > 0, got {lam}")
    if src.lam != lam:
        raise LambdaMismatchError("Source lambda differs from solve lambda", {"source": src.lam, "lam": lam})
    xi = xi_matrix(config, alpha, lam)
    rhs = src.h(config.points)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            values = solve(xi, rhs, assume_a="sym")
    except (LinAlgError, LinAlgWarning) as exc:
        raise SingularXiError("Ξ is singular at this lambda; shift lambda", {"lam": lam, "alpha": alpha}) from exc
    residual = float(np.linalg.norm(xi @ values - rhs))
    a = -1.0 / (4.0 * math.pi * alpha) if alpha != 0.0 else math.inf
    logger.debug("AGHH charges N=%d alpha=%.4g residual=%.3e", config.n_points, alpha, residual)
    charges = ChargeVector(values=values, lam=lam, a=a, config=config, residual=residual, method="aghh")
    field = GreenField(lam=lam, base_terms=((1.0, src),), atom_points=config.points, atom_charges=values)
    return charges, field
