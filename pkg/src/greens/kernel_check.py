"""K2 恒等式 ∫𝒢^λ(x−z)𝒢^λ(x−z′)dx = e^{−√λ|z−z′|}/(8π√λ) の数値検証。"""

import logging
import math
from typing import Any

import numpy as np
from scipy.integrate import quad

from src.errors import ConfigurationError
from src.greens.kernels import resolvent_squared_kernel

QUAD_LIMIT = 400
QUAD_EPSREL = 1e-10
TAIL_DECAY_LENGTHS = 20.0
SELF_TEST_TOLERANCE = 1e-4
SELF_TEST_TRIPLES = 20
SELF_TEST_LAMBDA_RANGE = (0.25, 16.0)

logger = logging.getLogger(__name__)


def _inner_angular_integral(r: float, d: float, kappa: float) -> float:
    # c = 1 − t² で r = d, c = 1 の特異性を除く
    def integrand(t: float) -> float:
        s = math.sqrt((r - d) ** 2 + 2.0 * r * d * t * t)
        if s == 0.0:
            return 2.0 / math.sqrt(2.0 * r * d) if r * d > 0 else 0.0
        return 2.0 * t * math.exp(-kappa * s) / s

    value, _ = quad(integrand, 0.0, math.sqrt(2.0), limit=QUAD_LIMIT, epsabs=0.0, epsrel=QUAD_EPSREL)
    return value


def k2_quadrature_oracle(z: np.ndarray, z_prime: np.ndarray, lam: float) -> float:
    """
    z を中心とする球座標の入れ子適応求積で Green 関数積を積分する。

    Args:
        z: 1 点目
        z_prime: 2 点目
        lam: λ > 0

    Returns:
        ∫𝒢^λ(x−z)𝒢^λ(x−z′)dx の数値値
    """
    if not lam > 0:
        raise ConfigurationError(f"K2 oracle needs lambda > 0, got {lam}")
    kappa = math.sqrt(lam)
    d = float(np.linalg.norm(np.asarray(z, dtype=float) - np.asarray(z_prime, dtype=float)))

    def outer(r: float) -> float:
        if r == 0.0:
            return 0.0
        return r * math.exp(-kappa * r) / (8.0 * math.pi) * _inner_angular_integral(r, d, kappa)

    cut = d + TAIL_DECAY_LENGTHS / kappa
    breaks = [0.0, d, cut] if d > 0 else [0.0, cut]
    total = 0.0
    for lower, upper in zip(breaks, breaks[1:]):
        value, _ = quad(outer, lower, upper, limit=QUAD_LIMIT, epsabs=0.0, epsrel=QUAD_EPSREL)
        total += value
    tail, _ = quad(outer, cut, math.inf, limit=QUAD_LIMIT, epsabs=0.0, epsrel=QUAD_EPSREL)
    return total + tail


def kernel_self_test(
    n_triples: int = SELF_TEST_TRIPLES, seed: int = 0, tolerance: float = SELF_TEST_TOLERANCE
) -> dict[str, Any]:
    """
    ランダムな (z, z′, λ) で K2 の閉形式と求積を比較する。

    Args:
        n_triples: 試行数
        seed: 乱数シード
        tolerance: 相対誤差の許容値

    Returns:
        各試行の残差と最大相対誤差、合否を含む辞書
    """
    rng = np.random.default_rng(seed)
    rows = []
    for index in range(n_triples):
        z = rng.uniform(-1.0, 1.0, 3)
        z_prime = rng.uniform(-1.0, 1.0, 3)
        lam = float(rng.uniform(*SELF_TEST_LAMBDA_RANGE))
        distance = float(np.linalg.norm(z - z_prime))
        closed = resolvent_squared_kernel(distance, lam)
        numeric = k2_quadrature_oracle(z, z_prime, lam)
        relative = abs(numeric - closed) / abs(closed)
        logger.debug("K2 triple %d: d=%.4f lam=%.4f rel=%.3e", index, distance, lam, relative)
        rows.append({"index": index, "distance": distance, "lam": lam, "closed_form": closed, "quadrature": numeric, "relative_error": relative})
    max_relative = max((row["relative_error"] for row in rows), default=0.0)
    return {
        "n_triples": n_triples,
        "seed": seed,
        "tolerance": tolerance,
        "max_relative_error": max_relative,
        "passed": max_relative <= tolerance,
        "triples": rows,
    }
