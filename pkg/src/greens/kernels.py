"""Yukawa 核 𝒢^λ(x) = e^{−√λ|x|}/(4π|x|) と resolvent 二乗核 K2。"""

import math

import numpy as np

from src.errors import ConfigurationError, SingularKernelError

FOUR_PI = 4.0 * math.pi
EIGHT_PI = 8.0 * math.pi


def _check_lambda(lam: float) -> float:
    if not (lam >= 0 and math.isfinite(lam)):
        raise ConfigurationError(f"lambda must be finite and non-negative, got {lam}")
    return math.sqrt(lam)


def yukawa_radial(r: np.ndarray | float, kappa: float) -> np.ndarray:
    """動径距離 r > 0 での e^{−κr}/(4πr)(特異性チェックなし)"""
    r = np.asarray(r, dtype=float)
    return np.exp(-kappa * r) / (FOUR_PI * r)


def yukawa(x: np.ndarray, lam: float) -> np.ndarray | float:
    """
    自由 resolvent (−Δ+λ)^{−1} の積分核を評価する。

    Args:
        x: 3 次元点(形状 (..., 3))
        lam: スペクトルパラメータ λ ≥ 0

    Returns:
        e^{−√λ|x|}/(4π|x|)。スカラー入力ならスカラー。
    """
    kappa = _check_lambda(lam)
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0.0):
        raise SingularKernelError("Yukawa kernel evaluated at the origin", {"lam": lam})
    value = yukawa_radial(r, kappa)
    return float(value) if value.ndim == 0 else value


def resolvent_squared_kernel(r: np.ndarray | float, lam: float) -> np.ndarray | float:
    """
    ∫𝒢^λ(x−z)𝒢^λ(x−z′)dx = e^{−√λ r}/(8π√λ), r = |z − z′|。

    Args:
        r: 距離(0 を含めてよい)
        lam: λ > 0

    Returns:
        K2 の値。スカラー入力ならスカラー。
    """
    if not (lam > 0 and math.isfinite(lam)):
        raise ConfigurationError(f"Resolvent-squared kernel needs lambda > 0, got {lam}")
    kappa = math.sqrt(lam)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ConfigurationError("Distances must be non-negative")
    value = np.exp(-kappa * r) / (EIGHT_PI * kappa)
    return float(value) if value.ndim == 0 else value


def ball_self_integral(rho: np.ndarray | float, kappa: float) -> np.ndarray:
    """半径 ρ の球上の ∫𝒢 = (1 − e^{−κρ}(1+κρ))/κ²(κ = 0 では ρ²/2)"""
    rho = np.asarray(rho, dtype=float)
    if kappa == 0.0:
        return 0.5 * rho**2
    x = kappa * rho
    return (-np.expm1(-x) - x * np.exp(-x)) / kappa**2
