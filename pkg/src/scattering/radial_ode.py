"""ゼロエネルギー動径方程式 w″ = V(r)w の射撃法による散乱長。

w(0) = 0, w′(0) = 1 から台の境界 R まで積分し、a = R − w(R)/w′(R) を返す。
強い斥力芯で w が指数的に増大するため、区間ごとに状態を正規化する。
"""

from dataclasses import replace
import logging
import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from src.data_models import PotentialShape, PotentialSpec
from src.errors import ConfigurationError, NonConvergenceError, StepSizeUnderflowError
from src.potentials.potential_model import PotentialModel, make_potential

RESONANCE_THRESHOLD = 1e-3
GROWTH_PER_SEGMENT = 30.0
ODE_METHOD = "DOP853"

logger = logging.getLogger(__name__)


def _segment_edges(pot: PotentialModel) -> np.ndarray:
    R = pot.support_radius
    n_segments = max(1, math.ceil(R * math.sqrt(pot.max_abs()) / GROWTH_PER_SEGMENT))
    edges = set(np.linspace(0.0, R, n_segments + 1).tolist())
    edges.update(pot.knots)
    return np.array(sorted(edges))


def scattering_length_radial_ode(
    pot: PotentialModel, tol: float = 1e-10, resonance_threshold: float = RESONANCE_THRESHOLD
) -> tuple[float, bool]:
    """
    動径 ODE を積分して散乱長を求める。

    Args:
        pot: 動径ポテンシャル
        tol: 積分の相対許容誤差
        resonance_threshold: 共鳴判定 |w′(R)| < threshold·|w(R)|/R の閾値

    Returns:
        (a, resonance_flag) のタプル
    """
    if pot.is_zero:
        return 0.0, False

    def rhs(r: float, state: np.ndarray) -> np.ndarray:
        return np.array([state[1], float(pot.profile(r)) * state[0]])

    state = np.array([0.0, 1.0])
    edges = _segment_edges(pot)
    for lower, upper in zip(edges, edges[1:]):
        solution = solve_ivp(rhs, (lower, upper), state, method=ODE_METHOD, rtol=tol, atol=tol * 1e-2)
        if solution.status != 0:
            details = {"r": float(solution.t[-1]), "message": solution.message}
            if "step size" in solution.message.lower():
                raise StepSizeUnderflowError("Radial ODE step size underflow", details)
            raise NonConvergenceError("Radial ODE integration failed", details)
        state = solution.y[:, -1]
        state = state / np.linalg.norm(state)

    R = pot.support_radius
    w_end, dw_end = float(state[0]), float(state[1])
    resonance = abs(dw_end) < resonance_threshold * abs(w_end) / R
    a = R - w_end / dw_end if dw_end != 0.0 else math.copysign(math.inf, -w_end)
    logger.debug("radial ODE: a=%.10g w(R)=%.3e w'(R)=%.3e resonance=%s", a, w_end, dw_end, resonance)
    if resonance:
        logger.warning("ゼロエネルギー共鳴の可能性: |w'(R)|=%.3e", abs(dw_end))
    return a, resonance


def square_well_scattering_length(amplitude: float, support_radius: float) -> float:
    """
    一様井戸の閉形式散乱長。

    斥力 V₀ > 0: a = R − tanh(κR)/κ, κ = √V₀。引力 V₀ < 0: a = R − tan(kR)/k, k = √−V₀。
    """
    R = support_radius
    if amplitude == 0.0:
        return 0.0
    if amplitude > 0:
        kappa = math.sqrt(amplitude)
        return R - math.tanh(kappa * R) / kappa
    k = math.sqrt(-amplitude)
    return R - math.tan(k * R) / k


def retune_amplitude(spec: PotentialSpec, target_a: float, lower: float, upper: float, tol: float = 1e-10) -> PotentialSpec:
    """
    散乱長が target_a になるよう振幅を brentq で調整する。

    Args:
        spec: 振幅以外を固定するポテンシャル設定
        target_a: 目標の散乱長
        lower: 振幅の探索下限
        upper: 振幅の探索上限
        tol: ODE の許容誤差

    Returns:
        振幅を差し替えた PotentialSpec
    """
    def mismatch(amplitude: float) -> float:
        a, _ = scattering_length_radial_ode(make_potential(replace(spec, amplitude=amplitude)), tol=tol)
        return a - target_a

    try:
        amplitude = brentq(mismatch, lower, upper, xtol=1e-14, rtol=1e-12)
    except ValueError as exc:
        raise ConfigurationError(
            "Amplitude bracket does not straddle the target scattering length",
            {"target_a": target_a, "lower": lower, "upper": upper},
        ) from exc
    logger.info("retuned amplitude %.10g for a=%.6g (shape=%s)", amplitude, target_a, spec.shape.value)
    return replace(spec, amplitude=float(amplitude))


def closed_form_scattering_length(pot: PotentialModel) -> float | None:
    """閉形式がある場合(一様井戸)の散乱長"""
    if pot.shape is PotentialShape.SQUARE_WELL:
        return square_well_scattering_length(pot.amplitude, pot.support_radius)
    return None
