"""配置の正則性 (Y1)/(Y2)/(Y3) の統計と (Y1) の成立確率。"""

from collections.abc import Sequence
import logging
import math
from typing import Any

import numpy as np
from scipy.spatial.distance import pdist
from scipy.stats import norm

from src.data_models import DensitySpec, ObstacleConfig, ProbabilityEstimate, RegularityReport
from src.errors import ConfigurationError
from src.experiment.runner import run_trials
from src.experiment.seeds import derive_seed
from src.random_field.density import DensityModel, make_density, nu_star
from src.random_field.sampling import sample_configuration

DEFAULT_Y1_CONSTANT = 0.1
MIN_PROBABILITY_TRIALS = 30
PILOT_TRIALS = 100
PILOT_PERCENTILE = 1.0

logger = logging.getLogger(__name__)


def _power_sum(distances: np.ndarray, exponent: float) -> float:
    if distances.size == 0:
        return 0.0
    if distances.min() == 0.0:
        return math.inf
    return math.fsum((distances ** (-exponent)).tolist())


def regularity_report(
    config: ObstacleConfig, nu: float, xi: float, y1_constant: float = DEFAULT_Y1_CONSTANT
) -> RegularityReport:
    """
    厳密な O(N²) のペア和で正則性統計を計算する。

    Args:
        config: 障害物配置
        nu: (Y1)/(Y3) の指数(0 < ν < ν*(p))
        xi: (Y2) の指数(0 < ξ ≤ 1)
        y1_constant: (Y1) の定数 C

    Returns:
        RegularityReport。重複点があれば最小距離 0、(Y1) は不成立。
    """
    if not 0 < xi <= 1:
        raise ConfigurationError(f"xi must lie in (0, 1], got {xi}")
    p = config.density.p if config.density is not None else None
    limit = nu_star(p)
    if not 0 < nu < limit:
        raise ConfigurationError(f"nu must lie in (0, {limit:.6g}), got {nu}", {"nu": nu, "nu_star": limit})

    n = config.n_points
    distances = pdist(config.points)
    min_distance = float(distances.min()) if distances.size else math.inf
    threshold = y1_constant * n ** (-(1.0 - nu))
    y1_ok = min_distance > 0.0 and min_distance >= threshold

    y2_sum = 2.0 * _power_sum(distances, 3.0 - xi) / n**2
    y2_sum_nu = 2.0 * _power_sum(distances, 3.0 - nu) / n**2
    y3_sum = 2.0 * _power_sum(distances, 4.0) / n ** (3.0 - nu**2)
    if distances.size == 0:
        pointwise = chain = 0.0
    elif min_distance == 0.0:
        pointwise = chain = math.inf
    else:
        prefactor = n ** (nu**2 - 1.0) * y2_sum_nu
        pointwise = prefactor * min_distance ** (-(1.0 + nu))
        chain = prefactor * y1_constant ** (-(1.0 + nu)) * n ** ((1.0 - nu) * (1.0 + nu)) if y1_constant > 0 else math.inf
    if not y1_ok:
        logger.warning("(Y1) 不成立: min distance %.3e < %.3e (N=%d)", min_distance, threshold, n)
    return RegularityReport(
        n_points=n,
        nu=nu,
        xi=xi,
        y1_constant=y1_constant,
        min_pair_distance=min_distance,
        y1_threshold=threshold,
        y1_ok=bool(y1_ok),
        y2_sum=y2_sum,
        y2_sum_nu=y2_sum_nu,
        y3_sum=y3_sum,
        y3_pointwise_bound=pointwise,
        y3_chain_bound=chain,
    )


def min_pair_distance(config: ObstacleConfig) -> float:
    """最小点間距離(N = 1 では +∞)"""
    distances = pdist(config.points)
    return float(distances.min()) if distances.size else math.inf


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """二項比率の Wilson 信頼区間"""
    if trials <= 0:
        raise ConfigurationError("Wilson interval needs at least one trial")
    z = float(norm.ppf(0.5 + confidence / 2.0))
    p_hat = successes / trials
    denominator = 1.0 + z**2 / trials
    center = (p_hat + z**2 / (2.0 * trials)) / denominator
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / trials + z**2 / (4.0 * trials**2)) / denominator
    return max(0.0, center - half), min(1.0, center + half)


def _min_distance_trial(task: tuple[DensityModel, int, int]) -> float:
    density, n_points, seed = task
    return min_pair_distance(sample_configuration(density, n_points, seed))


def sample_min_distances(
    density: DensitySpec | DensityModel, n_points: int, trials: int, seed: int, threads: int = 1
) -> list[float]:
    """試行ごとの最小点間距離(子シードは derive_seed)"""
    model = density if isinstance(density, DensityModel) else make_density(density)
    tasks = [(model, n_points, derive_seed(seed, index)) for index in range(trials)]
    return run_trials(_min_distance_trial, tasks, threads)


def regularity_probability(
    density: DensitySpec | DensityModel,
    n_points: int,
    nu: float,
    y1_constant: float,
    trials: int,
    seed: int,
    confidence: float = 0.95,
    threads: int = 1,
) -> ProbabilityEstimate:
    """
    (Y1) が成り立つ経験確率を Wilson 区間付きで推定する。

    Args:
        density: 密度
        n_points: N
        nu: 指数 ν
        y1_constant: 定数 C(0 なら確率 1)
        trials: 試行数(30 以上)
        seed: マスターシード
        confidence: 信頼水準
        threads: ワーカー数

    Returns:
        ProbabilityEstimate
    """
    if trials < MIN_PROBABILITY_TRIALS:
        raise ConfigurationError(f"At least {MIN_PROBABILITY_TRIALS} trials are required, got {trials}")
    threshold = y1_constant * n_points ** (-(1.0 - nu))
    distances = sample_min_distances(density, n_points, trials, seed, threads)
    successes = sum(1 for distance in distances if distance >= threshold)
    lower, upper = wilson_interval(successes, trials, confidence)
    logger.info("P(Y1) N=%d C=%.4g: %d/%d", n_points, y1_constant, successes, trials)
    return ProbabilityEstimate(
        probability=successes / trials, lower=lower, upper=upper, successes=successes, trials=trials, confidence=confidence
    )


def calibrate_y1_constant(
    density: DensitySpec | DensityModel,
    n_points: int,
    nu: float,
    pilot_trials: int = PILOT_TRIALS,
    seed: int = 0,
    threads: int = 1,
) -> float:
    """
    試験走行の min_distance·N^{1−ν} の 1 パーセンタイルを C とする。

    Args:
        density: 密度
        n_points: N
        nu: 指数 ν
        pilot_trials: 試験走行の試行数
        seed: マスターシード
        threads: ワーカー数

    Returns:
        較正した C
    """
    distances = np.asarray(sample_min_distances(density, n_points, pilot_trials, seed, threads))
    constant = float(np.percentile(distances * n_points ** (1.0 - nu), PILOT_PERCENTILE))
    logger.info("calibrated (Y1) constant C=%.6g at N=%d", constant, n_points)
    return constant


def sweep_y1_constant(
    density: DensitySpec | DensityModel,
    n_values: Sequence[int],
    nu: float,
    y1_constant: float | None,
    seed: int = 0,
    threads: int = 1,
) -> float:
    """
    N スイープ全体で共有する (Y1) の定数 C を決める。

    較正は最小の N で一度だけ行い、全 N で同じ C を使う。

    Args:
        density: 密度
        n_values: N の列
        nu: 指数 ν
        y1_constant: 指定された C(None か 0 なら較正)
        seed: 試験走行のシード
        threads: ワーカー数

    Returns:
        全 N で共有する C
    """
    if y1_constant:
        return y1_constant
    if not n_values:
        raise ConfigurationError("Cannot calibrate the (Y1) constant without any N")
    return calibrate_y1_constant(density, min(n_values), nu, seed=seed, threads=threads)


def regularity_by_n(rows: Sequence[dict[str, Any]], confidence: float = 0.95) -> dict[str, dict[str, Any]]:
    """
    regularity_report の行を N ごとに集計する。

    Args:
        rows: "n", "y1_ok", "y2_sum" を持つ行
        confidence: Wilson 区間の信頼水準

    Returns:
        N(文字列)→ P(Y1) の推定と y2_sum の平均・最大
    """
    grouped: dict[int, list[dict[str, Any]]] = {}
    for row in rows:
        grouped.setdefault(row["n"], []).append(row)
    summary = {}
    for n in sorted(grouped):
        group = grouped[n]
        successes = sum(1 for row in group if row["y1_ok"])
        lower, upper = wilson_interval(successes, len(group), confidence)
        estimate = ProbabilityEstimate(
            probability=successes / len(group), lower=lower, upper=upper, successes=successes, trials=len(group), confidence=confidence
        )
        y2 = np.asarray([row["y2_sum"] for row in group], dtype=float)
        summary[str(n)] = {"y1": estimate.to_dict(), "y2_sum_mean": float(y2.mean()), "y2_sum_max": float(y2.max())}
    return summary
