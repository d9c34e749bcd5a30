"""揺らぎ η = √N(g, ψ̂_N − ψ) の標本と正規性の要約。

(g, ψ̂_N − ψ) = Σ_i q_i h_g(y_i) − Σ_m w_m h_g(z_m) W(z_m) q(z_m) はプローブの h_g だけで厳密に書けるので、
体積積分は使わない。
"""

from dataclasses import dataclass
from functools import partial
import logging
import math
from typing import Any

import numpy as np
from scipy.stats import anderson, chi2, kurtosis, skew

from src.analysis.convergence import plan_effective_charge, plan_scattering_length
from src.data_models import (
    ChargeVector,
    CovarianceEstimate,
    CovarianceVariant,
    DensitySpec,
    DesingularizationScheme,
    FluctuationSample,
    SourceSpec,
    SweepPlan,
)
from src.effective.charge_equation import EffectiveCharge, solve_effective_charge
from src.errors import ConfigurationError, GridMismatchError, LambdaMismatchError
from src.experiment.runner import guarded, run_trials
from src.experiment.seeds import derive_seed
from src.greens.kernels import FOUR_PI
from src.point_charge.charges import solve_point_charges
from src.potentials.quadrature import Grid3D
from src.random_field.sampling import sample_configuration

CONFIDENCE = 0.99
SUBSTITUTION_NOTE = (
    "eta is sampled with the point-charge field psi_hat_N in place of the microscopic resolvent; "
    "the psi_N - psi_tilde_N and psi_tilde_N - psi_hat_N gaps vanish faster than N^-1/2"
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FluctuationTask:
    """1 試行分の入力"""

    plan: SweepPlan
    probe: SourceSpec
    n_points: int
    trial: int
    seed: int
    a: float
    effective: EffectiveCharge


def eta_value(charges: ChargeVector, eff: EffectiveCharge, probe: SourceSpec) -> float:
    """
    η = √N(Σ q_i h_g(y_i) − Σ w h_g W q) を計算する。

    Args:
        charges: 点電荷 q_i
        eff: 有効電荷 q(x)
        probe: プローブ g

    Returns:
        η
    """
    if probe.lam != eff.lam or charges.lam != eff.lam:
        raise LambdaMismatchError("Probe, charges and effective charge must share lambda")
    n = charges.n_points
    atoms = math.fsum(charges.values * probe.h(charges.config.points))
    cloud = math.fsum(eff.grid.weights * probe.h(eff.grid.nodes) * eff.cloud_density)
    return math.sqrt(n) * (atoms - cloud)


def covariance_from_charges(
    eff_f: EffectiveCharge, eff_g: EffectiveCharge, variant: CovarianceVariant | str = CovarianceVariant.VERBATIM
) -> CovarianceEstimate:
    """
    W 上の求積で二通りの前因子の共分散を計算する。

    Args:
        eff_f: ソース f の有効電荷
        eff_g: プローブ g の有効電荷(同じグリッド)
        variant: 主に報告する前因子

    Returns:
        CovarianceEstimate
    """
    if not eff_f.grid.matches(eff_g.grid):
        raise GridMismatchError("Effective solves for f and g use different grids")
    if eff_f.a != eff_g.a or eff_f.lam != eff_g.lam:
        raise ConfigurationError("Effective solves for f and g use different (a, lambda)")
    weights = eff_f.grid.weights * eff_f.w_values
    product = eff_f.psi_values * eff_g.psi_values
    squared = float(np.dot(weights, product**2))
    mean = float(np.dot(weights, product))
    coupling = FOUR_PI * eff_f.a
    return CovarianceEstimate(
        verbatim=coupling**2 * squared - coupling * mean**2,
        symmetric=coupling**2 * (squared - mean**2),
        selected=CovarianceVariant(variant),
    )


def theoretical_covariance(
    src_f: SourceSpec,
    src_g: SourceSpec,
    a: float,
    lam: float,
    W: DensitySpec,
    variant: CovarianceVariant | str = CovarianceVariant.VERBATIM,
    grid: Grid3D | None = None,
    scheme: DesingularizationScheme | str = DesingularizationScheme.MULTIPOLE,
) -> CovarianceEstimate:
    """f, g の有効問題を同じグリッドで解いて共分散を返す"""
    eff_f = solve_effective_charge(W, grid, a, lam, src_f, scheme=scheme)
    eff_g = solve_effective_charge(W, eff_f.grid, a, lam, src_g, scheme=scheme)
    return covariance_from_charges(eff_f, eff_g, variant)


def _finite_or_none(value: float) -> float | None:
    return float(value) if math.isfinite(value) else None


def summarize_eta(
    eta_values: np.ndarray, covariance: CovarianceEstimate | None = None, confidence: float = CONFIDENCE
) -> dict[str, Any]:
    """
    平均ゼロの t 検定、分散の χ² 信頼区間、歪度・超過尖度、Anderson–Darling 統計をまとめる。

    Args:
        eta_values: η の標本
        covariance: 理論共分散(分散の信頼区間に入るかを判定)
        confidence: 信頼水準

    Returns:
        JSON に書ける要約(計算できない統計は None)
    """
    eta = np.asarray(eta_values, dtype=float)
    eta = eta[np.isfinite(eta)]
    n = int(eta.size)
    summary: dict[str, Any] = {"n_trials": n, "confidence": confidence, "substitution": SUBSTITUTION_NOTE}
    if n < 2:
        summary.update({"mean": _finite_or_none(float(eta.mean())) if n else None, "variance": None})
        return summary

    mean = float(eta.mean())
    variance = float(eta.var(ddof=1))
    stderr = math.sqrt(variance / n)
    alpha = 1.0 - confidence
    lower = (n - 1) * variance / float(chi2.ppf(1.0 - alpha / 2.0, n - 1))
    upper = (n - 1) * variance / float(chi2.ppf(alpha / 2.0, n - 1))
    summary.update(
        {
            "mean": mean,
            "stderr": stderr,
            "t_statistic": mean / stderr if stderr > 0 else None,
            "variance": variance,
            "variance_ci": [lower, upper],
            "skewness_stderr": math.sqrt(6.0 / n),
            "kurtosis_stderr": math.sqrt(24.0 / n),
        }
    )
    if variance > 0.0:
        result = anderson(eta, dist="norm")
        summary.update(
            {
                "skewness": float(skew(eta)),
                "excess_kurtosis": float(kurtosis(eta, fisher=True)),
                "anderson_statistic": float(result.statistic),
                "anderson_critical_values": [float(v) for v in result.critical_values],
                "anderson_significance_levels": [float(v) for v in result.significance_level],
            }
        )
    else:
        summary.update({"skewness": None, "excess_kurtosis": None, "anderson_statistic": None})

    if covariance is not None:
        summary["covariance"] = covariance.to_dict()
        summary["verbatim_in_ci"] = lower <= covariance.verbatim <= upper
        summary["symmetric_in_ci"] = lower <= covariance.symmetric <= upper
    return summary


def _eta_trial(task: FluctuationTask) -> dict[str, Any]:
    plan = task.plan
    config = sample_configuration(plan.density, task.n_points, task.seed)
    charges = solve_point_charges(config, task.a, plan.lam, plan.source)
    return {"n": task.n_points, "trial": task.trial, "seed": task.seed, "eta": eta_value(charges, task.effective, task.probe)}


def fluctuation_sample(
    plan: SweepPlan, n_points: int | None = None, variant: CovarianceVariant | str = CovarianceVariant.VERBATIM
) -> FluctuationSample:
    """
    N を固定して η を試行回数ぶん標本化する。

    Args:
        plan: 計画(probe が None ならソース自身をプローブに使う)
        n_points: N(None なら plan.n_values の最大値)
        variant: 主に報告する共分散の前因子

    Returns:
        FluctuationSample(summary に共分散を含む)
    """
    n_points = n_points if n_points is not None else max(plan.n_values)
    probe = plan.probe if plan.probe is not None else plan.source
    if plan.trials < 1000:
        logger.warning("%d trials is below 10^3; the normality diagnostics are indicative only", plan.trials)
    a = plan_scattering_length(plan)
    eff_f = plan_effective_charge(plan, a)
    eff_g = solve_effective_charge(eff_f.density, eff_f.grid, a, plan.lam, probe, scheme=plan.scheme)
    covariance = covariance_from_charges(eff_f, eff_g, variant)

    index = list(plan.n_values).index(n_points) if n_points in plan.n_values else 0
    tasks = [
        FluctuationTask(
            plan=plan,
            probe=probe,
            n_points=n_points,
            trial=trial,
            seed=derive_seed(plan.master_seed, index * plan.trials + trial),
            a=a,
            effective=eff_f,
        )
        for trial in range(plan.trials)
    ]
    rows = run_trials(partial(guarded, _eta_trial), tasks, plan.threads)
    for task, row in zip(tasks, rows):
        row.setdefault("n", task.n_points)
        row.setdefault("trial", task.trial)
        row.setdefault("seed", task.seed)
        row.setdefault("eta", math.nan)
    eta_values = np.array([row["eta"] for row in rows], dtype=float)
    summary = summarize_eta(eta_values, covariance)
    summary["a"] = a
    summary["failed_trials"] = sum(1 for row in rows if row["status"] != "ok")
    logger.info("fluctuations N=%d trials=%d variance=%s", n_points, plan.trials, summary.get("variance"))
    return FluctuationSample(eta_values=eta_values, n_points=n_points, source=plan.source, probe=probe, summary=summary, rows=rows)
