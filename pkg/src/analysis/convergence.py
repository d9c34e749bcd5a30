"""N のスイープと log–log の収束率フィット。

各 N について試行ごとの誤差を計算し、中央値を取ってから回帰する。
(Y1) を満たさない配置も主フィットには含め、除外したフィットを別に報告する。
"""

from collections.abc import Sequence
from dataclasses import dataclass
from functools import partial
import logging
import math
from typing import Any

import numpy as np
from scipy.stats import linregress

from src.analysis.field_distance import l2_distance
from src.data_models import ComparisonPair, RateFit, SweepPlan
from src.effective.charge_equation import EffectiveCharge, effective_field, solve_effective_charge
from src.errors import ConfigurationError
from src.experiment.runner import guarded, run_trials
from src.experiment.seeds import derive_seed
from src.microscopic.densities import microscopic_field, monopole_field, solve_densities
from src.point_charge.charges import assemble_point_field, solve_point_charges
from src.potentials.potential_model import make_potential
from src.potentials.quadrature import quadrature_grid
from src.random_field.density import make_density
from src.random_field.regularity import regularity_report, sweep_y1_constant
from src.random_field.sampling import sample_configuration
from src.scattering.nystrom_solver import solve_mu_nystrom

MIN_DISTINCT_N = 3
CALIBRATION_OFFSET = 1 << 20

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrialTask:
    """1 試行分の入力(ワーカーへ pickle で渡す)"""

    plan: SweepPlan
    n_points: int
    trial: int
    seed: int
    a: float
    y1_constant: float
    effective: EffectiveCharge | None = None


def fit_rate(
    n_values: Sequence[int], errors_per_n: Sequence[Sequence[float]], label: str = "", excluded: int = 0
) -> RateFit:
    """
    各 N の中央値に log–log 直線を当てはめる。

    Args:
        n_values: N の列
        errors_per_n: 各 N の試行誤差(非有限値は除く)
        label: 識別子
        excluded: 失敗などで除外した試行数

    Returns:
        RateFit
    """
    if len(n_values) != len(errors_per_n):
        raise ConfigurationError("n_values and errors_per_n differ in length")
    kept_n: list[int] = []
    medians: list[float] = []
    spread: list[dict[str, float]] = []
    counts: list[int] = []
    for n, errors in zip(n_values, errors_per_n):
        finite = np.asarray([e for e in errors if math.isfinite(e)], dtype=float)
        counts.append(int(finite.size))
        if finite.size == 0:
            continue
        median = float(np.median(finite))
        spread.append({"n": int(n), "min": float(finite.min()), "median": median, "max": float(finite.max())})
        if median <= 0.0:
            logger.warning("median error at N=%d is %.3g; left out of the log-log fit", n, median)
            continue
        kept_n.append(int(n))
        medians.append(median)
    if len(set(kept_n)) < MIN_DISTINCT_N:
        raise ConfigurationError(
            f"Rate fit needs at least {MIN_DISTINCT_N} distinct N with positive errors", {"n_values": kept_n}
        )
    result = linregress(np.log(kept_n), np.log(medians))
    return RateFit(
        n_values=kept_n,
        error_values=medians,
        slope=float(result.slope),
        slope_stderr=float(result.stderr),
        intercept=float(result.intercept),
        spread=spread,
        trials_per_n=counts,
        excluded=excluded,
        label=label,
    )


def _trial_error(task: TrialTask) -> dict[str, Any]:
    plan = task.plan
    lam = plan.lam
    density = make_density(plan.density)
    config = sample_configuration(density, task.n_points, task.seed)
    report = regularity_report(config, plan.nu, plan.xi, task.y1_constant)
    row: dict[str, Any] = {
        "n": task.n_points,
        "trial": task.trial,
        "seed": task.seed,
        "y1_ok": report.y1_ok,
        "min_pair_distance": report.min_pair_distance,
    }
    pair = plan.pair
    if pair in (ComparisonPair.PSI_HAT_VS_PSI, ComparisonPair.NQ_VS_Q_EFFECTIVE):
        charges = solve_point_charges(config, task.a, lam, plan.source)
        if pair is ComparisonPair.PSI_HAT_VS_PSI:
            distance = l2_distance(assemble_point_field(charges, config, plan.source), effective_field(task.effective, plan.source))
            row["error"] = distance.value
        else:
            q_at_points = task.effective.evaluate_q(config.points)
            row["error"] = math.sqrt(float(np.mean((task.n_points * charges.values - q_at_points) ** 2)))
        return row

    pot = make_potential(plan.potential)
    grid = quadrature_grid(pot.support_radius, *plan.potential_grid)
    sol = solve_densities(config, pot, grid, lam, plan.source, scheme=plan.scheme)
    if pair is ComparisonPair.PSI_VS_PSI_TILDE:
        row["error"] = l2_distance(microscopic_field(sol, config, pot, grid, plan.source), monopole_field(sol, config, plan.source)).value
        return row
    charges = solve_point_charges(config, sol.a, lam, plan.source)
    if pair is ComparisonPair.PSI_TILDE_VS_PSI_HAT:
        row["error"] = l2_distance(monopole_field(sol, config, plan.source), assemble_point_field(charges, config, plan.source)).value
    else:
        row["error"] = float(np.linalg.norm(sol.Q - charges.values))
    row["rho_norm_ratio"] = sol.rho_norm_ratio
    return row


def _y1_constants(plan: SweepPlan) -> dict[int, float]:
    constant = sweep_y1_constant(
        plan.density, plan.n_values, plan.nu, plan.y1_constant, seed=derive_seed(plan.master_seed, CALIBRATION_OFFSET), threads=plan.threads
    )
    return {n: constant for n in plan.n_values}


def plan_scattering_length(plan: SweepPlan) -> float:
    """ポテンシャル台のグリッド上の Nyström 散乱長"""
    pot = make_potential(plan.potential)
    return solve_mu_nystrom(pot, quadrature_grid(pot.support_radius, *plan.potential_grid), scheme=plan.scheme).a


def plan_effective_charge(plan: SweepPlan, a: float) -> EffectiveCharge:
    """W の台のグリッド上の有効電荷"""
    density = make_density(plan.density)
    grid = quadrature_grid(density.support_radius, *plan.density_grid)
    return solve_effective_charge(density, grid, a, plan.lam, plan.source, scheme=plan.scheme)


def convergence_rows(plan: SweepPlan) -> list[dict[str, Any]]:
    """
    計画の全試行を実行し、行のリストを返す。

    Args:
        plan: スイープ計画

    Returns:
        (N, 試行) 順の行。失敗した試行は status に例外名、error に NaN。
    """
    if plan.trials < 1:
        raise ConfigurationError(f"trials must be positive, got {plan.trials}")
    a = plan_scattering_length(plan)
    effective = None
    if plan.pair in (ComparisonPair.PSI_HAT_VS_PSI, ComparisonPair.NQ_VS_Q_EFFECTIVE):
        effective = plan_effective_charge(plan, a)
    constants = _y1_constants(plan)
    tasks = [
        TrialTask(
            plan=plan,
            n_points=n,
            trial=trial,
            seed=derive_seed(plan.master_seed, index * plan.trials + trial),
            a=a,
            y1_constant=constants[n],
            effective=effective,
        )
        for index, n in enumerate(plan.n_values)
        for trial in range(plan.trials)
    ]
    logger.info("convergence sweep %s: %d trials, a=%.6g", plan.pair.value, len(tasks), a)
    results = run_trials(partial(guarded, _trial_error), tasks, plan.threads)
    rows = []
    for task, result in zip(tasks, results):
        row = {"n": task.n_points, "trial": task.trial, "seed": task.seed, "y1_ok": None, "min_pair_distance": math.nan}
        row.update(result)
        rows.append(row)
    return rows


def fit_from_rows(
    rows: Sequence[dict[str, Any]], n_values: Sequence[int], label: str = "", require_y1: bool = False
) -> RateFit:
    """
    行から RateFit を作る。

    Args:
        rows: convergence_rows の結果
        n_values: N の列
        label: 識別子
        require_y1: (Y1) を満たさない試行も除外するか

    Returns:
        RateFit(excluded は失敗と (Y1) 除外の合計)
    """
    errors: dict[int, list[float]] = {int(n): [] for n in n_values}
    excluded = 0
    for row in rows:
        if row.get("status") != "ok" or (require_y1 and not row.get("y1_ok")):
            excluded += 1
            continue
        errors[int(row["n"])].append(float(row["error"]))
    return fit_rate(list(errors), list(errors.values()), label=label, excluded=excluded)


def convergence_study(plan: SweepPlan) -> RateFit:
    """計画を実行し、全試行(失敗を除く)の収束率を返す"""
    return fit_from_rows(convergence_rows(plan), plan.n_values, label=plan.pair.value)
