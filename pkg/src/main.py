"""量子 Lorentz 気体の数値実験を設定ファイルから実行する CLI。"""

import argparse
from collections.abc import Callable, Sequence
import json
import logging
from pathlib import Path
import sys
from typing import Any

PROJECT_ROOT = Path(__file__).resolve().parent.parent
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

from src import __version__  # noqa: E402
from src.analysis.convergence import CALIBRATION_OFFSET, convergence_rows, fit_from_rows, plan_scattering_length  # noqa: E402
from src.analysis.fluctuations import fluctuation_sample  # noqa: E402
from src.config import (  # noqa: E402
    apply_overrides,
    density_spec,
    load_config,
    log_level_default,
    potential_spec,
    source_spec,
    sweep_plan,
)
from src.data_models import (  # noqa: E402
    CovarianceVariant,
    DesingularizationScheme,
    EffectiveSolver,
    ExperimentRecord,
    ScatteringMethod,
    SolveMethod,
)
from src.effective.charge_equation import solve_effective_charge  # noqa: E402
from src.errors import ConfigurationError, LorentzGasError, SolverError  # noqa: E402
from src.experiment.records import (  # noqa: E402
    config_hash,
    jsonable,
    save_json,
    unique_output_dir,
    write_csv,
    write_plot_script,
)
from src.experiment.seeds import derive_seed  # noqa: E402
from src.greens.interaction import interaction_matrix  # noqa: E402
from src.greens.kernel_check import kernel_self_test  # noqa: E402
from src.microscopic.densities import solve_densities  # noqa: E402
from src.microscopic.remainder import charge_comparison_residual, remainder_terms  # noqa: E402
from src.point_charge.aghh import aghh_resolvent, alpha_for_scattering_length  # noqa: E402
from src.point_charge.charges import charge_sum_bound, solve_point_charges  # noqa: E402
from src.potentials.potential_model import default_grid, make_potential  # noqa: E402
from src.potentials.quadrature import Grid3D, quadrature_grid  # noqa: E402
from src.random_field.density import make_density  # noqa: E402
from src.random_field.regularity import regularity_by_n, regularity_report, sweep_y1_constant, wilson_interval  # noqa: E402
from src.random_field.sampling import sample_configuration, write_configuration  # noqa: E402
from src.scattering.nystrom_solver import solve_mu_nystrom  # noqa: E402
from src.scattering.radial_ode import closed_form_scattering_length, scattering_length_radial_ode  # noqa: E402

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3

Config = dict[str, dict[str, Any]]
Outcome = tuple[dict[str, list[dict[str, Any]]], dict[str, Any]]

logger = logging.getLogger(__name__)


def _scheme(config: Config) -> DesingularizationScheme:
    return DesingularizationScheme(config["grid"]["scheme"])


def _potential_grid(config: Config, support_radius: float) -> Grid3D:
    grid = config["grid"]
    return quadrature_grid(support_radius, grid["potential_radial"], grid["potential_angular"])


def _configurations(config: Config):
    experiment = config["experiment"]
    density = make_density(density_spec(config))
    for index, n in enumerate(experiment["n_values"]):
        for trial in range(experiment["trials"]):
            seed = derive_seed(experiment["seed"], index * experiment["trials"] + trial)
            yield n, trial, seed, sample_configuration(density, n, seed)


def run_scattering_length(config: Config) -> Outcome:
    """
    散乱長を Nyström 法と動径 ODE で計算する。

    Args:
        config: 解決済みの設定

    Returns:
        (CSV 行, 要約)
    """
    pot = make_potential(potential_spec(config))
    tolerances = config["tolerances"]
    method = ScatteringMethod(config["experiment"]["scattering_method"])
    solution = solve_mu_nystrom(
        pot, default_grid(pot), tol=tolerances["scattering"], resonance_threshold=tolerances["resonance_threshold"], scheme=_scheme(config)
    )
    ode_a, resonance = scattering_length_radial_ode(pot, tol=tolerances["scattering"], resonance_threshold=tolerances["resonance_threshold"])
    primary = solution.a if method is ScatteringMethod.NYSTROM else ode_a
    summary = {
        "a": primary,
        "method": method.value,
        "nystrom": solution.to_dict(),
        "radial_ode": {"a": ode_a, "resonance": resonance},
        "closed_form": closed_form_scattering_length(pot),
        "potential": pot.diagnostics(),
    }
    return {}, summary


def run_sample_config(config: Config, directory: Path) -> Outcome:
    """配置を生成して CSV に保存し、正則性の統計を集める"""
    experiment = config["experiment"]
    density = make_density(density_spec(config))
    constant = sweep_y1_constant(
        density, experiment["n_values"], experiment["nu"], experiment["y1_constant"], seed=derive_seed(experiment["seed"], CALIBRATION_OFFSET)
    )
    rows = []
    for n, trial, seed, obstacles in _configurations(config):
        write_configuration(obstacles, directory / "configurations" / f"config-N{n}-t{trial}.csv")
        report = regularity_report(obstacles, experiment["nu"], experiment["xi"], constant)
        rows.append({"n": n, "trial": trial, "seed": seed, **report.to_dict()})
    successes = sum(1 for row in rows if row["y1_ok"])
    lower, upper = wilson_interval(successes, len(rows))
    summary = {
        "configurations": len(rows),
        "y1_constant": constant,
        "y1_calibrated": not experiment["y1_constant"],
        "xi": experiment["xi"],
        "by_n": regularity_by_n(rows),
        "pooled_y1_fraction": successes / len(rows),
        "pooled_y1_wilson_interval": [lower, upper],
        "nu_star": density.nu_star(),
        "lp_norm": density.lp_norm(density.spec.p),
        "mass_defect": density.mass_defect,
    }
    return {"regularity.csv": rows}, summary


def run_check_config(config: Config) -> dict[str, Any]:
    """設定を検証し、モデルを組み立てられることを確認する"""
    pot = make_potential(potential_spec(config))
    density = make_density(density_spec(config))
    source_spec(config)
    return {
        "valid": True,
        "config_hash": config_hash(config),
        "potential": pot.diagnostics(),
        "density": {"support_radius": density.support_radius, "mass_defect": density.mass_defect, "nu_star": density.nu_star()},
    }


def run_solve(config: Config, method: SolveMethod) -> Outcome:
    """
    指定した手法で一つの問題を解く。

    Args:
        config: 解決済みの設定
        method: pointcharge / aghh / microscopic / effective

    Returns:
        (CSV 行, 要約)
    """
    lam = config["experiment"]["lam"]
    tolerances = config["tolerances"]
    src = source_spec(config)
    pot = make_potential(potential_spec(config))
    grid = _potential_grid(config, pot.support_radius)
    scattering = solve_mu_nystrom(pot, grid, resonance_threshold=tolerances["resonance_threshold"], scheme=_scheme(config))
    a = scattering.a
    summary: dict[str, Any] = {"method": method.value, "a": a, "lam": lam, "instances": []}

    if method is SolveMethod.EFFECTIVE:
        density = make_density(density_spec(config))
        density_grid = quadrature_grid(density.support_radius, config["grid"]["density_radial"], config["grid"]["density_angular"])
        eff = solve_effective_charge(
            density,
            density_grid,
            a,
            lam,
            src,
            solver=EffectiveSolver(config["experiment"]["effective_solver"]),
            tol=tolerances["born"],
            max_iter=tolerances["born_max_iter"],
            scheme=_scheme(config),
        )
        summary["instances"].append(eff.to_dict())
        return {"effective.csv": eff.to_rows()}, summary

    charge_rows: list[dict[str, Any]] = []
    remainder_rows: list[dict[str, Any]] = []
    for n, trial, seed, obstacles in _configurations(config):
        instance: dict[str, Any] = {"n": n, "trial": trial, "seed": seed}
        if method is SolveMethod.POINTCHARGE:
            charges = solve_point_charges(obstacles, a, lam, src)
            instance.update({"residual": charges.residual, "charge_sum": float(charges.values.sum())})
            instance["charge_sum_bound"] = charge_sum_bound(charges, src)
            if n > 1:
                instance["opnorm_over_N"] = interaction_matrix(obstacles, lam).opnorm_over_N
        elif method is SolveMethod.AGHH:
            charges, _ = aghh_resolvent(obstacles, alpha_for_scattering_length(a), lam, src)
            instance["residual"] = charges.residual
        else:
            sol = solve_densities(
                obstacles,
                pot,
                grid,
                lam,
                src,
                scheme=_scheme(config),
                tol=tolerances["block_residual"],
                cap=tolerances["unknown_cap"],
                dense_limit=tolerances["dense_limit"],
                resonance_threshold=tolerances["resonance_threshold"],
            )
            remainder = remainder_terms(sol, obstacles, pot, grid, lam, src)
            charges = solve_point_charges(obstacles, sol.a, lam, src)
            instance.update(sol.diagnostics())
            instance.update(charge_comparison_residual(sol, remainder, charges))
            remainder_rows.extend({"n": n, "trial": trial, **row} for row in remainder.to_rows())
            charge_rows.extend({"n": n, "trial": trial, **row, "Q": float(q_value)} for row, q_value in zip(charges.to_rows(), sol.Q))
            summary["instances"].append(instance)
            continue
        charge_rows.extend({"n": n, "trial": trial, **row} for row in charges.to_rows())
        summary["instances"].append(instance)

    files = {"charges.csv": charge_rows}
    if remainder_rows:
        files["remainder.csv"] = remainder_rows
    return files, summary


def run_converge(config: Config) -> Outcome:
    """収束率スイープ。(Y1) を満たす試行だけのフィットも併記する"""
    plan = sweep_plan(config)
    rows = convergence_rows(plan)
    fit = fit_from_rows(rows, plan.n_values, label=plan.pair.value)
    try:
        fit_y1 = fit_from_rows(rows, plan.n_values, label=f"{plan.pair.value} (Y1)", require_y1=True).to_dict()
    except ConfigurationError as exc:
        logger.warning("(Y1) 条件付きフィットを省略: %s", exc)
        fit_y1 = None
    summary = {
        "pair": plan.pair.value,
        "a": plan_scattering_length(plan),
        "fit": fit.to_dict(),
        "fit_y1": fit_y1,
        "y1_violations": sum(1 for row in rows if row.get("y1_ok") is False),
        "failed_trials": sum(1 for row in rows if row.get("status") != "ok"),
    }
    return {"trials.csv": rows}, summary


def run_fluctuations(config: Config) -> Outcome:
    """各 N で η を標本化する"""
    plan = sweep_plan(config)
    variant = CovarianceVariant(config["experiment"]["covariance_variant"])
    rows: list[dict[str, Any]] = []
    per_n: dict[str, Any] = {}
    for n in plan.n_values:
        sample = fluctuation_sample(plan, n, variant)
        rows.extend(sample.rows)
        per_n[str(n)] = sample.summary
    return {"eta.csv": rows}, {"variant": variant.value, "samples": per_n}


def run_kernels_selftest(config: Config) -> Outcome:
    """K2 の閉形式を数値積分と照合する"""
    report = kernel_self_test(seed=config["experiment"]["seed"])
    rows = report.pop("triples")
    return {"kernels.csv": rows}, report


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    """
    コマンドライン引数をパースする。

    Args:
        argv: パースするコマンドライン引数のリスト。Noneの場合はsys.argvを使用。

    Returns:
        パースされた引数のNamespaceオブジェクト
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="Experiment config (TOML or resolved JSON).")
    common.add_argument("--out", type=Path, default=None, help="Base output directory (default: LORENTZ_RESULT_DIR or ./result).")
    common.add_argument("--seed", type=int, default=None, help="Master seed override.")
    common.add_argument("--threads", type=int, default=None, help="Worker processes (default: LORENTZ_THREADS or 1).")
    common.add_argument("--trials", type=int, default=None, help="Trials per N override.")
    common.add_argument("--n-values", type=int, nargs="+", default=None, help="List of N override.")
    common.add_argument("--variant", choices=[v.value for v in CovarianceVariant], default=None, help="Covariance prefactor.")
    common.add_argument(
        "--log-level",
        default=None,
        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
        help="Logging verbosity (default: LORENTZ_LOG_LEVEL or INFO).",
    )

    parser = argparse.ArgumentParser(description="Quantum Lorentz gas numerical lab.")
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    subparsers.add_parser("scattering-length", parents=[common], help="Scattering length of the configured potential.")
    subparsers.add_parser("sample-config", parents=[common], help="Sample obstacle configurations and regularity statistics.")
    subparsers.add_parser("check-config", parents=[common], help="Validate a config and print the resolved form.")
    solve = subparsers.add_parser("solve", parents=[common], help="Solve one instance with the selected method.")
    solve.add_argument("--method", choices=[m.value for m in SolveMethod], default=None, help="Solver to run.")
    subparsers.add_parser("converge", parents=[common], help="Convergence-rate sweep over N.")
    subparsers.add_parser("fluctuations", parents=[common], help="Sample the fluctuation statistic eta.")
    subparsers.add_parser("kernels-selftest", parents=[common], help="Check the K2 closed form against quadrature.")
    return parser.parse_args(argv)


def _report_error(exc: LorentzGasError) -> None:
    print(json.dumps(jsonable(exc.to_dict()), ensure_ascii=False), file=sys.stderr)


def _write_outputs(config: Config, subcommand: str, files: dict[str, list[dict[str, Any]]], summary: dict[str, Any], directory: Path) -> None:
    digest = config_hash(config)
    record = ExperimentRecord(subcommand=subcommand, config_hash=digest, version=__version__, summary=summary)
    save_json(directory / "config.resolved.json", config)
    payload = record.to_dict()
    payload.pop("rows", None)
    save_json(directory / "summary.json", payload)
    for name, rows in files.items():
        write_csv(directory / name, rows)
    if config["output"]["plot_script"]:
        write_plot_script(directory)
    logger.info("outputs written to %s", directory)


def run(args: argparse.Namespace) -> int:
    """
    サブコマンドを実行し、終了コードを返す。

    Args:
        args: パース済みの引数

    Returns:
        0(成功)、2(設定・入力の誤り)、3(ソルバーの失敗)
    """
    try:
        config = apply_overrides(
            load_config(args.config),
            seed=args.seed,
            threads=args.threads,
            trials=args.trials,
            n_values=args.n_values,
            method=getattr(args, "method", None),
            variant=args.variant,
            out=args.out,
        )
        if args.subcommand == "check-config":
            print(json.dumps(jsonable({**run_check_config(config), "config": config}), ensure_ascii=False, indent=2))
            return EXIT_OK

        handlers: dict[str, Callable[[Config], Outcome]] = {
            "scattering-length": run_scattering_length,
            "solve": lambda cfg: run_solve(cfg, SolveMethod(cfg["experiment"]["method"])),
            "converge": run_converge,
            "fluctuations": run_fluctuations,
            "kernels-selftest": run_kernels_selftest,
        }
        base = Path(config["output"]["directory"])
        if args.subcommand == "sample-config":
            directory = unique_output_dir(base, args.subcommand, config_hash(config))
            files, summary = run_sample_config(config, directory)
        else:
            files, summary = handlers[args.subcommand](config)
            directory = unique_output_dir(base, args.subcommand, config_hash(config))
        _write_outputs(config, args.subcommand, files, summary, directory)
        if args.subcommand in ("scattering-length", "kernels-selftest"):
            print(json.dumps(jsonable(summary), ensure_ascii=False, indent=2))
        if args.subcommand == "kernels-selftest" and not summary["passed"]:
            return EXIT_SOLVER
        return EXIT_OK
    except ConfigurationError as exc:
        _report_error(exc)
        return EXIT_VALIDATION
    except SolverError as exc:
        _report_error(exc)
        return EXIT_SOLVER
    except ValueError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "details": {}}, ensure_ascii=False), file=sys.stderr)
        return EXIT_VALIDATION


def main(argv: Sequence[str] | None = None) -> int:
    """
    メインエントリーポイント。

    コマンドライン引数をパースし、ロギングを設定してからサブコマンドを実行する。

    Args:
        argv: コマンドライン引数のリスト。Noneの場合はsys.argvを使用。

    Returns:
        終了コード
    """
    args = parse_args(argv)
    logging.basicConfig(level=args.log_level or log_level_default(), format="%(levelname)s %(message)s")
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
