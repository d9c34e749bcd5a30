"""実験設定(TOML / JSON)の読み込みと検証。

スキーマは DEFAULT_CONFIG そのもの。未知のセクション・キーは拒否し、型は既定値の型と照合する。
優先順位は CLI フラグ > 設定ファイル > 環境変数 (.env) > 既定値。
"""

import copy
import json
import logging
import os
from pathlib import Path
import tomllib
from typing import Any

from dotenv import load_dotenv

from src.data_models import (
    ComparisonPair,
    CovarianceVariant,
    DensityFamily,
    DensitySpec,
    DesingularizationScheme,
    EffectiveSolver,
    PotentialShape,
    PotentialSpec,
    ScatteringMethod,
    SolveMethod,
    SourceSpec,
    SweepPlan,
)
from src.errors import ConfigurationError
from src.experiment.runner import default_threads

DEFAULT_RESULT_DIR = "result"
DEFAULT_LOG_LEVEL = "INFO"

DEFAULT_CONFIG: dict[str, dict[str, Any]] = {
    "experiment": {
        "lam": 25.0,
        "n_values": [1],
        "trials": 1,
        "seed": 0,
        "threads": 0,
        "method": "pointcharge",
        "pair": "psi_hat-psi",
        "scattering_method": "nystrom",
        "effective_solver": "direct",
        "covariance_variant": "verbatim",
        "nu": 0.05,
        "xi": 1.0,
        "y1_constant": 0.0,
    },
    "potential": {
        "shape": "square-well",
        "amplitude": 4.0,
        "support_radius": 0.0,
        "width": 1.0,
        "table_path": "",
        "truncation_widths": 6.0,
    },
    "density": {
        "family": "uniform-ball",
        "radius": 1.0,
        "sigma": 0.5,
        "table_path": "",
        "p": 0.0,
        "truncation_widths": 6.0,
    },
    "source": {"g0": 1.0, "center": [0.0, 0.0, 0.0], "width": 0.5},
    "probe": {"enabled": False, "g0": 1.0, "center": [0.3, 0.0, 0.0], "width": 0.7},
    "grid": {
        "potential_radial": 8,
        "potential_angular": 4,
        "density_radial": 16,
        "density_angular": 8,
        "scheme": "multipole",
    },
    "tolerances": {
        "scattering": 1e-10,
        "resonance_threshold": 1e-3,
        "block_residual": 1e-9,
        "born": 1e-10,
        "born_max_iter": 500,
        "unknown_cap": 16000,
        "dense_limit": 4096,
    },
    "output": {"directory": "", "plot_script": True},
}

ENUM_KEYS: dict[tuple[str, str], type] = {
    ("experiment", "method"): SolveMethod,
    ("experiment", "pair"): ComparisonPair,
    ("experiment", "scattering_method"): ScatteringMethod,
    ("experiment", "effective_solver"): EffectiveSolver,
    ("experiment", "covariance_variant"): CovarianceVariant,
    ("potential", "shape"): PotentialShape,
    ("density", "family"): DensityFamily,
    ("grid", "scheme"): DesingularizationScheme,
}

logger = logging.getLogger(__name__)


def _check_type(section: str, key: str, value: Any, default: Any) -> Any:
    where = f"{section}.{key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(f"{where} must be a boolean", {"key": where, "value": value})
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{where} must be an integer", {"key": where, "value": value})
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise ConfigurationError(f"{where} must be a number", {"key": where, "value": value})
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigurationError(f"{where} must be a string", {"key": where, "value": value})
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not value:
            raise ConfigurationError(f"{where} must be a non-empty list", {"key": where, "value": value})
        return [_check_type(section, key, item, default[0]) for item in value]
    return value


def _validate_ranges(config: dict[str, dict[str, Any]]) -> None:
    experiment = config["experiment"]
    if experiment["lam"] <= 0:
        raise ConfigurationError("experiment.lam must be positive", {"lam": experiment["lam"]})
    if experiment["trials"] < 1:
        raise ConfigurationError("experiment.trials must be at least 1", {"trials": experiment["trials"]})
    if any(n < 1 for n in experiment["n_values"]):
        raise ConfigurationError("experiment.n_values must be positive", {"n_values": experiment["n_values"]})
    if experiment["threads"] < 0 or experiment["seed"] < 0:
        raise ConfigurationError("experiment.threads and experiment.seed must be non-negative")
    if not 0 < experiment["xi"] <= 1:
        raise ConfigurationError("experiment.xi must lie in (0, 1]", {"xi": experiment["xi"]})
    if experiment["y1_constant"] < 0:
        raise ConfigurationError("experiment.y1_constant must be non-negative", {"y1_constant": experiment["y1_constant"]})
    for block in ("source", "probe"):
        if len(config[block]["center"]) != 3:
            raise ConfigurationError(f"{block}.center must have three coordinates")
        if config[block]["width"] <= 0:
            raise ConfigurationError(f"{block}.width must be positive")
    for (section, key), enum in ENUM_KEYS.items():
        try:
            enum(config[section][key])
        except ValueError as exc:
            choices = [member.value for member in enum]
            raise ConfigurationError(f"{section}.{key} must be one of {choices}", {"value": config[section][key]}) from exc


def resolve_config(raw: dict[str, Any]) -> dict[str, dict[str, Any]]:
    """
    生の設定を既定値で補い、検証して返す。

    Args:
        raw: TOML / JSON から読んだ辞書

    Returns:
        すべてのキーを持つ解決済みの設定
    """
    if not isinstance(raw, dict):
        raise ConfigurationError("Config root must be a table")
    load_dotenv()
    config = copy.deepcopy(DEFAULT_CONFIG)
    for section, values in raw.items():
        if section not in DEFAULT_CONFIG:
            raise ConfigurationError(f"Unknown config section: {section}", {"section": section})
        if not isinstance(values, dict):
            raise ConfigurationError(f"Section {section} must be a table")
        for key, value in values.items():
            if key not in DEFAULT_CONFIG[section]:
                raise ConfigurationError(f"Unknown config key: {section}.{key}", {"section": section, "key": key})
            config[section][key] = _check_type(section, key, value, DEFAULT_CONFIG[section][key])

    if "threads" not in raw.get("experiment", {}):
        config["experiment"]["threads"] = default_threads()
    if not config["output"]["directory"]:
        config["output"]["directory"] = os.getenv("LORENTZ_RESULT_DIR", DEFAULT_RESULT_DIR)
    _validate_ranges(config)
    return config


def load_config(path: Path | None) -> dict[str, dict[str, Any]]:
    """
    TOML または JSON の設定を読み込んで解決する。

    Args:
        path: 設定ファイル(None なら既定値のみ)

    Returns:
        解決済みの設定
    """
    if path is None:
        return resolve_config({})
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}")
    try:
        if path.suffix.lower() == ".json":
            raw = json.loads(path.read_text(encoding="utf-8"))
        else:
            with path.open("rb") as file:
                raw = tomllib.load(file)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"Cannot parse {path}: {exc}") from exc
    logger.debug("loaded config %s", path)
    return resolve_config(raw)


def apply_overrides(config: dict[str, dict[str, Any]], **overrides: Any) -> dict[str, dict[str, Any]]:
    """
    CLI フラグで上書きした設定のコピーを返す(値が None のフラグは無視)。

    Args:
        config: 解決済みの設定
        **overrides: seed, threads, trials, n_values, method, variant, out

    Returns:
        上書き後の設定
    """
    paths = {
        "seed": ("experiment", "seed"),
        "threads": ("experiment", "threads"),
        "trials": ("experiment", "trials"),
        "n_values": ("experiment", "n_values"),
        "method": ("experiment", "method"),
        "variant": ("experiment", "covariance_variant"),
        "out": ("output", "directory"),
    }
    updated = copy.deepcopy(config)
    for name, value in overrides.items():
        if value is None:
            continue
        if name not in paths:
            raise ConfigurationError(f"Unknown override: {name}")
        section, key = paths[name]
        default = DEFAULT_CONFIG[section][key]
        updated[section][key] = _check_type(section, key, str(value) if isinstance(value, Path) else value, default)
    _validate_ranges(updated)
    return updated


def potential_spec(config: dict[str, dict[str, Any]]) -> PotentialSpec:
    """potential セクションから PotentialSpec を作る"""
    block = config["potential"]
    return PotentialSpec(
        shape=PotentialShape(block["shape"]),
        amplitude=block["amplitude"],
        support_radius=block["support_radius"] or None,
        width=block["width"],
        table_path=block["table_path"] or None,
        truncation_widths=block["truncation_widths"],
    )


def density_spec(config: dict[str, dict[str, Any]]) -> DensitySpec:
    """density セクションから DensitySpec を作る(p = 0 は ∞)"""
    block = config["density"]
    return DensitySpec(
        family=DensityFamily(block["family"]),
        radius=block["radius"],
        sigma=block["sigma"],
        table_path=block["table_path"] or None,
        p=block["p"] or None,
        truncation_widths=block["truncation_widths"],
    )


def source_spec(config: dict[str, dict[str, Any]], block_name: str = "source") -> SourceSpec:
    """source / probe セクションから SourceSpec を作る"""
    block = config[block_name]
    return SourceSpec(g0=block["g0"], center=tuple(block["center"]), width=block["width"], lam=config["experiment"]["lam"])


def probe_spec(config: dict[str, dict[str, Any]]) -> SourceSpec | None:
    """probe が有効なら SourceSpec、無効なら None"""
    return source_spec(config, "probe") if config["probe"]["enabled"] else None


def sweep_plan(config: dict[str, dict[str, Any]]) -> SweepPlan:
    """
    解決済みの設定から SweepPlan を作る。

    Args:
        config: 解決済みの設定

    Returns:
        SweepPlan(y1_constant = 0 は最小の N の試験走行で較正)
    """
    experiment, grid = config["experiment"], config["grid"]
    return SweepPlan(
        pair=ComparisonPair(experiment["pair"]),
        n_values=tuple(experiment["n_values"]),
        trials=experiment["trials"],
        master_seed=experiment["seed"],
        density=density_spec(config),
        potential=potential_spec(config),
        source=source_spec(config),
        probe=probe_spec(config),
        potential_grid=(grid["potential_radial"], grid["potential_angular"]),
        density_grid=(grid["density_radial"], grid["density_angular"]),
        nu=experiment["nu"],
        xi=experiment["xi"],
        y1_constant=experiment["y1_constant"] or None,
        scheme=DesingularizationScheme(grid["scheme"]),
        threads=max(1, experiment["threads"]),
    )


def log_level_default() -> str:
    """LORENTZ_LOG_LEVEL(.env 可)から既定のログレベルを読む"""
    load_dotenv()
    return os.getenv("LORENTZ_LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()
