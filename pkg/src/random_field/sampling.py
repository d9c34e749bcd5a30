"""密度 W からの独立同分布な障害物配置の生成と CSV 入出力。"""

import csv
import json
import logging
from pathlib import Path

import numpy as np

from src.data_models import DensitySpec, ObstacleConfig
from src.errors import ConfigurationError
from src.random_field.density import DensityModel, make_density

logger = logging.getLogger(__name__)


def sample_configuration(density: DensitySpec | DensityModel, n_points: int, seed: int) -> ObstacleConfig:
    """
    N 点の配置を生成する。同じ (seed, N, density) からは同じ配置が得られる。

    Args:
        density: 密度の設定またはモデル
        n_points: 点数 N ≥ 1
        seed: 乱数シード

    Returns:
        ObstacleConfig
    """
    if n_points < 1:
        raise ConfigurationError(f"N must be at least 1, got {n_points}")
    model = density if isinstance(density, DensityModel) else make_density(density)
    rng = np.random.default_rng(seed)
    points = model.sample_points(rng, n_points)
    logger.debug("sampled N=%d from %s (seed=%d)", n_points, model.family.value, seed)
    return ObstacleConfig(points=points, seed=seed, density=model.spec)


def write_configuration(config: ObstacleConfig, csv_path: Path) -> Path:
    """
    配置を CSV(x,y,z)と JSON ヘッダに保存する。

    Args:
        config: 障害物配置
        csv_path: CSV の保存先。ヘッダは同名の .json

    Returns:
        ヘッダ JSON のパス
    """
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    with csv_path.open("w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(["x", "y", "z"])
        for x, y, z in config.points:
            writer.writerow([repr(float(x)), repr(float(y)), repr(float(z))])
    header_path = csv_path.with_suffix(".json")
    header = {
        "n_points": config.n_points,
        "seed": config.seed,
        "density": config.density.to_dict() if config.density is not None else None,
    }
    with header_path.open("w", encoding="utf-8") as file:
        json.dump(header, file, ensure_ascii=False, indent=2, sort_keys=True)
    return header_path


def read_configuration(csv_path: Path) -> ObstacleConfig:
    """write_configuration の逆"""
    points = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    header_path = csv_path.with_suffix(".json")
    seed = density = None
    if header_path.exists():
        with header_path.open(encoding="utf-8") as file:
            header = json.load(file)
        seed = header.get("seed")
        density = DensitySpec.from_dict(header["density"]) if header.get("density") else None
    return ObstacleConfig(points=points, seed=seed, density=density)
