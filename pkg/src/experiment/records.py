"""実験ディレクトリへの成果物の書き出し。

1 実験 = 1 ディレクトリ <out>/<subcommand>-<hash12>。既存のディレクトリには書き込まず、-2, -3, ... を付ける。
CSV の浮動小数点は repr で書くので、同じ設定からはバイト単位で同じファイルになる。
"""

import csv
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np

logger = logging.getLogger(__name__)

PLOT_SCRIPT = '''"""Plots for this experiment directory (requires matplotlib)."""

import csv
import json
import math
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent


def read_rows(name):
    path = HERE / name
    if not path.exists():
        return []
    with path.open(encoding="utf-8") as file:
        return list(csv.DictReader(file))


def plot_convergence(summary):
    fit = summary.get("fit")
    if not fit:
        return
    rows = [row for row in read_rows("trials.csv") if row.get("status") == "ok"]
    figure, axis = plt.subplots()
    axis.loglog([float(r["n"]) for r in rows], [float(r["error"]) for r in rows], ".", alpha=0.3, label="trials")
    axis.loglog(fit["n_values"], fit["error_values"], "o-", label=f"median, slope {fit['slope']:.3f}")
    axis.set_xlabel("N")
    axis.set_ylabel("error")
    axis.legend()
    figure.savefig(HERE / "convergence.png", dpi=150)


def plot_fluctuations(summary):
    rows = [row for row in read_rows("eta.csv") if row.get("status") == "ok"]
    if not rows:
        return
    eta = [float(r["eta"]) for r in rows]
    mean = sum(eta) / len(eta)
    variance = sum((e - mean) ** 2 for e in eta) / max(len(eta) - 1, 1)
    figure, axis = plt.subplots()
    axis.hist(eta, bins=50, density=True, alpha=0.6, label="eta")
    if variance > 0:
        sigma = math.sqrt(variance)
        grid = [mean + sigma * (k / 25.0 - 4.0) for k in range(201)]
        axis.plot(grid, [math.exp(-((x - mean) ** 2) / (2 * variance)) / (sigma * math.sqrt(2 * math.pi)) for x in grid], label="Gaussian")
    axis.legend()
    figure.savefig(HERE / "fluctuations.png", dpi=150)


if __name__ == "__main__":
    summary = json.loads((HERE / "summary.json").read_text(encoding="utf-8"))
    plot_convergence(summary)
    plot_fluctuations(summary)
'''


def canonical_json(data: Any) -> str:
    """キー順を固定した区切りなしの JSON"""
    return json.dumps(jsonable(data), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(config: dict[str, Any]) -> str:
    """解決済み設定の SHA-256"""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def jsonable(data: Any) -> Any:
    """numpy 型や非有限値を JSON に書ける形へ変換する(NaN, ±inf は None)"""
    if isinstance(data, dict):
        return {str(key): jsonable(value) for key, value in data.items()}
    if isinstance(data, list | tuple):
        return [jsonable(value) for value in data]
    if isinstance(data, np.ndarray):
        return [jsonable(value) for value in data.tolist()]
    if isinstance(data, np.bool_):
        return bool(data)
    if isinstance(data, np.integer):
        return int(data)
    if isinstance(data, float | np.floating):
        value = float(data)
        return value if math.isfinite(value) else None
    if isinstance(data, Path):
        return str(data)
    return data


def save_json(path: Path, data: object) -> None:
    """
    JSONデータをファイルに保存する。

    Args:
        path: 保存先のファイルパス
        data: 保存するデータオブジェクト
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as file:
        json.dump(jsonable(data), file, ensure_ascii=False, indent=2, sort_keys=True)
        file.write("\n")


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool | np.bool_):
        return "true" if value else "false"
    if isinstance(value, float | np.floating):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path: Path, rows: list[dict[str, Any]], columns: list[str] | None = None) -> Path:
    """
    行を CSV に書き出す。

    Args:
        path: 出力パス
        rows: 行(辞書)のリスト
        columns: 列順。None なら行に現れた順のキーの和集合

    Returns:
        書き出したパス
    """
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(key for key in row if key not in columns)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row.get(column)) for column in columns])
    logger.debug("wrote %d rows to %s", len(rows), path)
    return path


def unique_output_dir(base: Path, subcommand: str, digest: str) -> Path:
    """
    <base>/<subcommand>-<hash12> を作る。既にあれば -2, -3, ... を付ける。

    Args:
        base: 出力ベースディレクトリ
        subcommand: サブコマンド名
        digest: 設定ハッシュ

    Returns:
        新しく作ったディレクトリ
    """
    stem = f"{subcommand}-{digest[:12]}"
    candidate = base / stem
    suffix = 2
    while candidate.exists():
        candidate = base / f"{stem}-{suffix}"
        suffix += 1
    candidate.mkdir(parents=True)
    return candidate


def write_plot_script(directory: Path) -> Path:
    """matplotlib のプロットスクリプトを書き出す(実行はしない)"""
    path = directory / "plot_results.py"
    path.write_text(PLOT_SCRIPT, encoding="utf-8")
    return path
