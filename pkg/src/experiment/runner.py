"""試行の並列実行。

各試行は (関数, タスク) の純粋な計算で、結果はタスク順に返す。
threads = 1 では同一プロセスで順に実行する。
"""

from collections.abc import Callable, Sequence
import logging
from multiprocessing import Pool
import os
from typing import Any, TypeVar

from dotenv import load_dotenv

from src.errors import LorentzGasError

T = TypeVar("T")
R = TypeVar("R")

DEFAULT_THREADS = 1
CHUNKS_PER_WORKER = 4

logger = logging.getLogger(__name__)


def default_threads() -> int:
    """LORENTZ_THREADS(.env 可)から既定のワーカー数を読む"""
    load_dotenv()
    value = os.getenv("LORENTZ_THREADS")
    if not value:
        return DEFAULT_THREADS
    try:
        return max(1, int(value))
    except ValueError:
        logger.warning("LORENTZ_THREADS=%r is not an integer; using %d", value, DEFAULT_THREADS)
        return DEFAULT_THREADS


def run_trials(function: Callable[[T], R], tasks: Sequence[T], threads: int | None = None) -> list[R]:
    """
    タスク列に関数を適用する。

    Args:
        function: トップレベル関数(プロセス間で pickle される)
        tasks: タスク列
        threads: ワーカー数。None は LORENTZ_THREADS

    Returns:
        タスク順の結果リスト
    """
    threads = default_threads() if threads is None else max(1, int(threads))
    tasks = list(tasks)
    if threads == 1 or len(tasks) <= 1:
        return [function(task) for task in tasks]
    chunksize = max(1, len(tasks) // (threads * CHUNKS_PER_WORKER))
    logger.info("running %d trials on %d workers", len(tasks), threads)
    with Pool(processes=min(threads, len(tasks))) as pool:
        return pool.map(function, tasks, chunksize=chunksize)


def guarded(function: Callable[[T], dict[str, Any]], task: T) -> dict[str, Any]:
    """
    ソルバーの失敗を行として記録する。

    Args:
        function: 試行関数
        task: タスク

    Returns:
        成功時は試行関数の行に status="ok"、失敗時は status=例外名の行
    """
    try:
        row = function(task)
    except LorentzGasError as exc:
        logger.warning("trial failed: %s: %s", type(exc).__name__, exc)
        return {"status": type(exc).__name__, "error": float("nan")}
    row.setdefault("status", "ok")
    return row
