"""ラボ全体で共有する例外クラス。

入力検証の失敗は ConfigurationError(ValueError)、数値解法の失敗は SolverError(RuntimeError) の系列にまとめる。
CLI はこの二系統を終了コード 2 / 3 に対応付ける。
"""

from typing import Any


class LorentzGasError(Exception):
    """ラボ固有の例外の基底クラス"""

    def __init__(self, message: str, details: dict[str, Any] | None = None) -> None:
        super().__init__(message)
        self.details: dict[str, Any] = dict(details or {})

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換"""
        return {"error": type(self).__name__, "message": str(self), "details": self.details}


class ConfigurationError(LorentzGasError, ValueError):
    """入力・設定の検証エラー"""


class UnsupportedQuadratureError(ConfigurationError):
    """サポートされていない求積次数"""


class UnnormalizableDensityError(ConfigurationError):
    """正規化できない密度テーブル"""


class DuplicatePointsError(ConfigurationError):
    """障害物配置に重複点がある"""


class SingularKernelError(ConfigurationError):
    """特異点上でのカーネル評価"""


class LambdaMismatchError(ConfigurationError):
    """λ の異なる場同士の演算"""


class UnequalBaseError(ConfigurationError):
    """相殺しない基底項を含む場の L² ノルム"""


class GridMismatchError(ConfigurationError):
    """異なるグリッド上の量の組み合わせ"""


class CapExceededError(ConfigurationError):
    """未知数の上限超過"""


class SolverError(LorentzGasError, RuntimeError):
    """数値解法の失敗"""


class ResonanceDetectedError(SolverError):
    """ゼロエネルギー共鳴(Birman–Schwinger マージンが閾値以下)"""


class NonConvergenceError(SolverError):
    """反復・直接解法が許容誤差に到達しない"""


class StepSizeUnderflowError(SolverError):
    """ODE 積分のステップ幅アンダーフロー"""


class SingularSystemError(SolverError):
    """線形系が数値的に特異"""


class SingularXiError(SolverError):
    """点相互作用の Ξ 行列が特異"""


class SingularBlockSystemError(SolverError):
    """微視的ブロック系が解けない"""


class BornDivergedError(SolverError):
    """Born 反復の縮小率が 1 以上"""
