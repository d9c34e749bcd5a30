import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np


class PotentialShape(Enum):
    """ポテンシャル形状の定数クラス"""

    SQUARE_WELL = "square-well"
    GAUSSIAN = "gaussian"
    TABULATED_RADIAL = "tabulated-radial"


class DensityFamily(Enum):
    """障害物密度 W の分布族"""

    UNIFORM_BALL = "uniform-ball"
    GAUSSIAN = "gaussian"
    TABULATED_RADIAL = "tabulated-radial"


class ScatteringMethod(Enum):
    """散乱長の計算手法"""

    NYSTROM = "nystrom"
    RADIAL_ODE = "radial-ode"


class DesingularizationScheme(Enum):
    """弱特異カーネルの対角処理"""

    MULTIPOLE = "multipole"
    BALL = "ball"


class EffectiveSolver(Enum):
    """有効電荷方程式のソルバー"""

    BORN = "born"
    DIRECT = "direct"


class SolveMethod(Enum):
    """solve サブコマンドの手法"""

    POINTCHARGE = "pointcharge"
    AGHH = "aghh"
    MICROSCOPIC = "microscopic"
    EFFECTIVE = "effective"


class ComparisonPair(Enum):
    """収束率を測る比較ペア"""

    PSI_HAT_VS_PSI = "psi_hat-psi"
    PSI_VS_PSI_TILDE = "psi-psi_tilde"
    PSI_TILDE_VS_PSI_HAT = "psi_tilde-psi_hat"
    Q_VS_q = "Q-q"
    NQ_VS_Q_EFFECTIVE = "Nq-q_eff"


class CovarianceVariant(Enum):
    """共分散公式の前因子"""

    VERBATIM = "verbatim"
    SYMMETRIC = "symmetric"


def _array_or_none(values: Any) -> np.ndarray | None:
    if values is None:
        return None
    return np.asarray(values, dtype=float)


def _list_or_none(values: np.ndarray | None) -> list[float] | None:
    if values is None:
        return None
    return [float(value) for value in np.asarray(values).ravel()]


@dataclass(frozen=True)
class PotentialSpec:
    """
    ポテンシャルの設定ブロック

    Attributes:
        shape (PotentialShape): 形状
        amplitude (float): 振幅(正で斥力、負で引力)。テーブル形状では倍率
        support_radius (float | None): 台の半径。None の場合は形状から決める
        width (float): ガウス型の幅
        table_path (str | None): テーブル CSV(r,V 列)のパス
        table_r (tuple[float, ...] | None): インラインのテーブル動径
        table_v (tuple[float, ...] | None): インラインのテーブル値
        truncation_widths (float): ガウス型の打ち切り半径(幅の倍数)
    """

    shape: PotentialShape
    amplitude: float
    support_radius: float | None = None
    width: float = 1.0
    table_path: str | None = None
    table_r: tuple[float, ...] | None = None
    table_v: tuple[float, ...] | None = None
    truncation_widths: float = 6.0

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換"""
        return {
            "shape": self.shape.value,
            "amplitude": self.amplitude,
            "support_radius": self.support_radius,
            "width": self.width,
            "table_path": self.table_path,
            "table_r": list(self.table_r) if self.table_r is not None else None,
            "table_v": list(self.table_v) if self.table_v is not None else None,
            "truncation_widths": self.truncation_widths,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PotentialSpec":
        """辞書形式から作成"""
        table_r = data.get("table_r")
        table_v = data.get("table_v")
        return cls(
            shape=PotentialShape(data["shape"]),
            amplitude=float(data["amplitude"]),
            support_radius=data.get("support_radius"),
            width=float(data.get("width", 1.0)),
            table_path=data.get("table_path") or None,
            table_r=tuple(float(r) for r in table_r) if table_r else None,
            table_v=tuple(float(v) for v in table_v) if table_v else None,
            truncation_widths=float(data.get("truncation_widths", 6.0)),
        )


@dataclass(frozen=True)
class DensitySpec:
    """
    障害物の配置密度 W の設定ブロック

    Attributes:
        family (DensityFamily): 分布族
        radius (float): 一様球の半径
        sigma (float): ガウス型の標準偏差
        table_path (str | None): テーブル CSV(r,W 列)のパス
        table_r (tuple[float, ...] | None): インラインのテーブル動径
        table_w (tuple[float, ...] | None): インラインのテーブル値(正規化前)
        p (float | None): W の L^p 指数。None は p = ∞
        truncation_widths (float): ガウス型の打ち切り半径(σ の倍数)
    """

    family: DensityFamily
    radius: float = 1.0
    sigma: float = 0.5
    table_path: str | None = None
    table_r: tuple[float, ...] | None = None
    table_w: tuple[float, ...] | None = None
    p: float | None = None
    truncation_widths: float = 6.0

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換"""
        return {
            "family": self.family.value,
            "radius": self.radius,
            "sigma": self.sigma,
            "table_path": self.table_path,
            "table_r": list(self.table_r) if self.table_r is not None else None,
            "table_w": list(self.table_w) if self.table_w is not None else None,
            "p": self.p,
            "truncation_widths": self.truncation_widths,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DensitySpec":
        """辞書形式から作成"""
        table_r = data.get("table_r")
        table_w = data.get("table_w")
        p = data.get("p")
        return cls(
            family=DensityFamily(data["family"]),
            radius=float(data.get("radius", 1.0)),
            sigma=float(data.get("sigma", 0.5)),
            table_path=data.get("table_path") or None,
            table_r=tuple(float(r) for r in table_r) if table_r else None,
            table_w=tuple(float(w) for w in table_w) if table_w else None,
            p=None if p is None or (isinstance(p, float) and math.isinf(p)) else float(p),
            truncation_widths=float(data.get("truncation_widths", 6.0)),
        )


@dataclass(frozen=True)
class SourceSpec:
    """
    製造解ソース。h(x) = g0·exp(−|x−c|²/s²) と f = (−Δ+λ)h を閉形式で与える。

    Attributes:
        g0 (float): 振幅
        center (tuple[float, float, float]): 中心 c
        width (float): 幅 s
        lam (float): スペクトルパラメータ λ
    """

    g0: float
    center: tuple[float, float, float]
    width: float
    lam: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ValueError(f"Source width must be positive, got {self.width}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"Source lambda must be non-negative, got {self.lam}")

    def _squared_distance(self, points: np.ndarray) -> np.ndarray:
        offsets = np.asarray(points, dtype=float) - np.asarray(self.center)
        return np.einsum("...i,...i->...", offsets, offsets)

    def h(self, points: np.ndarray) -> np.ndarray:
        """プロファイル h = 𝒢^λ f を評価"""
        return self.g0 * np.exp(-self._squared_distance(points) / self.width**2)

    def f(self, points: np.ndarray) -> np.ndarray:
        """ソース f = (λ + 6/s² − 4|x−c|²/s⁴)·h を評価"""
        rho2 = self._squared_distance(points)
        s2 = self.width**2
        return (self.lam + 6.0 / s2 - 4.0 * rho2 / s2**2) * self.g0 * np.exp(-rho2 / s2)

    def f_norm(self) -> float:
        """‖f‖₂ の閉形式"""
        alpha = 1.0 / self.width**2
        base = (math.pi / (2.0 * alpha)) ** 1.5
        a_coef = self.lam + 6.0 * alpha
        b_coef = 4.0 * alpha**2
        integral = a_coef**2 - 2.0 * a_coef * b_coef * 3.0 / (4.0 * alpha) + b_coef**2 * 15.0 / (16.0 * alpha**2)
        return abs(self.g0) * math.sqrt(integral * base)

    def overlap(self, other: "SourceSpec") -> float:
        """
        (f_self, h_other) = λ(h_self, h_other) + (∇h_self, ∇h_other) の閉形式。

        Args:
            other: 相手側のソース(同じ λ)

        Returns:
            内積の値。self と other を入れ替えても同じ値になる。
        """
        if other.lam != self.lam:
            raise ValueError("Sources must share lambda")
        alpha = 1.0 / self.width**2
        beta = 1.0 / other.width**2
        total = alpha + beta
        d2 = float(np.sum((np.asarray(self.center) - np.asarray(other.center)) ** 2))
        gaussian = (math.pi / total) ** 1.5 * math.exp(-alpha * beta * d2 / total)
        gradient = 4.0 * alpha * beta * (1.5 / total - alpha * beta * d2 / total**2)
        return self.g0 * other.g0 * gaussian * (self.lam + gradient)

    def with_lambda(self, lam: float) -> "SourceSpec":
        """λ を差し替えたソースを返す"""
        return SourceSpec(g0=self.g0, center=self.center, width=self.width, lam=lam)

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換"""
        return {"g0": self.g0, "center": list(self.center), "width": self.width, "lam": self.lam}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SourceSpec":
        """辞書形式から作成"""
        return cls(
            g0=float(data["g0"]),
            center=tuple(float(c) for c in data["center"]),
            width=float(data["width"]),
            lam=float(data["lam"]),
        )


@dataclass(frozen=True, eq=False)
class ObstacleConfig:
    """
    障害物配置

    Attributes:
        points (np.ndarray): 形状 (N, 3) の障害物位置 y_i
        seed (int | None): 生成に使った乱数シード
        density (DensitySpec | None): 生成密度
    """

    points: np.ndarray
    seed: int | None = None
    density: DensitySpec | None = None

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=float).reshape(-1, 3)
        if points.shape[0] < 1:
            raise ValueError("Obstacle configuration needs at least one point")
        if not np.all(np.isfinite(points)):
            raise ValueError("Obstacle points must be finite")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @property
    def n_points(self) -> int:
        return int(self.points.shape[0])

    def scaled(self, factor: float) -> "ObstacleConfig":
        """全点を factor 倍した配置を返す"""
        return ObstacleConfig(points=self.points * factor, seed=self.seed, density=self.density)

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換"""
        return {
            "n_points": self.n_points,
            "seed": self.seed,
            "density": self.density.to_dict() if self.density is not None else None,
            "points": self.points.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ObstacleConfig":
        """辞書形式から作成"""
        density = data.get("density")
        return cls(
            points=np.asarray(data["points"], dtype=float),
            seed=data.get("seed"),
            density=DensitySpec.from_dict(density) if density else None,
        )


@dataclass(frozen=True)
class RegularityReport:
    """
    配置の正則性 (Y1)/(Y2)/(Y3) の統計

    Attributes:
        n_points (int): 点数 N
        nu (float): (Y1)/(Y3) の指数 ν
        xi (float): (Y2) の指数 ξ
        y1_constant (float): (Y1) の定数 C
        min_pair_distance (float): 最小点間距離(N = 1 では +∞)
        y1_threshold (float): C·N^{−(1−ν)}
        y1_ok (bool): 最小距離が閾値以上か
        y2_sum (float): (1/N²)Σ_{i≠j}|y_i−y_j|^{−(3−ξ)}
        y2_sum_nu (float): ξ = ν での y2_sum
        y3_sum (float): N^{−(3−ν²)}Σ_{i≠j}|y_i−y_j|^{−4}
        y3_pointwise_bound (float): N^{ν²−1}·d_min^{−(1+ν)}·y2_sum_nu
        y3_chain_bound (float): N^{ν²−1}·C^{−(1+ν)}·N^{(1−ν)(1+ν)}·y2_sum_nu
    """

    n_points: int
    nu: float
    xi: float
    y1_constant: float
    min_pair_distance: float
    y1_threshold: float
    y1_ok: bool
    y2_sum: float
    y2_sum_nu: float
    y3_sum: float
    y3_pointwise_bound: float
    y3_chain_bound: float

    @property
    def has_duplicates(self) -> bool:
        return self.min_pair_distance == 0.0

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換"""
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RegularityReport":
        """辞書形式から作成"""
        return cls(**data)


@dataclass(frozen=True)
class ProbabilityEstimate:
    """
    経験確率と Wilson 信頼区間

    Attributes:
        probability (float): 経験確率
        lower (float): 信頼区間の下端
        upper (float): 信頼区間の上端
        successes (int): 成功数
        trials (int): 試行数
        confidence (float): 信頼水準
    """

    probability: float
    lower: float
    upper: float
    successes: int
    trials: int
    confidence: float = 0.95

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換"""
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class ChargeVector:
    """
    点電荷ベクトル

    Attributes:
        values (np.ndarray): 電荷 q_i
        lam (float): λ
        a (float): 散乱長
        config (ObstacleConfig): 対応する配置
        residual (float): 線形系の残差ノルム
        method (str): 解いた系("pointcharge", "aghh", "microscopic")
        zero_scattering_length (bool): a = 0 の極限として零電荷を返したか
    """

    values: np.ndarray
    lam: float
    a: float
    config: ObstacleConfig
    residual: float = 0.0
    method: str = "pointcharge"
    zero_scattering_length: bool = False

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float).ravel()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_points(self) -> int:
        return int(self.values.shape[0])

    def to_rows(self) -> list[dict[str, Any]]:
        """CSV 用の行 (i, x, y, z, q) に変換"""
        return [
            {"i": i, "x": float(point[0]), "y": float(point[1]), "z": float(point[2]), "q": float(value)}
            for i, (point, value) in enumerate(zip(self.config.points, self.values))
        ]

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換(配置はシードと点数のみ)"""
        return {
            "values": _list_or_none(self.values),
            "lam": self.lam,
            "a": self.a,
            "n_points": self.n_points,
            "seed": self.config.seed,
            "residual": self.residual,
            "method": self.method,
            "zero_scattering_length": self.zero_scattering_length,
        }


@dataclass(frozen=True, eq=False)
class RemainderTerms:
    """
    電荷比較の剰余項。A, B, D は非スケール積分、R = A + B + D。

    電荷方程式は (N/4πa)Q + GQ = −h − (N/4πa)R と書けるので Γ(Q − q) = −R が成り立つ。

    Attributes:
        A (np.ndarray): 自己相互作用の差 𝒢^λ − 𝒢⁰ からの寄与(指数 √λ)
        B (np.ndarray): 他の障害物との単極近似の誤差
        D (np.ndarray): ソースの局所近似の誤差
        A_verbatim (np.ndarray): 指数を λ のまま用いた A
        a (float): 離散散乱長
        n_obstacles (int): N
    """

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    A_verbatim: np.ndarray
    a: float
    n_obstacles: int

    @property
    def R(self) -> np.ndarray:
        return self.A + self.B + self.D

    @property
    def R_verbatim(self) -> np.ndarray:
        return self.A_verbatim + self.B + self.D

    @property
    def equation_remainder(self) -> np.ndarray:
        """電荷方程式の右辺に現れる形 −(N/4πa)R"""
        if self.a == 0.0:
            return np.zeros_like(self.R)
        return -(self.n_obstacles / (4.0 * math.pi * self.a)) * self.R

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.R))

    def to_rows(self) -> list[dict[str, Any]]:
        """CSV 用の行に変換"""
        return [
            {"i": i, "A": float(a_i), "B": float(b_i), "D": float(d_i), "R": float(r_i), "A_verbatim": float(av_i)}
            for i, (a_i, b_i, d_i, r_i, av_i) in enumerate(zip(self.A, self.B, self.D, self.R, self.A_verbatim))
        ]


@dataclass(frozen=True)
class FieldDistance:
    """
    GreenField 間の L² 距離と内訳(二乗値)

    Attributes:
        value (float): L² ノルム
        atom_atom (float): 点電荷同士の寄与
        atom_cloud (float): 点電荷と雲の交差寄与(2 倍込み)
        cloud_cloud (float): 雲同士の寄与
        lam (float): λ
    """

    value: float
    atom_atom: float
    atom_cloud: float
    cloud_cloud: float
    lam: float

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換"""
        return dict(self.__dict__)


@dataclass(frozen=True)
class RateFit:
    """
    log–log 最小二乗による収束率

    Attributes:
        n_values (list[int]): N の列
        error_values (list[float]): 各 N の試行中央値
        slope (float): 傾き β̂
        slope_stderr (float): 傾きの標準誤差
        intercept (float): 切片(log 空間)
        spread (list[dict[str, float]]): 各 N の min / median / max
        trials_per_n (list[int]): 各 N で有効だった試行数
        excluded (int): 失敗で除外した試行数
        label (str): 比較ペアなどの識別子
    """

    n_values: list[int]
    error_values: list[float]
    slope: float
    slope_stderr: float
    intercept: float
    spread: list[dict[str, float]] = field(default_factory=list)
    trials_per_n: list[int] = field(default_factory=list)
    excluded: int = 0
    label: str = ""

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換"""
        return {
            "n_values": list(self.n_values),
            "error_values": list(self.error_values),
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "intercept": self.intercept,
            "spread": list(self.spread),
            "trials_per_n": list(self.trials_per_n),
            "excluded": self.excluded,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RateFit":
        """辞書形式から作成"""
        return cls(**data)


@dataclass(frozen=True)
class CovarianceEstimate:
    """
    揺らぎの理論共分散(二つの前因子)

    Attributes:
        verbatim (float): (4πa)²‖ψ_gψ_f‖²_W − 4πa(ψ_g,ψ_f)²_W
        symmetric (float): (4πa)²(‖ψ_gψ_f‖²_W − (ψ_g,ψ_f)²_W)
        selected (CovarianceVariant): 主に報告する前因子
    """

    verbatim: float
    symmetric: float
    selected: CovarianceVariant = CovarianceVariant.VERBATIM

    @property
    def value(self) -> float:
        return self.verbatim if self.selected is CovarianceVariant.VERBATIM else self.symmetric

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換"""
        return {"verbatim": self.verbatim, "symmetric": self.symmetric, "selected": self.selected.value}


@dataclass(frozen=True, eq=False)
class FluctuationSample:
    """
    揺らぎ η = √N(g, ψ̂_N − ψ) の標本と要約統計

    Attributes:
        eta_values (np.ndarray): 試行ごとの η
        n_points (int): N
        source (SourceSpec): ソース f
        probe (SourceSpec): プローブ g
        summary (dict[str, Any]): 平均・分散・歪度・超過尖度・正規性検定
        rows (list[dict[str, Any]]): 試行ごとの行
    """

    eta_values: np.ndarray
    n_points: int
    source: SourceSpec
    probe: SourceSpec
    summary: dict[str, Any] = field(default_factory=dict)
    rows: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換"""
        return {
            "eta_values": _list_or_none(self.eta_values),
            "n_points": self.n_points,
            "source": self.source.to_dict(),
            "probe": self.probe.to_dict(),
            "summary": dict(self.summary),
        }


@dataclass(frozen=True)
class SweepPlan:
    """
    収束・揺らぎ実験の計画

    Attributes:
        pair (ComparisonPair): 比較ペア
        n_values (tuple[int, ...]): N の列
        trials (int): 各 N の試行数
        master_seed (int): マスターシード
        density (DensitySpec): 障害物密度 W
        potential (PotentialSpec): 非スケールポテンシャル V
        source (SourceSpec): ソース f
        probe (SourceSpec | None): プローブ g(揺らぎ用)
        potential_grid (tuple[int, int]): ポテンシャル台のグリッド次数
        density_grid (tuple[int, int]): W の台のグリッド次数
        nu (float): (Y1) の指数
        xi (float): (Y2) の指数
        y1_constant (float | None): (Y1) の定数。None は最小の N で一度だけ較正し全 N で共有
        scheme (DesingularizationScheme): 対角処理
        threads (int): ワーカー数
    """

    pair: ComparisonPair
    n_values: tuple[int, ...]
    trials: int
    master_seed: int
    density: DensitySpec
    potential: PotentialSpec
    source: SourceSpec
    probe: SourceSpec | None = None
    potential_grid: tuple[int, int] = (8, 4)
    density_grid: tuple[int, int] = (16, 8)
    nu: float = 0.05
    xi: float = 1.0
    y1_constant: float | None = None
    scheme: DesingularizationScheme = DesingularizationScheme.MULTIPOLE
    threads: int = 1

    @property
    def lam(self) -> float:
        return self.source.lam


@dataclass
class ExperimentRecord:
    """
    1 回の実験の成果物

    Attributes:
        subcommand (str): 実行したサブコマンド
        config_hash (str): 解決済み設定の SHA-256
        version (str): パッケージのバージョン
        rows (list[dict[str, Any]]): 試行ごとの行
        summary (dict[str, Any]): 要約 JSON
    """

    subcommand: str
    config_hash: str
    version: str
    rows: list[dict[str, Any]] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        """辞書形式に変換"""
        return {
            "subcommand": self.subcommand,
            "config_hash": self.config_hash,
            "version": self.version,
            "rows": list(self.rows),
            "summary": dict(self.summary),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ExperimentRecord":
        """辞書形式から作成"""
        return cls(
            subcommand=data["subcommand"],
            config_hash=data["config_hash"],
            version=data["version"],
            rows=list(data.get("rows", [])),
            summary=dict(data.get("summary", {})),
        )
