"""非スケールの動径ポテンシャル V と分解 u = |V|^{1/2}, v = |V|^{1/2}·sgn V。"""

from collections.abc import Callable
from dataclasses import dataclass, replace
import logging
import math
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc

from src.data_models import PotentialShape, PotentialSpec
from src.errors import ConfigurationError
from src.potentials.quadrature import Grid3D, quadrature_grid

QUAD_LIMIT = 200

logger = logging.getLogger(__name__)


def load_radial_table(path: str | Path, value_column: str) -> tuple[np.ndarray, np.ndarray]:
    """
    動径テーブル CSV(ヘッダ r,<value_column>)を読み込む。

    Args:
        path: CSV ファイルのパス
        value_column: 値の列名("V" または "W")

    Returns:
        (r, values) のタプル
    """
    table = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    if table.size == 0 or table.dtype.names is None or "r" not in table.dtype.names or value_column not in table.dtype.names:
        raise ConfigurationError(f"Table {path} must have columns r,{value_column}", {"path": str(path)})
    return np.atleast_1d(table["r"]).astype(float), np.atleast_1d(table[value_column]).astype(float)


def validate_radial_table(radii: np.ndarray, values: np.ndarray, name: str) -> None:
    """動径テーブルの形式チェック(空でない・有限・狭義単調増加)"""
    if radii.size == 0 or values.size == 0:
        raise ConfigurationError(f"{name} table is empty")
    if radii.shape != values.shape:
        raise ConfigurationError(f"{name} table columns differ in length", {"r": radii.size, "values": values.size})
    if not (np.all(np.isfinite(radii)) and np.all(np.isfinite(values))):
        raise ConfigurationError(f"{name} table has non-finite entries")
    if radii[0] < 0 or np.any(np.diff(radii) <= 0):
        raise ConfigurationError(f"{name} table radii must be non-negative and strictly increasing")


@dataclass(frozen=True, eq=False)
class PotentialModel:
    """
    動径ポテンシャル V(x) = profile(|x|)(台の外では 0)

    Attributes:
        spec (PotentialSpec): 元の設定
        support_radius (float): 台の半径
        table_r (np.ndarray | None): テーブル形状の動径ノット
        table_v (np.ndarray | None): テーブル形状の値(振幅倍率を掛ける前)
    """

    spec: PotentialSpec
    support_radius: float
    table_r: np.ndarray | None = None
    table_v: np.ndarray | None = None

    @property
    def shape(self) -> PotentialShape:
        return self.spec.shape

    @property
    def amplitude(self) -> float:
        return self.spec.amplitude

    @property
    def is_zero(self) -> bool:
        if self.amplitude == 0.0:
            return True
        return self.table_v is not None and not np.any(self.table_v)

    @property
    def knots(self) -> tuple[float, ...]:
        """プロファイルが滑らかでない動径(テーブルのノット)"""
        if self.table_r is None:
            return ()
        return tuple(float(r) for r in self.table_r if 0.0 < r < self.support_radius)

    def profile(self, r: np.ndarray | float) -> np.ndarray:
        """動径プロファイル V(r)"""
        r = np.asarray(r, dtype=float)
        inside = r <= self.support_radius
        if self.shape is PotentialShape.SQUARE_WELL:
            values = np.full(r.shape, self.amplitude)
        elif self.shape is PotentialShape.GAUSSIAN:
            values = self.amplitude * np.exp(-((r / self.spec.width) ** 2))
        else:
            values = self.amplitude * np.interp(r, self.table_r, self.table_v, right=0.0)
        return np.where(inside, values, 0.0)

    def V(self, points: np.ndarray) -> np.ndarray:
        """V(x) を評価"""
        return self.profile(np.linalg.norm(np.asarray(points, dtype=float), axis=-1))

    def u(self, points: np.ndarray) -> np.ndarray:
        """u(x) = |V(x)|^{1/2}"""
        return np.sqrt(np.abs(self.V(points)))

    def v(self, points: np.ndarray) -> np.ndarray:
        """v(x) = |V(x)|^{1/2}·sgn V(x)"""
        values = self.V(points)
        return np.sqrt(np.abs(values)) * np.sign(values)

    def max_abs(self) -> float:
        """sup |V|"""
        if self.shape is PotentialShape.TABULATED_RADIAL:
            return float(abs(self.amplitude) * np.max(np.abs(self.table_v)))
        return abs(self.amplitude)

    def _radial_integral(self, integrand: Callable[[float], float]) -> float:
        points = list(self.knots) or None
        value, _ = quad(integrand, 0.0, self.support_radius, points=points, limit=QUAD_LIMIT, epsabs=0.0, epsrel=1e-12)
        return 4.0 * math.pi * value

    def l1_norm(self) -> float:
        """‖V‖₁"""
        return self._radial_integral(lambda r: abs(float(self.profile(r))) * r**2)

    def weighted_l1_norm(self) -> float:
        """‖(1+|x|⁴)V‖₁"""
        return self._radial_integral(lambda r: abs(float(self.profile(r))) * (1.0 + r**4) * r**2)

    def l3_norm(self) -> float:
        """‖V‖₃"""
        return self._radial_integral(lambda r: abs(float(self.profile(r))) ** 3 * r**2) ** (1.0 / 3.0)

    def truncation_error(self) -> float:
        """打ち切りで失われた L¹ 質量(ガウス型のみ非零)"""
        if self.shape is not PotentialShape.GAUSSIAN:
            return 0.0
        width = self.spec.width
        t = self.support_radius / width
        tail = t * math.exp(-(t**2)) / 2.0 + math.sqrt(math.pi) / 4.0 * float(erfc(t))
        return 4.0 * math.pi * abs(self.amplitude) * width**3 * tail

    def diagnostics(self) -> dict[str, float]:
        """可積分性の診断値"""
        return {
            "l1_norm": self.l1_norm(),
            "weighted_l1_norm": self.weighted_l1_norm(),
            "l3_norm": self.l3_norm(),
            "truncation_error": self.truncation_error(),
            "support_radius": self.support_radius,
        }

    def grid_l1_norm(self, grid: Grid3D) -> float:
        """グリッド求積による ‖V‖₁(求積収束の確認用)"""
        return grid.integrate(np.abs(self.V(grid.nodes)))

    def rescaled(self, n: float) -> "PotentialModel":
        """
        Gross–Pitaevskii スケーリング N²V(N·) のポテンシャルを返す。

        Args:
            n: スケール N

        Returns:
            振幅 N² 倍、台と幅が 1/N 倍のモデル
        """
        if not n > 0:
            raise ConfigurationError(f"Scale must be positive, got {n}")
        spec = replace(
            self.spec,
            amplitude=self.amplitude * n**2,
            support_radius=self.support_radius / n,
            width=self.spec.width / n,
            table_path=None,
            table_r=tuple(float(r) / n for r in self.table_r) if self.table_r is not None else None,
            table_v=tuple(float(v) for v in self.table_v) if self.table_v is not None else None,
        )
        return make_potential(spec)


def make_potential(spec: PotentialSpec) -> PotentialModel:
    """
    設定ブロックからポテンシャルモデルを作成する。

    Args:
        spec: ポテンシャル設定

    Returns:
        V, u, v の評価と診断値を持つ PotentialModel
    """
    if not math.isfinite(spec.amplitude):
        raise ConfigurationError(f"Potential amplitude must be finite, got {spec.amplitude}")
    if spec.support_radius is not None and not (spec.support_radius > 0 and math.isfinite(spec.support_radius)):
        raise ConfigurationError(f"Support radius must be positive, got {spec.support_radius}")

    table_r = table_v = None
    if spec.shape is PotentialShape.SQUARE_WELL:
        support_radius = spec.support_radius if spec.support_radius is not None else 1.0
    elif spec.shape is PotentialShape.GAUSSIAN:
        if not spec.width > 0:
            raise ConfigurationError(f"Gaussian width must be positive, got {spec.width}")
        support_radius = spec.support_radius if spec.support_radius is not None else spec.truncation_widths * spec.width
    else:
        if spec.table_r is not None and spec.table_v is not None:
            table_r, table_v = np.asarray(spec.table_r, dtype=float), np.asarray(spec.table_v, dtype=float)
        elif spec.table_path:
            table_r, table_v = load_radial_table(spec.table_path, "V")
        else:
            raise ConfigurationError("Tabulated potential needs table_path or inline table_r/table_v")
        validate_radial_table(table_r, table_v, "Potential")
        support_radius = spec.support_radius if spec.support_radius is not None else float(table_r[-1])
        table_r.setflags(write=False)
        table_v.setflags(write=False)

    model = PotentialModel(spec=spec, support_radius=float(support_radius), table_r=table_r, table_v=table_v)
    if model.truncation_error() > 1e-8 * max(model.l1_norm(), 1e-300):
        logger.warning("Gaussian truncation loses %.3e of ‖V‖₁", model.truncation_error())
    return model


def default_grid(model: PotentialModel, n_radial: int = 24, n_angular: int = 4) -> Grid3D:
    """ポテンシャル台の既定グリッド"""
    return quadrature_grid(model.support_radius, n_radial, n_angular)
