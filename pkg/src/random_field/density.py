"""障害物の配置密度 W(一様球・打ち切りガウス・動径テーブル)。"""

from dataclasses import dataclass
import logging
import math

import numpy as np
from scipy.integrate import cumulative_trapezoid, quad
from scipy.stats import chi2

from src.data_models import DensityFamily, DensitySpec
from src.errors import ConfigurationError, UnnormalizableDensityError
from src.potentials.potential_model import load_radial_table, validate_radial_table

QUAD_LIMIT = 200
CDF_RESOLUTION = 4096
MASS_DEFECT_WARNING = 1e-6
NORMALIZATION_TOL = 1e-8

logger = logging.getLogger(__name__)


def nu_star(p: float | None) -> float:
    """ν*(p) = (p−3)/(3(p−1))。p = None(∞)では 1/3"""
    if p is None or math.isinf(p):
        return 1.0 / 3.0
    if p <= 3:
        raise ConfigurationError(f"The L^p exponent of W must exceed 3, got {p}")
    return (p - 3.0) / (3.0 * (p - 1.0))


@dataclass(frozen=True, eq=False)
class DensityModel:
    """
    正規化済みの動径密度 W

    Attributes:
        spec (DensitySpec): 元の設定
        support_radius (float): 数値的な台の半径
        normalization (float): 正規化前の ∫W(テーブル・ガウスの打ち切り補正)
        mass_defect (float): 打ち切りで失われた質量
        table_r (np.ndarray | None): テーブルの動径
        table_w (np.ndarray | None): テーブルの値(正規化前)
    """

    spec: DensitySpec
    support_radius: float
    normalization: float = 1.0
    mass_defect: float = 0.0
    table_r: np.ndarray | None = None
    table_w: np.ndarray | None = None

    @property
    def family(self) -> DensityFamily:
        return self.spec.family

    def radial(self, r: np.ndarray | float) -> np.ndarray:
        """W(r)"""
        r = np.asarray(r, dtype=float)
        inside = r <= self.support_radius
        if self.family is DensityFamily.UNIFORM_BALL:
            values = np.full(r.shape, 3.0 / (4.0 * math.pi * self.support_radius**3))
        elif self.family is DensityFamily.GAUSSIAN:
            sigma = self.spec.sigma
            values = np.exp(-(r**2) / (2.0 * sigma**2)) / ((2.0 * math.pi * sigma**2) ** 1.5 * self.normalization)
        else:
            values = np.interp(r, self.table_r, self.table_w, right=0.0) / self.normalization
        return np.where(inside, values, 0.0)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """W(x)"""
        return self.radial(np.linalg.norm(np.asarray(points, dtype=float), axis=-1))

    def _radial_integral(self, power: float) -> float:
        points = [float(r) for r in self.table_r if 0 < r < self.support_radius] if self.table_r is not None else None
        value, _ = quad(
            lambda r: float(self.radial(r)) ** power * r**2,
            0.0,
            self.support_radius,
            points=points or None,
            limit=QUAD_LIMIT,
            epsabs=0.0,
            epsrel=1e-12,
        )
        return 4.0 * math.pi * value

    def total_mass(self) -> float:
        """∫W(正規化の確認用)"""
        return self._radial_integral(1.0)

    def lp_norm(self, p: float | None = None) -> float:
        """‖W‖_p(p = None は sup ノルム)"""
        p = self.spec.p if p is None else p
        if p is None or math.isinf(p):
            if self.family is DensityFamily.TABULATED_RADIAL:
                return float(np.max(self.table_w) / self.normalization)
            return float(self.radial(0.0))
        return self._radial_integral(p) ** (1.0 / p)

    def nu_star(self) -> float:
        return nu_star(self.spec.p)

    def sample_radii(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """動径 |y| の独立標本"""
        if self.family is DensityFamily.UNIFORM_BALL:
            return self.support_radius * rng.random(n) ** (1.0 / 3.0)
        if self.family is DensityFamily.GAUSSIAN:
            return np.linalg.norm(self._sample_gaussian(rng, n), axis=1)
        grid = np.union1d(np.linspace(0.0, self.support_radius, CDF_RESOLUTION + 1), self.table_r[self.table_r <= self.support_radius])
        cdf = cumulative_trapezoid(4.0 * math.pi * grid**2 * self.radial(grid), grid, initial=0.0)
        cdf /= cdf[-1]
        return np.interp(rng.random(n), cdf, grid)

    def _sample_gaussian(self, rng: np.random.Generator, n: int) -> np.ndarray:
        accepted: list[np.ndarray] = []
        remaining = n
        while remaining > 0:
            batch = rng.normal(0.0, self.spec.sigma, size=(max(remaining, 16), 3))
            batch = batch[np.linalg.norm(batch, axis=1) <= self.support_radius]
            accepted.append(batch[:remaining])
            remaining -= accepted[-1].shape[0]
        return np.concatenate(accepted)

    def sample_points(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """形状 (n, 3) の独立標本"""
        if self.family is DensityFamily.GAUSSIAN:
            return self._sample_gaussian(rng, n)
        radii = self.sample_radii(rng, n)
        directions = rng.normal(size=(n, 3))
        directions /= np.linalg.norm(directions, axis=1)[:, None]
        return radii[:, None] * directions


def make_density(spec: DensitySpec) -> DensityModel:
    """
    設定ブロックから正規化済み密度を作成する。

    Args:
        spec: 密度の設定

    Returns:
        ∫W = 1 の DensityModel
    """
    if spec.p is not None:
        nu_star(spec.p)
    if spec.family is DensityFamily.UNIFORM_BALL:
        if not (spec.radius > 0 and math.isfinite(spec.radius)):
            raise ConfigurationError(f"Uniform ball radius must be positive, got {spec.radius}")
        return DensityModel(spec=spec, support_radius=float(spec.radius))

    if spec.family is DensityFamily.GAUSSIAN:
        if not spec.sigma > 0:
            raise ConfigurationError(f"Gaussian sigma must be positive, got {spec.sigma}")
        defect = float(chi2.sf(spec.truncation_widths**2, 3))
        if defect > MASS_DEFECT_WARNING:
            logger.warning("Gaussian W の打ち切りで質量 %.3e を失う(再正規化済み)", defect)
        return DensityModel(
            spec=spec, support_radius=spec.truncation_widths * spec.sigma, normalization=1.0 - defect, mass_defect=defect
        )

    if spec.table_r is not None and spec.table_w is not None:
        table_r, table_w = np.asarray(spec.table_r, dtype=float), np.asarray(spec.table_w, dtype=float)
    elif spec.table_path:
        table_r, table_w = load_radial_table(spec.table_path, "W")
    else:
        raise ConfigurationError("Tabulated density needs table_path or inline table_r/table_w")
    try:
        validate_radial_table(table_r, table_w, "Density")
    except ConfigurationError as exc:
        raise UnnormalizableDensityError(str(exc), exc.details) from exc
    if np.any(table_w < 0):
        raise UnnormalizableDensityError("Density table has negative values")
    unnormalized = DensityModel(spec=spec, support_radius=float(table_r[-1]), table_r=table_r, table_w=table_w)
    mass = unnormalized.total_mass()
    if not (mass > 0 and math.isfinite(mass)):
        raise UnnormalizableDensityError("Density table integrates to zero", {"mass": mass})
    model = DensityModel(spec=spec, support_radius=float(table_r[-1]), normalization=mass, table_r=table_r, table_w=table_w)
    if abs(model.total_mass() - 1.0) > NORMALIZATION_TOL:
        raise UnnormalizableDensityError("Density normalization failed", {"mass": model.total_mass()})
    return model
