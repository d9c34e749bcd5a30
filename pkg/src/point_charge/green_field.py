"""Yukawa 核の重ね合わせで表される場 (GreenField)。

場 = Σ coef·h_src(x) + Σ_a q_a 𝒢^λ(x − y_a) + Σ_m c_m 𝒢^λ(x − z_m)。
点電荷 (atoms) と電荷雲 (clouds) は別ブロックとして保持し、λ が等しい場同士で差を取れる。
"""

from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy.spatial.distance import cdist

from src.data_models import SourceSpec
from src.errors import LambdaMismatchError, SingularKernelError
from src.greens.kernels import yukawa_radial
from src.greens.nystrom import NystromOperator

logger = logging.getLogger(__name__)


def _as_points(points: np.ndarray) -> np.ndarray:
    array = np.array(points, dtype=float).reshape(-1, 3)
    array.setflags(write=False)
    return array


def _as_charges(charges: np.ndarray) -> np.ndarray:
    array = np.array(charges, dtype=float).ravel()
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ChargeCloud:
    """
    求積ノード上の電荷雲

    Attributes:
        points (np.ndarray): ノード z_m
        charges (np.ndarray): 重み込みの電荷 w_m·c_m
        operator (NystromOperator | None): 特異核を扱う評価器(ノード上での評価用)
        density (np.ndarray | None): operator に渡すノード密度 c_m
    """

    points: np.ndarray
    charges: np.ndarray
    operator: NystromOperator | None = None
    density: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", _as_points(self.points))
        object.__setattr__(self, "charges", _as_charges(self.charges))

    def negated(self) -> "ChargeCloud":
        density = -self.density if self.density is not None else None
        return ChargeCloud(points=self.points, charges=-self.charges, operator=self.operator, density=density)

    def detached(self) -> "ChargeCloud":
        return ChargeCloud(points=self.points, charges=self.charges)

    def evaluate(self, points: np.ndarray, kappa: float) -> np.ndarray:
        if self.operator is not None and self.density is not None:
            return self.operator.evaluate_at(points, self.density)
        distances = cdist(points, self.points)
        coincident = distances == 0.0
        kernel = np.where(coincident, 0.0, yukawa_radial(np.where(coincident, 1.0, distances), kappa))
        return kernel @ self.charges


@dataclass(frozen=True, eq=False)
class GreenField:
    """
    λ を共有する Green 関数の重ね合わせ

    Attributes:
        lam (float): λ
        base_terms (tuple[tuple[float, SourceSpec], ...]): 製造解プロファイルの係数とソース
        atom_points (np.ndarray): 点電荷の位置
        atom_charges (np.ndarray): 点電荷
        clouds (tuple[ChargeCloud, ...]): 電荷雲
    """

    lam: float
    base_terms: tuple[tuple[float, SourceSpec], ...] = ()
    atom_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    atom_charges: np.ndarray = field(default_factory=lambda: np.zeros(0))
    clouds: tuple[ChargeCloud, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "atom_points", _as_points(self.atom_points))
        object.__setattr__(self, "atom_charges", _as_charges(self.atom_charges))
        if self.atom_points.shape[0] != self.atom_charges.shape[0]:
            raise ValueError("atom_points and atom_charges differ in length")
        for _, source in self.base_terms:
            if source.lam != self.lam:
                raise LambdaMismatchError("Source lambda differs from field lambda", {"field": self.lam, "source": source.lam})

    @property
    def kappa(self) -> float:
        return math.sqrt(self.lam)

    @property
    def cloud_points(self) -> np.ndarray:
        if not self.clouds:
            return np.zeros((0, 3))
        return np.concatenate([cloud.points for cloud in self.clouds])

    @property
    def cloud_charges(self) -> np.ndarray:
        if not self.clouds:
            return np.zeros(0)
        return np.concatenate([cloud.charges for cloud in self.clouds])

    def base_value(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        total = np.zeros(points.shape[0])
        for coefficient, source in self.base_terms:
            total += coefficient * source.h(points)
        return total

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """
        任意点で場を評価する。

        Args:
            points: 形状 (P, 3) の評価点(点電荷の位置は不可)

        Returns:
            形状 (P,) の値
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        total = self.base_value(points)
        if self.atom_charges.size:
            distances = cdist(points, self.atom_points)
            if np.any(distances == 0.0):
                raise SingularKernelError("Field evaluated on a point charge")
            total += yukawa_radial(distances, self.kappa) @ self.atom_charges
        for cloud in self.clouds:
            total += cloud.evaluate(points, self.kappa)
        return total

    def _check_lambda(self, other: "GreenField") -> None:
        if other.lam != self.lam:
            raise LambdaMismatchError("Fields have different lambda", {"left": self.lam, "right": other.lam})

    def __neg__(self) -> "GreenField":
        return GreenField(
            lam=self.lam,
            base_terms=tuple((-coefficient, source) for coefficient, source in self.base_terms),
            atom_points=self.atom_points,
            atom_charges=-self.atom_charges,
            clouds=tuple(cloud.negated() for cloud in self.clouds),
        )

    def __add__(self, other: "GreenField") -> "GreenField":
        self._check_lambda(other)
        coefficients: dict[SourceSpec, float] = {}
        for coefficient, source in self.base_terms + other.base_terms:
            coefficients[source] = coefficients.get(source, 0.0) + coefficient
        base_terms = tuple((coefficient, source) for source, coefficient in coefficients.items() if coefficient != 0.0)
        return GreenField(
            lam=self.lam,
            base_terms=base_terms,
            atom_points=np.concatenate([self.atom_points, other.atom_points]),
            atom_charges=np.concatenate([self.atom_charges, other.atom_charges]),
            clouds=self.clouds + other.clouds,
        )

    def __sub__(self, other: "GreenField") -> "GreenField":
        return self + (-other)

    def detached(self) -> "GreenField":
        """評価器を外した(プロセス間で軽く送れる)コピー"""
        return GreenField(
            lam=self.lam,
            base_terms=self.base_terms,
            atom_points=self.atom_points,
            atom_charges=self.atom_charges,
            clouds=tuple(cloud.detached() for cloud in self.clouds),
        )


def source_field(source: SourceSpec) -> GreenField:
    """h = 𝒢^λ f のみの場"""
    return GreenField(lam=source.lam, base_terms=((1.0, source),))
