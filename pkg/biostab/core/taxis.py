"""
走光性関数モジュール

光強度 G に対する平均遊泳応答 M(G) を提供します。
M は G < G_c で正（光へ向かう）、G > G_c で負（光から離れる）です。
形状は TaxisShape レコードで選択します:

- 'tanh': M(G) = tanh(s·(1 − G/G_c))。G ≤ G_c で厳密に正（既定）
- 'sine': M(G) = 0.8 sin(3πχ/2) − 0.1 sin(πχ/2)、χ(G) = χ_sat(1 − e^(−G/g_s))。
  χ(G_c) が応答の零点になるよう g_s を決めます
"""

import logging
import math
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq

from ..data.models import TaxisShape
from ..utils.errors import ValidationError

ArrayLike = Union[float, np.ndarray]

logger = logging.getLogger(__name__)


def _photo_response(chi: ArrayLike) -> ArrayLike:
    return 0.8 * np.sin(1.5 * np.pi * chi) - 0.1 * np.sin(0.5 * np.pi * chi)


def _photo_response_slope(chi: ArrayLike) -> ArrayLike:
    return 1.2 * np.pi * np.cos(1.5 * np.pi * chi) - 0.05 * np.pi * np.cos(0.5 * np.pi * chi)


# 応答関数の最初の正の零点
_RESPONSE_ZERO = brentq(_photo_response, 0.5, 0.7, xtol=1e-15)


class ShapedTaxis:
    """形状レコードから構築する走光性関数"""

    def __init__(self, critical_intensity: float, shape: Optional[TaxisShape] = None):
        """
        初期化

        Args:
            critical_intensity: 臨界光強度 G_c
            shape: 形状レコード（省略時は tanh）
        """
        self.critical_intensity = float(critical_intensity)
        self.shape = shape or TaxisShape()
        if self.shape.kind == "sine":
            if self.shape.saturation <= _RESPONSE_ZERO:
                raise ValidationError("χ の飽和値は応答の零点より大きい必要があります",
                                      field='saturation', value=self.shape.saturation)
            self._g_scale = -self.critical_intensity / math.log(1.0 - _RESPONSE_ZERO / self.shape.saturation)

    @property
    def identifier(self) -> str:
        if self.shape.kind == "tanh":
            return f"tanh(steepness={self.shape.steepness!r},g_c={self.critical_intensity!r})"
        return f"sine(saturation={self.shape.saturation!r},g_c={self.critical_intensity!r})"

    def _chi(self, g: np.ndarray) -> np.ndarray:
        return self.shape.saturation * (1.0 - np.exp(-g / self._g_scale))

    def value(self, g: ArrayLike) -> ArrayLike:
        gs = np.asarray(g, dtype=float)
        if self.shape.kind == "tanh":
            out = np.tanh(self.shape.steepness * (1.0 - gs / self.critical_intensity))
        else:
            out = _photo_response(self._chi(gs))
        return float(out) if np.ndim(g) == 0 else out

    def derivative(self, g: ArrayLike) -> ArrayLike:
        gs = np.asarray(g, dtype=float)
        if self.shape.kind == "tanh":
            s = self.shape.steepness
            arg = s * (1.0 - gs / self.critical_intensity)
            out = -(s / self.critical_intensity) / np.cosh(arg) ** 2
        else:
            dchi = (self.shape.saturation / self._g_scale) * np.exp(-gs / self._g_scale)
            out = _photo_response_slope(self._chi(gs)) * dchi
        return float(out) if np.ndim(g) == 0 else out


class ConstantTaxis:
    """一定の遊泳応答（M ≡ const）"""

    def __init__(self, constant: float, critical_intensity: float = 1.0):
        self.constant = float(constant)
        self.critical_intensity = float(critical_intensity)

    @property
    def identifier(self) -> str:
        return f"constant({self.constant!r})"

    def value(self, g: ArrayLike) -> ArrayLike:
        if np.ndim(g) == 0:
            return self.constant
        return np.full(np.shape(g), self.constant)

    def derivative(self, g: ArrayLike) -> ArrayLike:
        if np.ndim(g) == 0:
            return 0.0
        return np.zeros(np.shape(g))


def default_taxis(g_c: float, shape: Optional[TaxisShape] = None) -> ShapedTaxis:
    """
    既定の走光性関数を返す

    Args:
        g_c: 臨界光強度（正）
        shape: 形状レコード（省略時は tanh）

    Returns:
        G_c で唯一の零点を持つ滑らかな走光性関数

    Raises:
        ValidationError: g_c ≤ 0 の場合
    """
    if not g_c > 0:
        raise ValidationError("臨界光強度は正である必要があります", field='g_c', value=g_c)
    taxis = ShapedTaxis(g_c, shape)
    logger.debug(f"走光性関数: {taxis.identifier}")
    return taxis
