"""
有次元量から無次元数への変換
"""

import logging
from typing import Dict

from ..data.models import DimensionalInputs

logger = logging.getLogger(__name__)

# 重力加速度 [m/s^2]
GRAVITY = 9.81


def nondimensionalize(inputs: DimensionalInputs) -> Dict[str, float]:
    """
    有次元の入力からシュミット数、遊泳速度、光学的厚さ、レイリー数を求める

    Args:
        inputs: 検証済みの有次元入力（SI単位）

    Returns:
        'schmidt', 'swim_speed', 'extinction', 'rayleigh' をキーとする辞書
    """
    h = inputs.depth
    d = inputs.diffusivity
    nu = inputs.kinematic_viscosity
    result = {
        'schmidt': nu / d,
        'swim_speed': inputs.cell_speed * h / d,
        'extinction': inputs.extinction_per_cell * inputs.mean_concentration * h,
        'rayleigh': (inputs.mean_concentration * inputs.cell_volume * GRAVITY
                     * inputs.density_offset * h ** 3 / (nu * d)),
    }
    logger.debug(f"無次元数: {result}")
    return result
