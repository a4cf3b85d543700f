"""
固有関数の時間発展

中立点での固有対から w₁(x, z, t) = Re[W(z) exp(σt + ikx)] と n₁ を再構成します。
中立では Re σ = 0 とみなし、σ = i Im σ を使います。
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np

from ..data.models import Branch, Eigenpair, EvolutionSeries, NeutralPoint
from ..utils.errors import DomainError, ValidationError

logger = logging.getLogger(__name__)

# 位相図の1周期あたりのサンプル数
PHASE_SAMPLES = 401


def oscillation_period(point: NeutralPoint) -> Optional[float]:
    """振動周期 2π/Im σ（定常点は None）"""
    if point.branch == Branch.STATIONARY or point.sigma_im == 0:
        return None
    return 2.0 * math.pi / point.sigma_im


def evolution_times(point: NeutralPoint, n_periods: float, n_frames: int) -> np.ndarray:
    """
    スナップショットの時刻

    振動点では [0, n_periods·周期] を両端を含めて n_frames 等分します。

    Raises:
        DomainError: 定常点で n_periods > 0 が指定された場合
    """
    if n_frames < 1:
        raise ValidationError("フレーム数は1以上です", field='n_frames', value=n_frames)
    period = oscillation_period(point)
    if period is None:
        if n_periods > 0:
            raise DomainError("定常点には周期がありません。n_periods=0 で単一スナップショットを出力してください",
                              field='n_periods', value=n_periods)
        return np.zeros(1)
    if n_frames == 1:
        return np.zeros(1)
    return np.linspace(0.0, n_periods * period, n_frames)


def reconstruct_evolution(point: NeutralPoint, eigenpair: Eigenpair, times: Sequence[float],
                          x_samples: int = 64) -> EvolutionSeries:
    """
    中立モードの時間発展と位相図を再構成する

    Args:
        point: 中立点
        eigenpair: 中立点での固有対
        times: スナップショットの時刻
        x_samples: 1波長あたりの x のサンプル数

    Returns:
        スナップショット (n_t, n_z, n_x) と、|W| 最大の高さ・x=0 での (w₁, dw₁/dt) の系列
    """
    if x_samples < 1:
        raise ValidationError("x のサンプル数は1以上です", field='x_samples', value=x_samples)
    times = np.asarray(times, dtype=float)
    k = point.k
    sigma = 1j * eigenpair.sigma_im if point.branch == Branch.OSCILLATORY else 0.0
    x = np.linspace(0.0, 2.0 * math.pi / k, x_samples, endpoint=False)
    wave = np.exp(1j * k * x)
    temporal = np.exp(sigma * times)

    w1 = np.real(temporal[:, None, None] * eigenpair.w[None, :, None] * wave[None, None, :])
    n1 = np.real(temporal[:, None, None] * eigenpair.theta[None, :, None] * wave[None, None, :])

    observed_index = int(np.argmax(np.abs(eigenpair.w)))
    observed_w = eigenpair.w[observed_index]
    period = oscillation_period(point)
    if period is None:
        phase_t = times.copy()
    else:
        phase_t = np.linspace(0.0, period, PHASE_SAMPLES)
    oscillation = observed_w * np.exp(sigma * phase_t)

    logger.debug(f"時間発展を再構成しました (フレーム {times.size}, 周期 {period})")
    return EvolutionSeries(
        times=times, x=x, z=eigenpair.z_grid, w1=w1, n1=n1, period=period,
        observation_point=(0.0, float(eigenpair.z_grid[observed_index])),
        phase_t=phase_t, phase_w1=np.real(oscillation), phase_dw1_dt=np.real(sigma * oscillation),
    )


def orbit_closure_gap(series: EvolutionSeries) -> float:
    """位相図の始点と終点の距離（軌道の直径で正規化、軌道が1点なら 0）"""
    w = series.phase_w1
    dw = series.phase_dw1_dt
    diameter = math.hypot(float(np.ptp(w)), float(np.ptp(dw)))
    if diameter == 0:
        return 0.0
    return math.hypot(float(w[-1] - w[0]), float(dw[-1] - dw[0])) / diameter
