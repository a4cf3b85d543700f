"""
時間発展の再構成のテスト
"""

import math

import numpy as np
import pytest

from biostab.core.chebyshev import unit_grid
from biostab.core.evolution import evolution_times, orbit_closure_gap, oscillation_period, reconstruct_evolution
from biostab.data.models import Branch, Eigenpair, NeutralPoint
from biostab.utils.errors import DomainError, ValidationError


@pytest.fixture
def oscillatory_point():
    return NeutralPoint(k=2.0, rayleigh=300.0, sigma_im=2 * math.pi, branch=Branch.OSCILLATORY, mode=1)


@pytest.fixture
def stationary_point():
    return NeutralPoint(k=2.0, rayleigh=300.0, sigma_im=0.0, branch=Branch.STATIONARY, mode=1)


def make_pair(sigma_im):
    z = unit_grid(33)
    w = np.sin(math.pi * z) * np.exp(0.3j)
    return Eigenpair(sigma_re=0.0, sigma_im=sigma_im, w=w, theta=0.5 * w, z_grid=z, k=2.0, rayleigh=300.0)


def test_period(oscillatory_point, stationary_point):
    assert oscillation_period(oscillatory_point) == pytest.approx(1.0)
    assert oscillation_period(stationary_point) is None


def test_times_cover_requested_periods(oscillatory_point):
    times = evolution_times(oscillatory_point, 2, 5)
    np.testing.assert_allclose(times, [0.0, 0.5, 1.0, 1.5, 2.0])


def test_stationary_point_has_single_snapshot(stationary_point):
    np.testing.assert_array_equal(evolution_times(stationary_point, 0, 10), [0.0])
    with pytest.raises(DomainError):
        evolution_times(stationary_point, 1, 10)


def test_rejects_zero_frames(oscillatory_point):
    with pytest.raises(ValidationError):
        evolution_times(oscillatory_point, 1, 0)


def test_snapshots_repeat_after_one_period(oscillatory_point):
    pair = make_pair(2 * math.pi)
    series = reconstruct_evolution(oscillatory_point, pair, evolution_times(oscillatory_point, 1, 9), x_samples=16)
    assert series.w1.shape == (9, 33, 16)
    assert series.n1.shape == (9, 33, 16)
    np.testing.assert_allclose(series.w1[0], series.w1[-1], atol=1e-12)
    # 半周期で符号が反転する
    np.testing.assert_allclose(series.w1[4], -series.w1[0], atol=1e-12)
    assert series.x[-1] < 2 * math.pi / 2.0


def test_phase_orbit_closes(oscillatory_point):
    series = reconstruct_evolution(oscillatory_point, make_pair(2 * math.pi), [0.0])
    assert orbit_closure_gap(series) < 1e-10
    assert series.period == pytest.approx(1.0)
    assert series.observation_point[1] == pytest.approx(0.5, abs=0.05)
    # dw₁/dt の振幅は w₁ の振幅の Im σ 倍
    assert np.ptp(series.phase_dw1_dt) == pytest.approx(2 * math.pi * np.ptp(series.phase_w1), rel=1e-3)


def test_stationary_snapshot_is_time_independent(stationary_point):
    series = reconstruct_evolution(stationary_point, make_pair(0.0), [0.0, 3.0])
    np.testing.assert_allclose(series.w1[0], series.w1[1], atol=1e-15)
    assert series.period is None
    assert orbit_closure_gap(series) == 0.0
