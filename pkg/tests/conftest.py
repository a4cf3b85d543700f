"""
テスト共通のフィクスチャ

放射場と基本状態の計算は重いので、セッション単位で共有します。
"""

import pytest

from biostab.core.basic_state import derive_coefficients, solve_basic_state
from biostab.core.perturbed_rte import SweepGeometry, make_direction_set
from biostab.core.radiative import solve_fredholm
from biostab.core.taxis import default_taxis
from biostab.data.models import ProblemParams, TopBoundary


def make_params(**overrides) -> ProblemParams:
    """基準ケース (V_c=20, τ_H=0.5, ω=0.7, B=0.5, A=0) に上書きを適用したパラメータ"""
    values = dict(
        schmidt=20.0, swim_speed=20.0, extinction=0.5, albedo=0.7, aniso_coeff=0.0,
        diffuse_flux=0.5, critical_intensity=1.0, top_boundary=TopBoundary.STRESS_FREE,
    )
    values.update(overrides)
    return ProblemParams(**values)


@pytest.fixture(scope="session")
def params():
    """基準ケースのパラメータ"""
    return make_params()


@pytest.fixture(scope="session")
def aniso_params():
    """異方散乱ありのパラメータ"""
    return make_params(aniso_coeff=0.4, diffuse_flux=0.62)


@pytest.fixture(scope="session")
def taxis(params):
    return default_taxis(params.critical_intensity)


@pytest.fixture(scope="session")
def field(params):
    return solve_fredholm(params, 201)


@pytest.fixture(scope="session")
def basic_state(params, field, taxis):
    """安定性係数を設定した基本状態"""
    state = solve_basic_state(params, field, taxis, n_z=65)
    return derive_coefficients(state, params, taxis)


@pytest.fixture(scope="session")
def aniso_state(aniso_params, taxis):
    field = solve_fredholm(aniso_params, 201)
    state = solve_basic_state(aniso_params, field, taxis, n_z=65)
    return derive_coefficients(state, aniso_params, taxis)


@pytest.fixture(scope="session")
def small_dirs():
    """テスト用の粗い方向集合（方位角 8 点は 45° 回転で不変）"""
    return make_direction_set(n_mu=6, n_phi=8)


@pytest.fixture(scope="session")
def geometry(basic_state, params, small_dirs):
    return SweepGeometry(basic_state, params, small_dirs, n_sub=2)


@pytest.fixture(scope="session")
def aniso_geometry(aniso_state, aniso_params, small_dirs):
    return SweepGeometry(aniso_state, aniso_params, small_dirs, n_sub=2)


@pytest.fixture(scope="session")
def params_factory():
    """上書き付きでパラメータを作る関数"""
    return make_params
