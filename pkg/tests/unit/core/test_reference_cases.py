"""
基準ケースの再現テスト（acceptance）

放射場は区分線形の積分則による独立な解と比べ、基本状態は掃引表の全パラメータで質量保存を確かめます。
中立曲線は振動分枝の基準ケースと、B=0.63 の定常ケース、上端条件の比較で確かめます。
"""

import itertools

import numpy as np
import pytest
from scipy import linalg, special

from biostab.config.models import CaseConfig
from biostab.core.analyzer import StabilityAnalyzer
from biostab.core.basic_state import (
    derive_coefficients, equation_residual, mass_integral, peak_location, profile_at, solve_basic_state,
)
from biostab.core.perturbed_rte import SweepGeometry, moment_operator
from biostab.core.radiative import solve_fredholm
from biostab.core.stability import find_branch_points, neutral_point
from biostab.data.models import Branch, TopBoundary

pytestmark = pytest.mark.acceptance

TABLE_CASES = [
    (tau_h, b_flux, a_coeff)
    for tau_h, fluxes in ((0.5, (0.5, 0.62, 0.63)), (1.0, (0.6, 0.75, 0.76)))
    for b_flux, a_coeff in itertools.product(fluxes, (0.0, 0.4, 0.8))
]


def linear_product_oracle(omega, aniso, tau_h, b_flux, n_nodes):
    """
    G, q を区分線形とし、核 E_n との積を閉形式で積分した選点解

    ∫E_n du = −E_{n+1}、∫u E_n du = −u E_{n+1} − E_{n+2} を使います。
    """
    t = np.linspace(0.0, tau_h, n_nodes)
    h = t[1] - t[0]
    tau = t[:, None]
    lo = t[None, :-1]
    hi = t[None, 1:]
    above = lo >= tau
    u0 = np.where(above, lo - tau, tau - hi)
    u1 = np.where(above, hi - tau, tau - lo)

    def weights(order, signed=False):
        m0 = special.expn(order + 1, u0) - special.expn(order + 1, u1)
        m1 = (u0 * special.expn(order + 1, u0) + special.expn(order + 2, u0)
              - u1 * special.expn(order + 1, u1) - special.expn(order + 2, u1))
        moment_t = np.where(above, tau * m0 + m1, tau * m0 - m1)
        if signed:
            sign = np.where(above, -1.0, 1.0)
            m0, moment_t = sign * m0, sign * moment_t
        w = np.zeros((n_nodes, n_nodes))
        w[:, :-1] += (hi * m0 - moment_t) / h
        w[:, 1:] += (moment_t - lo * m0) / h
        return w

    w1, w2, w3 = weights(1), weights(2, signed=True), weights(3)
    half = 0.5 * omega
    eye = np.eye(n_nodes)
    system = np.block([[eye - half * w1, -half * aniso * w2], [-half * w2, eye - half * aniso * w3]])
    rhs = np.concatenate([2 * b_flux * special.expn(2, t), 2 * b_flux * special.expn(3, t)])
    solution = linalg.solve(system, rhs)
    return solution[:n_nodes], solution[n_nodes:]


def test_oracle_matches_non_scattering_limit():
    g, q = linear_product_oracle(0.0, 0.0, 0.5, 1.0, 101)
    t = np.linspace(0.0, 0.5, 101)
    np.testing.assert_allclose(g, 2 * special.expn(2, t), rtol=1e-14)
    np.testing.assert_allclose(q, 2 * special.expn(3, t), rtol=1e-14)


@pytest.mark.slow
@pytest.mark.parametrize("tau_h", [0.5, 1.0])
@pytest.mark.parametrize("aniso", [0.0, 0.4, 0.8])
def test_fredholm_matches_independent_oracle(params_factory, tau_h, aniso):
    params = params_factory(albedo=0.7, aniso_coeff=aniso, extinction=tau_h, diffuse_flux=1.0)
    field = solve_fredholm(params, 201)
    g, q = linear_product_oracle(0.7, aniso, tau_h, 1.0, 2001)
    assert np.max(np.abs(field.g_s - g[::10]) / np.abs(g[::10])) < 1e-4
    assert np.max(np.abs(field.q_s - q[::10]) / np.abs(q[::10])) < 1e-4


@pytest.mark.slow
@pytest.mark.parametrize("tau_h,b_flux,a_coeff", TABLE_CASES)
def test_basic_state_conserves_mass_for_table_cases(params_factory, taxis, tau_h, b_flux, a_coeff):
    params = params_factory(extinction=tau_h, diffuse_flux=b_flux, aniso_coeff=a_coeff)
    state = solve_basic_state(params, solve_fredholm(params, 201), taxis, n_z=65)
    assert mass_integral(state) == pytest.approx(1.0, abs=1e-7)
    assert equation_residual(state, params, taxis) < 1e-7


@pytest.mark.slow
def test_neutral_rayleigh_converges_with_grid(params, field, taxis, basic_state, small_dirs, geometry):
    """n_z を 65 から 97 に増やしても中立レイリー数の変化は 0.5% 未満"""
    coarse = neutral_point(2.0, params, basic_state,
                           moment_operator(basic_state, params, 2.0, 0.0, small_dirs, geometry=geometry))
    fine_state = derive_coefficients(solve_basic_state(params, field, taxis, n_z=97), params, taxis)
    fine_geometry = SweepGeometry(fine_state, params, small_dirs, n_sub=2)
    fine = neutral_point(2.0, params, fine_state,
                         moment_operator(fine_state, params, 2.0, 0.0, small_dirs, geometry=fine_geometry))
    assert fine.rayleigh == pytest.approx(coarse.rayleigh, rel=5e-3)
    assert fine.branch == coarse.branch


@pytest.mark.slow
def test_peak_moves_down_with_flux_and_sits_at_critical_intensity(params_factory, taxis):
    """B を上げると最大濃度の位置は下がり、内部の最大点では G_s = G_c"""
    peaks = []
    for b_flux in (0.5, 0.62, 0.63):
        params = params_factory(diffuse_flux=b_flux)
        state = solve_basic_state(params, solve_fredholm(params, 201), taxis, n_z=65)
        z_peak = peak_location(state)
        peaks.append(z_peak)
        if 0.01 < z_peak < 0.99:
            g_peak = profile_at(state, z_peak, b_flux)['g_s'][0]
            assert g_peak == pytest.approx(params.critical_intensity, abs=2e-2)
    assert peaks[0] > peaks[1] >= peaks[2]


@pytest.mark.slow
def test_forward_scattering_lowers_peak_at_high_flux(params_factory, taxis):
    """B=0.63 では A を上げると最大濃度の位置が下部へ移る"""
    peaks = []
    for a_coeff in (0.0, 0.4, 0.8):
        params = params_factory(diffuse_flux=0.63, aniso_coeff=a_coeff)
        state = solve_basic_state(params, solve_fredholm(params, 201), taxis, n_z=65)
        peaks.append(peak_location(state))
    assert peaks[0] > peaks[1] > peaks[2]
    assert peaks[0] < 0.5


@pytest.fixture(scope="module")
def oscillatory_case():
    """τ_H=1, B=0.75, A=0 の中立曲線（振動分枝が最も不安定になる）"""
    analyzer = StabilityAnalyzer(CaseConfig(tau_h=1.0, b_flux=0.75, a_coeff=0.0,
                                            k_min=1.0, k_max=4.0, k_step=0.25))
    curve = analyzer.neutral_curve()
    return analyzer, curve, analyzer.critical_point(curve, refine=False)


@pytest.mark.slow
def test_critical_point_lies_on_oscillatory_branch(oscillatory_case):
    _, _, crit = oscillatory_case
    assert crit.branch == Branch.OSCILLATORY
    assert crit.sigma_im > 0
    assert not crit.boundary_minimum


@pytest.mark.slow
def test_oscillatory_branch_merges_near_reference_wavenumber(oscillatory_case):
    _, curve, _ = oscillatory_case
    estimates = find_branch_points(curve)
    assert len(estimates) == 1
    assert estimates[0] == pytest.approx(2.75, rel=0.1)


@pytest.mark.slow
def test_both_branches_reported_below_branch_point(oscillatory_case):
    _, curve, _ = oscillatory_case
    for k in (1.5, 2.0, 2.5):
        at_k = {p.branch: p for p in curve if p.ok and p.k == pytest.approx(k)}
        assert set(at_k) == {Branch.STATIONARY, Branch.OSCILLATORY}
        assert at_k[Branch.STATIONARY].rayleigh > at_k[Branch.OSCILLATORY].rayleigh


@pytest.mark.slow
def test_stationary_branch_lies_above_oscillatory_critical_point(oscillatory_case):
    analyzer, _, crit = oscillatory_case
    point, pair = analyzer.neutral_solution(crit.k_c, branch_hint="stationary")
    assert point.branch == Branch.STATIONARY
    assert point.rayleigh > crit.r_c
    assert abs(pair.sigma) < 1e-6


@pytest.mark.slow
def test_high_flux_minimum_is_interior_and_stationary():
    """B=0.63 の定常曲線は k = 6 付近で最小（k_max=6 では端に掛かる）"""
    analyzer = StabilityAnalyzer(CaseConfig(tau_h=0.5, b_flux=0.63, a_coeff=0.0,
                                            k_min=5.0, k_max=8.0, k_step=1.0))
    crit = analyzer.critical_point(analyzer.neutral_curve(), refine=False)
    assert not crit.boundary_minimum
    assert 5.0 < crit.k_c < 8.0
    assert crit.branch == Branch.STATIONARY
    assert crit.mode == 2


@pytest.mark.slow
def test_rigid_top_raises_critical_rayleigh():
    """同じパラメータでは上端剛体壁の方が安定"""
    coarse = dict(n_mu=6, n_phi=8, n_sub=2, k_min=1.5, k_max=4.5, k_step=0.5)
    minima = {}
    for boundary in (TopBoundary.STRESS_FREE, TopBoundary.RIGID):
        curve = StabilityAnalyzer(CaseConfig(top_boundary=boundary, **coarse)).neutral_curve()
        minima[boundary] = min(p.rayleigh for p in curve if p.ok)
    assert minima[TopBoundary.RIGID] > minima[TopBoundary.STRESS_FREE]
