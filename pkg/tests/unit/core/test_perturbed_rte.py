"""
摂動放射輸送ソルバーのユニットテスト
"""

import math

import numpy as np
import pytest

from biostab.core.basic_state import derive_coefficients, profile_at, solve_basic_state
from biostab.core.perturbed_rte import (
    DirectionalResponse, SweepGeometry, make_direction_set, march_kernel, moment_operator,
    solve_perturbed_intensity, steady_intensity, zeroth_moment,
)
from biostab.core.radiative import solve_fredholm
from biostab.utils.errors import ConsistencyError, ConvergenceError, ValidationError


def smooth_theta(state):
    z = state.z_grid
    return np.cos(math.pi * z) + 0.3j * z ** 2


def test_direction_set_weights():
    dirs = make_direction_set(24, 24)
    assert dirs.weights.sum() == pytest.approx(4 * math.pi, rel=1e-12)
    assert np.min(np.abs(dirs.mu_nodes)) > 1e-8
    assert dirs.weights.shape == (48, 24)
    # ∫η² dΩ = 4π/3
    assert (dirs.weights.sum(axis=1) @ dirs.mu_nodes ** 2) == pytest.approx(4 * math.pi / 3, rel=1e-12)


def test_direction_set_rejects_empty():
    with pytest.raises(ValidationError):
        make_direction_set(0, 8)


def test_march_kernel_constant_source():
    """c 一定・f 一定なら Ψ = f/c (1 − e^{−cs/|η|})"""
    n = 41
    s = np.linspace(0.0, 1.0, n)
    c = np.full((1, n), 2.0)
    eta = 0.5
    kernel, transmission = march_kernel(c, np.diff(s), eta, np.arange(n))
    psi = kernel[0] @ np.ones(n)
    np.testing.assert_allclose(psi, (1.0 - np.exp(-2.0 * s / eta)) / 2.0, atol=1e-12)
    np.testing.assert_allclose(transmission[0], np.exp(-2.0 * s / eta), rtol=1e-12)


def test_march_kernel_linear_source_is_exact():
    """f が線形なら区間内の公式は厳密"""
    n = 11
    s = np.linspace(0.0, 1.0, n)
    c = np.full((1, n), 1.5 + 0.7j)
    f = 1.0 + 2.0 * s
    kernel, _ = march_kernel(c, np.diff(s), 1.0, np.array([n - 1]))
    lam = c[0, 0]
    # Ψ' + λΨ = 1 + 2s, Ψ(0) = 0
    exact = (1.0 + 2.0 * s[-1]) / lam - 2.0 / lam ** 2 - (1.0 / lam - 2.0 / lam ** 2) * np.exp(-lam * s[-1])
    assert kernel[0, 0] @ f == pytest.approx(exact, rel=1e-12)


def test_zero_theta_gives_zero_moments(basic_state, params, small_dirs, geometry):
    response = DirectionalResponse(geometry, 2.0, 0.0)
    moments = solve_perturbed_intensity(np.zeros(65), basic_state, params, 2.0, 0.0, small_dirs,
                                        response=response)
    for values in (moments.g1, moments.p, moments.q, moments.s):
        np.testing.assert_array_equal(values, np.zeros(65))
    assert moments.converged


def test_moments_are_linear(aniso_state, aniso_params, small_dirs, aniso_geometry):
    response = DirectionalResponse(aniso_geometry, 1.5, 0.8)
    theta1 = smooth_theta(aniso_state)
    theta2 = np.sin(2 * math.pi * aniso_state.z_grid)
    alpha, beta = 0.7 - 0.2j, -1.3

    def solve(theta):
        return solve_perturbed_intensity(theta, aniso_state, aniso_params, 1.5, 0.8, small_dirs,
                                         tol=1e-12, response=response)

    combined = solve(alpha * theta1 + beta * theta2)
    first, second = solve(theta1), solve(theta2)
    for name in ('g1', 'p', 'q', 's'):
        expected = alpha * getattr(first, name) + beta * getattr(second, name)
        scale = max(1.0, float(np.max(np.abs(expected))))
        assert np.max(np.abs(getattr(combined, name) - expected)) < 1e-9 * scale


def test_conjugate_wavenumber_gives_conjugate_moments(aniso_state, aniso_params, small_dirs, aniso_geometry):
    """Θ を共役、(m₁, m₂) を符号反転すると各モーメントは共役になる"""
    forward = moment_operator(aniso_state, aniso_params, 1.2, 0.5, small_dirs, geometry=aniso_geometry)
    backward = moment_operator(aniso_state, aniso_params, -1.2, -0.5, small_dirs, geometry=aniso_geometry)
    for name in ('g_mat', 'p_mat', 'q_mat', 's_mat'):
        a = getattr(forward, name)
        b = getattr(backward, name)
        scale = max(1.0, float(np.max(np.abs(a))))
        assert np.max(np.abs(np.conj(a) - b)) < 1e-10 * scale


def test_horizontal_isotropy(aniso_state, aniso_params, small_dirs, aniso_geometry):
    """k が同じなら 𝒢, S は水平方向の向きによらない"""
    k = 2.0
    aligned = moment_operator(aniso_state, aniso_params, k, 0.0, small_dirs, geometry=aniso_geometry)
    diagonal = moment_operator(aniso_state, aniso_params, k / math.sqrt(2), k / math.sqrt(2), small_dirs,
                               geometry=aniso_geometry)
    scale = float(np.max(np.abs(aligned.g_mat)))
    assert np.max(np.abs(aligned.g_mat - diagonal.g_mat)) < 1e-10 * scale
    assert np.max(np.abs(aligned.s_mat - diagonal.s_mat)) < 1e-10 * scale
    # 波数方向の成分 m₁P + m₂Q も一致する
    along_aligned = aligned.m1 * aligned.p_mat + aligned.m2 * aligned.q_mat
    along_diagonal = diagonal.m1 * diagonal.p_mat + diagonal.m2 * diagonal.q_mat
    assert np.max(np.abs(along_aligned - along_diagonal)) < 1e-10 * max(1.0, float(np.max(np.abs(along_aligned))))


def test_cross_moment_vanishes_for_aligned_wavevector(aniso_state, aniso_params, small_dirs, aniso_geometry):
    op = moment_operator(aniso_state, aniso_params, 2.5, 0.0, small_dirs, geometry=aniso_geometry)
    assert np.max(np.abs(op.q_mat)) < 1e-12 * max(1.0, float(np.max(np.abs(op.g_mat))))


def test_non_scattering_converges_immediately(params_factory, taxis, small_dirs):
    params = params_factory(albedo=0.0)
    state = derive_coefficients(solve_basic_state(params, solve_fredholm(params, 201), taxis, 65), params, taxis)
    moments = solve_perturbed_intensity(smooth_theta(state), state, params, 2.0, 0.0, small_dirs, n_sub=2)
    assert moments.iterations <= 2


def test_direct_and_column_assembly_agree(aniso_state, aniso_params, small_dirs, aniso_geometry):
    direct = moment_operator(aniso_state, aniso_params, 2.0, 0.0, small_dirs, geometry=aniso_geometry)
    columns = moment_operator(aniso_state, aniso_params, 2.0, 0.0, small_dirs, method="columns",
                              tol=1e-12, geometry=aniso_geometry)
    for name in ('g_mat', 'p_mat', 's_mat'):
        a = getattr(direct, name)
        scale = max(1.0, float(np.max(np.abs(a))))
        assert np.max(np.abs(a - getattr(columns, name))) < 1e-8 * scale


def test_operator_apply_matches_iteration(basic_state, params, small_dirs, geometry):
    op = moment_operator(basic_state, params, 2.0, 0.0, small_dirs, geometry=geometry)
    theta = smooth_theta(basic_state)
    moments = solve_perturbed_intensity(theta, basic_state, params, 2.0, 0.0, small_dirs, tol=1e-12,
                                        response=DirectionalResponse(geometry, 2.0, 0.0))
    applied = op.apply(theta)
    scale = max(1.0, float(np.max(np.abs(applied.g1))))
    assert np.max(np.abs(applied.g1 - moments.g1)) < 1e-9 * scale
    assert op.k == pytest.approx(2.0)


def test_iteration_limit_raises(basic_state, params, small_dirs, geometry):
    response = DirectionalResponse(geometry, 2.0, 0.0)
    with pytest.raises(ConvergenceError) as excinfo:
        solve_perturbed_intensity(smooth_theta(basic_state), basic_state, params, 2.0, 0.0, small_dirs,
                                  tol=1e-14, max_iter=1, response=response)
    assert excinfo.value.residual is not None


def test_rejects_wrong_theta_shape(basic_state, params, small_dirs, geometry):
    with pytest.raises(ValidationError):
        solve_perturbed_intensity(np.zeros(10), basic_state, params, 1.0, 0.0, small_dirs,
                                  response=DirectionalResponse(geometry, 1.0, 0.0))


def test_geometry_rejects_other_params(basic_state, params_factory, small_dirs):
    with pytest.raises(ConsistencyError):
        SweepGeometry(basic_state, params_factory(albedo=0.5), small_dirs)


def test_steady_intensity_reproduces_total_intensity(basic_state, params):
    """定常強度の ∫ dΩ が G_s を再現する"""
    dirs = make_direction_set(24, 1)
    z, intensity = steady_intensity(basic_state, params, dirs, n_sub=3)
    total = zeroth_moment(dirs, intensity)
    g = profile_at(basic_state, z, params.diffuse_flux)['g_s']
    assert np.max(np.abs(total - g)) < 1e-2 * float(np.max(g))


def test_steady_intensity_inflow(basic_state, params):
    dirs = make_direction_set(6, 1)
    z, intensity = steady_intensity(basic_state, params, dirs, z=np.array([1.0, 0.0]))
    downward = dirs.mu_nodes < 0
    np.testing.assert_allclose(intensity[downward, 0], params.diffuse_flux / math.pi, rtol=1e-12)
    np.testing.assert_allclose(intensity[~downward, 1], 0.0, atol=1e-15)
