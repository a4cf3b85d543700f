"""
摂動放射輸送モジュール

水平波数 (m₁, m₂) の正規モード摂動 Θ(z) に対して、摂動強度 Ψ の方程式

    η dΨ/dz + (i(m₁ζ + m₂ν) + τ_H n_s) Ψ
        = ωτ_H/(4π) (n_s 𝒢 + G_s Θ + Aη(n_s S − q_s Θ)) − τ_H L_s Θ

を両壁で入射ゼロの条件のもとで解き、モーメント 𝒢 = ∫Ψ dΩ、(P, Q, S) = ∫(ζ, ν, η)Ψ dΩ を返します。

各方向の常微分方程式は、チェビシェフ区間を細分した格子上で積分因子を厳密に扱い、
区間内で源泉を線形とする公式で進めます。方向ごとの応答は線形写像なので、
全方向の掃引を行列として一度だけ組み立て、源泉反復や閉包系の直接解に使います。
"""

import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from .basic_state import profile_at
from .chebyshev import interpolation_matrix
from ..data.models import BasicState, DirectionSet, MomentOperator, PerturbedMoments, ProblemParams
from ..utils.errors import ConsistencyError, ConvergenceError, ValidationError

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi

# 級数展開に切り替える |Δ|
_SERIES_LIMIT = 1e-2


def make_direction_set(n_mu: int = 24, n_phi: int = 24) -> DirectionSet:
    """
    方向の求積を作る

    Args:
        n_mu: 半球あたりの η のガウス・ルジャンドル点数
        n_phi: 方位角の台形則の点数

    Returns:
        方向集合（重みの総和は 4π）
    """
    if n_mu < 1 or n_phi < 1:
        raise ValidationError("方向の点数は1以上です", field='n_mu/n_phi', value=(n_mu, n_phi))
    x, w = np.polynomial.legendre.leggauss(n_mu)
    eta = 0.5 * (x + 1.0)
    w_eta = 0.5 * w
    mu_nodes = np.concatenate([eta, -eta])
    mu_weights = np.concatenate([w_eta, w_eta])
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    weights = mu_weights[:, None] * np.full(n_phi, 2.0 * math.pi / n_phi)[None, :]
    return DirectionSet(mu_nodes=mu_nodes, mu_weights=mu_weights, phi_nodes=phi, weights=weights)


def _phi_functions(delta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """φ₁(Δ) = (1 − e^{−Δ})/Δ と φ₂(Δ) = (1 − e^{−Δ}(1 + Δ))/Δ²"""
    small = np.abs(delta) < _SERIES_LIMIT
    d = np.where(small, 1.0, delta)
    decay = np.exp(-d)
    phi1 = (1.0 - decay) / d
    phi2 = (1.0 - decay * (1.0 + d)) / d ** 2
    s = delta
    series1 = 1.0 - s / 2.0 + s ** 2 / 6.0 - s ** 3 / 24.0 + s ** 4 / 120.0
    series2 = 0.5 - s / 3.0 + s ** 2 / 8.0 - s ** 3 / 30.0 + s ** 4 / 144.0
    return np.where(small, series1, phi1), np.where(small, series2, phi2)


def march_kernel(c: np.ndarray, h: np.ndarray, abs_eta: float,
                 rows: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    |η| dΨ/ds + c Ψ = f を進行方向に積分する線形写像

    各小区間で c を平均値で一定とみなして積分因子を厳密に扱い、f を線形補間します。
    入射はゼロです。

    Args:
        c: 減衰係数 (P, n)（進行順）
        h: 小区間の長さ (n−1,)（進行順）
        abs_eta: |η|
        rows: 出力する節点の進行順インデックス

    Returns:
        (K, T): K は (P, len(rows), n) で Ψ[rows] = K @ f、
        T は (P, len(rows)) の入射からの透過率 e^{−τ}
    """
    delta = 0.5 * (c[:, :-1] + c[:, 1:]) * h[None, :] / abs_eta
    phi1, phi2 = _phi_functions(delta)
    a = h[None, :] * phi2 / abs_eta
    b = h[None, :] * (phi1 - phi2) / abs_eta

    depth = np.concatenate([np.zeros((c.shape[0], 1), dtype=delta.dtype), np.cumsum(delta, axis=1)], axis=1)
    n = c.shape[1]
    diff = depth[:, rows, None] - depth[:, None, :]
    upstream = np.arange(n)[None, :] <= rows[:, None]
    # 下流側は寄与しない（exp(−inf) = 0）
    magnitude = np.exp(-np.where(upstream[None, :, :], diff.real, np.inf))
    if np.iscomplexobj(diff):
        propagator = magnitude * np.exp(-1j * np.where(upstream[None, :, :], diff.imag, 0.0))
    else:
        propagator = magnitude

    kernel = np.zeros_like(propagator)
    kernel[:, :, :-1] += a[:, None, :] * propagator[:, :, 1:]
    kernel[:, :, 1:] += b[:, None, :] * propagator[:, :, 1:]
    return kernel, propagator[:, :, 0]


class SweepGeometry:
    """
    基本状態と方向集合に固有の掃引データ

    細分格子、補間行列、細分格子上の基本状態、定常強度 L_s(z, η) を保持します。
    波数に依存しないので、波数ごとの応答計算で共有します。
    """

    def __init__(self, state: BasicState, params: ProblemParams, dirs: DirectionSet, n_sub: int = 3):
        """
        初期化

        Args:
            state: 基本状態
            params: 問題パラメータ
            dirs: 方向集合
            n_sub: チェビシェフ区間あたりの細分数
        """
        if state.params_hash != params.radiative_hash():
            raise ConsistencyError("基本状態が異なるパラメータで計算されています")
        if n_sub < 1:
            raise ValidationError("細分数は1以上です", field='n_sub', value=n_sub)
        self.logger = logging.getLogger(__name__)
        self.state = state
        self.params = params
        self.dirs = dirs
        self.n_sub = n_sub
        self.params_hash = params.radiative_hash()

        ascending = state.z_grid[::-1]
        pieces = [np.linspace(ascending[i], ascending[i + 1], n_sub + 1)[:-1] for i in range(ascending.size - 1)]
        self.z_fine = np.concatenate(pieces + [ascending[-1:]])
        self.h = np.diff(self.z_fine)
        self.n_fine = self.z_fine.size
        n_z = state.n_points
        # 状態の節点順（z=1 から）に対応する細分格子のインデックス
        self.sample = (n_z - 1 - np.arange(n_z)) * n_sub
        self.interp = interpolation_matrix(state.z_grid, self.z_fine)

        profile = profile_at(state, self.z_fine, params.diffuse_flux)
        self.n_f = profile['n_s']
        self.g_f = profile['g_s']
        self.q_f = profile['q_s']

        self.steady = self._steady_intensity()
        self.logger.debug(f"掃引格子を構築しました (細分点 {self.n_fine}, 方向 {dirs.weights.size})")

    def travel_order(self, eta: float) -> np.ndarray:
        """方向 η の進行順の細分インデックス"""
        idx = np.arange(self.n_fine)
        return idx if eta > 0 else idx[::-1]

    def _steady_intensity(self) -> np.ndarray:
        """定常強度 L_s（(n_eta, n_fine)、z 昇順）"""
        p = self.params
        coeff = (p.albedo * p.extinction / FOUR_PI) * self.n_f
        all_rows = np.arange(self.n_fine)
        intensity = np.empty((self.dirs.mu_nodes.size, self.n_fine))
        for e, eta in enumerate(self.dirs.mu_nodes):
            order = self.travel_order(eta)
            c = (p.extinction * self.n_f[order])[None, :]
            kernel, transmission = march_kernel(c, np.abs(np.diff(self.z_fine[order])), abs(eta), all_rows)
            source = coeff[order] * (self.g_f[order] - p.aniso_coeff * eta * self.q_f[order])
            inflow = p.diffuse_flux / math.pi if eta < 0 else 0.0
            values = kernel[0] @ source + inflow * transmission[0]
            intensity[e, order] = values
        return intensity


class DirectionalResponse:
    """
    1つの波数 (m₁, m₂) について、全方向の掃引を重み付きで集約した応答行列

    R0 = Σ w K、R1 = Σ w η K、… は細分格子上の源泉から状態節点上のモーメントへの写像です。
    """

    def __init__(self, geometry: SweepGeometry, m1: float, m2: float):
        self.geometry = geometry
        self.m1 = float(m1)
        self.m2 = float(m2)
        g = geometry
        dirs = g.dirs
        n_z = g.state.n_points
        shape = (n_z, g.n_fine)
        names = ('r0', 'r1', 'r2', 'rz0', 'rz1', 'rn0', 'rn1', 'rl0', 'rl1', 'rlz', 'rln')
        acc: Dict[str, np.ndarray] = {name: np.zeros(shape, dtype=complex) for name in names}

        zeta = dirs.zeta
        nu = dirs.nu
        tau_h = g.params.extinction
        for e, eta in enumerate(dirs.mu_nodes):
            order = g.travel_order(eta)
            rows = np.searchsorted(order, g.sample) if eta > 0 else (g.n_fine - 1 - g.sample)
            phase = 1j * (self.m1 * zeta[e] + self.m2 * nu[e])
            c = phase[:, None] + tau_h * g.n_f[order][None, :]
            kernel, _ = march_kernel(c, np.abs(np.diff(g.z_fine[order])), abs(eta), rows)
            if eta < 0:
                kernel = kernel[:, :, ::-1]
            w = dirs.weights[e]
            k0 = np.tensordot(w, kernel, axes=(0, 0))
            kz = np.tensordot(w * zeta[e], kernel, axes=(0, 0))
            kn = np.tensordot(w * nu[e], kernel, axes=(0, 0))
            steady = g.steady[e][None, :]
            acc['r0'] += k0
            acc['r1'] += eta * k0
            acc['r2'] += eta ** 2 * k0
            acc['rz0'] += kz
            acc['rz1'] += eta * kz
            acc['rn0'] += kn
            acc['rn1'] += eta * kn
            acc['rl0'] += k0 * steady
            acc['rl1'] += eta * k0 * steady
            acc['rlz'] += kz * steady
            acc['rln'] += kn * steady
        self._acc = acc
        self._build_closure()

    def _build_closure(self) -> None:
        g = self.geometry
        p = g.params
        a = p.aniso_coeff
        scale = p.albedo * p.extinction / FOUR_PI
        coupling = (scale * g.n_f)[:, None] * g.interp
        g_source = (scale * g.g_f)[:, None] * g.interp
        q_source = (scale * g.q_f)[:, None] * g.interp
        r = self._acc
        self.m0 = r['r0'] @ coupling
        self.m1_mat = r['r1'] @ coupling
        self.m2_mat = r['r2'] @ coupling
        self.mz0 = r['rz0'] @ coupling
        self.mz1 = r['rz1'] @ coupling
        self.mn0 = r['rn0'] @ coupling
        self.mn1 = r['rn1'] @ coupling
        self.f0 = r['r0'] @ g_source - a * (r['r1'] @ q_source) - p.extinction * (r['rl0'] @ g.interp)
        self.f1 = r['r1'] @ g_source - a * (r['r2'] @ q_source) - p.extinction * (r['rl1'] @ g.interp)
        self.fz = r['rz0'] @ g_source - a * (r['rz1'] @ q_source) - p.extinction * (r['rlz'] @ g.interp)
        self.fn = r['rn0'] @ g_source - a * (r['rn1'] @ q_source) - p.extinction * (r['rln'] @ g.interp)

    def sweep(self, theta: np.ndarray, g1: np.ndarray, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """現在のモーメントを散乱源として全方向を一度掃引し、新しい (𝒢, S) を返す"""
        a = self.geometry.params.aniso_coeff
        g_new = self.m0 @ g1 + a * (self.m1_mat @ s) + self.f0 @ theta
        s_new = self.m1_mat @ g1 + a * (self.m2_mat @ s) + self.f1 @ theta
        return g_new, s_new

    def horizontal(self, theta: np.ndarray, g1: np.ndarray, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """収束したモーメントから (P, Q) を求める"""
        a = self.geometry.params.aniso_coeff
        p = self.mz0 @ g1 + a * (self.mz1 @ s) + self.fz @ theta
        q = self.mn0 @ g1 + a * (self.mn1 @ s) + self.fn @ theta
        return p, q

    def closure_solve(self, rhs_theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """モーメント閉包系を直接解く（rhs_theta は Θ のベクトルまたは行列）"""
        a = self.geometry.params.aniso_coeff
        n = self.m0.shape[0]
        eye = np.eye(n)
        system = np.block([
            [eye - self.m0, -a * self.m1_mat],
            [-self.m1_mat, eye - a * self.m2_mat],
        ])
        rhs = np.concatenate([self.f0 @ rhs_theta, self.f1 @ rhs_theta], axis=0)
        solution = linalg.solve(system, rhs)
        return solution[:n], solution[n:]


def solve_perturbed_intensity(theta: np.ndarray, state: BasicState, params: ProblemParams,
                              m1: float, m2: float, dirs: DirectionSet, tol: float = 1e-9,
                              max_iter: int = 200, relaxation: float = 1.0, n_sub: int = 3,
                              response: Optional[DirectionalResponse] = None) -> PerturbedMoments:
    """
    摂動強度のモーメントを源泉反復で求める

    Args:
        theta: 状態の節点上の Θ
        state: 基本状態
        params: 問題パラメータ
        m1, m2: 水平波数
        dirs: 方向集合
        tol: 連続する反復の 𝒢, S の変化の許容値
        max_iter: 最大反復回数
        relaxation: 緩和係数（1 で緩和なし）
        n_sub: 細分数
        response: 事前に構築した応答（省略時は構築する）

    Returns:
        摂動モーメント

    Raises:
        ConvergenceError: max_iter 回で収束しない場合
    """
    theta = np.asarray(theta, dtype=complex)
    if theta.shape != (state.n_points,):
        raise ValidationError("Θ は状態の格子上で与えてください", field='theta', value=theta.shape)
    if not tol > 0:
        raise ValidationError("許容値は正である必要があります", field='tol', value=tol)
    if response is None:
        response = DirectionalResponse(SweepGeometry(state, params, dirs, n_sub), m1, m2)

    g1 = np.zeros(state.n_points, dtype=complex)
    s = np.zeros(state.n_points, dtype=complex)
    history: List[float] = []
    for iteration in range(1, max_iter + 1):
        g_new, s_new = response.sweep(theta, g1, s)
        change = float(max(np.max(np.abs(g_new - g1)), np.max(np.abs(s_new - s))))
        history.append(change)
        g1 = g1 + relaxation * (g_new - g1)
        s = s + relaxation * (s_new - s)
        if change < tol:
            break
    else:
        raise ConvergenceError("摂動強度の源泉反復が収束しませんでした",
                               residual=history[-1], iterations=max_iter, history=history)

    g_check, s_check = response.sweep(theta, g1, s)
    residual = float(max(np.max(np.abs(g_check - g1)), np.max(np.abs(s_check - s))))
    p, q = response.horizontal(theta, g1, s)
    logger.debug(f"源泉反復が収束しました (反復 {iteration}, 残差 {residual:.3e})")
    return PerturbedMoments(g1=g1, p=p, q=q, s=s, converged=True, iterations=iteration,
                            relaxation=relaxation, residual=residual)


def moment_operator(state: BasicState, params: ProblemParams, m1: float, m2: float, dirs: DirectionSet,
                    n_z: Optional[int] = None, method: str = "direct", n_sub: int = 3, tol: float = 1e-11,
                    geometry: Optional[SweepGeometry] = None) -> MomentOperator:
    """
    Θ からモーメントへの線形写像を行列として組み立てる

    Args:
        state: 基本状態
        params: 問題パラメータ
        m1, m2: 水平波数
        dirs: 方向集合
        n_z: 格子点数（指定時は状態と一致を確認）
        method: 'direct'（閉包系を直接解く）または 'columns'（単位ベクトルごとに源泉反復）
        n_sub: 細分数
        tol: 'columns' の反復許容値
        geometry: 事前に構築した掃引データ

    Returns:
        モーメント写像
    """
    if n_z is not None and n_z != state.n_points:
        raise ValidationError("n_z が基本状態の格子と一致しません", field='n_z', value=n_z)
    if geometry is None:
        geometry = SweepGeometry(state, params, dirs, n_sub)
    response = DirectionalResponse(geometry, m1, m2)
    n = state.n_points

    if method == "direct":
        eye = np.eye(n, dtype=complex)
        g_mat, s_mat = response.closure_solve(eye)
        p_mat, q_mat = response.horizontal(eye, g_mat, s_mat)
    elif method == "columns":
        columns = []
        for j in range(n):
            unit = np.zeros(n, dtype=complex)
            unit[j] = 1.0
            try:
                columns.append(solve_perturbed_intensity(unit, state, params, m1, m2, dirs,
                                                         tol=tol, response=response))
            except ConvergenceError as e:
                e.details['column'] = j
                raise
        g_mat = np.column_stack([c.g1 for c in columns])
        p_mat = np.column_stack([c.p for c in columns])
        q_mat = np.column_stack([c.q for c in columns])
        s_mat = np.column_stack([c.s for c in columns])
    else:
        raise ValidationError("未知の組み立て方法です", field='method', value=method)

    logger.debug(f"モーメント写像を組み立てました (m1={m1:.6g}, m2={m2:.6g}, 方法={method})")
    return MomentOperator(g_mat=g_mat, p_mat=p_mat, q_mat=q_mat, s_mat=s_mat,
                          m1=float(m1), m2=float(m2), params_hash=geometry.params_hash)


def steady_intensity(state: BasicState, params: ProblemParams, dirs: DirectionSet,
                     z: Optional[np.ndarray] = None, n_sub: int = 3) -> Tuple[np.ndarray, np.ndarray]:
    """
    定常強度 L_s(z, η)

    Args:
        state: 基本状態
        params: 問題パラメータ
        dirs: 方向集合（η ごとに1本）
        z: 評価する高さ（省略時は細分格子）
        n_sub: 細分数

    Returns:
        (z, (n_eta, len(z)) の強度)
    """
    geometry = SweepGeometry(state, params, dirs, n_sub)
    if z is None:
        return geometry.z_fine, geometry.steady
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(zs < 0.0) or np.any(zs > 1.0):
        raise ValidationError("z は [0, 1] の範囲で指定してください", field='z', value=z)
    values = np.array([np.interp(zs, geometry.z_fine, row) for row in geometry.steady])
    return zs, values


def zeroth_moment(dirs: DirectionSet, intensity: np.ndarray) -> np.ndarray:
    """方位角に依存しない強度 (n_eta, n) の ∫ dΩ"""
    return dirs.weights.sum(axis=1) @ intensity
