"""
定常放射場ソルバーモジュール

一様な拡散入射 B/π と線形異方散乱 1 + A cosθ cosθ′ を持つ平板について、
全強度 G_s(τ) と下向きフラックス q_s(τ) の連立フレドホルム積分方程式

    G(τ) = 2B E₂(τ) + ω/2 ∫ [E₁(|τ−τ′|) G(τ′) + A q(τ′) E₂(|τ−τ′|) sgn(τ−τ′)] dτ′
    q(τ) = 2B E₃(τ) + ω/2 ∫ [A E₃(|τ−τ′|) q(τ′) + G(τ′) E₂(|τ−τ′|) sgn(τ−τ′)] dτ′

を、一様格子上の合成シンプソン則によるナイストローム法と特異性差し引きで解きます。
"""

import logging
from typing import Dict, Optional, Tuple, Union

import numpy as np
from scipy import linalg, special
from scipy.interpolate import CubicSpline

from .special_functions import kernel_primitive_E1, kernel_primitive_E2_signed, kernel_primitive_E3
from ..data.models import ProblemParams, RadiativeField
from ..utils.errors import ConvergenceError, DomainError, ValidationError

logger = logging.getLogger(__name__)

# これを超える節点数では密行列を組まず反復法で解く
DIRECT_SOLVE_LIMIT = 4096

# 反復法で一度に組む核行列の行数
_ROW_CHUNK = 512


def simpson_weights(n_nodes: int, tau_h: float) -> np.ndarray:
    """合成シンプソン則の重み（n_nodes は奇数）"""
    h = tau_h / (n_nodes - 1)
    w = np.full(n_nodes, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * h / 3.0


def _kernel_rows(tau: np.ndarray, weights: np.ndarray, tau_h: float,
                 rows: slice) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    特異性差し引き済みの核行列 (E₁, E₂·sgn, E₃) の指定行を組み立てる

    非対角は w_j k(|τ_i−τ_j|)、対角は閉形式の積分から非対角和を引いた値です。
    """
    ti = tau[rows]
    diff = ti[:, None] - tau[None, :]
    dist = np.abs(diff)
    off = dist > 0.0
    # 対角では核を評価しない
    safe = np.where(off, dist, 1.0)

    k1 = np.where(off, special.expn(1, safe), 0.0) * weights[None, :]
    k2 = np.where(off, special.expn(2, safe) * np.sign(diff), 0.0) * weights[None, :]
    k3 = np.where(off, special.expn(3, safe), 0.0) * weights[None, :]

    local = np.arange(ti.size)
    cols = np.arange(tau.size)[rows]
    k1[local, cols] = kernel_primitive_E1(ti, tau_h) - k1.sum(axis=1)
    k2[local, cols] = kernel_primitive_E2_signed(ti, tau_h) - k2.sum(axis=1)
    k3[local, cols] = kernel_primitive_E3(ti, tau_h) - k3.sum(axis=1)
    return k1, k2, k3


def _apply_scattering(tau, weights, tau_h, omega, aniso, g, q):
    """散乱項 ω/2·K·(G, q) を行ブロックごとに評価する"""
    n = tau.size
    out_g = np.empty(n)
    out_q = np.empty(n)
    for start in range(0, n, _ROW_CHUNK):
        rows = slice(start, min(n, start + _ROW_CHUNK))
        k1, k2, k3 = _kernel_rows(tau, weights, tau_h, rows)
        out_g[rows] = 0.5 * omega * (k1 @ g + aniso * (k2 @ q))
        out_q[rows] = 0.5 * omega * (aniso * (k3 @ q) + k2 @ g)
    return out_g, out_q


def solve_fredholm(params: ProblemParams, n_nodes: int = 201, tol: float = 1e-9,
                   max_iter: int = 500) -> RadiativeField:
    """
    連立フレドホルム方程式を解く

    Args:
        params: 問題パラメータ（ω, A, B, τ_H を使用）
        n_nodes: 節点数（33以上の奇数）
        tol: 残差の許容値
        max_iter: 反復法の最大反復回数（節点数が多い場合のみ）

    Returns:
        放射場

    Raises:
        ValidationError: 節点数や許容値が不正な場合
        ConvergenceError: 残差が許容値を満たさない場合
    """
    if n_nodes < 33 or n_nodes % 2 == 0:
        raise ValidationError("節点数は33以上の奇数である必要があります", field='n_nodes', value=n_nodes)
    if not tol > 0:
        raise ValidationError("許容値は正である必要があります", field='tol', value=tol)

    tau_h = params.extinction
    omega = params.albedo
    aniso = params.aniso_coeff
    b = params.diffuse_flux

    tau = np.linspace(0.0, tau_h, n_nodes)
    weights = simpson_weights(n_nodes, tau_h)
    rhs_g = 2.0 * b * special.expn(2, tau)
    rhs_q = 2.0 * b * special.expn(3, tau)

    if n_nodes <= DIRECT_SOLVE_LIMIT:
        k1, k2, k3 = _kernel_rows(tau, weights, tau_h, slice(0, n_nodes))
        half = 0.5 * omega
        eye = np.eye(n_nodes)
        system = np.block([
            [eye - half * k1, -half * aniso * k2],
            [-half * k2, eye - half * aniso * k3],
        ])
        rhs = np.concatenate([rhs_g, rhs_q])
        solution = linalg.solve(system, rhs)
        residual = float(np.max(np.abs(system @ solution - rhs)))
        g, q = solution[:n_nodes], solution[n_nodes:]
        logger.debug(f"フレドホルム方程式を直接法で解きました (n={n_nodes}, 残差={residual:.3e})")
    else:
        g, q, residual = _source_iteration(tau, weights, tau_h, omega, aniso, rhs_g, rhs_q, tol, max_iter)

    if residual > tol:
        raise ConvergenceError("フレドホルム方程式の残差が許容値を超えました", residual=residual)

    return RadiativeField(
        tau_grid=tau, g_s=g, q_s=q,
        params_hash=params.radiative_hash(), tau_h=tau_h, residual=residual,
    )


def _source_iteration(tau, weights, tau_h, omega, aniso, rhs_g, rhs_q, tol, max_iter):
    """大規模格子用の不動点反復"""
    g = rhs_g.copy()
    q = rhs_q.copy()
    history = []
    for iteration in range(1, max_iter + 1):
        sg, sq = _apply_scattering(tau, weights, tau_h, omega, aniso, g, q)
        g_new = rhs_g + sg
        q_new = rhs_q + sq
        change = float(max(np.max(np.abs(g_new - g)), np.max(np.abs(q_new - q))))
        history.append(change)
        g, q = g_new, q_new
        if change < tol:
            logger.debug(f"フレドホルム方程式の反復が収束しました (反復 {iteration}, 変化 {change:.3e})")
            return g, q, change
    raise ConvergenceError("フレドホルム方程式の反復が収束しませんでした",
                           residual=history[-1], iterations=max_iter, history=history)


def uniform_suspension_profile(params: ProblemParams, n_points: int = 201, tol: float = 1e-9) -> RadiativeField:
    """
    一様懸濁液 (n_s ≡ 1) の放射場を z 座標付きで返す

    τ(z) = τ_H (1 − z) なので、τ 格子の各節点に z = 1 − τ/τ_H を対応させます。
    """
    field = solve_fredholm(params, n_points, tol)
    z = 1.0 - field.tau_grid / field.tau_h
    return field.model_copy(update={'z_grid': z})


class FieldInterpolant:
    """
    放射場の三次スプライン補間

    G_s は入射項 2B E₂(τ) を差し引いた残りをスプライン化し、
    dG_s/dτ には入射項の解析的な微分 −2B E₁(τ) を加えます。
    """

    # E₁ の対数特異点を避ける最小の τ
    _TAU_FLOOR = 1e-12

    def __init__(self, field: RadiativeField, diffuse_flux: float):
        self.field = field
        self.tau_h = field.tau_h
        self.diffuse_flux = diffuse_flux
        tau = field.tau_grid
        self._g = CubicSpline(tau, field.g_s)
        self._q = CubicSpline(tau, field.q_s)
        self._g_scattered = CubicSpline(tau, field.g_s - 2.0 * diffuse_flux * special.expn(2, tau))

    def _check(self, tau) -> np.ndarray:
        taus = np.asarray(tau, dtype=float)
        slack = 1e-12 * max(1.0, self.tau_h)
        if np.any(taus < -slack) or np.any(taus > self.tau_h + slack):
            raise DomainError("光学的深さが [0, τ_H] の範囲外です", field='tau', value=tau)
        return np.clip(taus, 0.0, self.tau_h)

    def g(self, tau):
        return self._g(self._check(tau))

    def q(self, tau):
        return self._q(self._check(tau))

    def g_clamped(self, tau: float) -> float:
        """範囲外の τ を端点に寄せて評価する（シューティングの試行用）"""
        return float(self._g(min(max(tau, 0.0), self.tau_h)))

    def dg_dtau(self, tau):
        t = np.maximum(self._check(tau), self._TAU_FLOOR)
        return self._g_scattered(t, 1) - 2.0 * self.diffuse_flux * special.expn(1, t)


def interpolate_field(field: RadiativeField, tau: Union[float, np.ndarray]) -> Dict[str, Union[float, np.ndarray]]:
    """
    放射場を任意の光学的深さで補間する

    Args:
        field: 放射場
        tau: 光学的深さ（[0, τ_H]）

    Returns:
        {'g_s': ..., 'q_s': ...}

    Raises:
        DomainError: τ が範囲外の場合
    """
    scalar = np.ndim(tau) == 0
    g_spline = CubicSpline(field.tau_grid, field.g_s)
    q_spline = CubicSpline(field.tau_grid, field.q_s)
    taus = np.asarray(tau, dtype=float)
    slack = 1e-12 * max(1.0, field.tau_h)
    if np.any(taus < -slack) or np.any(taus > field.tau_h + slack):
        raise DomainError("光学的深さが [0, τ_H] の範囲外です", field='tau', value=tau)
    taus = np.clip(taus, 0.0, field.tau_h)
    g = g_spline(taus)
    q = q_spline(taus)
    if scalar:
        return {'g_s': float(g), 'q_s': float(q)}
    return {'g_s': g, 'q_s': q}


def flux_divergence_residual(field: RadiativeField, omega: float) -> float:
    """
    エネルギー収支 dq_s/dτ + (1 − ω) G_s = 0 の最大残差（内部節点、スプライン微分）
    """
    q_spline = CubicSpline(field.tau_grid, field.q_s)
    inner = field.tau_grid[2:-2]
    g = np.interp(inner, field.tau_grid, field.g_s)
    balance = q_spline(inner, 1) + (1.0 - omega) * g
    return float(np.max(np.abs(balance)))
