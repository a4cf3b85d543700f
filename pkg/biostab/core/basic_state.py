"""
基本状態（定常濃度分布）モジュール

dn_s/dz = V_c M(G_s(τ)) n_s、dτ/dz = −τ_H n_s を z=1（τ=0）から下向きに積分し、
未知数 n_s(1) を ∫₀¹ n_s dz = 1（すなわち τ(0) = τ_H）となるようにシューティングで決めます。
"""

import logging
from typing import Dict, Optional, Union

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .chebyshev import interpolation_matrix, unit_grid, unit_weights
from .radiative import FieldInterpolant
from ..data.interfaces import TaxisFunctionProtocol
from ..data.models import BasicState, ProblemParams, RadiativeField
from ..utils.errors import ConsistencyError, ShootingError, ValidationError

logger = logging.getLogger(__name__)

# 積分器の許容誤差
ODE_RTOL = 1e-10
ODE_ATOL = 1e-13

# シューティングの探索範囲
BISECTION_BRACKET = (1e-4, 1e3)

# 数値的な発散とみなす濃度
_BLOWUP = 1e12


class _Shooter:
    """n_s(1) から質量誤差 ∫n_s dz − 1 を返す写像"""

    def __init__(self, params: ProblemParams, interp: FieldInterpolant, taxis: TaxisFunctionProtocol):
        self.vc = params.swim_speed
        self.tau_h = params.extinction
        self.interp = interp
        self.taxis = taxis
        self.evaluations = 0

    def rhs(self, z, y):
        n, tau = y
        g = self.interp.g_clamped(tau)
        return [self.vc * self.taxis.value(g) * n, -self.tau_h * n]

    def integrate(self, n_top: float, z_eval: Optional[np.ndarray] = None):
        self.evaluations += 1
        sol = solve_ivp(self.rhs, (1.0, 0.0), [n_top, 0.0], method='RK45',
                        rtol=ODE_RTOL, atol=ODE_ATOL, t_eval=z_eval)
        if not sol.success:
            raise ShootingError(f"濃度方程式の積分に失敗しました: {sol.message}",
                                bracket={'n_top': n_top})
        n = sol.y[0]
        if not np.all(np.isfinite(n)) or np.min(n) <= 0.0 or np.max(n) > _BLOWUP:
            raise ShootingError("積分中に濃度が 0 または無限大に近づきました",
                                bracket={'n_top': n_top, 'n_min': float(np.min(n)), 'n_max': float(np.max(n))})
        return sol

    def mass_defect(self, n_top: float) -> float:
        sol = self.integrate(n_top)
        return float(sol.y[1, -1] / self.tau_h - 1.0)


def _newton(shooter: _Shooter, tol: float, max_iter: int = 50) -> Optional[float]:
    """ニュートン法（正の範囲を外れたら None）"""
    n_top = 1.0
    for iteration in range(max_iter):
        f = shooter.mass_defect(n_top)
        logger.debug(f"シューティング反復 {iteration}: n_s(1)={n_top:.12g}, 質量誤差={f:.3e}")
        if abs(f) < tol:
            return n_top
        h = 1e-7 * max(1.0, n_top)
        slope = (shooter.mass_defect(n_top + h) - f) / h
        if slope == 0.0 or not np.isfinite(slope):
            return None
        candidate = n_top - f / slope
        if not np.isfinite(candidate) or candidate <= 0.0:
            return None
        n_top = candidate
    return None


def _bisection(shooter: _Shooter, tol: float) -> float:
    lo, hi = BISECTION_BRACKET

    def safe_defect(value: float) -> float:
        try:
            return shooter.mass_defect(value)
        except ShootingError:
            return np.nan

    f_lo, f_hi = safe_defect(lo), safe_defect(hi)
    if not (np.isfinite(f_lo) and np.isfinite(f_hi)) or f_lo * f_hi > 0:
        raise ShootingError("シューティングの挟み込みに失敗しました",
                            bracket={'lo': lo, 'hi': hi, 'f_lo': f_lo, 'f_hi': f_hi})
    root = brentq(shooter.mass_defect, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=200)
    defect = shooter.mass_defect(root)
    if abs(defect) >= tol:
        raise ShootingError("二分法でも質量条件を満たせませんでした",
                            bracket={'lo': lo, 'hi': hi, 'root': root, 'defect': defect})
    return root


def solve_basic_state(params: ProblemParams, field: RadiativeField, taxis: TaxisFunctionProtocol,
                      n_z: int = 65, tol: float = 1e-10) -> BasicState:
    """
    定常濃度分布をシューティング法で求める

    Args:
        params: 問題パラメータ
        field: 同じパラメータで解いた放射場
        taxis: 走光性関数
        n_z: チェビシェフ点数（65以上）
        tol: 質量条件の許容値

    Returns:
        係数未設定の基本状態（derive_coefficients で補完）

    Raises:
        ConsistencyError: 放射場や走光性関数が params と一致しない場合
        ShootingError: シューティングが失敗した場合
    """
    if field.params_hash != params.radiative_hash():
        raise ConsistencyError("放射場が異なるパラメータで計算されています",
                               details={'field': field.params_hash, 'params': params.radiative_hash()})
    if abs(taxis.critical_intensity - params.critical_intensity) > 1e-12 * params.critical_intensity:
        raise ConsistencyError("走光性関数の臨界光強度がパラメータと一致しません",
                               details={'taxis': taxis.critical_intensity, 'params': params.critical_intensity})
    if n_z < 65:
        raise ValidationError("基本状態の格子点数は65以上です", field='n_z', value=n_z)

    interp = FieldInterpolant(field, params.diffuse_flux)
    shooter = _Shooter(params, interp, taxis)

    try:
        n_top = _newton(shooter, tol)
    except ShootingError as e:
        logger.debug(f"ニュートン法が失敗したため二分法に切り替えます: {e}")
        n_top = None
    if n_top is None:
        n_top = _bisection(shooter, tol)

    z = unit_grid(n_z)
    sol = shooter.integrate(n_top, z_eval=z)
    n_s = sol.y[0]
    tau = sol.y[1]
    if abs(tau[-1] - params.extinction) > 1e-8 * max(1.0, params.extinction):
        raise ShootingError("τ(0) が τ_H と一致しません",
                            bracket={'tau_bottom': float(tau[-1]), 'tau_h': params.extinction})
    tau = np.clip(tau, 0.0, params.extinction)

    g = interp.g(tau)
    q = interp.q(tau)
    m_s = np.asarray(taxis.value(g), dtype=float)
    logger.info(f"基本状態を求めました: n_s(1)={n_top:.10g} (積分回数 {shooter.evaluations})")

    return BasicState(
        z_grid=z, n_s=n_s, tau_of_z=tau, g_s_of_z=g, q_s_of_z=q,
        dn_s_dz=params.swim_speed * m_s * n_s, m_s=m_s,
        n_top=float(n_top), params_hash=params.radiative_hash(),
        taxis_id=taxis.identifier, field=field,
    )


def derive_coefficients(state: BasicState, params: ProblemParams, taxis: TaxisFunctionProtocol) -> BasicState:
    """
    安定性係数 M_s, dM/dG, Υ₁, Υ₂ を埋めた基本状態を返す

    dG_s/dz = (dG_s/dτ)(−τ_H n_s) で、dG_s/dτ は放射場の補間の微分です。
    """
    interp = FieldInterpolant(state.field, params.diffuse_flux)
    g = state.g_s_of_z
    dg_dz = interp.dg_dtau(state.tau_of_z) * (-params.extinction * state.n_s)
    m_s = np.asarray(taxis.value(g), dtype=float)
    dm_dg = np.asarray(taxis.derivative(g), dtype=float)
    return state.model_copy(update={
        'm_s': m_s,
        'dm_dg': dm_dg,
        'dg_dz': dg_dz,
        'dn_s_dz': params.swim_speed * m_s * state.n_s,
        'upsilon1': params.swim_speed * dm_dg * dg_dz,
        'upsilon2': params.swim_speed * m_s,
    })


def profile_at(state: BasicState, z: Union[float, np.ndarray], diffuse_flux: float) -> Dict[str, np.ndarray]:
    """
    任意の z で n_s, τ, G_s, q_s を評価する

    n_s と τ はチェビシェフ補間、G_s と q_s は補間した τ での放射場の値です。
    """
    zs = np.atleast_1d(np.asarray(z, dtype=float))
    interp_mat = interpolation_matrix(state.z_grid, zs)
    n = interp_mat @ state.n_s
    tau = np.clip(interp_mat @ state.tau_of_z, 0.0, state.field.tau_h)
    interp = FieldInterpolant(state.field, diffuse_flux)
    return {'n_s': n, 'tau': tau, 'g_s': interp.g(tau), 'q_s': interp.q(tau)}


def mass_integral(state: BasicState) -> float:
    """クレンショウ・カーチス求積による ∫₀¹ n_s dz"""
    return float(unit_weights(state.n_points) @ state.n_s)


def equation_residual(state: BasicState, params: ProblemParams, taxis: TaxisFunctionProtocol) -> float:
    """
    濃度方程式の残差

    同じ n_s(1) から 8 次の DOP853 で独立に積分し直した解との最大相対差を返します。
    G_s の τ 微分が境界で対数特異なので、スペクトル微分ではなく積分形で評価します。
    """
    shooter = _Shooter(params, FieldInterpolant(state.field, params.diffuse_flux), taxis)
    sol = solve_ivp(shooter.rhs, (1.0, 0.0), [state.n_top, 0.0], method='DOP853',
                    rtol=1e-12, atol=1e-14, t_eval=state.z_grid)
    return float(np.max(np.abs(sol.y[0] - state.n_s)) / np.max(state.n_s))


def peak_location(state: BasicState, n_fine: int = 2001) -> float:
    """濃度が最大となる z（細かい格子で評価）"""
    z_fine = np.linspace(0.0, 1.0, n_fine)
    n_fine_values = interpolation_matrix(state.z_grid, z_fine) @ state.n_s
    return float(z_fine[int(np.argmax(n_fine_values))])
