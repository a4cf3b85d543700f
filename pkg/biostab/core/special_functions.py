"""
指数積分モジュール

指数積分 E_n(x) と、特異性差し引き法で使う核関数の閉形式積分を提供します。
E_n は scipy.special.expn（Cephes 実装）で評価します。
"""

from typing import Union

import numpy as np
from scipy import special

from ..utils.errors import DomainError

ArrayLike = Union[float, np.ndarray]


def _as_result(values: np.ndarray, scalar: bool) -> ArrayLike:
    return float(values) if scalar else values


def expint(n: int, x: ArrayLike) -> ArrayLike:
    """
    n 次の指数積分 E_n(x) = ∫₁^∞ e^(−xt) / tⁿ dt

    Args:
        n: 次数（1以上）
        x: 引数（0以上、n=1 では正）

    Returns:
        E_n(x)（スカラー入力にはスカラーを返す）

    Raises:
        DomainError: 次数や引数が定義域外の場合
    """
    if int(n) != n or n < 1:
        raise DomainError("指数積分の次数は1以上の整数です", field='n', value=n)
    scalar = np.ndim(x) == 0
    xs = np.asarray(x, dtype=float)
    if np.any(np.isnan(xs)) or np.any(xs < 0.0):
        raise DomainError("指数積分の引数は0以上です", field='x', value=x)
    if n == 1 and np.any(xs == 0.0):
        raise DomainError("E_1(0) は対数発散します", field='x', value=x)
    # 大きな x では 0 にアンダーフローする
    return _as_result(special.expn(int(n), xs), scalar)


def _check_depth(tau: ArrayLike, tau_h: float) -> np.ndarray:
    if not tau_h >= 0.0:
        raise DomainError("光学的厚さは0以上です", field='tau_h', value=tau_h)
    taus = np.asarray(tau, dtype=float)
    # 丸め誤差の範囲は許容する
    slack = 1e-14 * max(1.0, tau_h)
    if np.any(taus < -slack) or np.any(taus > tau_h + slack):
        raise DomainError("光学的深さが [0, τ_H] の範囲外です", field='tau', value=tau)
    return np.clip(taus, 0.0, tau_h)


def kernel_primitive_E1(tau: ArrayLike, tau_h: float) -> ArrayLike:
    """∫₀^τH E₁(|τ−τ′|) dτ′ = 2 − E₂(τ) − E₂(τ_H−τ)"""
    scalar = np.ndim(tau) == 0
    t = _check_depth(tau, tau_h)
    values = 2.0 - special.expn(2, t) - special.expn(2, tau_h - t)
    return _as_result(values, scalar)


def kernel_primitive_E2_signed(tau: ArrayLike, tau_h: float) -> ArrayLike:
    """∫₀^τH E₂(|τ−τ′|) sgn(τ−τ′) dτ′ = E₃(τ_H−τ) − E₃(τ)"""
    scalar = np.ndim(tau) == 0
    t = _check_depth(tau, tau_h)
    values = special.expn(3, tau_h - t) - special.expn(3, t)
    return _as_result(values, scalar)


def kernel_primitive_E3(tau: ArrayLike, tau_h: float) -> ArrayLike:
    """∫₀^τH E₃(|τ−τ′|) dτ′ = 2/3 − E₄(τ) − E₄(τ_H−τ)"""
    scalar = np.ndim(tau) == 0
    t = _check_depth(tau, tau_h)
    values = 2.0 / 3.0 - special.expn(4, t) - special.expn(4, tau_h - t)
    return _as_result(values, scalar)
