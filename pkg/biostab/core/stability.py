"""
線形安定性ソルバーモジュール

摂動 (W, Θ) をチェビシェフ選点で離散化し、

    σ S_c⁻¹ (D² − k²) W = (D² − k²)² W + R k² Θ
    σ Θ = D²Θ − Υ₂ DΘ − (k² + Υ₁) Θ − Υ₀[Θ] − (dn_s/dz) W

を一般化固有値問題として組み立てます。Υ₀ はモーメント写像の行列を通じて Θ に作用します。
境界条件の6自由度は消去し（give-back 行列）、縮約した質量行列が正則になるようにします。

中立点は f(R) = max Re σ(R) の根として求め、定常分枝は σ = 0 を R の一般化固有値問題として直接解きます。
波数方向に継続して中立曲線を描きます。
"""

import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize_scalar
from tqdm import tqdm

from .chebyshev import unit_derivatives
from ..data.models import (
    BasicState, Branch, CriticalPoint, Eigenpair, MomentOperator, NeutralPoint,
    ProblemParams, StabilityOperator, TopBoundary,
)
from ..utils.errors import (
    AssemblyError, BracketingError, ConsistencyError, ConvergenceError,
    EigenSolverError, SolverError, ValidationError,
)

logger = logging.getLogger(__name__)

# 縮約質量行列の条件数の上限
CONDITION_LIMIT = 1e14

# 境界に由来する疑似固有値とみなす |σ|
SPURIOUS_LIMIT = 1e6

# 中立レイリー数の探索範囲
RAYLEIGH_BOUNDS = (1.0, 1e7)

# 演算子の虚部をこの相対値以下なら捨てる（m₂=0 では実演算子）
_REAL_TOL = 1e-9

# 該当する固有値がない分枝の成長率
_ABSENT_RATE = -1e6

# 定常中立点とみなす R の虚部の相対値
_REAL_ROOT_TOL = 1e-6

BranchHint = Union[None, str, int]


def _check_inputs(state: BasicState, k: float, params: ProblemParams, moment_op: MomentOperator) -> None:
    if not k > 0:
        raise ValidationError("波数は正である必要があります", field='k', value=k)
    if not state.has_coefficients:
        raise ConsistencyError("基本状態の安定性係数が未設定です（derive_coefficients を先に呼んでください）")
    expected = params.radiative_hash()
    if state.params_hash != expected or moment_op.params_hash != expected:
        raise ConsistencyError("基本状態・モーメント写像・パラメータの組み合わせが一致しません",
                               details={'state': state.params_hash, 'moments': moment_op.params_hash,
                                        'params': expected})
    if abs(moment_op.k - k) > 1e-12 * k:
        raise ConsistencyError("モーメント写像の波数が一致しません", details={'k': k, 'moments': moment_op.k})
    if moment_op.g_mat.shape != (state.n_points, state.n_points):
        raise ConsistencyError("モーメント写像の格子が基本状態と一致しません")
    if not params.diffuse_flux > 0:
        raise ValidationError("安定性解析には正の入射フラックスが必要です", field='b_flux',
                              value=params.diffuse_flux)
    if np.min(state.q_s_of_z) <= 0:
        raise ValidationError("放射フラックス q_s が正でない点があります", field='q_s',
                              value=float(np.min(state.q_s_of_z)))


def assemble_operator(state: BasicState, k: float, params: ProblemParams,
                      moment_op: MomentOperator) -> StabilityOperator:
    """
    安定性の一般化固有値問題を組み立てる

    Args:
        state: 係数を設定した基本状態
        k: 水平波数
        params: 問題パラメータ
        moment_op: 同じ波数のモーメント写像

    Returns:
        境界自由度を消去した安定性演算子

    Raises:
        ConsistencyError: 入力が異なるパラメータから作られている場合
        AssemblyError: 縮約質量行列が特異な場合
    """
    _check_inputs(state, k, params, moment_op)
    n = state.n_points
    d1, d2, _, d4 = unit_derivatives(n)
    eye = np.eye(n)
    zero = np.zeros((n, n))
    k2 = k * k

    lap = d2 - k2 * eye
    a_ww = d4 - 2.0 * k2 * d2 + k2 * k2 * eye

    vc = params.swim_speed
    taxis_flux = vc * state.n_s * state.dm_dg
    phototaxis = vc * state.n_s * state.m_s / state.q_s_of_z
    horizontal = moment_op.m1 * moment_op.p_mat + moment_op.m2 * moment_op.q_mat
    upsilon0 = d1 @ (taxis_flux[:, None] * moment_op.g_mat) - 1j * phototaxis[:, None] * horizontal
    a_tt = d2 - state.upsilon2[:, None] * d1 - np.diag(k2 + state.upsilon1) - upsilon0
    a_tw = -np.diag(state.dn_s_dz)

    a0_full = np.block([[a_ww, zero], [a_tw, a_tt]]).astype(complex)
    a1_full = np.block([[zero, k2 * eye], [zero, zero]]).astype(complex)
    b_full = np.block([[lap / params.schmidt, zero], [zero, eye]]).astype(complex)

    top = TopBoundary(params.top_boundary)
    constraints = np.zeros((6, 2 * n), dtype=complex)
    constraints[0, n - 1] = 1.0
    constraints[1, :n] = d1[n - 1]
    constraints[2, 0] = 1.0
    constraints[3, :n] = d1[0] if top == TopBoundary.RIGID else d2[0]
    for row, node in ((4, n - 1), (5, 0)):
        flux = d1[node].astype(complex) - taxis_flux[node] * moment_op.g_mat[node]
        flux[node] -= state.upsilon2[node]
        constraints[row, n:] = flux

    removed = np.array([0, 1, n - 2, n - 1, n, 2 * n - 1])
    kept = np.setdiff1d(np.arange(2 * n), removed)
    rows = np.concatenate([np.arange(2, n - 2), n + np.arange(1, n - 1)])
    try:
        give_back = -linalg.solve(constraints[:, removed], constraints[:, kept])
    except linalg.LinAlgError as e:
        raise AssemblyError("境界条件の行列が特異です", details={'cause': str(e)}) from e

    def reduce(matrix: np.ndarray) -> np.ndarray:
        block = matrix[rows]
        return block[:, kept] + block[:, removed] @ give_back

    a0 = reduce(a0_full)
    a1 = reduce(a1_full)
    b = reduce(b_full)
    condition = float(np.linalg.cond(b))
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise AssemblyError("境界条件を入れた質量行列が特異です（格子が粗すぎる可能性があります）",
                            details={'condition': condition, 'n_z': n})
    c0 = linalg.solve(b, a0)
    c1 = linalg.solve(b, a1)
    logger.debug(f"安定性演算子を組み立てました (k={k:.6g}, n={n}, cond(B)={condition:.3e})")

    return StabilityOperator(
        k=float(k), m1=moment_op.m1, m2=moment_op.m2, z_grid=state.z_grid, top_boundary=top,
        a0_full=a0_full, a1_full=a1_full, b_full=b_full, constraints=constraints,
        kept=kept, removed=removed, give_back=give_back, c0=c0, c1=c1,
        condition=condition, params_hash=params.radiative_hash(),
    )


def _evolution_matrix(op: StabilityOperator, rayleigh: float) -> np.ndarray:
    matrix = op.c0 + rayleigh * op.c1
    scale = np.max(np.abs(matrix))
    if np.max(np.abs(matrix.imag)) <= _REAL_TOL * scale:
        return matrix.real
    return matrix


def _admissible(sigmas: np.ndarray) -> np.ndarray:
    return np.isfinite(sigmas) & (np.abs(sigmas) <= SPURIOUS_LIMIT)


def _sort_order(sigmas: np.ndarray) -> np.ndarray:
    """Re σ の降順（共役対では Im σ > 0 を先）"""
    return np.lexsort((-sigmas.imag, -sigmas.real))


def growth_spectrum(op: StabilityOperator, rayleigh: float) -> np.ndarray:
    """
    固有値 σ を Re σ の降順で返す

    |σ| > 1e6 と非有限の値は境界由来の疑似固有値として除きます。

    Raises:
        EigenSolverError: 固有値計算が失敗した場合
    """
    matrix = _evolution_matrix(op, rayleigh)
    try:
        sigmas = linalg.eigvals(matrix)
    except (linalg.LinAlgError, ValueError) as e:
        raise EigenSolverError(f"固有値計算に失敗しました: {e}", condition=op.condition) from e
    sigmas = sigmas[_admissible(sigmas)].astype(complex)
    return sigmas[_sort_order(sigmas)]


def full_vector(op: StabilityOperator, reduced: np.ndarray) -> np.ndarray:
    """縮約ベクトルから境界自由度を復元した (W, Θ)"""
    x = np.zeros(2 * op.n_points, dtype=complex)
    x[op.kept] = reduced
    x[op.removed] = op.give_back @ reduced
    return x


def boundary_residual(op: StabilityOperator, x: np.ndarray) -> float:
    """境界条件の残差の最大値（|C||x| の最大値に対する相対値）"""
    scale = float(np.max(np.abs(op.constraints) @ np.abs(x)))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(op.constraints @ x))) / scale


def _normalize(w: np.ndarray, theta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    reference = w if np.max(np.abs(w)) > 0 else theta
    peak = reference[int(np.argmax(np.abs(reference)))]
    if peak == 0:
        return w, theta
    return w / peak, theta / peak


def eigenpairs(op: StabilityOperator, rayleigh: float, energy_filter: bool = True) -> List[Eigenpair]:
    """
    固有値と固有関数を Re σ の降順で返す

    Args:
        op: 安定性演算子
        rayleigh: レイリー数
        energy_filter: 境界隣接の2節点に W のエネルギーの半分以上が集中する解を除く

    Returns:
        固有対のリスト（W は最大値が 1 になるよう正規化）
    """
    matrix = _evolution_matrix(op, rayleigh)
    try:
        sigmas, vectors = linalg.eig(matrix)
    except (linalg.LinAlgError, ValueError) as e:
        raise EigenSolverError(f"固有値計算に失敗しました: {e}", condition=op.condition) from e
    sigmas = sigmas.astype(complex)
    n = op.n_points
    pairs = []
    for index in _sort_order(sigmas):
        sigma = sigmas[index]
        if not _admissible(np.array([sigma]))[0]:
            continue
        x = full_vector(op, vectors[:, index])
        w, theta = x[:n], x[n:]
        energy = float(np.sum(np.abs(w) ** 2))
        if energy_filter and energy > 0:
            edge = float(np.abs(w[1]) ** 2 + np.abs(w[n - 2]) ** 2)
            if edge > 0.5 * energy:
                continue
        w, theta = _normalize(w, theta)
        pairs.append(Eigenpair(sigma_re=float(sigma.real), sigma_im=float(sigma.imag), w=w, theta=theta,
                               z_grid=op.z_grid, k=op.k, rayleigh=float(rayleigh)))
    return pairs


def _branch_rate(sigmas: np.ndarray, branch_hint: BranchHint, tol_freq: float) -> Tuple[float, Optional[int]]:
    """分枝指定に応じた成長率と、その固有値のインデックス"""
    if sigmas.size == 0:
        return _ABSENT_RATE, None
    if branch_hint is None:
        return float(sigmas[0].real), 0
    if branch_hint == Branch.STATIONARY.value:
        candidates = np.flatnonzero(np.abs(sigmas.imag) < tol_freq)
    elif branch_hint == Branch.OSCILLATORY.value:
        candidates = np.flatnonzero(sigmas.imag >= tol_freq)
    elif isinstance(branch_hint, (int, np.integer)) and branch_hint >= 1:
        # 共役対は1つと数える
        distinct = np.flatnonzero(sigmas.imag >= -1e-12 * np.maximum(1.0, np.abs(sigmas)))
        candidates = distinct[branch_hint - 1:branch_hint]
    else:
        raise ValidationError("branch_hint は None, 'stationary', 'oscillatory' または正の整数です",
                              field='branch_hint', value=branch_hint)
    if candidates.size == 0:
        return _ABSENT_RATE, None
    return float(sigmas[candidates[0]].real), int(candidates[0])


def classify_mode(w: np.ndarray) -> int:
    """
    鉛直方向の対流セル数

    W を最大振幅の位相で回転した実部について、内部節点での厳密な符号変化の数に 1 を足します。
    振幅が最大値の 1e-8 未満の節点は数えません。

    Raises:
        ValidationError: 固有ベクトルがほぼゼロの場合
    """
    w = np.asarray(w, dtype=complex)
    magnitude = np.abs(w)
    peak = float(np.max(magnitude)) if w.size else 0.0
    if not np.isfinite(peak) or peak < 1e-300:
        raise ValidationError("固有ベクトルを正規化できません", field='w', value=peak)
    rotated = (w * np.exp(-1j * np.angle(w[int(np.argmax(magnitude))]))).real[1:-1]
    significant = rotated[np.abs(rotated) >= 1e-8 * peak]
    signs = np.sign(significant)
    return 1 + int(np.count_nonzero(signs[1:] != signs[:-1]))


def stationary_rayleigh_numbers(op: StabilityOperator,
                                r_bounds: Tuple[float, float] = RAYLEIGH_BOUNDS) -> np.ndarray:
    """
    σ = 0 の固有値を持つレイリー数を昇順で返す

    (C₀ + R C₁) x = 0 を R についての一般化固有値問題として解き、範囲内の実固有値だけを残します。
    C₁ は特異なので無限大の固有値は捨てます。

    Raises:
        EigenSolverError: 固有値計算が失敗した場合
    """
    try:
        values = linalg.eigvals(op.c0, -op.c1)
    except (linalg.LinAlgError, ValueError) as e:
        raise EigenSolverError(f"定常中立点の固有値計算に失敗しました: {e}", condition=op.condition) from e
    values = values[np.isfinite(values)]
    real = values[np.abs(values.imag) <= _REAL_ROOT_TOL * np.maximum(1.0, np.abs(values))].real
    lo, hi = r_bounds
    return np.sort(real[(real >= lo) & (real <= hi)])


def _bracketed_root(rate: Callable[[float], float], fail: Callable[[str], BracketingError], k: float,
                    rayleigh_guess: float, r_bounds: Tuple[float, float]) -> float:
    """初期値から倍々・半々で f の符号変化を挟み込み、ブレント法で根を求める"""
    r_lo, r_hi = r_bounds
    r = min(max(rayleigh_guess, r_lo), r_hi)
    f = rate(r)
    previous = r
    if f < 0:
        while f < 0:
            if r >= r_hi:
                raise fail("レイリー数の上限まで不安定化しませんでした")
            previous, r = r, min(2.0 * r, r_hi)
            f = rate(r)
        lo, hi = previous, r
    else:
        while f >= 0:
            if r <= r_lo:
                raise fail("レイリー数の下限でも安定化しませんでした")
            previous, r = r, max(0.5 * r, r_lo)
            f = rate(r)
        lo, hi = r, previous
    logger.debug(f"中立点の挟み込み (k={k:.6g}): [{lo:.6g}, {hi:.6g}]")

    try:
        return brentq(rate, lo, hi, xtol=1e-10, rtol=1e-12, maxiter=200)
    except RuntimeError as e:
        raise ConvergenceError(f"中立レイリー数の根探索が収束しませんでした: {e}",
                               details={'k': k, 'bracket': (lo, hi)}) from e


def neutral_solution(k: float, params: ProblemParams, state: BasicState, moment_op: MomentOperator,
                     branch_hint: BranchHint = None, rayleigh_guess: float = 300.0,
                     tol_eigen: float = 1e-8, tol_freq: float = 1e-3,
                     r_bounds: Tuple[float, float] = RAYLEIGH_BOUNDS,
                     operator: Optional[StabilityOperator] = None) -> Tuple[NeutralPoint, Eigenpair]:
    """
    中立点とそこでの固有対を求める

    f(R) = max Re σ(R)（branch_hint で対象の固有値を限定）を初期値から倍々・半々で挟み込み、
    ブレント法で根を求めます。branch_hint='stationary' では σ = 0 となる最小の R を
    stationary_rayleigh_numbers から直接求めます（実固有値の最大値は 0 を跨がずに正へ
    飛ぶことがあるため）。

    Args:
        k: 波数
        params: 問題パラメータ
        state: 基本状態
        moment_op: 同じ波数のモーメント写像
        branch_hint: None（最大成長率）、'stationary'、'oscillatory'、n（n 番目の固有値）
        rayleigh_guess: 初期レイリー数
        tol_eigen: 根での |f| の許容値
        tol_freq: 定常と振動を分ける |Im σ|
        r_bounds: 探索するレイリー数の範囲
        operator: 組み立て済みの演算子

    Returns:
        (中立点, 固有対)

    Raises:
        BracketingError: 範囲内に符号変化がない、または根で f が不連続な場合
    """
    op = operator if operator is not None else assemble_operator(state, k, params, moment_op)
    samples: Dict[float, float] = {}

    def rate(rayleigh: float) -> float:
        value, _ = _branch_rate(growth_spectrum(op, rayleigh), branch_hint, tol_freq)
        samples[float(rayleigh)] = value
        return value

    def fail(message: str) -> BracketingError:
        return BracketingError(message, k=k, samples=dict(sorted(samples.items())))

    if branch_hint == Branch.STATIONARY.value:
        roots = stationary_rayleigh_numbers(op, r_bounds)
        if roots.size == 0:
            raise fail("範囲内に σ = 0 となるレイリー数がありません")
        # 丸め誤差で残った無限大由来の値は σ = 0 を再現しないので飛ばす
        for candidate in roots:
            root = float(candidate)
            sigmas = growth_spectrum(op, root)
            real = np.flatnonzero(np.abs(sigmas.imag) < tol_freq)
            index = int(real[np.argmin(np.abs(sigmas[real]))]) if real.size else None
            value = float(sigmas[index].real) if index is not None else _ABSENT_RATE
            samples[root] = value
            noise = 64.0 * np.finfo(float).eps * float(np.linalg.norm(_evolution_matrix(op, root), 1))
            if index is not None and abs(value) <= max(tol_eigen, noise):
                break
    else:
        root = _bracketed_root(rate, fail, k, rayleigh_guess, r_bounds)
        sigmas = growth_spectrum(op, root)
        value, index = _branch_rate(sigmas, branch_hint, tol_freq)

    matrix = _evolution_matrix(op, root)
    noise = 64.0 * np.finfo(float).eps * float(np.linalg.norm(matrix, 1))
    if index is None or abs(value) > max(tol_eigen, noise):
        raise fail(f"根で成長率が 0 になりません (max Re σ = {value:.3e})")
    sigma = sigmas[index]

    pairs = eigenpairs(op, root, energy_filter=False)
    pair = min(pairs, key=lambda p: abs(p.sigma - sigma))
    sigma_im = abs(float(sigma.imag))
    branch = Branch.STATIONARY if sigma_im < tol_freq else Branch.OSCILLATORY
    point = NeutralPoint(k=float(k), rayleigh=float(root), sigma_im=sigma_im, branch=branch,
                         mode=classify_mode(pair.w))
    logger.debug(f"中立点: k={k:.6g}, R={root:.10g}, Im σ={sigma_im:.6g}, {branch.value}, mode {point.mode}")
    return point, pair


def neutral_point(k: float, params: ProblemParams, state: BasicState, moment_op: MomentOperator,
                  branch_hint: BranchHint = None, **kwargs) -> NeutralPoint:
    """中立点（max Re σ(R) = 0 となる R）を求める"""
    point, _ = neutral_solution(k, params, state, moment_op, branch_hint=branch_hint, **kwargs)
    return point


def wavenumber_grid(k_min: float, k_max: float, k_step: float) -> np.ndarray:
    """k_min から k_max まで（端を含む）k_step 刻みの波数"""
    if not 0 < k_min < k_max:
        raise ValidationError("0 < k_min < k_max である必要があります", field='k_range', value=(k_min, k_max))
    if not k_step > 0:
        raise ValidationError("k_step は正である必要があります", field='k_step', value=k_step)
    count = int(math.floor((k_max - k_min) / k_step + 1e-9)) + 1
    return k_min + k_step * np.arange(count)


def _failed_point(k: float, error: Exception) -> NeutralPoint:
    return NeutralPoint(k=float(k), rayleigh=float('nan'), sigma_im=float('nan'),
                        branch=Branch.STATIONARY, mode=0, status=f"failed: {type(error).__name__}")


def trace_neutral_curve(params: ProblemParams, state: BasicState,
                        moment_factory: Callable[[float], MomentOperator],
                        k_min: float, k_max: float, k_step: float,
                        rayleigh_guess: float = 300.0, tol_eigen: float = 1e-8, tol_freq: float = 1e-3,
                        both_branches: bool = True, show_progress: bool = False) -> List[NeutralPoint]:
    """
    中立曲線を波数方向に継続して描く

    各波数で最も不安定な分枝の中立点を求め、both_branches のときは
    もう一方の分枝の中立点も探します（振動分枝は [R, 2R]、定常分枝は R 以上の全範囲）。
    失敗した点は status に理由を記録して NaN のまま返します。

    Args:
        params: 問題パラメータ
        state: 係数を設定した基本状態
        moment_factory: 波数からモーメント写像を返す関数
        k_min, k_max, k_step: 波数範囲
        rayleigh_guess: 最初の波数での初期レイリー数
        tol_eigen, tol_freq: 許容値
        both_branches: 両方の分枝を出力するか
        show_progress: 進捗バーを表示するか

    Returns:
        波数、分枝（定常が先）の順に並んだ中立点
    """
    ks = wavenumber_grid(k_min, k_max, k_step)
    points: List[NeutralPoint] = []
    guess = rayleigh_guess
    for k in tqdm(ks, desc="中立曲線", disable=not show_progress, leave=False):
        try:
            op = assemble_operator(state, k, params, moment_factory(float(k)))
            primary = neutral_point(k, params, state, None, operator=op, rayleigh_guess=guess,
                                    tol_eigen=tol_eigen, tol_freq=tol_freq)
        except SolverError as e:
            logger.warning(f"k={k:.6g} で中立点が求まりませんでした: {e.message}")
            points.append(_failed_point(k, e))
            continue
        points.append(primary)
        guess = primary.rayleigh
        if not both_branches:
            continue
        other = Branch.OSCILLATORY if primary.branch == Branch.STATIONARY else Branch.STATIONARY
        upper = 2.0 * primary.rayleigh if other == Branch.OSCILLATORY else RAYLEIGH_BOUNDS[1]
        try:
            secondary = neutral_point(k, params, state, None, branch_hint=other.value, operator=op,
                                      rayleigh_guess=primary.rayleigh,
                                      r_bounds=(primary.rayleigh, upper),
                                      tol_eigen=tol_eigen, tol_freq=tol_freq)
        except SolverError:
            logger.debug(f"k={k:.6g} で {other.value} 分枝は見つかりませんでした")
            continue
        if secondary.branch == other:
            points.append(secondary)

    order = {Branch.STATIONARY: 0, Branch.OSCILLATORY: 1}
    points.sort(key=lambda p: (p.k, order[p.branch]))
    ok = sum(1 for p in points if p.ok)
    logger.info(f"中立曲線を描きました ({ok}/{len(points)} 点成功)")
    return points


def find_branch_points(curve: Sequence[NeutralPoint], tol_freq: float = 1e-3) -> List[float]:
    """
    振動分枝が定常分枝に合流する波数 k_b を推定する

    振動分枝の各区間のうち、隣の波数が定常分枝だけの端で (Im σ)² を k について
    線形外挿し、0 となる波数を返します。波数範囲の外に出た推定値は捨てます。
    """
    oscillatory = sorted((p for p in curve if p.ok and p.branch == Branch.OSCILLATORY and p.sigma_im >= tol_freq),
                         key=lambda p: p.k)
    if not oscillatory:
        return []
    all_ks = sorted({p.k for p in curve if p.ok})
    position = {k: i for i, k in enumerate(all_ks)}
    oscillatory_ks = {p.k for p in oscillatory}
    stationary_ks = {p.k for p in curve if p.ok and p.branch == Branch.STATIONARY}

    def stationary_neighbor(k: float, direction: int) -> Optional[float]:
        i = position[k] + direction
        if 0 <= i < len(all_ks) and all_ks[i] in stationary_ks and all_ks[i] not in oscillatory_ks:
            return all_ks[i]
        return None

    segments: List[List[NeutralPoint]] = [[oscillatory[0]]]
    for point in oscillatory[1:]:
        if position[point.k] - position[segments[-1][-1].k] > 1:
            segments.append([point])
        else:
            segments[-1].append(point)

    estimates = []
    for segment in segments:
        for direction in (1, -1):
            end = segment[-1] if direction > 0 else segment[0]
            neighbor_k = stationary_neighbor(end.k, direction)
            if neighbor_k is None:
                continue
            if len(segment) == 1:
                estimates.append(0.5 * (end.k + neighbor_k))
                continue
            inner = segment[-2] if direction > 0 else segment[1]
            s_end, s_inner = end.sigma_im ** 2, inner.sigma_im ** 2
            # Im σ が合流点に向けて減少している端だけを使う
            if s_end < s_inner:
                estimates.append(end.k + s_end * (end.k - inner.k) / (s_inner - s_end))
    return sorted({k for k in estimates if all_ks[0] <= k <= all_ks[-1]})


def _branch_points(curve: Sequence[NeutralPoint], branch: Branch) -> List[NeutralPoint]:
    by_k: Dict[float, NeutralPoint] = {}
    for p in curve:
        if p.ok and p.branch == branch and (p.k not in by_k or p.rayleigh < by_k[p.k].rayleigh):
            by_k[p.k] = p
    return [by_k[k] for k in sorted(by_k)]


def critical_point(curve: Sequence[NeutralPoint]) -> CriticalPoint:
    """
    中立曲線の最小点を求める

    最小点を含む分枝を三次スプラインで補間し、離散最小点の両隣を挟みとした
    黄金分割探索と、スプライン微分によるニュートン補正で k_c を決めます。
    最小点が波数範囲の端にある場合は boundary_minimum を立てます。

    Raises:
        SolverError: 有効な点がない場合
    """
    valid = [p for p in curve if p.ok and np.isfinite(p.rayleigh)]
    if not valid:
        raise SolverError("中立曲線に有効な点がありません", details={'points': len(curve)})
    best = min(valid, key=lambda p: p.rayleigh)
    branch_pts = _branch_points(valid, best.branch)
    ks = np.array([p.k for p in branch_pts])
    rs = np.array([p.rayleigh for p in branch_pts])
    i = int(np.argmin(rs))
    all_ks = sorted({p.k for p in curve})

    if i == 0 or i == len(branch_pts) - 1 or len(branch_pts) < 3:
        at_edge = best.k in (all_ks[0], all_ks[-1])
        if at_edge:
            logger.warning(f"中立曲線の最小点が波数範囲の端 (k={best.k:.6g}) にあります")
        return CriticalPoint(k_c=best.k, r_c=best.rayleigh, lambda_c=2.0 * math.pi / best.k,
                             sigma_im=best.sigma_im, branch=best.branch, mode=max(best.mode, 1),
                             boundary_minimum=at_edge)

    spline = CubicSpline(ks, rs)
    result = minimize_scalar(lambda x: float(spline(x)), bracket=(ks[i - 1], ks[i], ks[i + 1]),
                             method='golden', options={'xtol': 1e-10})
    k_c = float(result.x)
    for _ in range(3):
        curvature = float(spline(k_c, 2))
        if curvature <= 0:
            break
        step = float(spline(k_c, 1)) / curvature
        if not ks[i - 1] < k_c - step < ks[i + 1]:
            break
        k_c -= step
    r_c = float(spline(k_c))
    nearest = branch_pts[int(np.argmin(np.abs(ks - k_c)))]
    sigma_im = float(np.interp(k_c, ks, [p.sigma_im for p in branch_pts]))
    return CriticalPoint(k_c=k_c, r_c=r_c, lambda_c=2.0 * math.pi / k_c, sigma_im=sigma_im,
                         branch=best.branch, mode=max(nearest.mode, 1), boundary_minimum=False)


def refine_critical_point(params: ProblemParams, state: BasicState,
                          moment_factory: Callable[[float], MomentOperator],
                          curve: Sequence[NeutralPoint], tol_eigen: float = 1e-8, tol_freq: float = 1e-3,
                          xatol: float = 1e-4) -> CriticalPoint:
    """
    中立点を直接評価して臨界点を精密化する

    critical_point の結果の両隣の波数を範囲とし、その分枝の中立レイリー数を
    有界ブレント法（黄金分割と放物線補間）で最小化します。
    """
    estimate = critical_point(curve)
    if estimate.boundary_minimum:
        return estimate
    branch_pts = _branch_points(curve, estimate.branch)
    ks = np.array([p.k for p in branch_pts])
    below = ks[ks < estimate.k_c]
    above = ks[ks > estimate.k_c]
    if below.size == 0 or above.size == 0:
        return estimate
    lo, hi = float(below[-1]), float(above[0])
    hint = estimate.branch.value
    cache: Dict[float, NeutralPoint] = {}

    def neutral_r(k: float) -> float:
        try:
            point = neutral_point(k, params, state, moment_factory(k), branch_hint=hint,
                                  rayleigh_guess=estimate.r_c, tol_eigen=tol_eigen, tol_freq=tol_freq)
        except SolverError as e:
            logger.warning(f"臨界点の精密化中に k={k:.6g} で失敗しました: {e.message}")
            return float('inf')
        cache[k] = point
        return point.rayleigh

    result = minimize_scalar(neutral_r, bounds=(lo, hi), method='bounded', options={'xatol': xatol})
    k_c = float(result.x)
    point = cache.get(k_c)
    if point is None or not np.isfinite(result.fun) or result.fun > estimate.r_c * (1 + 1e-2):
        logger.warning("臨界点の精密化に失敗したため曲線からの推定値を返します")
        return estimate
    logger.info(f"臨界点: k_c={k_c:.6g}, R_c={point.rayleigh:.8g}, {point.branch.value}, mode {point.mode}")
    return CriticalPoint(k_c=k_c, r_c=point.rayleigh, lambda_c=2.0 * math.pi / k_c, sigma_im=point.sigma_im,
                         branch=point.branch, mode=max(point.mode, 1), boundary_minimum=False)
