"""
解析フローモジュール

このモジュールでは、1ケースの解析（放射場 → 基本状態 → モーメント写像 → 中立曲線 → 臨界点）
と、複数ケースの掃引を制御します。中間結果はケースごとに一度だけ計算して再利用します。
"""

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError as PydanticValidationError
from tqdm import tqdm

from .. import __version__
from ..config.models import CaseConfig, NumericsConfig
from ..data.interfaces import ResultCacheProtocol, TaxisFunctionProtocol
from ..data.models import (
    BasicState, CriticalPoint, DirectionSet, Eigenpair, EvolutionSeries, MomentOperator,
    NeutralPoint, RadiativeField, ResultRow, RunManifest,
)
from ..utils.errors import AppError, SolverError, ValidationError
from ..utils.system_utils import resolve_worker_count
from .basic_state import derive_coefficients, solve_basic_state
from .evolution import evolution_times, reconstruct_evolution
from .perturbed_rte import SweepGeometry, make_direction_set, moment_operator
from .radiative import solve_fredholm, uniform_suspension_profile
from .stability import critical_point, neutral_solution, refine_critical_point, trace_neutral_curve
from .taxis import default_taxis


def build_manifest(config: CaseConfig, taxis_id: str, output_paths: Sequence[str] = (),
                   extra: Optional[Dict[str, Any]] = None) -> RunManifest:
    """
    実行マニフェストを作る

    Args:
        config: ケース設定
        taxis_id: 走光性関数の識別子
        output_paths: 出力ファイル
        extra: 設定スナップショットに追加する項目（掃引の組など）
    """
    snapshot = config.snapshot()
    if extra:
        snapshot.update(extra)
    return RunManifest(
        config=snapshot,
        numerics=config.to_numerics().model_dump(mode='json'),
        taxis_id=taxis_id,
        code_version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
        output_paths=[str(p) for p in output_paths],
    )


class StabilityAnalyzer:
    """
    1ケースの安定性解析クラス

    設定から問題パラメータと数値設定を取り出し、放射場・基本状態・掃引格子・
    波数ごとのモーメント写像を遅延評価でキャッシュします。
    """

    def __init__(self, config: CaseConfig, taxis: Optional[TaxisFunctionProtocol] = None):
        """
        初期化

        Args:
            config: ケース設定
            taxis: 走光性関数（省略時は設定の形状から既定の関数を作る）
        """
        self.logger = logging.getLogger(__name__)
        self.config = config
        self.params = config.to_params()
        self.numerics: NumericsConfig = config.to_numerics()
        self.taxis = taxis or default_taxis(config.g_c, config.taxis_shape())

        self._field: Optional[RadiativeField] = None
        self._state: Optional[BasicState] = None
        self._directions: Optional[DirectionSet] = None
        self._geometry: Optional[SweepGeometry] = None
        self._moments: Dict[float, MomentOperator] = {}

    def manifest(self, output_paths: Sequence[str] = (), extra: Optional[Dict[str, Any]] = None) -> RunManifest:
        return build_manifest(self.config, self.taxis.identifier, output_paths, extra)

    def radiative_field(self) -> RadiativeField:
        """定常放射場（基本状態用）"""
        if self._field is None:
            self._field = solve_fredholm(self.params, self.numerics.n_tau, self.numerics.tol_fredholm)
            self.logger.info(f"放射場を求めました (n_tau={self.numerics.n_tau}, 残差={self._field.residual:.3e})")
        return self._field

    def uniform_profile(self) -> RadiativeField:
        """一様懸濁液の放射場（z 座標付き）"""
        return uniform_suspension_profile(self.params, self.numerics.n_tau, self.numerics.tol_fredholm)

    def basic_state(self) -> BasicState:
        """安定性係数を設定した基本状態"""
        if self._state is None:
            state = solve_basic_state(self.params, self.radiative_field(), self.taxis, self.numerics.n_z)
            self._state = derive_coefficients(state, self.params, self.taxis)
        return self._state

    @property
    def directions(self) -> DirectionSet:
        if self._directions is None:
            self._directions = make_direction_set(self.numerics.n_mu, self.numerics.n_phi)
        return self._directions

    def moment_operator(self, k: float) -> MomentOperator:
        """波数 k（m₁ = k, m₂ = 0）のモーメント写像"""
        key = float(k)
        if key not in self._moments:
            if self._geometry is None:
                self._geometry = SweepGeometry(self.basic_state(), self.params, self.directions,
                                               self.numerics.n_sub)
            self._moments[key] = moment_operator(self.basic_state(), self.params, key, 0.0, self.directions,
                                                 geometry=self._geometry)
        return self._moments[key]

    def neutral_curve(self, k_min: Optional[float] = None, k_max: Optional[float] = None,
                      k_step: Optional[float] = None, show_progress: bool = False) -> List[NeutralPoint]:
        """中立曲線（省略した範囲は数値設定の値）"""
        num = self.numerics
        return trace_neutral_curve(
            self.params, self.basic_state(), self.moment_operator,
            k_min if k_min is not None else num.k_min,
            k_max if k_max is not None else num.k_max,
            k_step if k_step is not None else num.k_step,
            rayleigh_guess=num.rayleigh_guess, tol_eigen=num.tol_eigen, tol_freq=num.tol_freq,
            show_progress=show_progress,
        )

    def critical_point(self, curve: Optional[List[NeutralPoint]] = None, refine: bool = True) -> CriticalPoint:
        """臨界点（refine のとき中立点を直接評価して精密化）"""
        curve = curve if curve is not None else self.neutral_curve()
        if not refine:
            return critical_point(curve)
        return refine_critical_point(self.params, self.basic_state(), self.moment_operator, curve,
                                     tol_eigen=self.numerics.tol_eigen, tol_freq=self.numerics.tol_freq)

    def neutral_solution(self, k: float, branch_hint=None) -> Tuple[NeutralPoint, Eigenpair]:
        """波数 k での中立点と固有対"""
        return neutral_solution(k, self.params, self.basic_state(), self.moment_operator(k),
                                branch_hint=branch_hint, rayleigh_guess=self.numerics.rayleigh_guess,
                                tol_eigen=self.numerics.tol_eigen, tol_freq=self.numerics.tol_freq)

    def evolution(self, k: float, n_periods: float, n_frames: int,
                  x_samples: int = 64) -> Tuple[NeutralPoint, EvolutionSeries]:
        """波数 k の中立モードの時間発展"""
        point, pair = self.neutral_solution(k)
        times = evolution_times(point, n_periods, n_frames)
        return point, reconstruct_evolution(point, pair, times, x_samples)

    def steady_tables(self) -> Tuple[Dict[str, np.ndarray], Dict[str, np.ndarray]]:
        """
        一様懸濁液の放射場と基本状態の表

        Returns:
            (intensity: tau, z, g_s, q_s; basic_state: z 昇順の z, n_s, tau, g_s, m_s, upsilon1, upsilon2)
        """
        uniform = self.uniform_profile()
        state = self.basic_state()
        intensity = {'tau': uniform.tau_grid, 'z': uniform.z_grid, 'g_s': uniform.g_s, 'q_s': uniform.q_s}
        ascending = slice(None, None, -1)
        basic = {
            'z': state.z_grid[ascending], 'n_s': state.n_s[ascending], 'tau': state.tau_of_z[ascending],
            'g_s': state.g_s_of_z[ascending], 'm_s': state.m_s[ascending],
            'upsilon1': state.upsilon1[ascending], 'upsilon2': state.upsilon2[ascending],
        }
        return intensity, basic

    def result_row(self, show_progress: bool = False) -> ResultRow:
        """
        臨界点を求めて結果行にする

        数値計算の失敗は例外にせず status に記録します。
        """
        base = _row_fields(self.config.model_dump())
        try:
            curve = self.neutral_curve(show_progress=show_progress)
            crit = self.critical_point(curve)
        except (SolverError, ValidationError) as e:
            self.logger.warning(f"臨界点を求められませんでした: {e}")
            return ResultRow(**base, status=f"failed: {type(e).__name__}")
        return ResultRow(
            **base, lambda_c=crit.lambda_c, r_c=crit.r_c, im_sigma=crit.sigma_im, mode=crit.mode,
            branch=crit.branch.value, status="boundary_minimum" if crit.boundary_minimum else "ok",
        )


def _as_float(value: Any) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        return float('nan')


def _row_fields(data: Dict[str, Any]) -> Dict[str, Any]:
    """設定値から結果行のパラメータ列を取り出す"""
    boundary = data.get('top_boundary', '')
    return {
        'vc': _as_float(data.get('vc')),
        'tau_h': _as_float(data.get('tau_h')),
        'omega': _as_float(data.get('omega')),
        'b_flux': _as_float(data.get('b_flux')),
        'a_coeff': _as_float(data.get('a_coeff')),
        'top_boundary': getattr(boundary, 'value', str(boundary)),
    }


def analyze_case(config_data: Dict[str, Any]) -> Dict[str, Any]:
    """1ケースを解析して結果行の辞書を返す（ワーカープロセスで実行）"""
    config = CaseConfig(**config_data)
    return StabilityAnalyzer(config).result_row().as_record()


def run_sweep(base: CaseConfig, tuples: Sequence[Dict[str, Any]], workers: Optional[int] = None,
              cache: Optional[ResultCacheProtocol] = None, show_progress: bool = True) -> List[ResultRow]:
    """
    パラメータの組ごとに臨界点を求める

    Args:
        base: 基準のケース設定
        tuples: 上書き値の組
        workers: ワーカープロセス数（None で論理コア数）
        cache: 結果キャッシュ（キーはケースのマニフェストハッシュ）
        show_progress: 進捗バーを表示するか

    Returns:
        入力と同じ順の結果行（不正な組や失敗は status に記録）
    """
    logger = logging.getLogger(__name__)
    rows: List[Optional[ResultRow]] = [None] * len(tuples)
    pending: Dict[int, Tuple[str, Dict[str, Any]]] = {}

    for i, overrides in enumerate(tuples):
        merged = base.model_dump()
        merged.update(overrides)
        unknown = sorted(set(overrides) - CaseConfig.allowed_keys())
        if unknown:
            logger.warning(f"掃引の組 {i} に未知のキーがあります: {', '.join(unknown)}")
            rows[i] = ResultRow(**_row_fields(merged), status="invalid: unknown keys")
            continue
        try:
            config = base.with_overrides(overrides)
        except (PydanticValidationError, AppError) as e:
            logger.warning(f"掃引の組 {i} が不正です: {overrides} ({type(e).__name__})")
            rows[i] = ResultRow(**_row_fields(merged), status="invalid: parameters")
            continue
        key = build_manifest(config, default_taxis(config.g_c, config.taxis_shape()).identifier).content_hash()
        cached = cache.get(key) if cache is not None else None
        if cached is not None:
            rows[i] = ResultRow(**cached)
            continue
        pending[i] = (key, config.model_dump(mode='json'))

    logger.info(f"掃引: {len(tuples)} 件中 {len(pending)} 件を計算します")
    n_workers = resolve_worker_count(workers, len(pending))

    def store(index: int, record: Dict[str, Any]) -> None:
        rows[index] = ResultRow(**record)
        if cache is not None and record.get('status') in ("ok", "boundary_minimum"):
            cache.set(pending[index][0], record)

    def record_failure(index: int, error: Exception) -> None:
        logger.error(f"掃引の組 {index} の計算中にエラーが発生しました: {error}")
        rows[index] = ResultRow(**_row_fields(pending[index][1]), status=f"failed: {type(error).__name__}")

    if n_workers <= 1 or len(pending) <= 1:
        for index in tqdm(list(pending), desc="掃引", disable=not show_progress):
            try:
                store(index, analyze_case(pending[index][1]))
            except Exception as e:
                record_failure(index, e)
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as executor:
            futures = {executor.submit(analyze_case, data): index for index, (_, data) in pending.items()}
            for future in tqdm(as_completed(futures), total=len(futures), desc="掃引", disable=not show_progress):
                index = futures[future]
                try:
                    store(index, future.result())
                except Exception as e:
                    record_failure(index, e)

    return [row for row in rows if row is not None]


def failed_rows(rows: Sequence[ResultRow]) -> int:
    """失敗または不正として記録された行の数"""
    return sum(1 for row in rows if row.status.startswith(("failed", "invalid")))
