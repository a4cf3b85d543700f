"""
コマンドラインインターフェース

    python -m biostab {steady,neutral,critical,sweep,evolve} [--config PATH] [--out DIR] ...

終了コード: 0 成功、1 予期しないエラー、2 設定エラー、3 ソルバーや出力の失敗、4 掃引の一部が失敗。
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .config.loader import ConfigLoader
from .config.models import CaseConfig
from .core.analyzer import StabilityAnalyzer, failed_rows, run_sweep
from .core.csv_exporter import CsvExporter
from .data.models import ResultRow, RunManifest
from .data.result_cache import ResultCache
from .utils.errors import (
    AppError, ConfigError, ExportError, ValidationError, format_error_message, log_error,
)
from .utils.logging_setup import initialize_logging
from .utils.system_utils import ensure_writable_dir

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_PARTIAL = 4

NEUTRAL_COLUMNS = ["k", "R", "im_sigma", "branch", "mode", "status"]
INTENSITY_COLUMNS = ["tau", "z", "g_s", "q_s"]
BASIC_STATE_COLUMNS = ["z", "n_s", "tau", "g_s", "m_s", "upsilon1", "upsilon2"]
FRAME_COLUMNS = ["x", "z", "w1", "n1"]
PHASE_COLUMNS = ["t", "w1", "dw1_dt"]

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    """コマンドライン引数のパーサーを作る"""
    parser = argparse.ArgumentParser(prog="biostab", description="走光性生物対流の線形安定性解析")
    parser.add_argument("verb", choices=["steady", "neutral", "critical", "sweep", "evolve"], help="実行する処理")
    parser.add_argument("--config", "-c", type=str, default="config/config.yaml", help="設定ファイルのパス")
    parser.add_argument("--out", "-o", type=str, default="results", help="出力ディレクトリ")
    parser.add_argument("--k-min", type=float, help="波数の下限")
    parser.add_argument("--k-max", type=float, help="波数の上限")
    parser.add_argument("--k-step", type=float, help="波数の刻み")
    parser.add_argument("--workers", type=int, help="掃引のワーカー数（既定は論理コア数）")
    parser.add_argument("--sweep-file", type=str, help="掃引指定ファイル")
    parser.add_argument("--cache", type=str, help="掃引結果のキャッシュファイル")
    parser.add_argument("--k", type=float, help="evolve の波数")
    parser.add_argument("--periods", type=float, default=1.0, help="evolve の周期数（定常点では 0）")
    parser.add_argument("--frames", type=int, default=8, help="evolve のフレーム数")
    parser.add_argument("--debug", "-d", action="store_true", help="デバッグログを有効にする")
    return parser


class CommandRunner:
    """
    CLI の各処理を実行するクラス

    計算を全て終えてから CSV を書き出し、最後にマニフェストを manifest.jsonl に追記します。
    """

    def __init__(self, config: CaseConfig, out_dir: Path, exporter: Optional[CsvExporter] = None):
        self.logger = logging.getLogger(__name__)
        self.config = config
        self.out_dir = out_dir
        self.exporter = exporter or CsvExporter()

    def _finish(self, manifest: RunManifest, tables: Sequence[tuple]) -> List[Path]:
        """表を書き出してマニフェストを追記する"""
        ensure_writable_dir(self.out_dir)
        digest = manifest.content_hash()
        paths = [self.exporter.export(self.out_dir / name, columns, rows, digest) for name, columns, rows in tables]
        record = manifest.model_copy(update={'output_paths': [str(p) for p in paths]})
        try:
            with open(self.out_dir / "manifest.jsonl", 'a', encoding='utf-8') as f:
                f.write(record.model_dump_json() + "\n")
        except OSError as e:
            raise ExportError(f"マニフェストを追記できません: {e}", output_path=str(self.out_dir)) from e
        return paths

    def steady(self) -> int:
        analyzer = StabilityAnalyzer(self.config)
        intensity, basic = analyzer.steady_tables()
        self._finish(analyzer.manifest(), [
            ("intensity.csv", INTENSITY_COLUMNS, intensity),
            ("basic_state.csv", BASIC_STATE_COLUMNS, basic),
        ])
        return EXIT_OK

    def neutral(self, k_min=None, k_max=None, k_step=None) -> int:
        analyzer = StabilityAnalyzer(self.config)
        curve = analyzer.neutral_curve(k_min, k_max, k_step, show_progress=True)
        rows = [{"k": p.k, "R": p.rayleigh, "im_sigma": p.sigma_im, "branch": p.branch.value,
                 "mode": p.mode, "status": p.status} for p in curve]
        extra = {'k_range': [k_min, k_max, k_step]}
        self._finish(analyzer.manifest(extra=extra), [("neutral_curve.csv", NEUTRAL_COLUMNS, rows)])
        return EXIT_OK

    def critical(self, k_min=None, k_max=None, k_step=None) -> int:
        analyzer = StabilityAnalyzer(self.config)
        curve = analyzer.neutral_curve(k_min, k_max, k_step, show_progress=True)
        crit = analyzer.critical_point(curve)
        params = self.config
        row = ResultRow(vc=params.vc, tau_h=params.tau_h, omega=params.omega, b_flux=params.b_flux,
                        a_coeff=params.a_coeff, lambda_c=crit.lambda_c, r_c=crit.r_c, im_sigma=crit.sigma_im,
                        mode=crit.mode, branch=crit.branch.value, top_boundary=params.top_boundary.value,
                        status="boundary_minimum" if crit.boundary_minimum else "ok")
        extra = {'k_range': [k_min, k_max, k_step]}
        self._finish(analyzer.manifest(extra=extra), [("results.csv", ResultRow.COLUMNS, [row.as_record()])])
        return EXIT_OK

    def sweep(self, tuples, workers=None, cache_path=None) -> int:
        cache = ResultCache(cache_path) if cache_path else None
        rows = run_sweep(self.config, tuples, workers=workers, cache=cache)
        manifest = StabilityAnalyzer(self.config).manifest(extra={'sweep': [dict(t) for t in tuples]})
        self._finish(manifest, [("results.csv", ResultRow.COLUMNS, [r.as_record() for r in rows])])
        failures = failed_rows(rows)
        if failures:
            self.logger.warning(f"掃引の {failures}/{len(rows)} 件が失敗しました")
            return EXIT_PARTIAL
        return EXIT_OK

    def evolve(self, k: float, n_periods: float, n_frames: int) -> int:
        analyzer = StabilityAnalyzer(self.config)
        point, series = analyzer.evolution(k, n_periods, n_frames)
        zz, xx = np.meshgrid(series.z, series.x, indexing='ij')
        tables = []
        for i in range(series.times.size):
            frame = {"x": xx.ravel(), "z": zz.ravel(), "w1": series.w1[i].ravel(), "n1": series.n1[i].ravel()}
            tables.append((f"frame_{i:03d}.csv", FRAME_COLUMNS, frame))
        tables.append(("phase_portrait.csv", PHASE_COLUMNS,
                       {"t": series.phase_t, "w1": series.phase_w1, "dw1_dt": series.phase_dw1_dt}))
        extra = {'evolve': {'k': k, 'periods': n_periods, 'frames': n_frames}}
        self._finish(analyzer.manifest(extra=extra), tables)
        self.logger.info(f"時間発展を出力しました: {point.branch.value}, R={point.rayleigh:.8g}")
        return EXIT_OK


def run(args: argparse.Namespace) -> int:
    """解析済みの引数で処理を実行し、終了コードを返す"""
    loader = ConfigLoader(args.config)
    config = loader.load()
    log_level = "debug" if args.debug else None
    initialize_logging(config.logging_config(log_level))

    runner = CommandRunner(config, Path(args.out))
    if args.verb == "steady":
        return runner.steady()
    if args.verb == "neutral":
        return runner.neutral(args.k_min, args.k_max, args.k_step)
    if args.verb == "critical":
        return runner.critical(args.k_min, args.k_max, args.k_step)
    if args.verb == "sweep":
        return runner.sweep(loader.load_sweep(args.sweep_file), args.workers, args.cache)
    if args.k is None:
        raise ValidationError("evolve には --k が必要です", field='k')
    return runner.evolve(args.k, args.periods, args.frames)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """アプリケーションのメイン関数"""
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (ConfigError, ValidationError) as e:
        log_error(e, logger)
        print(format_error_message(e), file=sys.stderr)
        return EXIT_CONFIG
    except AppError as e:
        log_error(e, logger)
        print(format_error_message(e), file=sys.stderr)
        return EXIT_SOLVER
    except Exception as e:
        logging.error(f"アプリケーション実行エラー: {e}", exc_info=True)
        print(format_error_message(e), file=sys.stderr)
        return EXIT_UNEXPECTED
