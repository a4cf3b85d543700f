"""
システムユーティリティモジュール

ワーカー数の決定と出力先の検査を行います。
"""

import os
import logging
from pathlib import Path
from typing import Optional, Union

# psutilをインポート
try:
    import psutil
    has_psutil = True
except ImportError:
    has_psutil = False
    logging.warning("psutilがインストールされていません。ワーカー数は os.cpu_count() で決定します。")


def default_worker_count() -> int:
    """
    論理コア数に基づく既定のワーカー数を返す

    Returns:
        ワーカー数（1以上）
    """
    if has_psutil:
        count = psutil.cpu_count(logical=True)
    else:
        count = os.cpu_count()
    return max(1, int(count or 1))


def resolve_worker_count(requested: Optional[int], n_tasks: int) -> int:
    """
    要求されたワーカー数をタスク数と論理コア数で制限する

    Args:
        requested: 指定されたワーカー数（None で既定値）
        n_tasks: タスク数

    Returns:
        実際に使うワーカー数
    """
    workers = requested if requested and requested > 0 else default_worker_count()
    workers = min(workers, max(1, n_tasks))
    logging.getLogger(__name__).debug(f"ワーカー数: {workers} (タスク数: {n_tasks})")
    return workers


def ensure_writable_dir(path: Union[str, Path]) -> Path:
    """
    出力ディレクトリを作成し、書き込み可能であることを確認する

    Args:
        path: ディレクトリのパス

    Returns:
        作成済みのディレクトリパス

    Raises:
        PermissionError: 書き込みできない場合
    """
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    if not os.access(directory, os.W_OK):
        raise PermissionError(f"ディレクトリに書き込めません: {directory}")
    return directory
