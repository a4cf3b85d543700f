"""
ロギング設定モジュール

このモジュールでは、ソルバー全体で使用するロギングシステムの初期化と設定を行います。
CSV を標準出力に流す場合があるため、コンソールハンドラは標準エラー出力に接続します。
"""

import os
import sys
import logging
import logging.handlers
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from ..config.models import LoggingConfig

# 環境変数名
LOG_ENV_VAR = "BIOSTAB_LOG"

_LEVELS = {
    "error": logging.ERROR,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def resolve_log_level(value: Optional[str] = None) -> int:
    """
    BIOSTAB_LOG の値をログレベルに変換する

    Args:
        value: 'error' / 'info' / 'debug'（None の場合は環境変数を参照）

    Returns:
        logging モジュールのレベル定数
    """
    if value is None:
        load_dotenv()
        value = os.environ.get(LOG_ENV_VAR, "info")
    level = _LEVELS.get(value.strip().lower())
    if level is None:
        logging.getLogger(__name__).warning(f"未知のログレベル {value!r} のため info を使用します")
        return logging.INFO
    return level


def initialize_logging(config: LoggingConfig, app_name: str = "biostab") -> logging.Logger:
    """
    アプリケーション全体のロギングを初期化する

    Args:
        config: ロギング設定
        app_name: アプリケーション名

    Returns:
        ルートロガー
    """
    root_logger = logging.getLogger()

    # 既存のハンドラをクリア
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    log_level = resolve_log_level(config.log_level)
    root_logger.setLevel(log_level)

    formatter = logging.Formatter(
        '%(asctime)s - %(levelname)s - %(name)s - %(filename)s:%(lineno)d - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    console_handler.setLevel(log_level)
    root_logger.addHandler(console_handler)

    if config.log_file:
        log_file = Path(config.log_file)
        log_file.parent.mkdir(parents=True, exist_ok=True)

        # ログローテーションを設定
        try:
            file_handler = logging.handlers.RotatingFileHandler(
                log_file,
                maxBytes=10 * 1024 * 1024,  # 10MB
                backupCount=5,
                encoding='utf-8'
            )
            file_handler.setFormatter(formatter)
            file_handler.setLevel(log_level)
            root_logger.addHandler(file_handler)
            root_logger.info(f"ログファイルを設定しました: {log_file}")
        except (IOError, PermissionError) as e:
            root_logger.warning(f"ログファイルを設定できませんでした: {e}")

    root_logger.debug(f"{app_name} ロギングシステムが初期化されました (レベル: {logging.getLevelName(log_level)})")
    return root_logger
