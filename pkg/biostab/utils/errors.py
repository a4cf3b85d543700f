"""
エラーとエラーハンドリングモジュール

このモジュールは、ソルバー全体で使用される例外クラスとエラーハンドリング機能を定義します。
数値計算の失敗は SolverError 系、入力・設定の問題は ConfigError / ValidationError 系に分類します。
"""

import logging
import traceback
import functools
from typing import Dict, Any, Optional, Type, Callable, TypeVar, List

# 関数の戻り値の型
T = TypeVar('T')


# ベース例外クラス
class AppError(Exception):
    """アプリケーション基本エラークラス"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        """
        初期化

        Args:
            message: エラーメッセージ
            details: 追加の詳細情報（オプション）
        """
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def __str__(self) -> str:
        if self.details:
            return f"{self.message} - 詳細: {self.details}"
        return self.message


# 設定関連の例外
class ConfigError(AppError):
    """設定関連のエラー"""

    def __init__(self, message: str, config_file: Optional[str] = None, config_key: Optional[str] = None,
                 details: Optional[Dict[str, Any]] = None):
        """
        初期化

        Args:
            message: エラーメッセージ
            config_file: 設定ファイルパス（オプション）
            config_key: 設定キー（オプション）
            details: 追加の詳細情報（オプション）
        """
        details = details or {}
        if config_file:
            details['config_file'] = config_file
        if config_key:
            details['config_key'] = config_key
        super().__init__(message, details)
        self.config_file = config_file
        self.config_key = config_key


# 入力検証関連の例外
class ValidationError(AppError):
    """入力検証関連のエラー"""

    def __init__(self, message: str, field: Optional[str] = None, value: Optional[Any] = None,
                 details: Optional[Dict[str, Any]] = None):
        """
        初期化

        Args:
            message: エラーメッセージ
            field: フィールド名（オプション）
            value: 無効な値（オプション）
            details: 追加の詳細情報（オプション）
        """
        details = details or {}
        if field:
            details['field'] = field
        if value is not None:
            details['value'] = str(value)
        super().__init__(message, details)
        self.field = field
        self.value = value


class DomainError(ValidationError):
    """関数の定義域外の引数"""


# 数値計算関連の例外
class SolverError(AppError):
    """数値ソルバーのエラー（CLI の終了コード 3 に対応）"""


class ConvergenceError(SolverError):
    """反復計算が収束しなかったエラー"""

    def __init__(self, message: str, residual: Optional[float] = None, iterations: Optional[int] = None,
                 history: Optional[List[float]] = None, details: Optional[Dict[str, Any]] = None):
        """
        初期化

        Args:
            message: エラーメッセージ
            residual: 最後の残差（オプション）
            iterations: 実行した反復回数（オプション）
            history: 残差の履歴（オプション）
            details: 追加の詳細情報（オプション）
        """
        details = details or {}
        if residual is not None:
            details['residual'] = residual
        if iterations is not None:
            details['iterations'] = iterations
        super().__init__(message, details)
        self.residual = residual
        self.iterations = iterations
        self.history = list(history or [])


class ShootingError(SolverError):
    """基本状態のシューティング失敗"""

    def __init__(self, message: str, bracket: Optional[Dict[str, float]] = None,
                 details: Optional[Dict[str, Any]] = None):
        details = details or {}
        if bracket:
            details['bracket'] = bracket
        super().__init__(message, details)
        self.bracket = bracket or {}


class ConsistencyError(SolverError):
    """異なるパラメータから構築されたオブジェクトの組み合わせ"""


class AssemblyError(SolverError):
    """安定性演算子の組み立てエラー"""


class EigenSolverError(SolverError):
    """固有値ソルバーのエラー"""

    def __init__(self, message: str, condition: Optional[float] = None, details: Optional[Dict[str, Any]] = None):
        details = details or {}
        if condition is not None:
            details['condition'] = condition
        super().__init__(message, details)
        self.condition = condition


class BracketingError(SolverError):
    """中立レイリー数の挟み込みに失敗したエラー"""

    def __init__(self, message: str, k: Optional[float] = None, samples: Optional[Dict[float, float]] = None,
                 details: Optional[Dict[str, Any]] = None):
        details = details or {}
        if k is not None:
            details['k'] = k
        if samples:
            details['samples'] = samples
        super().__init__(message, details)
        self.k = k
        self.samples = samples or {}


# 出力関連の例外
class ExportError(AppError):
    """CSV・マニフェスト出力関連のエラー"""

    def __init__(self, message: str, output_path: Optional[str] = None, details: Optional[Dict[str, Any]] = None):
        """
        初期化

        Args:
            message: エラーメッセージ
            output_path: 出力パス（オプション）
            details: 追加の詳細情報（オプション）
        """
        details = details or {}
        if output_path:
            details['output_path'] = output_path
        super().__init__(message, details)
        self.output_path = output_path


# エラーハンドリング関数
def log_error(error: Exception, logger: Optional[logging.Logger] = None) -> None:
    """
    例外をログに記録する

    Args:
        error: ログに記録する例外
        logger: 使用するロガー（指定しない場合はルートロガー）
    """
    logger = logger or logging.getLogger()

    if isinstance(error, AppError):
        # アプリケーション独自の例外の場合は詳細情報も記録
        error_type = type(error).__name__
        logger.error(f"{error_type}: {error.message} - 詳細: {error.details}")
    else:
        # その他の例外の場合はスタックトレースも記録
        logger.error(f"予期せぬエラー: {str(error)}", exc_info=True)


def format_error_message(error: Exception) -> str:
    """
    例外から標準エラー出力向けのメッセージを生成する

    Args:
        error: 例外オブジェクト

    Returns:
        エラーメッセージ
    """
    if isinstance(error, AppError):
        if error.details:
            # トレースバックは表示しない
            shown = {k: v for k, v in error.details.items() if k != 'traceback'}
            if shown:
                return f"{error.message} ({shown})"
        return error.message
    return f"エラーが発生しました: {str(error)}"


def with_error_handling(
    error_type: Type[AppError] = AppError,
    error_message: str = "処理中にエラーが発生しました",
    logger: Optional[logging.Logger] = None,
) -> Callable[[Callable[..., T]], Callable[..., T]]:
    """
    エラーハンドリングを行うデコレータ

    AppError はそのまま再送出し、それ以外の例外をログに記録してから error_type で包みます。

    Args:
        error_type: 発生した例外を包むエラー型
        error_message: エラーメッセージ
        logger: 使用するロガー（指定しない場合は関数のモジュールロガー）

    Returns:
        デコレータ関数
    """
    def decorator(func: Callable[..., T]) -> Callable[..., T]:
        @functools.wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> T:
            log = logger or logging.getLogger(func.__module__)

            try:
                return func(*args, **kwargs)
            except AppError:
                raise
            except Exception as e:
                log.error(f"{error_message}: {str(e)}", exc_info=True)
                details = {
                    'function': func.__name__,
                    'module': func.__module__,
                    'cause': str(e),
                    'traceback': traceback.format_exc()
                }
                raise error_type(error_message, details=details) from e

        return wrapper

    return decorator
