"""
掃引結果キャッシュモジュール

掃引の各ケースの結果行を、ケースのマニフェストハッシュをキーとして JSON ファイルに保存します。
中断した掃引を再実行すると、計算済みのケースはキャッシュから復元されます。
"""

import json
import logging
import os
import time
from pathlib import Path
from typing import Any, Dict, Optional, Union

from pydantic import BaseModel, Field, ValidationError

from .interfaces import ResultCacheProtocol
from ..utils.errors import AppError, with_error_handling


class CacheEntry(BaseModel):
    """キャッシュエントリ"""
    data: Dict[str, Any]
    timestamp: float = Field(default_factory=time.time)


class ResultCache(ResultCacheProtocol):
    """掃引結果キャッシュクラス

    結果は決定的なので有効期限は持ちません。保存は一時ファイルに書いてから置き換えます。
    """

    def __init__(self, cache_file_path: Union[str, Path]):
        """
        初期化

        Args:
            cache_file_path: キャッシュファイルのパス
        """
        self.logger = logging.getLogger(__name__)
        self.cache_file_path = Path(cache_file_path)
        self.cache: Dict[str, CacheEntry] = {}
        self._load_cache()

    def _load_cache(self) -> None:
        """
        キャッシュファイルを読み込みます。
        ファイルが存在しない場合や壊れている場合は空のキャッシュを使用します。
        """
        if not self.cache_file_path.exists():
            self.logger.info(f"キャッシュファイルが見つかりません: {self.cache_file_path}")
            return

        try:
            with open(self.cache_file_path, 'r', encoding='utf-8') as f:
                cache_data = json.load(f)
        except (json.JSONDecodeError, IOError) as e:
            self.logger.error(f"キャッシュファイルの読み込みエラー: {e}")
            return

        for key, entry_data in cache_data.items():
            try:
                self.cache[key] = CacheEntry(**entry_data)
            except (ValidationError, TypeError) as e:
                self.logger.warning(f"無効なキャッシュエントリをスキップします: {key} - エラー: {e}")
        self.logger.info(f"キャッシュを読み込みました: {len(self.cache)}件のエントリ")

    @with_error_handling(AppError, "キャッシュファイルの保存に失敗しました")
    def _save_cache(self) -> None:
        self.cache_file_path.parent.mkdir(parents=True, exist_ok=True)
        cache_data = {key: entry.model_dump() for key, entry in sorted(self.cache.items())}
        temp_file = self.cache_file_path.with_suffix(self.cache_file_path.suffix + '.tmp')
        try:
            with open(temp_file, 'w', encoding='utf-8') as f:
                json.dump(cache_data, f, ensure_ascii=False, indent=2)
            os.replace(temp_file, self.cache_file_path)
        except OSError:
            if temp_file.exists():
                temp_file.unlink()
            raise
        self.logger.debug(f"キャッシュを保存しました: {len(self.cache)}件のエントリ")

    def get(self, key: str) -> Optional[Dict[str, Any]]:
        """
        キャッシュされた結果を取得します。

        Args:
            key: ケースのハッシュ

        Returns:
            結果の辞書、または存在しない場合は None
        """
        entry = self.cache.get(key)
        if entry is None:
            return None
        self.logger.debug(f"キャッシュヒット: {key}")
        return dict(entry.data)

    def set(self, key: str, value: Dict[str, Any]) -> None:
        """
        結果をキャッシュに追加して保存します。

        Args:
            key: ケースのハッシュ
            value: 結果の辞書
        """
        self.cache[key] = CacheEntry(data=dict(value))
        self._save_cache()
        self.logger.debug(f"キャッシュに追加: {key}")

    def clear(self) -> int:
        """キャッシュを空にして削除件数を返す"""
        count = len(self.cache)
        self.cache = {}
        self._save_cache()
        self.logger.info(f"キャッシュを全てクリアしました: {count}件のエントリ")
        return count

    def __len__(self) -> int:
        return len(self.cache)
