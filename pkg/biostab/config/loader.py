"""
設定ファイルの読み込みを行うモジュール

このモジュールでは、フラットなキーと値のYAMLファイルからケース設定を読み込み、
Pydanticモデルに変換する機能を提供します。掃引指定ファイルの展開もここで行います。
"""

import itertools
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from dotenv import load_dotenv
from yaml.loader import SafeLoader
from pydantic import ValidationError as PydanticValidationError

from .models import CaseConfig
from ..utils.errors import ConfigError


def _read_yaml(path: Path) -> Any:
    """YAMLファイルを読み込む（存在しない・解析できない場合は ConfigError）"""
    if not path.exists():
        raise ConfigError(f"設定ファイルが見つかりません: {path}", config_file=str(path))
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return yaml.load(f, Loader=SafeLoader)
    except yaml.YAMLError as e:
        raise ConfigError(f"設定ファイルの解析エラー: {e}", config_file=str(path)) from e


def _check_keys(data: Dict[str, Any], source: str) -> None:
    unknown = sorted(set(data) - CaseConfig.allowed_keys())
    if unknown:
        raise ConfigError(
            f"未知の設定キーがあります: {', '.join(unknown)}",
            config_file=source,
            config_key=unknown[0],
            details={'unknown_keys': unknown},
        )


def build_case_config(data: Dict[str, Any], source: str = "<dict>") -> CaseConfig:
    """
    辞書からケース設定を構築する

    Args:
        data: 設定値のマッピング
        source: エラーメッセージ用の出所

    Returns:
        検証済みのケース設定

    Raises:
        ConfigError: 未知のキーや検証エラーがある場合
    """
    if not isinstance(data, dict):
        raise ConfigError("設定はキーと値のマッピングである必要があります", config_file=source)
    _check_keys(data, source)
    try:
        return CaseConfig(**data)
    except PydanticValidationError as e:
        first = e.errors()[0] if e.errors() else {}
        key = str(first.get('loc', ('',))[0]) if first.get('loc') else None
        raise ConfigError(f"設定値が不正です: {e}", config_file=source, config_key=key) from e


class ConfigLoader:
    """
    設定ファイルを読み込むクラス

    ケース設定 (config.yaml) と掃引指定 (sweep.yaml) を扱います。
    """

    ENV_FILE = Path(".env")

    def __init__(self, config_path: Union[str, Path]):
        """
        ConfigLoaderの初期化

        Args:
            config_path: 設定ファイルのパス
        """
        # 環境変数 (BIOSTAB_LOG) のロード
        load_dotenv(self.ENV_FILE)
        self.logger = logging.getLogger(__name__)
        self.config_path = Path(config_path)
        self._config: Optional[CaseConfig] = None

    def load(self) -> CaseConfig:
        """
        設定ファイルを読み込みます

        Returns:
            ケース設定

        Raises:
            ConfigError: ファイルがない、解析できない、キーや値が不正な場合
        """
        data = _read_yaml(self.config_path)
        if data is None:
            data = {}
        self._config = build_case_config(data, str(self.config_path))
        self.logger.info(f"設定ファイルを読み込みました: {self.config_path}")
        return self._config

    @property
    def config(self) -> CaseConfig:
        if self._config is None:
            self.load()
        return self._config

    def load_sweep(self, sweep_path: Optional[Union[str, Path]]) -> List[Dict[str, Any]]:
        """
        掃引指定ファイルを読み込み、上書き値の組の一覧に展開します

        `cases:` は上書きマッピングのリスト、`grid:` はキーごとの値リストの直積です。
        両方ある場合は cases の後に grid を並べます。

        Args:
            sweep_path: 掃引指定ファイルのパス（None の場合は空）

        Returns:
            上書き値の辞書のリスト
        """
        if sweep_path is None:
            return []
        path = Path(sweep_path)
        data = _read_yaml(path) or {}
        if not isinstance(data, dict):
            raise ConfigError("掃引指定はマッピングである必要があります", config_file=str(path))

        extra = sorted(set(data) - {'cases', 'grid'})
        if extra:
            raise ConfigError(f"未知の掃引キーがあります: {', '.join(extra)}", config_file=str(path),
                              config_key=extra[0])

        tuples: List[Dict[str, Any]] = []
        for case in data.get('cases') or []:
            if not isinstance(case, dict):
                raise ConfigError("cases の各要素はマッピングである必要があります", config_file=str(path))
            tuples.append(dict(case))

        grid = data.get('grid') or {}
        if grid:
            keys = list(grid.keys())
            values = [v if isinstance(v, list) else [v] for v in grid.values()]
            for combo in itertools.product(*values):
                tuples.append(dict(zip(keys, combo)))

        self.logger.info(f"掃引指定を読み込みました: {path} ({len(tuples)} 件)")
        return tuples
