"""
インターフェース定義モジュール

このモジュールでは、ソルバー全体で使用するインターフェースを定義します。
typing.Protocol を使用して、構造的サブタイピングをサポートします。
"""

from pathlib import Path
from typing import Any, Dict, Optional, Protocol, Sequence, Union, runtime_checkable

import numpy as np


@runtime_checkable
class TaxisFunctionProtocol(Protocol):
    """走光性関数 M(G) のインターフェース"""

    critical_intensity: float

    @property
    def identifier(self) -> str:
        """マニフェストに記録する識別子"""
        ...

    def value(self, g: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """
        M(G) を返します。

        Args:
            g: 光強度

        Returns:
            [-1, 1] の遊泳応答
        """
        ...

    def derivative(self, g: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """dM/dG を返します。"""
        ...


class TableExporterProtocol(Protocol):
    """CSV出力のインターフェース"""

    def export(self, path: Union[str, Path], columns: Sequence[str], rows: Any,
               manifest_hash: str) -> Path:
        """
        表を書き出します。

        Args:
            path: 出力先
            columns: 列名
            rows: 行データ（辞書のリストまたは列の辞書）
            manifest_hash: ヘッダ行に記録するマニフェストハッシュ

        Returns:
            書き出したファイルのパス
        """
        ...


class ResultCacheProtocol(Protocol):
    """掃引結果キャッシュのインターフェース"""

    def get(self, key: str) -> Optional[Dict[str, Any]]:
        ...

    def set(self, key: str, value: Dict[str, Any]) -> None:
        ...
