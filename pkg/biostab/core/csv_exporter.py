"""
CSV出力モジュール

このモジュールでは、計算結果を CSV 形式で出力するための機能を提供します。
先頭行に `# manifest: <hash>` のコメントを置き、浮動小数点数は有効数字12桁の指数表記で書きます。
書き込みは一時ファイルに行ってから置き換えるので、失敗しても途中のファイルは残りません。
"""

import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence, Union

import pandas as pd

from ..data.interfaces import TableExporterProtocol
from ..utils.errors import ExportError, with_error_handling

# 有効数字12桁
FLOAT_FORMAT = '%.11e'

MANIFEST_PREFIX = "# manifest: "


class CsvExporter(TableExporterProtocol):
    """
    CSV出力クラス

    辞書のリストまたは列の辞書を受け取り、列順を固定して書き出します。
    """

    def __init__(self, float_format: str = FLOAT_FORMAT, encoding: str = 'utf-8'):
        """
        初期化

        Args:
            float_format: 浮動小数点数の書式
            encoding: 文字コード
        """
        self.logger = logging.getLogger(__name__)
        self.float_format = float_format
        self.encoding = encoding

    @with_error_handling(ExportError, "CSV出力処理でエラーが発生しました")
    def export(self, path: Union[str, Path], columns: Sequence[str], rows: Any,
               manifest_hash: str) -> Path:
        """
        表を CSV に書き出します。

        Args:
            path: 出力ファイルのパス
            columns: 列名（この順で出力）
            rows: 辞書のリスト、または列名から配列への辞書
            manifest_hash: ヘッダ行に記録するマニフェストハッシュ

        Returns:
            書き出したファイルのパス

        Raises:
            ExportError: 書き込みに失敗した場合
        """
        output_path = Path(path)
        output_path.parent.mkdir(parents=True, exist_ok=True)
        content = self.get_csv_content(columns, rows, manifest_hash)

        fd, temp_name = tempfile.mkstemp(prefix=f".{output_path.name}.", suffix=".tmp", dir=output_path.parent)
        try:
            with os.fdopen(fd, 'w', encoding=self.encoding, newline='') as f:
                f.write(content)
            os.replace(temp_name, output_path)
        except OSError as e:
            if os.path.exists(temp_name):
                os.remove(temp_name)
            raise ExportError(f"CSVファイルの保存に失敗しました: {e}", output_path=str(output_path)) from e

        self.logger.info(f"CSVファイルを保存しました: {output_path}")
        return output_path

    def get_csv_content(self, columns: Sequence[str], rows: Any, manifest_hash: str) -> str:
        """
        CSV の文字列を生成します。

        Args:
            columns: 列名
            rows: 辞書のリスト、または列の辞書
            manifest_hash: マニフェストハッシュ

        Returns:
            ヘッダコメント行を含む CSV 文字列
        """
        frame = self._to_frame(columns, rows)
        body = frame.to_csv(index=False, float_format=self.float_format, lineterminator='\n')
        return f"{MANIFEST_PREFIX}{manifest_hash}\n{body}"

    @staticmethod
    def _to_frame(columns: Sequence[str], rows: Any) -> pd.DataFrame:
        columns = list(columns)
        if isinstance(rows, Mapping):
            missing = [c for c in columns if c not in rows]
            if missing:
                raise ExportError(f"列データが不足しています: {', '.join(missing)}")
            return pd.DataFrame({c: rows[c] for c in columns}, columns=columns)
        records: List[Dict[str, Any]] = list(rows)
        return pd.DataFrame.from_records(records, columns=columns)


def read_manifest_hash(path: Union[str, Path]) -> str:
    """CSV の先頭行からマニフェストハッシュを読み取る"""
    with open(path, 'r', encoding='utf-8') as f:
        first = f.readline().rstrip('\n')
    if not first.startswith(MANIFEST_PREFIX):
        raise ExportError("マニフェスト行がありません", output_path=str(path))
    return first[len(MANIFEST_PREFIX):]


def read_table(path: Union[str, Path]) -> pd.DataFrame:
    """出力した CSV をコメント行を除いて読み込む"""
    return pd.read_csv(path, comment='#')
