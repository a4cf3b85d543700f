"""
ResultCacheのユニットテスト
"""

import json
import math
import tempfile
import unittest
from pathlib import Path

from biostab.data.result_cache import ResultCache


class TestResultCache(unittest.TestCase):
    """ResultCacheのテストケース"""

    def setUp(self):
        """テストの前処理"""
        self.temp_dir = tempfile.TemporaryDirectory()
        self.cache_file_path = Path(self.temp_dir.name) / "cache" / "results.json"
        self.cache = ResultCache(self.cache_file_path)

    def tearDown(self):
        """テストの後処理"""
        self.temp_dir.cleanup()

    def test_set_and_get(self):
        """結果の保存と取得"""
        row = {'r_c': 239.63, 'mode': 1, 'status': 'ok'}
        self.cache.set("case-1", row)
        self.assertEqual(self.cache.get("case-1"), row)
        self.assertEqual(len(self.cache), 1)

    def test_get_nonexistent_key(self):
        """存在しないキーは None"""
        self.assertIsNone(self.cache.get("missing"))

    def test_persistence(self):
        """別インスタンスから読み戻せる"""
        self.cache.set("case-1", {'r_c': float('nan'), 'status': 'failed: BracketingError'})
        reloaded = ResultCache(self.cache_file_path)
        value = reloaded.get("case-1")
        self.assertTrue(math.isnan(value['r_c']))
        self.assertEqual(value['status'], 'failed: BracketingError')
        self.assertFalse(self.cache_file_path.with_suffix('.json.tmp').exists())

    def test_returned_value_is_a_copy(self):
        """取得した辞書を変更してもキャッシュは変わらない"""
        self.cache.set("case-1", {'r_c': 1.0})
        value = self.cache.get("case-1")
        value['r_c'] = 2.0
        self.assertEqual(self.cache.get("case-1")['r_c'], 1.0)

    def test_clear(self):
        """全削除"""
        self.cache.set("a", {'r_c': 1.0})
        self.cache.set("b", {'r_c': 2.0})
        self.assertEqual(self.cache.clear(), 2)
        self.assertEqual(len(ResultCache(self.cache_file_path)), 0)

    def test_corrupt_file_starts_empty(self):
        """壊れたファイルは空のキャッシュとして扱う"""
        self.cache_file_path.parent.mkdir(parents=True, exist_ok=True)
        self.cache_file_path.write_text("{not json", encoding='utf-8')
        self.assertEqual(len(ResultCache(self.cache_file_path)), 0)

    def test_invalid_entry_is_skipped(self):
        """不正なエントリだけを読み飛ばす"""
        self.cache_file_path.parent.mkdir(parents=True, exist_ok=True)
        data = {
            'good': {'data': {'r_c': 1.0}, 'timestamp': 0.0},
            'bad': {'timestamp': 0.0},
        }
        self.cache_file_path.write_text(json.dumps(data), encoding='utf-8')
        cache = ResultCache(self.cache_file_path)
        self.assertEqual(len(cache), 1)
        self.assertIsNotNone(cache.get('good'))


if __name__ == '__main__':
    unittest.main()
