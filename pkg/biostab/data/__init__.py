"""データモデル、インターフェース、結果キャッシュ"""
