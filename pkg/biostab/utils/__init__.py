"""エラー、ロギング、システムユーティリティ"""
