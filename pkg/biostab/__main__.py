"""
biostab のエントリーポイント

このモジュールは、コマンドラインからソルバーを実行するためのエントリーポイントです。
"""

import sys

from biostab.cli import main


if __name__ == "__main__":
    sys.exit(main())
