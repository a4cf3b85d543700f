"""設定ファイルの読み込みと検証"""

from .loader import ConfigLoader, build_case_config
from .models import CaseConfig, LoggingConfig, NumericsConfig

__all__ = ['ConfigLoader', 'build_case_config', 'CaseConfig', 'LoggingConfig', 'NumericsConfig']
