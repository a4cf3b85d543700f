"""
設定モデル定義モジュール

このモジュールでは、ケース設定ファイル（フラットなキーと値）の検証モデルを定義します。
Pydanticを使用して、設定値の検証と型安全性を確保します。
"""

from pathlib import Path
from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..data.models import ProblemParams, TaxisShape, TopBoundary


class LoggingConfig(BaseModel):
    """ロギング設定"""
    log_level: Optional[str] = Field(default=None, description="error / info / debug（None で BIOSTAB_LOG を参照）")
    log_file: Optional[Path] = Field(default=None, description="ログファイルのパス")


class NumericsConfig(BaseModel):
    """離散化と許容誤差の設定"""
    model_config = ConfigDict(frozen=True)

    n_tau: int = Field(default=201, description="フレドホルム方程式の節点数（奇数）")
    n_z: int = Field(default=65, description="チェビシェフ選点数")
    n_mu: int = Field(default=24, description="半球あたりの η ガウス点数")
    n_phi: int = Field(default=24, description="方位角の点数")
    n_sub: int = Field(default=3, description="方向スイープでのチェビシェフ区間あたりの細分数")
    tol_fredholm: float = Field(default=1e-9, gt=0, description="フレドホルム解の許容残差")
    tol_eigen: float = Field(default=1e-8, gt=0, description="中立条件 |max Re σ| の許容値")
    tol_freq: float = Field(default=1e-3, gt=0, description="定常/振動の判定閾値")
    k_min: float = Field(default=0.5, gt=0, description="波数の下限")
    k_max: float = Field(default=6.0, gt=0, description="波数の上限")
    k_step: float = Field(default=0.25, gt=0, description="波数の刻み")
    rayleigh_guess: float = Field(default=300.0, gt=0, description="中立点探索の初期レイリー数")

    @field_validator('n_tau')
    def validate_n_tau(cls, v):
        """節点数は33以上の奇数"""
        if v < 33 or v % 2 == 0:
            raise ValueError("n_tau は33以上の奇数である必要があります")
        return v

    @field_validator('n_z')
    def validate_n_z(cls, v):
        if v < 65:
            raise ValueError("n_z は65以上である必要があります")
        return v

    @field_validator('n_mu', 'n_phi', 'n_sub')
    def validate_positive_count(cls, v):
        if v < 1:
            raise ValueError("1以上である必要があります")
        return v

    @model_validator(mode='after')
    def validate_k_range(self):
        if self.k_min >= self.k_max:
            raise ValueError("k_min は k_max より小さい必要があります")
        return self


class CaseConfig(BaseModel):
    """
    ケース設定ファイルのモデル

    物理パラメータと数値設定を一つのフラットなマッピングとして保持します。
    """
    model_config = ConfigDict(frozen=True)

    schmidt: float = Field(default=20.0, description="シュミット数 S_c")
    vc: float = Field(default=20.0, description="無次元遊泳速度 V_c")
    tau_h: float = Field(default=0.5, description="光学的厚さ τ_H")
    omega: float = Field(default=0.7, description="散乱アルベド ω")
    a_coeff: float = Field(default=0.0, description="線形異方散乱係数 A")
    b_flux: float = Field(default=0.5, description="拡散入射フラックス B")
    g_c: float = Field(default=1.0, description="臨界光強度 G_c")
    top_boundary: TopBoundary = Field(default=TopBoundary.STRESS_FREE, description="上端の境界条件")

    n_tau: int = 201
    n_z: int = 65
    n_mu: int = 24
    n_phi: int = 24
    n_sub: int = 3
    tol_fredholm: float = 1e-9
    tol_eigen: float = 1e-8
    tol_freq: float = 1e-3
    k_min: float = 0.5
    k_max: float = 6.0
    k_step: float = 0.25
    rayleigh_guess: float = 300.0

    taxis: Literal["tanh", "sine"] = Field(default="tanh", description="走光性関数の形")
    taxis_steepness: float = Field(default=2.0, gt=0, description="tanh 形の勾配")
    log_file: Optional[Path] = None

    @model_validator(mode='after')
    def validate_sections(self):
        """物理パラメータと数値設定を構築して検証する"""
        self.to_params()
        self.to_numerics()
        return self

    @classmethod
    def allowed_keys(cls) -> set:
        """設定ファイルで使用できるキーの集合"""
        return set(cls.model_fields.keys())

    def to_params(self) -> ProblemParams:
        """物理パラメータを取り出す"""
        return ProblemParams(
            schmidt=self.schmidt,
            swim_speed=self.vc,
            extinction=self.tau_h,
            albedo=self.omega,
            aniso_coeff=self.a_coeff,
            diffuse_flux=self.b_flux,
            critical_intensity=self.g_c,
            top_boundary=self.top_boundary,
        )

    def to_numerics(self) -> NumericsConfig:
        """数値設定を取り出す"""
        return NumericsConfig(**{name: getattr(self, name) for name in NumericsConfig.model_fields})

    def taxis_shape(self) -> TaxisShape:
        """走光性関数の形状レコード"""
        return TaxisShape(kind=self.taxis, steepness=self.taxis_steepness)

    def logging_config(self, log_level: Optional[str] = None) -> LoggingConfig:
        return LoggingConfig(log_level=log_level, log_file=self.log_file)

    def with_overrides(self, overrides: Dict[str, Any]) -> "CaseConfig":
        """一部のキーを上書きした新しい設定を返す（検証付き）"""
        data = self.model_dump()
        data.update(overrides)
        return CaseConfig(**data)

    def snapshot(self) -> Dict[str, Any]:
        """マニフェスト用の JSON 互換スナップショット"""
        return self.model_dump(mode='json', exclude={'log_file'})
