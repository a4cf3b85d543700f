"""
データモデル定義モジュール

このモジュールでは、ソルバー全体で使用するデータモデルを定義します。
Pydanticを使用して、パラメータの検証と結果レコードの不変性を確保します。
数値プロファイルは numpy 配列のまま保持します。
"""

import hashlib
import json
import math
from enum import Enum
from typing import Any, ClassVar, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class TopBoundary(str, Enum):
    """上端の境界条件（下端は常に剛体壁）"""
    STRESS_FREE = "stress_free"
    RIGID = "rigid"


class Branch(str, Enum):
    """中立曲線の分枝の種類"""
    STATIONARY = "stationary"
    OSCILLATORY = "oscillatory"


class ProblemParams(BaseModel):
    """1ケース分の無次元パラメータ"""
    model_config = ConfigDict(frozen=True)

    schmidt: float = Field(description="シュミット数 S_c")
    swim_speed: float = Field(description="無次元遊泳速度 V_c")
    extinction: float = Field(description="光学的厚さ τ_H")
    albedo: float = Field(description="散乱アルベド ω")
    aniso_coeff: float = Field(description="線形異方散乱係数 A")
    diffuse_flux: float = Field(description="上端での拡散入射フラックス B")
    critical_intensity: float = Field(description="臨界光強度 G_c")
    top_boundary: TopBoundary = Field(default=TopBoundary.STRESS_FREE, description="上端の境界条件")

    @field_validator('schmidt', 'swim_speed', 'extinction', 'critical_intensity')
    def validate_positive(cls, v):
        if not v > 0:
            raise ValueError("正の値である必要があります")
        return v

    @field_validator('albedo')
    def validate_albedo(cls, v):
        if not 0.0 <= v <= 1.0:
            raise ValueError("アルベドは0から1の間である必要があります")
        return v

    @field_validator('aniso_coeff')
    def validate_aniso(cls, v):
        if not -1.0 <= v <= 1.0:
            raise ValueError("異方散乱係数は-1から1の間である必要があります")
        return v

    @field_validator('diffuse_flux')
    def validate_flux(cls, v):
        if v < 0:
            raise ValueError("入射フラックスは0以上である必要があります")
        return v

    def radiative_hash(self) -> str:
        """放射場を決める (ω, A, B, τ_H) の識別子"""
        payload = json.dumps(
            [repr(float(self.albedo)), repr(float(self.aniso_coeff)),
             repr(float(self.diffuse_flux)), repr(float(self.extinction))]
        )
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]

    def case_hash(self) -> str:
        """全パラメータの識別子"""
        payload = json.dumps(self.model_dump(mode='json'), sort_keys=True)
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]


class DimensionalInputs(BaseModel):
    """有次元の入力値（SI単位）"""
    model_config = ConfigDict(frozen=True)

    depth: float = Field(gt=0, description="層の深さ H [m]")
    cell_volume: float = Field(gt=0, description="細胞体積 v [m^3]")
    density_offset: float = Field(gt=0, description="相対密度差 Δρ/ρ")
    diffusivity: float = Field(gt=0, description="細胞拡散係数 D [m^2/s]")
    kinematic_viscosity: float = Field(gt=0, description="動粘性係数 ν [m^2/s]")
    mean_concentration: float = Field(gt=0, description="平均細胞濃度 n̄ [1/m^3]")
    cell_speed: float = Field(ge=0, description="平均遊泳速度 W_c [m/s]")
    extinction_per_cell: float = Field(gt=0, description="細胞あたりの消散断面積 κ [m^2]")


class TaxisShape(BaseModel):
    """走光性関数の形状レコード"""
    model_config = ConfigDict(frozen=True)

    kind: str = Field(default="tanh", description="'tanh' または 'sine'")
    steepness: float = Field(default=2.0, gt=0, description="tanh 形の勾配")
    # 4/3 を超えると応答が再び正になり、零点が G_c だけでなくなる
    saturation: float = Field(default=1.2, gt=0, le=4.0 / 3.0, description="sine 形の強度写像 χ の飽和値")

    @field_validator('kind')
    def validate_kind(cls, v):
        if v not in ("tanh", "sine"):
            raise ValueError("kind は 'tanh' か 'sine' です")
        return v


class _ArrayModel(BaseModel):
    """numpy 配列を保持する不変モデルの基底"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)


class RadiativeField(_ArrayModel):
    """光学的深さ格子上の定常放射場"""
    tau_grid: np.ndarray = Field(description="光学的深さの節点（昇順）")
    g_s: np.ndarray = Field(description="全強度 G_s")
    q_s: np.ndarray = Field(description="下向き放射フラックスの大きさ q_s")
    params_hash: str = Field(description="(ω, A, B, τ_H) の識別子")
    tau_h: float = Field(description="光学的厚さ")
    z_grid: Optional[np.ndarray] = Field(default=None, description="一様懸濁液の z 座標 (1 - τ/τ_H)")
    residual: float = Field(default=0.0, description="離散方程式の最大残差")


class BasicState(_ArrayModel):
    """定常濃度分布と安定性係数"""
    z_grid: np.ndarray = Field(description="チェビシェフ点（z=1 から z=0 の順）")
    n_s: np.ndarray
    tau_of_z: np.ndarray
    g_s_of_z: np.ndarray
    q_s_of_z: np.ndarray
    dn_s_dz: np.ndarray
    m_s: Optional[np.ndarray] = None
    dm_dg: Optional[np.ndarray] = None
    dg_dz: Optional[np.ndarray] = None
    upsilon1: Optional[np.ndarray] = None
    upsilon2: Optional[np.ndarray] = None
    n_top: float = Field(description="シューティング未知数 n_s(1)")
    params_hash: str
    taxis_id: str
    field: RadiativeField

    @property
    def n_points(self) -> int:
        return int(self.z_grid.size)

    @property
    def has_coefficients(self) -> bool:
        return self.upsilon1 is not None


class DirectionSet(_ArrayModel):
    """方向の求積（η のガウス・ルジャンドル × φ の台形則）"""
    mu_nodes: np.ndarray = Field(description="η = cosθ の節点（正の半球、負の半球の順）")
    mu_weights: np.ndarray
    phi_nodes: np.ndarray
    weights: np.ndarray = Field(description="積の重み (n_eta, n_phi)、総和 4π")

    @property
    def zeta(self) -> np.ndarray:
        """水平方向余弦 ζ = sinθ cosφ (n_eta, n_phi)"""
        sin_theta = np.sqrt(1.0 - self.mu_nodes ** 2)
        return sin_theta[:, None] * np.cos(self.phi_nodes)[None, :]

    @property
    def nu(self) -> np.ndarray:
        """水平方向余弦 ν = sinθ sinφ (n_eta, n_phi)"""
        sin_theta = np.sqrt(1.0 - self.mu_nodes ** 2)
        return sin_theta[:, None] * np.sin(self.phi_nodes)[None, :]


class PerturbedMoments(_ArrayModel):
    """摂動強度のモーメント"""
    g1: np.ndarray = Field(description="𝒢ᵈ(z)")
    p: np.ndarray
    q: np.ndarray
    s: np.ndarray
    converged: bool = True
    iterations: int = 0
    relaxation: float = 1.0
    residual: float = 0.0


class MomentOperator(_ArrayModel):
    """Θ から摂動モーメントへの線形写像（行列形式）"""
    g_mat: np.ndarray
    p_mat: np.ndarray
    q_mat: np.ndarray
    s_mat: np.ndarray
    m1: float
    m2: float
    params_hash: str

    @property
    def k(self) -> float:
        return math.hypot(self.m1, self.m2)

    def apply(self, theta: np.ndarray) -> PerturbedMoments:
        """Θ に写像を適用する"""
        return PerturbedMoments(
            g1=self.g_mat @ theta, p=self.p_mat @ theta,
            q=self.q_mat @ theta, s=self.s_mat @ theta,
        )


class StabilityOperator(_ArrayModel):
    """
    境界自由度を消去した一般化固有値問題

    A(R) = a0 + R·a1 について σ·b·x = A(R)·x を表します。
    c0 = b⁻¹a0, c1 = b⁻¹a1 を保持し、R ごとの固有値計算を標準固有値問題に帰着させます。
    """
    k: float
    m1: float
    m2: float
    z_grid: np.ndarray
    top_boundary: TopBoundary
    a0_full: np.ndarray
    a1_full: np.ndarray
    b_full: np.ndarray
    constraints: np.ndarray = Field(description="境界条件の行 (6, 2n)")
    kept: np.ndarray
    removed: np.ndarray
    give_back: np.ndarray
    c0: np.ndarray
    c1: np.ndarray
    condition: float
    params_hash: str

    @property
    def n_points(self) -> int:
        return int(self.z_grid.size)


class Eigenpair(_ArrayModel):
    """固有値と固有関数 (W, Θ)"""
    sigma_re: float
    sigma_im: float
    w: np.ndarray
    theta: np.ndarray
    z_grid: np.ndarray
    k: float
    rayleigh: float

    @property
    def sigma(self) -> complex:
        return complex(self.sigma_re, self.sigma_im)


class NeutralPoint(BaseModel):
    """中立曲線上の点"""
    model_config = ConfigDict(frozen=True)

    k: float
    rayleigh: float
    sigma_im: float
    branch: Branch
    mode: int = Field(ge=0, description="鉛直方向のセル数（失敗点は0）")
    status: str = Field(default="ok", description="'ok' または失敗理由")

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class CriticalPoint(BaseModel):
    """中立曲線の最小点"""
    model_config = ConfigDict(frozen=True)

    k_c: float = Field(gt=0)
    r_c: float
    lambda_c: float
    sigma_im: float
    branch: Branch
    mode: int = Field(ge=1)
    boundary_minimum: bool = Field(default=False, description="最小値が波数範囲の端にある")

    @model_validator(mode='after')
    def validate_wavelength(self):
        if abs(self.lambda_c * self.k_c - 2.0 * math.pi) > 1e-12 * 2.0 * math.pi:
            raise ValueError("lambda_c と k_c が整合しません")
        return self


class EvolutionSeries(_ArrayModel):
    """固有関数の時間発展スナップショットと位相図"""
    times: np.ndarray
    x: np.ndarray
    z: np.ndarray
    w1: np.ndarray = Field(description="(n_t, n_z, n_x)")
    n1: np.ndarray = Field(description="(n_t, n_z, n_x)")
    period: Optional[float] = None
    observation_point: Tuple[float, float] = Field(description="位相図の観測点 (x, z)")
    phase_t: np.ndarray
    phase_w1: np.ndarray
    phase_dw1_dt: np.ndarray


class ResultRow(BaseModel):
    """掃引結果の1行"""
    COLUMNS: ClassVar[List[str]] = [
        "vc", "tau_h", "omega", "b_flux", "a_coeff", "lambda_c", "r_c",
        "im_sigma", "mode", "branch", "top_boundary", "status",
    ]

    vc: float
    tau_h: float
    omega: float
    b_flux: float
    a_coeff: float
    lambda_c: float = float('nan')
    r_c: float = float('nan')
    im_sigma: float = float('nan')
    mode: int = 0
    branch: str = ""
    top_boundary: str
    status: str = "ok"

    def as_record(self) -> Dict[str, Any]:
        """列順を保った辞書"""
        data = self.model_dump()
        return {column: data[column] for column in self.COLUMNS}


class RunManifest(BaseModel):
    """1回の実行を記述するマニフェスト"""
    config: Dict[str, Any]
    numerics: Dict[str, Any]
    taxis_id: str
    code_version: str
    timestamp: str
    output_paths: List[str] = Field(default_factory=list)

    def content_hash(self) -> str:
        """タイムスタンプと出力先を除いた内容のハッシュ"""
        payload = json.dumps(
            {
                'config': self.config,
                'numerics': self.numerics,
                'taxis_id': self.taxis_id,
                'code_version': self.code_version,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()
