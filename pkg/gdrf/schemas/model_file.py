"""学習済みモデルファイル（JSON）のスキーマ

共分散因子は下三角を行優先で平坦化して保存する（長さ M(M+1)/2）。
Adamのモーメントは保存しない。
"""

from typing import Literal

from pydantic import BaseModel, NonNegativeInt

from gdrf.schemas.params import Hyperparameters, KernelParams
from gdrf.schemas.world import World

SCHEMA_VERSION = 1


class GridRecord(BaseModel):
    cells_per_dim: list[int]


class CountsRecord(BaseModel):
    word_topic: list[list[int]]  # K×W
    assignments: list[int]  # N


class GpRecord(BaseModel):
    kernel: KernelParams
    const_mean: float
    inducing_locations: list[list[float]]
    variational_mean: list[float]
    variational_cov_factor: list[float]


class RostRecord(BaseModel):
    neighborhood_radius: NonNegativeInt
    cells: list[int]  # 各観測のセル番号


class DiagnosticRecord(BaseModel):
    iteration: int
    n_sweeps: int
    train_log_likelihood: float
    elbo: list[float] = []
    rejected_steps: int = 0


class ModelFile(BaseModel):
    schema_version: Literal[1] = SCHEMA_VERSION
    model_kind: Literal["gdrf", "rost"]
    hyperparameters: Hyperparameters
    world: World
    grid: GridRecord
    vocabulary: list[str]
    counts: CountsRecord
    phi: list[list[float]]
    gps: list[GpRecord] = []
    rost: RostRecord | None = None
    diagnostics: list[DiagnosticRecord] = []

    model_config = {"extra": "forbid"}
