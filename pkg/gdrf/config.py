"""実行設定

設定ファイルは `key = value` 形式（# でコメント）。python-dotenv で読み込む。
CLIフラグ（--key value）がファイルより優先される。
環境変数は読まない（設定ファイルとシードだけで再現できるようにする）。
"""

from pathlib import Path
from typing import Annotated, Literal

from pydantic import Field, NonNegativeInt, PositiveFloat, PositiveInt, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, NoDecode, PydanticBaseSettingsSource, SettingsConfigDict

from gdrf.errors import ConfigError
from gdrf.models.grid import DiscretizationGrid
from gdrf.schemas.params import Hyperparameters, KernelParams, TrainingSchedule
from gdrf.schemas.world import World
from gdrf.services.density import default_cells


class RunConfig(BaseSettings):
    model_kind: Literal["gdrf", "rost"] = "gdrf"

    # モデル
    n_topics: PositiveInt = 4
    vocab_size: PositiveInt | None = None  # simulate用。fitでは語彙から決まる
    alpha: PositiveFloat = 0.1
    beta: PositiveFloat = 0.1

    # カーネル（length_scale 未指定時は世界の幅の 1/10）
    length_scale: Annotated[tuple[PositiveFloat, ...] | None, NoDecode] = None
    kernel_scale: PositiveFloat = 1.0
    noise_variance: PositiveFloat = 0.1
    jitter: PositiveFloat = 1e-8

    # 学習スケジュール
    n_gibbs_inner: PositiveInt = 50
    n_svi_inner: PositiveInt = 5
    learning_rate: PositiveFloat = 0.25
    n_outer: PositiveInt = 100
    early_stop_patience: PositiveInt = 5
    early_stop_tol: float = Field(1e-4, ge=0)
    max_inducing: PositiveInt = 512
    minibatch_size: PositiveInt | None = None
    max_backoff: NonNegativeInt = 5
    noise_floor: PositiveFloat = 1e-6
    gp_warm_start: bool = False
    dense_cap: PositiveInt = 5000

    # 世界と格子
    cells_per_dim: Annotated[tuple[PositiveInt, ...] | None, NoDecode] = None
    world_lo: Annotated[tuple[float, ...] | None, NoDecode] = None
    world_hi: Annotated[tuple[float, ...] | None, NoDecode] = None

    seed: int = Field(0, ge=0, le=2**64 - 1)
    threads: PositiveInt = 1

    neighborhood_radius: NonNegativeInt = 1  # ROST

    n_obs: PositiveInt = 10_000  # simulate

    # 評価
    n_bins: PositiveInt = 500
    window_width_bins: PositiveInt = 5
    window_stride: PositiveInt = 5
    n_runs: PositiveInt = 10
    metrics: Annotated[tuple[Literal["maps", "afmi", "kl"], ...] | None, NoDecode] = None  # None = 自動

    # パス
    data_path: Path | None = None
    model_path: Path | None = None
    truth_path: Path | None = None
    output_dir: Path = Path("out")

    model_config = SettingsConfigDict(
        env_file=None,
        env_file_encoding="utf-8",
        extra="forbid",
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        return init_settings, dotenv_settings

    @field_validator("length_scale", "cells_per_dim", "world_lo", "world_hi", "metrics", mode="before")
    @classmethod
    def _split_commas(cls, value):
        if isinstance(value, str):
            value = value.strip()
            if not value:
                return None
            return tuple(v.strip() for v in value.split(","))
        return value

    @model_validator(mode="after")
    def _check_world(self):
        if (self.world_lo is None) != (self.world_hi is None):
            raise ValueError("world_lo and world_hi must be given together")
        if self.world_lo is not None:
            if len(self.world_lo) != len(self.world_hi):
                raise ValueError("world_lo and world_hi have different lengths")
            if any(lo >= hi for lo, hi in zip(self.world_lo, self.world_hi)):
                raise ValueError("world_lo must be below world_hi in every dimension")
            if self.cells_per_dim is not None and len(self.cells_per_dim) != len(self.world_lo):
                raise ValueError("cells_per_dim does not match the world dimension")
        return self

    def world(self) -> World:
        if self.world_lo is None:
            raise ConfigError("world_lo and world_hi are required for this command")
        return World.from_arrays(self.world_lo, self.world_hi)

    def grid(self, world: World) -> DiscretizationGrid:
        cells = self.cells_per_dim or default_cells(world)
        if len(cells) != world.dim:
            raise ConfigError(f"cells_per_dim has {len(cells)} entries, the world has {world.dim} dims")
        return DiscretizationGrid(world, cells)

    def kernel_params(self, world: World) -> KernelParams:
        length_scale = self.length_scale or tuple(float(e) * 0.1 for e in world.extent)
        if len(length_scale) not in (1, world.dim):
            raise ConfigError(
                f"length_scale needs 1 or {world.dim} values, got {len(length_scale)}"
            )
        return KernelParams(
            length_scale=length_scale,
            scale=self.kernel_scale,
            noise_variance=self.noise_variance,
            jitter=self.jitter,
        )

    def schedule(self) -> TrainingSchedule:
        return TrainingSchedule(
            n_gibbs_inner=self.n_gibbs_inner,
            n_svi_inner=self.n_svi_inner,
            learning_rate=self.learning_rate,
            n_outer=self.n_outer,
            early_stop_patience=self.early_stop_patience,
            early_stop_tol=self.early_stop_tol,
            max_backoff=self.max_backoff,
            minibatch_size=self.minibatch_size,
            max_inducing=self.max_inducing,
            noise_floor=self.noise_floor,
            warm_start=self.gp_warm_start,
        )

    def hyperparameters(self, vocab_size: int, world: World) -> Hyperparameters:
        return Hyperparameters(
            n_topics=self.n_topics,
            vocab_size=vocab_size,
            alpha=self.alpha,
            beta=self.beta,
            kernel=self.kernel_params(world),
            schedule=self.schedule(),
        )


def _describe(exc: ValidationError) -> list[str]:
    problems = []
    for error in exc.errors():
        key = ".".join(str(p) for p in error["loc"]) or "config"
        problems.append(f"{key}: {error['msg']}")
    return problems


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """設定ファイルとCLIの上書きを読み、全ての問題をまとめて ConfigError にする"""
    if path is not None and not Path(path).is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        return RunConfig(_env_file=path, **(overrides or {}))
    except ValidationError as exc:
        raise ConfigError("invalid configuration", problems=_describe(exc)) from exc
