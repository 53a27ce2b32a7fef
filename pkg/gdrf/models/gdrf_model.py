from dataclasses import dataclass, field

import numpy as np

from gdrf.models.counts import CountMatrices
from gdrf.models.gp_state import GPState
from gdrf.models.grid import DiscretizationGrid
from gdrf.schemas.params import Hyperparameters
from gdrf.schemas.world import World


@dataclass(frozen=True)
class IterationDiagnostics:
    """外側ループ1回分の記録"""

    iteration: int
    n_sweeps: int  # ここまでの累計スイープ数
    train_log_likelihood: float  # 観測1件あたり
    elbo: tuple[float, ...] = ()  # トピックごと（ROSTは空）
    rejected_steps: int = 0


@dataclass(frozen=True, eq=False)
class GdrfModel:
    """学習済みGDRF。予測用に共有してよい（変更しない）。"""

    hp: Hyperparameters
    world: World
    grid: DiscretizationGrid
    counts: CountMatrices
    gps: tuple[GPState, ...]
    phi: np.ndarray  # K×W
    diagnostics: tuple[IterationDiagnostics, ...] = field(default=())

    model_kind = "gdrf"

    @property
    def n_sweeps(self) -> int:
        return self.diagnostics[-1].n_sweeps if self.diagnostics else 0
