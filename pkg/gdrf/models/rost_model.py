from dataclasses import dataclass, field

import numpy as np

from gdrf.models.counts import CountMatrices
from gdrf.models.gdrf_model import IterationDiagnostics
from gdrf.models.grid import DiscretizationGrid
from gdrf.schemas.params import Hyperparameters


@dataclass(eq=False)
class RostModel:
    """近傍カウント型の時空間トピックモデル（比較用ベースライン）

    スイープ中は counts / cell_topic / neighborhood_topic をその場で更新する。
    """

    hp: Hyperparameters
    grid: DiscretizationGrid
    counts: CountMatrices
    cells: np.ndarray  # N: 各観測のセル番号
    cell_topic: np.ndarray  # C×K: セルごとのトピック数
    neighborhood_topic: np.ndarray  # C×K: 近傍セルの合計
    neighborhood_radius: int
    neighbor_indptr: np.ndarray  # CSR形式の近傍リスト
    neighbor_indices: np.ndarray
    phi: np.ndarray  # K×W
    diagnostics: list[IterationDiagnostics] = field(default_factory=list)

    model_kind = "rost"

    @property
    def world(self):
        return self.grid.world

    @property
    def alpha(self) -> float:
        return self.hp.alpha

    @property
    def beta(self) -> float:
        return self.hp.beta

    @property
    def n_sweeps(self) -> int:
        return self.diagnostics[-1].n_sweeps if self.diagnostics else 0
