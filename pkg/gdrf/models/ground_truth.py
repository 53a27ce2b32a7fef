from dataclasses import dataclass

import numpy as np

from gdrf.models.grid import DiscretizationGrid
from gdrf.models.observations import Observations


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """生成モデルからの順方向シミュレーション結果"""

    grid: DiscretizationGrid
    mu: np.ndarray  # C×K: セル中心での潜在GP値
    phi: np.ndarray  # K×W
    observations: Observations
    topics: np.ndarray  # N: 各観測の真のトピック
    cells: np.ndarray  # N: 各観測を生成したセル
    ml_topic_map: np.ndarray  # C
    ml_word_map: np.ndarray  # C
