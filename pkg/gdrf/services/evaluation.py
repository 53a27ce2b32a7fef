"""評価指標: 最尤マップ間の相互情報量（AFMI）、KLダイバージェンス、時間窓ごとのKL

対数は全て自然対数。
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import rel_entr
from sklearn.metrics import mutual_info_score

from gdrf.errors import ContractViolation
from gdrf.models.gdrf_model import GdrfModel
from gdrf.models.grid import DiscretizationGrid
from gdrf.models.observations import Observations
from gdrf.models.rost_model import RostModel
from gdrf.services import inference, rost

logger = logging.getLogger(__name__)

Model = GdrfModel | RostModel


@dataclass(frozen=True, eq=False)
class CategoricalMap:
    """セルごとのカテゴリ（最尤トピック・最尤単語など）"""

    grid: DiscretizationGrid
    labels: np.ndarray  # C
    n_categories: int | None = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if len(labels) != self.grid.n_cells:
            raise ContractViolation(f"{len(labels)} labels for {self.grid.n_cells} cells")
        if len(labels) and labels.min() < 0:
            raise ContractViolation("labels must be nonnegative")
        if self.n_categories is not None and len(labels) and labels.max() >= self.n_categories:
            raise ContractViolation(f"label {labels.max()} >= {self.n_categories} categories")
        object.__setattr__(self, "labels", labels)


def mutual_information(a: CategoricalMap, b: CategoricalMap) -> float:
    """セル数に比例する同時分布での I(a, b)"""
    if not a.grid.same_as(b.grid):
        raise ContractViolation("maps are defined on different grids")
    return max(0.0, float(mutual_info_score(a.labels, b.labels)))


def afmi(model_map: CategoricalMap, truth_map: CategoricalMap) -> float:
    """I(model, truth) / I(truth, truth)。ラベルの置換には不変"""
    denominator = mutual_information(truth_map, truth_map)
    if not denominator > 0:
        raise ContractViolation("AFMI is undefined for a single-class ground truth map")
    return mutual_information(model_map, truth_map) / denominator


def kl_divergence(p, q) -> float:
    """KL(p ‖ q)。p=0 の項は0、p>0 で q=0 の項はエラー"""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ContractViolation(f"shape mismatch: {p.shape} vs {q.shape}")
    if (p < 0).any() or (q < 0).any():
        raise ContractViolation("distributions must be nonnegative")
    if ((q == 0) & (p > 0)).any():
        raise ContractViolation("q has zero mass where p is positive")
    return max(0.0, float(rel_entr(p, q).sum()))


def model_word_predictions(model: Model, query) -> np.ndarray:
    if model.model_kind == "rost":
        return rost.rost_predict(model, query)[1]
    return inference.predict_words(model, query)


def model_topic_predictions(model: Model, query) -> np.ndarray:
    if model.model_kind == "rost":
        return rost.rost_predict(model, query)[0]
    return inference.predict_topics(model, query)


def model_ml_maps(model: Model, grid: DiscretizationGrid | None = None):
    if model.model_kind == "rost":
        return rost.rost_ml_maps(model, grid)
    return inference.max_likelihood_maps(model, grid)


@dataclass(frozen=True)
class KlSeries:
    """ビンごとのKL(観測 ‖ モデル)"""

    bins: np.ndarray  # 観測のあったビン番号
    centers: np.ndarray  # ビン中心の座標
    n_obs: np.ndarray
    kl: np.ndarray
    skipped: tuple[int, ...] = field(default=())  # 観測のなかったビン

    @property
    def mean(self) -> float:
        return float(np.mean(self.kl)) if len(self.kl) else float("nan")


def time_bins(model: Model, n_bins: int) -> DiscretizationGrid:
    if model.grid.world.dim != 1:
        raise ContractViolation("windowed KL needs a 1-D (temporal) world")
    return DiscretizationGrid(model.grid.world, (n_bins,))


def windowed_kl(
    model: Model,
    data: Observations,
    n_bins: int,
    only_bins=None,
) -> KlSeries:
    """各ビンの経験的単語分布とビン中心でのモデル予測のKL

    only_bins を渡すとそのビンだけを評価する。
    """
    bins_grid = time_bins(model, n_bins)
    vocab_size = model.hp.vocab_size
    words = data.words
    cells = bins_grid.bin_many(data.locations) if len(data) else np.zeros(0, dtype=np.int64)
    counts = np.zeros((n_bins, vocab_size), dtype=np.float64)
    np.add.at(counts, (cells, words), 1.0)
    totals = counts.sum(axis=1)

    wanted = np.arange(n_bins) if only_bins is None else np.asarray(only_bins, dtype=np.int64)
    kept = wanted[totals[wanted] > 0]
    skipped = tuple(int(b) for b in wanted[totals[wanted] == 0])
    if skipped:
        logger.warning("%d bins without observations skipped", len(skipped))

    centers = bins_grid.cell_centers()[kept]
    predicted = model_word_predictions(model, centers)
    empirical = counts[kept] / totals[kept, None]
    kl = np.array([kl_divergence(p, q) for p, q in zip(empirical, predicted)])
    return KlSeries(
        bins=kept,
        centers=centers[:, 0],
        n_obs=totals[kept].astype(np.int64),
        kl=kl,
        skipped=skipped,
    )
