"""シミュレーションからの復元比較（GDRF vs ROST）

各実行でシミュレーションし、GDRFを学習してから、同じスイープ数でROSTを学習する。
両者の最尤マップを真のマップとAFMIで比較する。
"""

import logging
from dataclasses import dataclass

import numpy as np

from gdrf.errors import ContractViolation
from gdrf.models.grid import DiscretizationGrid
from gdrf.schemas.params import Hyperparameters, KernelParams
from gdrf.schemas.world import World
from gdrf.services import inference, rost
from gdrf.services.evaluation import CategoricalMap, afmi, model_ml_maps
from gdrf.services.kernel import DENSE_CAP
from gdrf.services.rng import MASK64, generator
from gdrf.services.simulator import simulate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RecoveryRow:
    run: int
    seed: int
    model_kind: str
    topic_afmi: float
    word_afmi: float
    n_sweeps: int


@dataclass(frozen=True)
class RecoverySummary:
    n_runs: int
    gdrf_wins: int  # GDRFのトピックAFMIがROST以上だった実行数
    median_gdrf_topic_afmi: float
    median_rost_topic_afmi: float


def run_seed(master: int, run: int) -> int:
    return int(generator(master, "recovery.run", counter=run).integers(0, MASK64, dtype=np.uint64))


def _safe_afmi(model_labels, truth_labels, grid, what: str) -> float:
    try:
        return afmi(CategoricalMap(grid, model_labels), CategoricalMap(grid, truth_labels))
    except ContractViolation:
        logger.warning("%s AFMI undefined (single-class ground truth)", what)
        return float("nan")


def recovery_comparison(
    world: World,
    grid: DiscretizationGrid,
    hp: Hyperparameters,
    kernel: KernelParams,
    n_obs: int,
    n_runs: int,
    seed: int,
    radius: int = 1,
    threads: int = 1,
    dense_cap: int = DENSE_CAP,
) -> list[RecoveryRow]:
    rows = []
    for run in range(n_runs):
        sub_seed = run_seed(seed, run)
        truth = simulate(world, grid, hp, kernel, n_obs, sub_seed, dense_cap=dense_cap)
        data = truth.observations
        gdrf_model = inference.fit(data, hp, world, sub_seed, grid=grid, threads=threads)
        rost_model = rost.fit_rost(
            data, hp, world, grid, radius=radius, n_sweeps=gdrf_model.n_sweeps, seed=sub_seed
        )
        for model in (gdrf_model, rost_model):
            topic_map, word_map = model_ml_maps(model, grid)
            row = RecoveryRow(
                run=run,
                seed=sub_seed,
                model_kind=model.model_kind,
                topic_afmi=_safe_afmi(topic_map, truth.ml_topic_map, grid, "topic"),
                word_afmi=_safe_afmi(word_map, truth.ml_word_map, grid, "word"),
                n_sweeps=model.n_sweeps,
            )
            rows.append(row)
            logger.info(
                "run %d %s: topic AFMI=%.4f word AFMI=%.4f (%d sweeps)",
                run, row.model_kind, row.topic_afmi, row.word_afmi, row.n_sweeps,
            )
    return rows


def summarize(rows: list[RecoveryRow]) -> RecoverySummary:
    gdrf = {r.run: r.topic_afmi for r in rows if r.model_kind == "gdrf"}
    rost_afmi = {r.run: r.topic_afmi for r in rows if r.model_kind == "rost"}
    runs = sorted(set(gdrf) & set(rost_afmi))
    wins = sum(1 for run in runs if gdrf[run] >= rost_afmi[run])
    return RecoverySummary(
        n_runs=len(runs),
        gdrf_wins=wins,
        median_gdrf_topic_afmi=float(np.nanmedian([gdrf[r] for r in runs])) if runs else float("nan"),
        median_rost_topic_afmi=float(np.nanmedian([rost_afmi[r] for r in runs])) if runs else float("nan"),
    )
