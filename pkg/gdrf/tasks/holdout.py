"""時間窓をずらしながらの外挿評価

窓ごとに、全データで学習したモデルA と窓内の観測を除いて学習したモデルB の
窓内平均KLを比べる。比 = KL_B / KL_A。
"""

import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from gdrf.errors import ContractViolation
from gdrf.models.grid import DiscretizationGrid
from gdrf.models.observations import Observations
from gdrf.schemas.params import Hyperparameters
from gdrf.schemas.world import World
from gdrf.services import inference, rost
from gdrf.services.evaluation import windowed_kl

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WindowResult:
    start_bin: int
    stop_bin: int  # 含まない
    n_heldout: int
    kl_full: float
    kl_heldout: float
    ratio: float


@dataclass(frozen=True)
class HoldoutResult:
    windows: tuple[WindowResult, ...]
    skipped: tuple[int, ...]  # 観測がなく飛ばした窓の開始ビン

    @property
    def ratios(self) -> np.ndarray:
        return np.array([w.ratio for w in self.windows])

    @property
    def mean_ratio(self) -> float:
        return float(self.ratios.mean()) if self.windows else float("nan")

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max()) if self.windows else float("nan")


def window_starts(n_bins: int, width: int, stride: int) -> list[int]:
    if width < 1 or stride < 1:
        raise ContractViolation("window width and stride must be positive")
    if width > n_bins:
        raise ContractViolation(f"window width {width} exceeds {n_bins} bins")
    return list(range(0, n_bins - width + 1, stride))


def train(
    model_kind: str,
    data: Observations,
    hp: Hyperparameters,
    world: World,
    grid: DiscretizationGrid,
    seed: int,
    radius: int = 1,
    threads: int = 1,
):
    if model_kind == "rost":
        return rost.fit_rost(data, hp, world, grid, radius=radius, seed=seed)
    return inference.fit(data, hp, world, seed, grid=grid, threads=threads)


def _ratio(heldout: float, full: float) -> float:
    if full > 0:
        return heldout / full
    return 1.0 if heldout == 0 else float("inf")


def _window_job(args) -> tuple[float, int]:
    model_kind, data, mask, hp, world, grid, seed, radius, n_bins, window = args
    model = train(model_kind, data.subset(~mask), hp, world, grid, seed, radius)
    return windowed_kl(model, data, n_bins, only_bins=window).mean, model.n_sweeps


def holdout_experiment(
    data: Observations,
    hp: Hyperparameters,
    world: World,
    grid: DiscretizationGrid,
    n_bins: int = 500,
    window_width_bins: int = 5,
    stride: int = 5,
    seed: int = 0,
    model_kind: str = "gdrf",
    radius: int = 1,
    threads: int = 1,
) -> HoldoutResult:
    if world.dim != 1:
        raise ContractViolation("held-out windows need a 1-D (temporal) world")
    starts = window_starts(n_bins, window_width_bins, stride)
    bins_grid = DiscretizationGrid(world, (n_bins,))
    obs_bins = bins_grid.bin_many(data.locations)

    logger.info("holdout: training the full model")
    full_model = train(model_kind, data, hp, world, grid, seed, radius, threads)

    jobs, kept, skipped = [], [], []
    for start in starts:
        window = np.arange(start, start + window_width_bins)
        mask = np.isin(obs_bins, window)
        if not mask.any():
            logger.warning("window [%d, %d) has no observations, skipped", start, window[-1] + 1)
            skipped.append(start)
            continue
        kept.append((start, window, int(mask.sum())))
        jobs.append((model_kind, data, mask, hp, world, grid, seed, radius, n_bins, window))

    logger.info("holdout: %d windows to train (%d skipped)", len(jobs), len(skipped))
    if threads > 1 and len(jobs) > 1:
        context = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=threads, mp_context=context) as pool:
            heldout = list(pool.map(_window_job, jobs))
    else:
        heldout = [_window_job(job) for job in jobs]

    windows = []
    for (start, window, n_heldout), (kl_heldout, _) in zip(kept, heldout):
        kl_full = windowed_kl(full_model, data, n_bins, only_bins=window).mean
        ratio = _ratio(kl_heldout, kl_full)
        logger.info(
            "window [%d, %d): held out %d, KL full=%.5g heldout=%.5g ratio=%.4f",
            start, start + window_width_bins, n_heldout, kl_full, kl_heldout, ratio,
        )
        windows.append(
            WindowResult(
                start_bin=start,
                stop_bin=start + window_width_bins,
                n_heldout=n_heldout,
                kl_full=kl_full,
                kl_heldout=kl_heldout,
                ratio=ratio,
            )
        )
    return HoldoutResult(windows=tuple(windows), skipped=tuple(skipped))
