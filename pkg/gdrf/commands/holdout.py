"""時間窓を外した学習との比較（外挿性能）

出力: holdout_ratios.csv, holdout_summary.csv
"""

import logging

from gdrf.config import RunConfig
from gdrf.errors import ConfigError
from gdrf.services.dataset_io import ingest_csv, write_csv
from gdrf.tasks.holdout import holdout_experiment

logger = logging.getLogger(__name__)


def run(config: RunConfig) -> None:
    if config.data_path is None:
        raise ConfigError("holdout needs data_path")
    dataset = ingest_csv(config.data_path, config.world_lo, config.world_hi)
    world = dataset.world
    if world.dim != 1:
        raise ConfigError("holdout needs 1-D (temporal) data")
    if config.window_width_bins > config.n_bins:
        raise ConfigError(
            f"window_width_bins {config.window_width_bins} exceeds n_bins {config.n_bins}"
        )
    grid = config.grid(world)
    hp = config.hyperparameters(dataset.vocab_size, world)

    result = holdout_experiment(
        dataset.observations,
        hp,
        world,
        grid,
        n_bins=config.n_bins,
        window_width_bins=config.window_width_bins,
        stride=config.window_stride,
        seed=config.seed,
        model_kind=config.model_kind,
        radius=config.neighborhood_radius,
        threads=config.threads,
    )

    out = config.output_dir
    rows = [
        [w.start_bin, w.stop_bin, w.n_heldout, w.kl_full, w.kl_heldout, w.ratio, "ok"]
        for w in result.windows
    ]
    rows += [
        [start, start + config.window_width_bins, 0, "", "", "", "skipped"]
        for start in result.skipped
    ]
    rows.sort(key=lambda r: r[0])
    write_csv(
        out / "holdout_ratios.csv",
        ["start_bin", "stop_bin", "n_heldout", "kl_full", "kl_heldout", "ratio", "status"],
        rows,
    )
    write_csv(
        out / "holdout_summary.csv",
        ["n_windows", "n_skipped", "mean_ratio", "max_ratio"],
        [[len(result.windows), len(result.skipped), result.mean_ratio, result.max_ratio]],
    )
    print(
        f"holdout: {len(result.windows)} windows ({len(result.skipped)} skipped) "
        f"mean ratio={result.mean_ratio:.4f} max ratio={result.max_ratio:.4f}"
    )
