"""学習済みモデルの評価

出力:
- ml_maps.csv: セルごとの最尤トピック・最尤単語
- afmi.csv: 真値ファイルがある場合のAFMI
- windowed_kl.csv, predicted_words.csv, predicted_topics.csv: 1次元（時系列）の場合
"""

import logging

from gdrf.config import RunConfig
from gdrf.errors import ConfigError
from gdrf.models.grid import DiscretizationGrid
from gdrf.services.dataset_io import ingest_csv, read_truth, write_csv, write_map_csv
from gdrf.services.evaluation import (
    CategoricalMap,
    afmi,
    model_ml_maps,
    model_topic_predictions,
    model_word_predictions,
    time_bins,
    windowed_kl,
)
from gdrf.services.model_io import load_model

logger = logging.getLogger(__name__)


def _metrics(config: RunConfig, dim: int) -> tuple[str, ...]:
    if config.metrics is not None:
        return config.metrics
    metrics = ["maps"]
    if config.truth_path is not None:
        metrics.append("afmi")
    if dim == 1 and config.data_path is not None:
        metrics.append("kl")
    return tuple(metrics)


def _check_grid(config: RunConfig, grid: DiscretizationGrid) -> None:
    """設定で格子を指定した場合はモデルの格子と一致していること"""
    if config.cells_per_dim is not None and tuple(config.cells_per_dim) != grid.cells_per_dim:
        raise ConfigError(
            f"cells_per_dim {config.cells_per_dim} does not match the model grid {grid.cells_per_dim}"
        )
    if config.world_lo is not None:
        if tuple(config.world_lo) != tuple(grid.world.lows) or tuple(config.world_hi) != tuple(grid.world.highs):
            raise ConfigError("world bounds in the config do not match the model")


def run(config: RunConfig) -> None:
    out = config.output_dir
    model, vocabulary = load_model(config.model_path or out / "model.json")
    grid = model.grid
    _check_grid(config, grid)
    metrics = _metrics(config, grid.dim)
    if "afmi" in metrics and config.truth_path is None:
        raise ConfigError("AFMI requested but truth_path is not set")
    if "kl" in metrics and config.data_path is None:
        raise ConfigError("windowed KL requested but data_path is not set")
    if "kl" in metrics and grid.dim != 1:
        raise ConfigError("windowed KL needs a 1-D (temporal) model")

    topic_map, word_map = model_ml_maps(model)
    if "maps" in metrics:
        write_map_csv(
            out / "ml_maps.csv",
            grid,
            {"topic": topic_map, "word": [vocabulary[w] for w in word_map]},
        )

    if "afmi" in metrics:
        truth = read_truth(config.truth_path)
        if not truth.grid.same_as(grid):
            raise ConfigError(
                f"truth grid {truth.grid.cells_per_dim} does not match the model grid {grid.cells_per_dim}"
            )
        topic_afmi = afmi(CategoricalMap(grid, topic_map), CategoricalMap(grid, truth.ml_topic_map))
        word_afmi = afmi(CategoricalMap(grid, word_map), CategoricalMap(grid, truth.ml_word_map))
        write_csv(
            out / "afmi.csv",
            ["run", "seed", "model_kind", "topic_afmi", "word_afmi"],
            [[0, config.seed, model.model_kind, topic_afmi, word_afmi]],
        )
        print(f"AFMI: topic={topic_afmi:.4f} word={word_afmi:.4f}")

    if "kl" in metrics:
        dataset = ingest_csv(
            config.data_path, grid.world.lows, grid.world.highs, vocabulary=vocabulary
        )
        series = windowed_kl(model, dataset.observations, config.n_bins)
        bins_grid = time_bins(model, config.n_bins)
        centers = bins_grid.cell_centers()[:, 0]
        by_bin = {int(b): (n, kl) for b, n, kl in zip(series.bins, series.n_obs, series.kl)}
        rows = []
        for b in range(config.n_bins):
            if b in by_bin:
                n, kl = by_bin[b]
                rows.append([b, centers[b], int(n), float(kl), 0])
            elif b in series.skipped:
                rows.append([b, centers[b], 0, "", 1])
        write_csv(out / "windowed_kl.csv", ["bin", "center", "n_obs", "kl", "skipped"], rows)

        query = bins_grid.cell_centers()
        words = model_word_predictions(model, query)
        topics = model_topic_predictions(model, query)
        write_csv(
            out / "predicted_words.csv",
            ["bin", "center", *vocabulary],
            ([b, centers[b], *words[b].tolist()] for b in range(config.n_bins)),
        )
        write_csv(
            out / "predicted_topics.csv",
            ["bin", "center", *(f"topic_{j}" for j in range(topics.shape[1]))],
            ([b, centers[b], *topics[b].tolist()] for b in range(config.n_bins)),
        )
        print(f"mean windowed KL={series.mean:.6f} over {len(series.kl)} bins ({len(series.skipped)} skipped)")
    logger.info("evaluate finished: %s", ", ".join(metrics))
