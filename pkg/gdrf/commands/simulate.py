"""生成モデルからデータセットを作る

出力: observations.csv, truth.csv, ml_topic_map.csv, ml_word_map.csv
"""

import logging

from gdrf.config import RunConfig
from gdrf.errors import ConfigError
from gdrf.services.dataset_io import (
    simulated_vocabulary,
    write_map_csv,
    write_observations_csv,
    write_truth,
)
from gdrf.services.simulator import simulate

logger = logging.getLogger(__name__)


def run(config: RunConfig) -> None:
    if config.vocab_size is None:
        raise ConfigError("simulate needs vocab_size")
    world = config.world()
    grid = config.grid(world)
    hp = config.hyperparameters(config.vocab_size, world)
    truth = simulate(
        world, grid, hp, hp.kernel, config.n_obs, config.seed, dense_cap=config.dense_cap
    )
    vocabulary = simulated_vocabulary(hp.vocab_size)

    out = config.output_dir
    write_observations_csv(out / "observations.csv", truth.observations, vocabulary)
    write_truth(out / "truth.csv", truth, vocabulary)
    write_map_csv(out / "ml_topic_map.csv", grid, {"topic": truth.ml_topic_map})
    write_map_csv(
        out / "ml_word_map.csv", grid, {"word": [vocabulary[w] for w in truth.ml_word_map]}
    )
    print(
        f"simulated N={config.n_obs} K={hp.n_topics} W={hp.vocab_size} "
        f"seed={config.seed} -> {out}"
    )
