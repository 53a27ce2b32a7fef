"""観測CSVからモデルを学習し、model.json と diagnostics.csv を書く"""

import logging

from gdrf.config import RunConfig
from gdrf.errors import ConfigError
from gdrf.services import inference, rost
from gdrf.services.dataset_io import ingest_csv, write_csv
from gdrf.services.model_io import save_model

logger = logging.getLogger(__name__)


def write_diagnostics(path, model) -> None:
    n_topics = model.hp.n_topics
    has_elbo = model.model_kind == "gdrf"
    header = ["iteration", "n_sweeps", "train_log_likelihood", "rejected_steps"]
    if has_elbo:
        header += [f"elbo_topic_{j}" for j in range(n_topics)]
    rows = (
        [d.iteration, d.n_sweeps, d.train_log_likelihood, d.rejected_steps, *(d.elbo if has_elbo else ())]
        for d in model.diagnostics
    )
    write_csv(path, header, rows)


def run(config: RunConfig) -> None:
    if config.data_path is None:
        raise ConfigError("fit needs data_path")
    dataset = ingest_csv(config.data_path, config.world_lo, config.world_hi)
    world = dataset.world
    grid = config.grid(world)
    hp = config.hyperparameters(dataset.vocab_size, world)
    data = dataset.observations

    logger.info("fitting %s model (seed=%d)", config.model_kind, config.seed)
    if config.model_kind == "rost":
        model = rost.fit_rost(
            data, hp, world, grid, radius=config.neighborhood_radius, seed=config.seed
        )
    else:
        model = inference.fit(data, hp, world, config.seed, grid=grid, threads=config.threads)

    out = config.output_dir
    save_model(config.model_path or out / "model.json", model, list(dataset.vocabulary))
    write_diagnostics(out / "diagnostics.csv", model)
    last = model.diagnostics[-1] if model.diagnostics else None
    print(
        f"fitted {model.model_kind}: N={len(data)} K={hp.n_topics} W={hp.vocab_size} "
        f"sweeps={model.n_sweeps} train_ll={last.train_log_likelihood if last else float('nan'):.6f}"
    )
