"""学習済みモデルの保存と読込"""

import logging
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from gdrf.errors import ConfigError
from gdrf.models.counts import CountMatrices
from gdrf.models.gdrf_model import GdrfModel, IterationDiagnostics
from gdrf.models.gp_state import GPState
from gdrf.models.grid import DiscretizationGrid
from gdrf.models.rost_model import RostModel
from gdrf.schemas.model_file import (
    CountsRecord,
    DiagnosticRecord,
    GpRecord,
    GridRecord,
    ModelFile,
    RostRecord,
)
from gdrf.services.rost import neighborhood_counts, von_neumann_neighbors

logger = logging.getLogger(__name__)


def pack_lower(matrix: np.ndarray) -> list[float]:
    """下三角を行優先で平坦化"""
    return matrix[np.tril_indices(len(matrix))].tolist()


def unpack_lower(values: list[float], size: int) -> np.ndarray:
    if len(values) != size * (size + 1) // 2:
        raise ConfigError(f"covariance factor has {len(values)} entries, expected a {size}x{size} lower triangle")
    out = np.zeros((size, size))
    out[np.tril_indices(size)] = values
    return out


def to_record(model: GdrfModel | RostModel, vocabulary: list[str]) -> ModelFile:
    record = ModelFile(
        model_kind=model.model_kind,
        hyperparameters=model.hp,
        world=model.grid.world,
        grid=GridRecord(cells_per_dim=list(model.grid.cells_per_dim)),
        vocabulary=list(vocabulary),
        counts=CountsRecord(
            word_topic=model.counts.word_topic.tolist(),
            assignments=model.counts.assignments.tolist(),
        ),
        phi=model.phi.tolist(),
        diagnostics=[
            DiagnosticRecord(
                iteration=d.iteration,
                n_sweeps=d.n_sweeps,
                train_log_likelihood=d.train_log_likelihood,
                elbo=list(d.elbo),
                rejected_steps=d.rejected_steps,
            )
            for d in model.diagnostics
        ],
    )
    if model.model_kind == "gdrf":
        record.gps = [
            GpRecord(
                kernel=gp.kernel,
                const_mean=gp.const_mean,
                inducing_locations=gp.inducing_locations.tolist(),
                variational_mean=gp.variational_mean.tolist(),
                variational_cov_factor=pack_lower(gp.variational_cov_factor),
            )
            for gp in model.gps
        ]
    else:
        record.rost = RostRecord(
            neighborhood_radius=model.neighborhood_radius, cells=model.cells.tolist()
        )
    return record


def _shape_problems(record: ModelFile) -> list[str]:
    """スキーマ検証後に残る、配列の形と値域の食い違い"""
    hp = record.hyperparameters
    k, w = hp.n_topics, hp.vocab_size
    problems = []
    if len(record.vocabulary) != w:
        problems.append(f"vocabulary: {len(record.vocabulary)} labels, expected {w}")
    for name, matrix in (("counts.word_topic", record.counts.word_topic), ("phi", record.phi)):
        if len(matrix) != k or any(len(row) != w for row in matrix):
            problems.append(f"{name}: expected {k}x{w}")
    if any(v < 0 for row in record.counts.word_topic for v in row):
        problems.append("counts.word_topic: negative count")
    assignments = record.counts.assignments
    if any(not 0 <= z < k for z in assignments):
        problems.append(f"counts.assignments: topic out of [0, {k})")
    if sum(map(sum, record.counts.word_topic)) != len(assignments):
        problems.append(f"counts.word_topic: total differs from {len(assignments)} assignments")

    dim = record.world.dim
    cells_per_dim = record.grid.cells_per_dim
    if len(cells_per_dim) != dim or any(n < 1 for n in cells_per_dim):
        problems.append(f"grid.cells_per_dim: need {dim} positive values")
        n_cells = None
    else:
        n_cells = int(np.prod(cells_per_dim))

    if record.model_kind == "gdrf":
        if len(record.gps) != k:
            problems.append(f"gps: {len(record.gps)} GPs for {k} topics")
        for j, gp in enumerate(record.gps):
            m = len(gp.inducing_locations)
            if any(len(row) != dim for row in gp.inducing_locations):
                problems.append(f"gps.{j}.inducing_locations: rows need {dim} coordinates")
            if len(gp.variational_mean) != m:
                problems.append(f"gps.{j}.variational_mean: {len(gp.variational_mean)} entries for {m} inducing points")
            if len(gp.variational_cov_factor) != m * (m + 1) // 2:
                problems.append(f"gps.{j}.variational_cov_factor: not a {m}x{m} lower triangle")
    elif record.rost is None:
        problems.append("rost: section missing")
    else:
        cells = record.rost.cells
        if len(cells) != len(assignments):
            problems.append(f"rost.cells: {len(cells)} entries for {len(assignments)} assignments")
        if n_cells is not None and any(not 0 <= c < n_cells for c in cells):
            problems.append(f"rost.cells: cell out of [0, {n_cells})")
    return problems


def from_record(record: ModelFile) -> GdrfModel | RostModel:
    problems = _shape_problems(record)
    if problems:
        raise ConfigError("inconsistent model file", problems=problems)
    hp = record.hyperparameters
    grid = DiscretizationGrid(record.world, tuple(record.grid.cells_per_dim))
    word_topic = np.array(record.counts.word_topic, dtype=np.int64).reshape(hp.n_topics, hp.vocab_size)
    counts = CountMatrices(
        word_topic=word_topic,
        topic_total=word_topic.sum(axis=1),
        assignments=np.array(record.counts.assignments, dtype=np.int64),
    )
    phi = np.array(record.phi, dtype=np.float64).reshape(hp.n_topics, hp.vocab_size)
    diagnostics = [
        IterationDiagnostics(
            iteration=d.iteration,
            n_sweeps=d.n_sweeps,
            train_log_likelihood=d.train_log_likelihood,
            elbo=tuple(d.elbo),
            rejected_steps=d.rejected_steps,
        )
        for d in record.diagnostics
    ]

    if record.model_kind == "gdrf":
        gps = []
        for gp in record.gps:
            inducing = np.array(gp.inducing_locations, dtype=np.float64).reshape(-1, grid.dim)
            gps.append(
                GPState(
                    kernel=gp.kernel,
                    const_mean=gp.const_mean,
                    inducing_locations=inducing,
                    variational_mean=np.array(gp.variational_mean, dtype=np.float64),
                    variational_cov_factor=unpack_lower(gp.variational_cov_factor, len(inducing)),
                )
            )
        return GdrfModel(
            hp=hp,
            world=record.world,
            grid=grid,
            counts=counts,
            gps=tuple(gps),
            phi=phi,
            diagnostics=tuple(diagnostics),
        )

    cells = np.array(record.rost.cells, dtype=np.int64)
    cell_topic = np.zeros((grid.n_cells, hp.n_topics), dtype=np.int64)
    np.add.at(cell_topic, (cells, counts.assignments), 1)
    indptr, indices = von_neumann_neighbors(grid, record.rost.neighborhood_radius)
    return RostModel(
        hp=hp,
        grid=grid,
        counts=counts,
        cells=cells,
        cell_topic=cell_topic,
        neighborhood_topic=neighborhood_counts(cell_topic, indptr, indices),
        neighborhood_radius=record.rost.neighborhood_radius,
        neighbor_indptr=indptr,
        neighbor_indices=indices,
        phi=phi,
        diagnostics=diagnostics,
    )


def save_model(path: str | Path, model: GdrfModel | RostModel, vocabulary: list[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_record(model, vocabulary).model_dump_json(indent=1) + "\n", encoding="utf-8")
    logger.info("wrote %s model to %s", model.model_kind, path)
    return path


def load_model(path: str | Path) -> tuple[GdrfModel | RostModel, list[str]]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"model file not found: {path}")
    try:
        record = ModelFile.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise ConfigError(
            f"invalid model file {path}",
            problems=[f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()],
        ) from exc
    return from_record(record), record.vocabulary
