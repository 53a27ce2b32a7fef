"""近傍カウント型の時空間トピックモデル（比較用ベースライン）

文書ごとのトピック数の代わりに、観測セルの近傍に含まれるトピック数を使う:
    P(z_i = j) ∝ (n_{-i,j}^{w_i} + β) / (n_{-i,j}^· + Wβ)
                · (n_{-i,j}^{G(c)} + α) / (n_{-i,·}^{G(c)} + Kα)
近傍 G(c) はセル番号空間でのL1距離 ≤ radius（自セルを含む）。
"""

import itertools
import logging

import numpy as np
from numba import njit
from scipy import sparse

from gdrf.errors import ContractViolation, IngestionError, NumericalError
from gdrf.models.counts import word_topic_posterior
from gdrf.models.gdrf_model import IterationDiagnostics
from gdrf.models.grid import DiscretizationGrid
from gdrf.models.observations import Observations
from gdrf.models.rost_model import RostModel
from gdrf.schemas.params import Hyperparameters
from gdrf.schemas.world import World
from gdrf.services.gibbs import initialize_assignments
from gdrf.services.inference import argmax_maps
from gdrf.services.rng import as_generator, generator

logger = logging.getLogger(__name__)


def von_neumann_neighbors(grid: DiscretizationGrid, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """CSR形式の近傍リスト (indptr, indices)。近傍関係は対称"""
    if radius < 0:
        raise ContractViolation(f"radius must be >= 0, got {radius}")
    shape = np.array(grid.cells_per_dim)
    reach = [min(radius, n - 1) for n in grid.cells_per_dim]
    offsets = np.array(
        [
            o
            for o in itertools.product(*(range(-r, r + 1) for r in reach))
            if sum(abs(v) for v in o) <= radius
        ],
        dtype=np.int64,
    )
    multi = np.stack(np.unravel_index(np.arange(grid.n_cells), grid.cells_per_dim), axis=1)
    indptr = np.zeros(grid.n_cells + 1, dtype=np.int64)
    chunks = []
    for c in range(grid.n_cells):
        candidates = multi[c] + offsets
        inside = np.all((candidates >= 0) & (candidates < shape), axis=1)
        neighbors = np.ravel_multi_index(tuple(candidates[inside].T), grid.cells_per_dim)
        chunks.append(np.sort(neighbors))
        indptr[c + 1] = indptr[c] + len(neighbors)
    return indptr, np.concatenate(chunks).astype(np.int64)


def neighborhood_counts(cell_topic, indptr, indices) -> np.ndarray:
    n_cells = len(indptr) - 1
    adjacency = sparse.csr_matrix(
        (np.ones(len(indices), dtype=np.int64), indices, indptr), shape=(n_cells, n_cells)
    )
    return np.asarray(adjacency @ cell_topic, dtype=np.int64)


def init_rost(
    data: Observations,
    hp: Hyperparameters,
    grid: DiscretizationGrid,
    radius: int = 1,
    seed: int | np.random.Generator = 0,
) -> RostModel:
    counts = initialize_assignments(
        data.words, hp.n_topics, hp.vocab_size, as_generator(seed, "rost.init")
    )
    cells = (
        grid.bin_many(data.locations) if len(data) else np.zeros(0, dtype=np.int64)
    )
    cell_topic = np.zeros((grid.n_cells, hp.n_topics), dtype=np.int64)
    np.add.at(cell_topic, (cells, counts.assignments), 1)
    indptr, indices = von_neumann_neighbors(grid, radius)
    return RostModel(
        hp=hp,
        grid=grid,
        counts=counts,
        cells=cells,
        cell_topic=cell_topic,
        neighborhood_topic=neighborhood_counts(cell_topic, indptr, indices),
        neighborhood_radius=radius,
        neighbor_indptr=indptr,
        neighbor_indices=indices,
        phi=word_topic_posterior(counts, hp.beta),
    )


@njit(cache=True)
def _rost_sweep_kernel(
    words, cells, assignments, word_topic, topic_total, cell_topic,
    neighborhood_topic, indptr, indices, order, uniforms, alpha, beta,
):
    n_topics, vocab_size = word_topic.shape
    wbeta = vocab_size * beta
    cumulative = np.empty(n_topics)
    for t in range(order.shape[0]):
        i = order[t]
        w = words[i]
        c = cells[i]
        old = assignments[i]
        word_topic[old, w] -= 1
        topic_total[old] -= 1
        cell_topic[c, old] -= 1
        for p in range(indptr[c], indptr[c + 1]):
            neighborhood_topic[indices[p], old] -= 1

        # 近傍因子の分母は j に依らないので省略
        total = 0.0
        for j in range(n_topics):
            total += (
                (word_topic[j, w] + beta) / (topic_total[j] + wbeta)
                * (neighborhood_topic[c, j] + alpha)
            )
            cumulative[j] = total
        if not (total > 0.0) or total == np.inf:
            word_topic[old, w] += 1
            topic_total[old] += 1
            cell_topic[c, old] += 1
            for p in range(indptr[c], indptr[c + 1]):
                neighborhood_topic[indices[p], old] += 1
            return i

        u = uniforms[t] * total
        new = n_topics - 1
        for j in range(n_topics):
            if u < cumulative[j]:
                new = j
                break
        assignments[i] = new
        word_topic[new, w] += 1
        topic_total[new] += 1
        cell_topic[c, new] += 1
        for p in range(indptr[c], indptr[c + 1]):
            neighborhood_topic[indices[p], new] += 1
    return -1


def rost_sweep(
    data: Observations, model: RostModel, seed: int | np.random.Generator
) -> RostModel:
    """1回のスイープ（model をその場で更新して返す）。Φ̂ は更新しない"""
    n = len(data)
    if n != len(model.cells):
        raise ContractViolation(f"model holds {len(model.cells)} observations, data has {n}")
    if n == 0:
        return model
    rng = as_generator(seed, "rost.sweep")
    order = rng.permutation(n)
    uniforms = rng.random(n)
    failed = _rost_sweep_kernel(
        data.words,
        model.cells,
        model.counts.assignments,
        model.counts.word_topic,
        model.counts.topic_total,
        model.cell_topic,
        model.neighborhood_topic,
        model.neighbor_indptr,
        model.neighbor_indices,
        order,
        uniforms,
        float(model.alpha),
        float(model.beta),
    )
    if failed >= 0:
        raise NumericalError(
            f"ROST conditional has zero total mass at observation {failed}",
            diagnostics={"observation": int(failed)},
        )
    return model


def _topic_table(model: RostModel) -> np.ndarray:
    smoothed = model.neighborhood_topic + model.alpha
    return smoothed / smoothed.sum(axis=1, keepdims=True)


def rost_predict(model: RostModel, query) -> tuple[np.ndarray, np.ndarray]:
    """(Q×K トピック分布, Q×W 単語分布)。格子外の問い合わせはエラー"""
    query = np.asarray(query, dtype=np.float64).reshape(-1, model.grid.dim)
    if len(query) == 0:
        return np.zeros((0, model.hp.n_topics)), np.zeros((0, model.hp.vocab_size))
    topics = _topic_table(model)[model.grid.bin_many(query)]
    return topics, topics @ model.phi


def rost_ml_maps(
    model: RostModel, grid: DiscretizationGrid | None = None
) -> tuple[np.ndarray, np.ndarray]:
    grid = grid or model.grid
    topics, _ = rost_predict(model, grid.cell_centers())
    return argmax_maps(topics, model.phi)


def rost_log_likelihood(model: RostModel, data: Observations) -> float:
    if len(data) == 0:
        return 0.0
    topics = _topic_table(model)[model.cells]
    per_obs = np.einsum("nk,kn->n", topics, model.phi[:, data.words])
    return float(np.mean(np.log(per_obs)))


def fit_rost(
    data: Observations,
    hp: Hyperparameters,
    world: World,
    grid: DiscretizationGrid,
    radius: int = 1,
    n_sweeps: int | None = None,
    seed: int = 0,
) -> RostModel:
    """N1 スイープごとに記録を取りながらROSTを学習する

    n_sweeps を指定した場合はその回数だけ回す（GDRFと予算を揃える比較用、早期終了なし）。
    未指定なら n_outer × N1 を上限に、GDRFと同じ早期終了規則を使う。
    """
    if len(data) == 0:
        raise IngestionError("cannot fit a model to zero observations")
    data.validate(world, hp.vocab_size)
    if grid.world != world:
        raise ContractViolation("grid was built for a different world")

    schedule = hp.schedule
    model = init_rost(data, hp, grid, radius, generator(seed, "rost.init"))
    budget = n_sweeps if n_sweeps is not None else schedule.n_outer * schedule.n_gibbs_inner
    logger.info(
        "fit_rost: N=%d K=%d W=%d cells=%d radius=%d budget=%d sweeps",
        len(data), hp.n_topics, hp.vocab_size, grid.n_cells, radius, budget,
    )
    done = 0
    log_likelihoods: list[float] = []
    iteration = 0
    while done < budget:
        block = min(schedule.n_gibbs_inner, budget - done)
        for _ in range(block):
            rost_sweep(data, model, generator(seed, "rost.sweep", counter=done))
            done += 1
        model.phi = word_topic_posterior(model.counts, hp.beta)
        ll = rost_log_likelihood(model, data)
        log_likelihoods.append(ll)
        model.diagnostics.append(
            IterationDiagnostics(iteration=iteration, n_sweeps=done, train_log_likelihood=ll)
        )
        logger.info("rost iteration %d: sweeps=%d train_ll=%.6f", iteration, done, ll)
        iteration += 1
        patience = schedule.early_stop_patience
        if (
            n_sweeps is None
            and len(log_likelihoods) > patience
            and log_likelihoods[-1] - log_likelihoods[-1 - patience] < schedule.early_stop_tol
        ):
            logger.info("rost early stop at iteration %d", iteration - 1)
            break
    return model
