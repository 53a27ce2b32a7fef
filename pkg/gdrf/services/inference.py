"""GDRFの学習ループと予測

外側ループ1回:
  1. 空間事前分布を固定して N1 回のGibbsスイープ
  2. Φ̂ とセル密度を再計算し、GPの回帰目標 log(ρ̂_j + α) を作る
  3. トピックごとのGPに N2 回の勾配ステップ
  4. π(x) = softmax(μ̂_1(x), …, μ̂_K(x)) を次の外側ループの事前分布にする
"""

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import softmax

from gdrf.errors import ContractViolation, IngestionError, NumericalError
from gdrf.models.counts import word_topic_posterior
from gdrf.models.gdrf_model import GdrfModel, IterationDiagnostics
from gdrf.models.gp_state import GPState
from gdrf.models.grid import DiscretizationGrid
from gdrf.models.observations import Observations
from gdrf.schemas.params import Hyperparameters, TrainingSchedule
from gdrf.schemas.world import World
from gdrf.services import svgp
from gdrf.services.density import default_grid, estimate_density, gp_targets
from gdrf.services.gibbs import CellDensityPrior, initialize_assignments, sweep
from gdrf.services.rng import generator

logger = logging.getLogger(__name__)


def link(mu: np.ndarray) -> np.ndarray:
    """softmax（最後の軸）。入力に定数を足しても結果は変わらない"""
    mu = np.asarray(mu, dtype=np.float64)
    if not np.isfinite(mu).all():
        raise NumericalError("link input is not finite")
    return softmax(mu, axis=-1)


def argmax_maps(topic_probs: np.ndarray, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """行ごとの最尤トピックと最尤単語（同率は小さい番号）

    単語マップは混合 Σ_j P(j|x) Φ[j] の argmax であり、最尤トピックの Φ 行の argmax ではない。
    """
    return np.argmax(topic_probs, axis=1), np.argmax(topic_probs @ phi, axis=1)


def latent_means(gps, query: np.ndarray) -> np.ndarray:
    """各GPの事後平均を並べた Q×K 行列"""
    return np.stack([svgp.predict_mean(gp, query) for gp in gps], axis=1)


class GpPrior:
    """学習済みGPによる空間事前分布 π(x) = link(μ̂(x))"""

    def __init__(self, gps: tuple[GPState, ...]):
        self.gps = gps
        self.n_topics = len(gps)

    def __call__(self, locations: np.ndarray) -> np.ndarray:
        return link(latent_means(self.gps, np.atleast_2d(locations)))


def select_inducing(grid: DiscretizationGrid, cap: int) -> np.ndarray:
    """誘導点はセル中心。上限を超える場合は各軸を等間隔に間引く"""
    if grid.n_cells <= cap:
        return grid.cell_centers()
    ratio = (cap / grid.n_cells) ** (1.0 / grid.dim)
    axes = []
    for lo, n, width in zip(grid.world.lows, grid.cells_per_dim, grid.cell_widths):
        m = max(1, int(n * ratio))
        idx = np.unique(np.round(np.linspace(0, n - 1, m)).astype(np.int64))
        axes.append(lo + (idx + 0.5) * width)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.ravel() for a in mesh], axis=1)


def _log_likelihood(topic_probs: np.ndarray, phi: np.ndarray, words: np.ndarray) -> float:
    if len(words) == 0:
        return 0.0
    per_obs = np.einsum("nk,kn->n", topic_probs, phi[:, words])
    return float(np.mean(np.log(per_obs)))


def initial_model(
    data: Observations,
    hp: Hyperparameters,
    world: World,
    grid: DiscretizationGrid,
    seed: int,
) -> GdrfModel:
    """学習前のモデル（ランダム割当、GPは全て事前分布）"""
    counts = initialize_assignments(
        data.words, hp.n_topics, hp.vocab_size, generator(seed, "fit.init")
    )
    inducing = select_inducing(grid, hp.schedule.max_inducing)
    gps = tuple(GPState.prior(hp.kernel, inducing) for _ in range(hp.n_topics))
    return GdrfModel(
        hp=hp,
        world=world,
        grid=grid,
        counts=counts,
        gps=gps,
        phi=word_topic_posterior(counts, hp.beta),
    )


def _fit_topic(
    gp: GPState,
    centers: np.ndarray,
    targets: np.ndarray,
    schedule: TrainingSchedule,
    rng: np.random.Generator,
    warm_start: bool,
) -> tuple[GPState, float, int]:
    if warm_start:
        gp = svgp.optimal_variational(gp, centers, targets, schedule.noise_floor)
    rejected = 0
    for _ in range(schedule.n_svi_inner):
        updated = svgp.fit_step(
            gp,
            centers,
            targets,
            schedule.learning_rate,
            max_backoff=schedule.max_backoff,
            noise_floor=schedule.noise_floor,
            minibatch_size=schedule.minibatch_size,
            rng=rng,
        )
        if updated is gp:
            rejected += 1
        gp = updated
    return gp, svgp.elbo(gp, centers, targets, schedule.noise_floor), rejected


def fit(
    data: Observations,
    hp: Hyperparameters,
    world: World,
    seed: int,
    grid: DiscretizationGrid | None = None,
    threads: int = 1,
) -> GdrfModel:
    """GDRFを学習する（同じシードなら同じモデル）"""
    if len(data) == 0:
        raise IngestionError("cannot fit a model to zero observations")
    data.validate(world, hp.vocab_size)
    grid = grid or default_grid(world)
    if grid.world != world:
        raise ContractViolation("grid was built for a different world")

    schedule = hp.schedule
    n_topics = hp.n_topics
    model = initial_model(data, hp, world, grid, seed)
    counts = model.counts
    cells = grid.bin_many(data.locations)
    centers = grid.cell_centers()

    # 最初の外側ループはランダム割当の経験密度を事前分布にする
    field = estimate_density(grid, data.locations, counts.assignments, n_topics, cells=cells)
    prior = CellDensityPrior(field, hp.alpha).table[cells]

    gps: list[GPState] | None = None
    history: list[IterationDiagnostics] = []
    log_likelihoods: list[float] = []
    n_sweeps = 0
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    logger.info(
        "fit: N=%d K=%d W=%d cells=%d inducing=%d",
        len(data), n_topics, hp.vocab_size, grid.n_cells, model.gps[0].n_inducing,
    )
    try:
        for iteration in range(schedule.n_outer):
            for _ in range(schedule.n_gibbs_inner):
                sweep(data, counts, prior, hp, generator(seed, "fit.sweep", counter=n_sweeps))
                n_sweeps += 1

            phi = word_topic_posterior(counts, hp.beta)
            field = estimate_density(grid, data.locations, counts.assignments, n_topics, cells=cells)
            _, targets = gp_targets(field, hp.alpha)
            first = gps is None
            if first:
                gps = [
                    dataclasses.replace(gp, const_mean=float(targets[:, j].mean()))
                    for j, gp in enumerate(model.gps)
                ]

            jobs = [
                (
                    gps[j],
                    centers,
                    targets[:, j],
                    schedule,
                    generator(seed, "fit.svi", counter=iteration * n_topics + j),
                    schedule.warm_start,
                )
                for j in range(n_topics)
            ]
            if pool is not None:
                results = list(pool.map(lambda job: _fit_topic(*job), jobs))
            else:
                results = [_fit_topic(*job) for job in jobs]
            gps = [gp for gp, _, _ in results]
            elbos = tuple(value for _, value, _ in results)
            rejected = sum(r for _, _, r in results)

            prior = GpPrior(tuple(gps))(data.locations)
            ll = _log_likelihood(prior, phi, data.words)
            log_likelihoods.append(ll)
            history.append(
                IterationDiagnostics(
                    iteration=iteration,
                    n_sweeps=n_sweeps,
                    train_log_likelihood=ll,
                    elbo=elbos,
                    rejected_steps=rejected,
                )
            )
            logger.info(
                "iteration %d: sweeps=%d train_ll=%.6f elbo=[%s] rejected=%d",
                iteration, n_sweeps, ll, ", ".join(f"{e:.4g}" for e in elbos), rejected,
            )
            if rejected:
                logger.warning("iteration %d: %d GP steps rejected", iteration, rejected)

            patience = schedule.early_stop_patience
            if (
                len(log_likelihoods) > patience
                and log_likelihoods[-1] - log_likelihoods[-1 - patience] < schedule.early_stop_tol
            ):
                logger.info(
                    "early stop at iteration %d (gain over %d iterations < %g)",
                    iteration, patience, schedule.early_stop_tol,
                )
                break
    except NumericalError as exc:
        exc.diagnostics["iterations"] = [dataclasses.asdict(d) for d in history]
        raise
    finally:
        if pool is not None:
            pool.shutdown()

    return GdrfModel(
        hp=hp,
        world=world,
        grid=grid,
        counts=counts,
        gps=tuple(gps),
        phi=word_topic_posterior(counts, hp.beta),
        diagnostics=tuple(history),
    )


def predict_topics(model: GdrfModel, query) -> np.ndarray:
    query = np.asarray(query, dtype=np.float64).reshape(-1, model.world.dim)
    if len(query) == 0:
        return np.zeros((0, model.hp.n_topics))
    return link(latent_means(model.gps, query))


def predict_words(model: GdrfModel, query) -> np.ndarray:
    return predict_topics(model, query) @ model.phi


def max_likelihood_maps(
    model: GdrfModel, grid: DiscretizationGrid | None = None
) -> tuple[np.ndarray, np.ndarray]:
    grid = grid or model.grid
    return argmax_maps(predict_topics(model, grid.cell_centers()), model.phi)


def training_log_likelihood(model: GdrfModel, data: Observations) -> float:
    """観測1件あたりの予測対数尤度 log Σ_j π_j(x_i) Φ̂[j][w_i] の平均"""
    if len(data) == 0:
        return 0.0
    return _log_likelihood(predict_topics(model, data.locations), model.phi, data.words)
