"""生成モデルからの順方向シミュレーション

1. トピックごとに独立なGP場 μ_j をセル中心で引く（セル内では一定）
2. Φ_j ~ Dirichlet(β)
3. 各観測: セルを一様に選び、セル内の位置を一様に選び、
   z ~ softmax(μ(cell))、w ~ Φ_z
"""

import logging

import numpy as np

from gdrf.errors import ContractViolation, NumericalError
from gdrf.models.grid import DiscretizationGrid
from gdrf.models.ground_truth import GroundTruth
from gdrf.models.observations import Observations
from gdrf.schemas.params import Hyperparameters, KernelParams
from gdrf.schemas.world import World
from gdrf.services.inference import argmax_maps, link
from gdrf.services.kernel import DENSE_CAP, sample_prior
from gdrf.services.rng import generator

logger = logging.getLogger(__name__)


def _categorical(probs: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """行ごとの逆CDF法"""
    cumulative = np.cumsum(probs, axis=1)
    return np.argmax(cumulative > uniforms[:, None] * cumulative[:, -1:], axis=1)


def simulate(
    world: World,
    grid: DiscretizationGrid,
    hp: Hyperparameters,
    kernel: KernelParams,
    n_obs: int,
    seed: int,
    dense_cap: int = DENSE_CAP,
) -> GroundTruth:
    if n_obs < 1:
        raise ContractViolation(f"n_obs must be >= 1, got {n_obs}")
    if grid.world != world:
        raise ContractViolation("grid was built for a different world")

    centers = grid.cell_centers()
    mu = np.stack(
        [
            sample_prior(
                centers, kernel, 0.0, generator(seed, "simulate.fields", counter=j),
                max_points=dense_cap,
            )
            for j in range(hp.n_topics)
        ],
        axis=1,
    )

    phi = generator(seed, "simulate.phi").dirichlet(
        np.full(hp.vocab_size, hp.beta), size=hp.n_topics
    )
    phi = phi / phi.sum(axis=1, keepdims=True)
    if not np.isfinite(phi).all():
        raise NumericalError("Dirichlet draw produced non-finite word distributions")

    rng = generator(seed, "simulate.observations")
    drawn = rng.integers(0, grid.n_cells, size=n_obs)
    locations = grid.cell_lows(drawn) + rng.random((n_obs, grid.dim)) * grid.cell_widths
    locations = np.clip(locations, world.lows, world.highs)
    # 丸め誤差で隣のセルに出た点は、実際に含むセルの μ に従わせる
    cells = grid.bin_many(locations)
    topic_probs = link(mu)
    topics = _categorical(topic_probs[cells], rng.random(n_obs))
    words = _categorical(phi[topics], rng.random(n_obs))

    topic_map, word_map = argmax_maps(topic_probs, phi)
    logger.info(
        "simulated N=%d K=%d W=%d cells=%d seed=%d",
        n_obs, hp.n_topics, hp.vocab_size, grid.n_cells, seed,
    )
    return GroundTruth(
        grid=grid,
        mu=mu,
        phi=phi,
        observations=Observations(locations, words),
        topics=topics,
        cells=cells,
        ml_topic_map=topic_map,
        ml_word_map=word_map,
    )


def ml_maps(gt: GroundTruth) -> tuple[np.ndarray, np.ndarray]:
    return argmax_maps(link(gt.mu), gt.phi)
