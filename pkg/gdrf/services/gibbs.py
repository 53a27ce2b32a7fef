"""崩壊型Gibbsサンプラー

P(z_i = j | ·) ∝ (n_{-i,j}^{w_i} + β) / (n_{-i,j}^· + Wβ) · π_j(x_i)

空間因子 π(x) は正規化済みのK単体として外から与える（SpatialPrior）。
スイープ本体は numba でコンパイルし、乱数（順列と一様乱数）は事前に
numpy の生成器から引いて渡す。これで numba 側は乱数状態を持たない。
"""

import logging
from typing import Protocol

import numpy as np
from numba import njit

from gdrf.errors import ContractViolation, NumericalError
from gdrf.models.counts import CountMatrices
from gdrf.models.grid import DensityField
from gdrf.models.observations import Observations
from gdrf.schemas.params import Hyperparameters
from gdrf.services.rng import as_generator

logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-9


class SpatialPrior(Protocol):
    """位置 (N×D) → トピック確率 (N×K) の写像"""

    n_topics: int

    def __call__(self, locations: np.ndarray) -> np.ndarray: ...


class UniformPrior:
    def __init__(self, n_topics: int):
        self.n_topics = n_topics

    def __call__(self, locations: np.ndarray) -> np.ndarray:
        n = len(np.atleast_2d(locations))
        return np.full((n, self.n_topics), 1.0 / self.n_topics)


class CellDensityPrior:
    """経験的なセル密度からの事前分布: (ρ̂_j + α) / (ρ̂ + Kα)"""

    def __init__(self, field: DensityField, alpha: float):
        if not alpha > 0:
            raise ContractViolation(f"alpha must be > 0, got {alpha}")
        self.field = field
        self.n_topics = field.n_topics
        smoothed = field.rho + alpha
        self.table = smoothed / smoothed.sum(axis=1, keepdims=True)

    def __call__(self, locations: np.ndarray) -> np.ndarray:
        if len(locations) == 0:
            return np.zeros((0, self.n_topics))
        return self.table[self.field.grid.bin_many(locations)]


def check_simplex_rows(probs: np.ndarray, n_topics: int) -> np.ndarray:
    probs = np.ascontiguousarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[1] != n_topics:
        raise ContractViolation(f"prior has shape {probs.shape}, expected (N, {n_topics})")
    if len(probs) and (
        (probs < 0).any() or np.abs(probs.sum(axis=1) - 1.0).max() > SIMPLEX_TOL
    ):
        raise ContractViolation("prior rows must be simplices")
    return probs


def conditional(
    counts: CountMatrices, word: int, prior: np.ndarray, beta: float
) -> np.ndarray:
    """1観測のトピック条件付き分布（counts はその観測を除いたもの）"""
    prior = check_simplex_rows(np.asarray(prior).reshape(1, -1), counts.n_topics)[0]
    if not 0 <= word < counts.vocab_size:
        raise ContractViolation(f"word {word} not in [0, {counts.vocab_size})")
    word_factor = (counts.word_topic[:, word] + beta) / (
        counts.topic_total + counts.vocab_size * beta
    )
    mass = word_factor * prior
    total = mass.sum()
    if not (np.isfinite(total) and total > 0):
        raise NumericalError(
            "conditional has zero total mass", diagnostics={"word": int(word)}
        )
    return mass / total


def initialize_assignments(
    words: np.ndarray, n_topics: int, vocab_size: int, seed: int | np.random.Generator
) -> CountMatrices:
    """各観測に一様ランダムなトピックを割り当てる"""
    rng = as_generator(seed, "fit.init")
    assignments = rng.integers(0, n_topics, size=len(words), dtype=np.int64)
    return CountMatrices.from_assignments(words, assignments, n_topics, vocab_size)


@njit(cache=True)
def _sweep_kernel(words, assignments, word_topic, topic_total, prior, order, uniforms, beta):
    n_topics, vocab_size = word_topic.shape
    wbeta = vocab_size * beta
    cumulative = np.empty(n_topics)
    for t in range(order.shape[0]):
        i = order[t]
        w = words[i]
        old = assignments[i]
        word_topic[old, w] -= 1
        topic_total[old] -= 1

        total = 0.0
        for j in range(n_topics):
            total += (word_topic[j, w] + beta) / (topic_total[j] + wbeta) * prior[i, j]
            cumulative[j] = total
        if not (total > 0.0) or total == np.inf:
            word_topic[old, w] += 1
            topic_total[old] += 1
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
    return -1


def sweep(
    data: Observations,
    counts: CountMatrices,
    prior: SpatialPrior | np.ndarray,
    hp: Hyperparameters,
    seed: int | np.random.Generator,
) -> CountMatrices:
    """全観測を1回ずつ再サンプリングする（counts をその場で更新して返す）

    順序はスイープごとのシード付き乱数順列。prior は SpatialPrior か、
    観測位置で評価済みの N×K 行列。
    """
    n = len(data)
    if len(counts.assignments) != n:
        raise ContractViolation(f"{len(counts.assignments)} assignments for {n} observations")
    if n == 0:
        return counts
    if (counts.assignments < 0).any():
        raise ContractViolation("sweep needs every observation assigned")
    probs = prior if isinstance(prior, np.ndarray) else prior(data.locations)
    probs = check_simplex_rows(probs, counts.n_topics)

    rng = as_generator(seed, "fit.sweep")
    order = rng.permutation(n)
    uniforms = rng.random(n)
    failed = _sweep_kernel(
        data.words,
        counts.assignments,
        counts.word_topic,
        counts.topic_total,
        probs,
        order,
        uniforms,
        float(hp.beta),
    )
    if failed >= 0:
        raise NumericalError(
            f"conditional has zero total mass at observation {failed}",
            diagnostics={"observation": int(failed), "prior": probs[failed].tolist()},
        )
    return counts
