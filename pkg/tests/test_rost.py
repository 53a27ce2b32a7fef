import itertools

import numpy as np
import pytest
from scipy.special import gammaln

from gdrf.errors import IngestionError
from gdrf.models.counts import CountMatrices
from gdrf.models.grid import DiscretizationGrid
from gdrf.models.observations import Observations
from gdrf.schemas.params import Hyperparameters
from gdrf.schemas.world import World
from gdrf.services.rng import generator
from gdrf.services.rost import (
    fit_rost,
    init_rost,
    neighborhood_counts,
    rost_ml_maps,
    rost_predict,
    rost_sweep,
    von_neumann_neighbors,
)

from tests.conftest import small_schedule


def _line_grid(cells):
    return DiscretizationGrid(World(bounds=((0.0, float(cells)),)), (cells,))


def data_world():
    return World(bounds=((0.0, 5.0),))


def _neighbors(grid, radius):
    indptr, indices = von_neumann_neighbors(grid, radius)
    return [indices[indptr[c]:indptr[c + 1]].tolist() for c in range(grid.n_cells)]


def test_neighbors_on_a_line():
    assert _neighbors(_line_grid(3), 1) == [[0, 1], [0, 1, 2], [1, 2]]
    assert _neighbors(_line_grid(3), 0) == [[0], [1], [2]]


def test_neighbors_on_a_lattice_exclude_diagonals():
    grid = DiscretizationGrid(World(bounds=((0.0, 3.0), (0.0, 3.0))), (3, 3))
    neighbors = _neighbors(grid, 1)
    assert neighbors[4] == [1, 3, 4, 5, 7]
    assert neighbors[0] == [0, 1, 3]
    for c, row in enumerate(neighbors):
        for other in row:
            assert c in neighbors[other]


def test_hand_built_neighborhood_ratios():
    grid = _line_grid(3)
    hp = Hyperparameters(n_topics=2, vocab_size=2, alpha=1.0)
    model = init_rost(Observations.empty(1), hp, grid, radius=1)
    model.cell_topic = np.array([[2, 0], [0, 1], [1, 2]])
    model.neighborhood_topic = neighborhood_counts(
        model.cell_topic, model.neighbor_indptr, model.neighbor_indices
    )
    np.testing.assert_array_equal(model.neighborhood_topic, [[2, 1], [3, 3], [1, 3]])
    topics, _ = rost_predict(model, [[0.5], [1.5], [2.5]])
    np.testing.assert_allclose(topics, [[3 / 5, 2 / 5], [1 / 2, 1 / 2], [2 / 6, 4 / 6]])


def test_empty_model_predicts_uniform():
    hp = Hyperparameters(n_topics=4, vocab_size=3)
    model = init_rost(Observations.empty(1), hp, _line_grid(5))
    topics, words = rost_predict(model, [[0.1], [4.9]])
    np.testing.assert_allclose(topics, 0.25)
    np.testing.assert_allclose(words.sum(axis=1), 1.0)


def test_single_topic_words_equal_phi():
    r = generator(0, "test")
    data = Observations(r.uniform(0, 5, size=(50, 1)), r.integers(0, 3, 50))
    hp = Hyperparameters(n_topics=1, vocab_size=3, schedule=small_schedule())
    model = fit_rost(data, hp, data_world(), _line_grid(5), n_sweeps=3, seed=1)
    _, words = rost_predict(model, [[2.2]])
    np.testing.assert_allclose(words[0], model.phi[0])


def test_whole_world_radius_gives_identical_rows():
    r = generator(1, "test")
    data = Observations(r.uniform(0, 5, size=(200, 1)), r.integers(0, 4, 200))
    hp = Hyperparameters(n_topics=3, vocab_size=4, schedule=small_schedule())
    model = fit_rost(data, hp, data_world(), _line_grid(5), radius=4, n_sweeps=5, seed=2)
    topics, words = rost_predict(model, _line_grid(5).cell_centers())
    np.testing.assert_allclose(topics, np.broadcast_to(topics[0], topics.shape))
    np.testing.assert_allclose(topics.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(words.sum(axis=1), 1.0, atol=1e-9)


def test_incremental_counts_match_recount():
    grid = DiscretizationGrid(World(bounds=((0.0, 4.0), (0.0, 4.0))), (4, 4))
    r = generator(2, "test")
    data = Observations(r.uniform(0, 4, size=(300, 2)), r.integers(0, 5, 300))
    hp = Hyperparameters(n_topics=3, vocab_size=5)
    model = init_rost(data, hp, grid, radius=1, seed=3)
    for s in range(10):
        rost_sweep(data, model, generator(3, "rost.sweep", counter=s))
        model.counts.check()
        recount = np.zeros_like(model.cell_topic)
        np.add.at(recount, (model.cells, model.counts.assignments), 1)
        np.testing.assert_array_equal(model.cell_topic, recount)
        np.testing.assert_array_equal(model.cell_topic.sum(axis=0), model.counts.topic_total)
        np.testing.assert_array_equal(
            model.neighborhood_topic,
            neighborhood_counts(model.cell_topic, model.neighbor_indptr, model.neighbor_indices),
        )
        assert np.array_equal(
            model.counts.word_topic,
            CountMatrices.from_assignments(data.words, model.counts.assignments, 3, 5).word_topic,
        )


def test_sweeps_are_deterministic():
    grid = _line_grid(5)
    r = generator(4, "test")
    data = Observations(r.uniform(0, 5, size=(100, 1)), r.integers(0, 4, 100))
    hp = Hyperparameters(n_topics=2, vocab_size=4, schedule=small_schedule())
    a = fit_rost(data, hp, data_world(), grid, n_sweeps=7, seed=5)
    b = fit_rost(data, hp, data_world(), grid, n_sweeps=7, seed=5)
    np.testing.assert_array_equal(a.counts.assignments, b.counts.assignments)
    assert a.n_sweeps == 7
    assert [d.n_sweeps for d in a.diagnostics] == [5, 7]
    topic_map, word_map = rost_ml_maps(a)
    assert topic_map.shape == word_map.shape == (5,)


def test_query_outside_grid_is_rejected():
    model = init_rost(Observations.empty(1), Hyperparameters(n_topics=2, vocab_size=2), _line_grid(3))
    with pytest.raises(IngestionError):
        rost_predict(model, [[3.5]])


def test_two_observation_chain_matches_enumeration():
    alpha, beta = 0.5, 0.5
    words = np.array([0, 1])
    grid = _line_grid(1)
    data = Observations(np.array([[0.2], [0.7]]), words)
    hp = Hyperparameters(n_topics=2, vocab_size=2, alpha=alpha, beta=beta)

    log_post = []
    states = list(itertools.product(range(2), repeat=2))
    for z in states:
        wt = CountMatrices.from_assignments(words, np.array(z), 2, 2).word_topic
        topic_counts = np.bincount(z, minlength=2)
        log_post.append(
            np.sum(gammaln(wt + beta)) - np.sum(gammaln(wt.sum(axis=1) + 2 * beta))
            + np.sum(gammaln(topic_counts + alpha))
        )
    exact = np.exp(np.array(log_post) - np.max(log_post))
    exact /= exact.sum()

    model = init_rost(data, hp, grid, radius=1, seed=6)
    chain = generator(6, "test")
    tally = np.zeros(4)
    n_sweeps = 100_000
    for s in range(n_sweeps + 100):
        rost_sweep(data, model, chain)
        if s >= 100:
            tally[2 * model.counts.assignments[0] + model.counts.assignments[1]] += 1
    assert 0.5 * np.abs(tally / n_sweeps - exact).sum() < 0.02
