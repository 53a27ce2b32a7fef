import dataclasses

import numpy as np
import pytest

from gdrf.errors import IngestionError, NumericalError
from gdrf.models.grid import DiscretizationGrid
from gdrf.models.observations import Observations
from gdrf.schemas.params import Hyperparameters
from gdrf.services.inference import (
    argmax_maps,
    fit,
    initial_model,
    link,
    max_likelihood_maps,
    predict_topics,
    predict_words,
    select_inducing,
    training_log_likelihood,
)
from gdrf.services.rng import generator

from tests.conftest import small_schedule


def test_link_examples():
    np.testing.assert_allclose(link(np.zeros(3)), [1 / 3, 1 / 3, 1 / 3])
    out = link(np.array([0.0, np.log(3.0)]))
    np.testing.assert_allclose(out, [0.25, 0.75])


def test_link_is_shift_invariant_and_stable():
    mu = generator(1, "test").normal(size=(20, 4))
    np.testing.assert_allclose(link(mu), link(mu + 1000.0), atol=1e-12)
    np.testing.assert_allclose(link(mu).sum(axis=1), 1.0)
    assert np.isfinite(link(np.array([1e4, -1e4]))).all()


def test_link_rejects_non_finite():
    with pytest.raises(NumericalError):
        link(np.array([0.0, np.nan]))


def test_word_map_uses_the_mixture():
    phi = np.array([[0.4, 0.35, 0.25], [0.05, 0.9, 0.05]])
    topics, words = argmax_maps(np.array([[0.6, 0.4]]), phi)
    assert topics[0] == 0
    # 最尤トピックの Φ 行なら単語0だが、混合 (0.26, 0.57, 0.17) では単語1
    assert words[0] == 1


def test_select_inducing_caps_count(line_world):
    grid = DiscretizationGrid(line_world, (100,))
    assert len(select_inducing(grid, 500)) == 100
    thinned = select_inducing(grid, 20)
    assert len(thinned) <= 20
    assert thinned.min() == pytest.approx(0.05)
    assert thinned.max() == pytest.approx(9.95)


def test_untrained_model_predicts_uniform_topics(separable):
    data, hp, world, grid = separable
    model = initial_model(data, hp, world, grid, seed=0)
    np.testing.assert_allclose(predict_topics(model, [[1.0], [9.0]]), 0.5)


def test_fit_rejects_empty_data(line_world):
    hp = Hyperparameters(n_topics=2, vocab_size=2, schedule=small_schedule())
    with pytest.raises(IngestionError):
        fit(Observations.empty(1), hp, line_world, seed=0)


def test_single_topic_phi_is_smoothed_frequency(line_world):
    words = np.array([0, 0, 0, 1, 2, 2])
    data = Observations(np.linspace(1, 9, len(words)).reshape(-1, 1), words)
    hp = Hyperparameters(n_topics=1, vocab_size=4, beta=0.5, schedule=small_schedule(n_outer=2))
    model = fit(data, hp, line_world, seed=3, grid=DiscretizationGrid(line_world, (10,)))
    expected = (np.array([3, 1, 2, 0]) + 0.5) / (6 + 4 * 0.5)
    np.testing.assert_allclose(model.phi[0], expected)
    np.testing.assert_allclose(predict_topics(model, [[2.0]]), [[1.0]])


def test_fit_is_deterministic_across_thread_counts(separable):
    data, hp, world, grid = separable
    hp = hp.model_copy(update={"schedule": small_schedule(n_outer=2)})
    first = fit(data, hp, world, seed=11, grid=grid)
    second = fit(data, hp, world, seed=11, grid=grid, threads=2)
    assert np.array_equal(first.counts.assignments, second.counts.assignments)
    np.testing.assert_array_equal(first.phi, second.phi)
    query = grid.cell_centers()
    np.testing.assert_array_equal(predict_topics(first, query), predict_topics(second, query))
    assert [d.train_log_likelihood for d in first.diagnostics] == [
        d.train_log_likelihood for d in second.diagnostics
    ]


def test_predictions_are_simplices(separable):
    data, hp, world, grid = separable
    hp = hp.model_copy(update={"schedule": small_schedule(n_outer=1)})
    model = fit(data, hp, world, seed=2, grid=grid)
    query = generator(0, "test").uniform(0, 10, size=(50, 1))
    topics = predict_topics(model, query)
    words = predict_words(model, query)
    assert topics.shape == (50, 2) and words.shape == (50, 2)
    np.testing.assert_allclose(topics.sum(axis=1), 1.0)
    np.testing.assert_allclose(words.sum(axis=1), 1.0)
    assert predict_topics(model, np.zeros((0, 1))).shape == (0, 2)


def test_separable_data_recovers_both_halves(separable):
    data, hp, world, grid = separable
    model = fit(data, hp, world, seed=7, grid=grid)

    left_topic = int(np.argmax(model.phi[:, 0]))
    right_topic = 1 - left_topic
    assert model.phi[left_topic, 0] > 0.9
    assert model.phi[right_topic, 1] > 0.9

    left = predict_topics(model, np.linspace(0.5, 4.0, 30))
    right = predict_topics(model, np.linspace(6.0, 9.5, 30))
    assert (left[:, left_topic] > 0.9).all()
    assert (right[:, right_topic] > 0.9).all()

    topic_map, word_map = max_likelihood_maps(model)
    centers = grid.cell_centers()[:, 0]
    truth = np.where(centers < 5.0, left_topic, right_topic)
    assert np.mean(topic_map == truth) >= 0.95
    assert np.mean(word_map == (centers >= 5.0)) >= 0.95

    lls = [d.train_log_likelihood for d in model.diagnostics]
    assert lls[-1] > lls[0]
    assert training_log_likelihood(model, data) == pytest.approx(lls[-1])


def test_common_mean_offset_leaves_topic_probabilities_unchanged(separable):
    data, hp, world, grid = separable
    hp = hp.model_copy(update={"schedule": small_schedule(n_outer=2)})
    model = fit(data, hp, world, seed=5, grid=grid)
    shifted = dataclasses.replace(
        model,
        gps=tuple(dataclasses.replace(gp, const_mean=gp.const_mean + 3.7) for gp in model.gps),
    )
    query = grid.cell_centers()
    np.testing.assert_allclose(predict_topics(shifted, query), predict_topics(model, query), atol=1e-9)


def test_max_likelihood_maps_survive_monotone_rescaling(separable):
    data, hp, world, grid = separable
    hp = hp.model_copy(update={"schedule": small_schedule(n_outer=2)})
    model = fit(data, hp, world, seed=6, grid=grid)
    topic_map, word_map = max_likelihood_maps(model)
    probs = predict_topics(model, grid.cell_centers())

    for rescale in (np.sqrt, np.log, lambda p: 5.0 * p**3):
        assert np.array_equal(argmax_maps(rescale(probs), model.phi)[0], topic_map)
    # 一様な正のスケールは混合の順位も保つ
    scaled_topics, scaled_words = argmax_maps(7.5 * probs, 0.2 * model.phi)
    assert np.array_equal(scaled_topics, topic_map)
    assert np.array_equal(scaled_words, word_map)
