import dataclasses

import numpy as np
import pytest

from gdrf.errors import ContractViolation
from gdrf.models.grid import DiscretizationGrid
from gdrf.models.observations import Observations
from gdrf.schemas.params import Hyperparameters
from gdrf.schemas.world import World
from gdrf.services.evaluation import (
    CategoricalMap,
    afmi,
    kl_divergence,
    model_ml_maps,
    mutual_information,
    windowed_kl,
)
from gdrf.services.inference import initial_model
from gdrf.services.rng import generator

GRID = DiscretizationGrid(World(bounds=((0.0, 4.0),)), (4,))


def _map(labels, grid=GRID):
    return CategoricalMap(grid, np.array(labels))


def test_mutual_information_hand_values():
    assert mutual_information(_map([0, 0, 1, 1]), _map([0, 0, 1, 1])) == pytest.approx(np.log(2))
    assert mutual_information(_map([0, 1, 0, 1]), _map([0, 0, 1, 1])) == pytest.approx(0.0, abs=1e-12)
    assert mutual_information(_map([0, 0, 0, 0]), _map([0, 1, 2, 3])) == pytest.approx(0.0, abs=1e-12)


def test_mutual_information_matches_counting_oracle():
    grid = DiscretizationGrid(World(bounds=((0.0, 1.0),)), (500,))
    r = generator(0, "test")
    a = r.integers(0, 3, 500)
    b = (a + r.integers(0, 2, 500)) % 4
    joint = np.zeros((3, 4))
    np.add.at(joint, (a, b), 1.0)
    joint /= joint.sum()
    outer = joint.sum(axis=1, keepdims=True) * joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    expected = np.sum(joint[nz] * np.log(joint[nz] / outer[nz]))
    assert mutual_information(_map(a, grid), _map(b, grid)) == pytest.approx(expected)


def test_mutual_information_rejects_different_grids():
    other = DiscretizationGrid(World(bounds=((0.0, 4.0),)), (2,))
    with pytest.raises(ContractViolation):
        mutual_information(_map([0, 1, 0, 1]), _map([0, 1], other))


def test_afmi_is_label_invariant_and_bounded():
    truth = _map([0, 1, 2, 2])
    assert afmi(_map([2, 0, 1, 1]), truth) == pytest.approx(1.0)
    assert afmi(_map([0, 0, 0, 0]), truth) == pytest.approx(0.0, abs=1e-12)
    partial = afmi(_map([0, 0, 1, 1]), truth)
    assert 0.0 < partial < 1.0


def test_afmi_needs_more_than_one_truth_class():
    with pytest.raises(ContractViolation):
        afmi(_map([0, 1, 0, 1]), _map([3, 3, 3, 3]))


def test_categorical_map_checks_length():
    with pytest.raises(ContractViolation):
        _map([0, 1, 2])


def test_kl_divergence_properties():
    p = np.array([0.5, 0.5])
    q = np.array([0.25, 0.75])
    assert kl_divergence(p, q) == pytest.approx(0.5 * np.log(4 / 3))
    assert kl_divergence(p, p) == 0.0
    assert kl_divergence(p, q) != pytest.approx(kl_divergence(q, p))
    r = generator(1, "test")
    for _ in range(20):
        a, b = r.dirichlet(np.ones(5)), r.dirichlet(np.ones(5))
        assert kl_divergence(a, b) >= 0.0
    assert kl_divergence([0.0, 1.0], [0.5, 0.5]) == pytest.approx(np.log(2))


def test_kl_divergence_rejects_unsupported_mass():
    with pytest.raises(ContractViolation):
        kl_divergence([0.5, 0.5], [1.0, 0.0])
    with pytest.raises(ContractViolation):
        kl_divergence([1.0], [0.5, 0.5])


def _single_topic_model(phi):
    world = World(bounds=((0.0, 10.0),))
    grid = DiscretizationGrid(world, (10,))
    hp = Hyperparameters(n_topics=1, vocab_size=len(phi))
    model = initial_model(Observations.empty(1), hp, world, grid, seed=0)
    return dataclasses.replace(model, phi=np.array([phi]))


def test_windowed_kl_against_hand_values():
    model = _single_topic_model([0.25, 0.75])
    data = Observations(
        np.array([[0.5], [1.0], [1.5], [1.9], [7.2]]),
        np.array([0, 0, 1, 1, 1]),
    )
    series = windowed_kl(model, data, n_bins=5)
    assert series.bins.tolist() == [0, 3]
    assert series.skipped == (1, 2, 4)
    assert series.n_obs.tolist() == [4, 1]
    np.testing.assert_allclose(series.centers, [1.0, 7.0])
    np.testing.assert_allclose(series.kl, [0.5 * np.log(4 / 3), np.log(4 / 3)])
    assert series.mean == pytest.approx(0.75 * np.log(4 / 3))


def test_windowed_kl_subset_of_bins():
    model = _single_topic_model([0.5, 0.5])
    data = Observations(np.array([[0.5], [9.5]]), np.array([0, 1]))
    series = windowed_kl(model, data, n_bins=10, only_bins=[9])
    assert series.bins.tolist() == [9]
    assert series.kl[0] == pytest.approx(np.log(2))


def test_windowed_kl_needs_a_line():
    grid = DiscretizationGrid(World(bounds=((0.0, 1.0), (0.0, 1.0))), (2, 2))
    hp = Hyperparameters(n_topics=1, vocab_size=2)
    model = initial_model(Observations.empty(2), hp, grid.world, grid, seed=0)
    with pytest.raises(ContractViolation):
        windowed_kl(model, Observations.empty(2), n_bins=4)


def test_untrained_gdrf_maps_pick_first_topic():
    model = _single_topic_model([0.2, 0.8])
    topic_map, word_map = model_ml_maps(model)
    assert (topic_map == 0).all()
    assert (word_map == 1).all()
