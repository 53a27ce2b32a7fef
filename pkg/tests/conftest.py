import numpy as np
import pytest

from gdrf.models.grid import DiscretizationGrid
from gdrf.models.observations import Observations
from gdrf.schemas.params import Hyperparameters, KernelParams, TrainingSchedule
from gdrf.schemas.world import World
from gdrf.services.rng import generator


def small_schedule(**overrides) -> TrainingSchedule:
    values = dict(
        n_gibbs_inner=5,
        n_svi_inner=3,
        learning_rate=0.05,
        n_outer=3,
        early_stop_patience=5,
        max_inducing=64,
    )
    values.update(overrides)
    return TrainingSchedule(**values)


@pytest.fixture
def rng():
    return generator(2024, "test")


@pytest.fixture
def line_world():
    return World(bounds=((0.0, 10.0),))


@pytest.fixture
def separable():
    """左半分は単語0だけ、右半分は単語1だけの1次元データ"""
    world = World(bounds=((0.0, 10.0),))
    grid = DiscretizationGrid(world, (40,))
    r = generator(5, "test")
    left = r.uniform(0.0, 5.0, size=400)
    right = r.uniform(5.0, 10.0, size=400)
    data = Observations(
        np.concatenate([left, right]).reshape(-1, 1),
        np.concatenate([np.zeros(400), np.ones(400)]).astype(np.int64),
    )
    hp = Hyperparameters(
        n_topics=2,
        vocab_size=2,
        kernel=KernelParams(length_scale=(1.0,), scale=5.0, noise_variance=0.1),
        schedule=small_schedule(
            n_gibbs_inner=10, n_svi_inner=10, n_outer=10, warm_start=True, max_inducing=40
        ),
    )
    return data, hp, world, grid
