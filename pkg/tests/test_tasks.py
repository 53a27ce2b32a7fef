import math

import numpy as np
import pytest

from gdrf.errors import ContractViolation
from gdrf.models.grid import DiscretizationGrid
from gdrf.models.observations import Observations
from gdrf.schemas.params import Hyperparameters, KernelParams
from gdrf.schemas.world import World
from gdrf.services.rng import generator
from gdrf.tasks.holdout import HoldoutResult, WindowResult, holdout_experiment, window_starts
from gdrf.tasks.recovery import RecoveryRow, recovery_comparison, run_seed, summarize

from tests.conftest import small_schedule


def test_window_starts():
    assert window_starts(20, 5, 5) == [0, 5, 10, 15]
    assert window_starts(500, 5, 25)[:3] == [0, 25, 50]
    assert window_starts(5, 5, 1) == [0]
    with pytest.raises(ContractViolation):
        window_starts(4, 5, 5)


def test_holdout_result_summaries():
    windows = tuple(
        WindowResult(start_bin=s, stop_bin=s + 5, n_heldout=10, kl_full=0.1, kl_heldout=0.1 * r, ratio=r)
        for s, r in ((0, 1.0), (5, 3.0))
    )
    result = HoldoutResult(windows=windows, skipped=(10,))
    assert result.mean_ratio == pytest.approx(2.0)
    assert result.max_ratio == pytest.approx(3.0)
    assert math.isnan(HoldoutResult(windows=(), skipped=()).mean_ratio)


def test_holdout_skips_empty_windows():
    world = World(bounds=((0.0, 20.0),))
    grid = DiscretizationGrid(world, (20,))
    r = generator(8, "test")
    data = Observations(r.uniform(0.0, 9.9, size=(300, 1)), r.integers(0, 3, 300))
    hp = Hyperparameters(
        n_topics=2,
        vocab_size=3,
        kernel=KernelParams(length_scale=(3.0,), scale=2.0),
        schedule=small_schedule(n_outer=1),
    )
    result = holdout_experiment(data, hp, world, grid, n_bins=20, window_width_bins=5, stride=5, seed=1)
    assert [w.start_bin for w in result.windows] == [0, 5]
    assert result.skipped == (10, 15)
    assert sum(w.n_heldout for w in result.windows) == 300
    assert all(w.kl_full >= 0 and w.ratio > 0 for w in result.windows)


def test_holdout_needs_a_line():
    world = World(bounds=((0.0, 1.0), (0.0, 1.0)))
    hp = Hyperparameters(n_topics=2, vocab_size=2)
    with pytest.raises(ContractViolation):
        holdout_experiment(Observations.empty(2), hp, world, DiscretizationGrid(world, (2, 2)))


def test_run_seeds_are_stable_and_distinct():
    seeds = [run_seed(7, run) for run in range(5)]
    assert seeds == [run_seed(7, run) for run in range(5)]
    assert len(set(seeds)) == 5
    assert all(0 <= s < 2**64 for s in seeds)


def test_summarize_counts_wins():
    rows = [
        RecoveryRow(0, 1, "gdrf", 0.8, 0.5, 10),
        RecoveryRow(0, 1, "rost", 0.6, 0.4, 10),
        RecoveryRow(1, 2, "gdrf", 0.3, 0.2, 10),
        RecoveryRow(1, 2, "rost", 0.5, 0.2, 10),
        RecoveryRow(2, 3, "gdrf", 0.7, 0.6, 10),
        RecoveryRow(2, 3, "rost", 0.7, 0.1, 10),
    ]
    summary = summarize(rows)
    assert summary.n_runs == 3
    assert summary.gdrf_wins == 2
    assert summary.median_gdrf_topic_afmi == pytest.approx(0.7)
    assert summary.median_rost_topic_afmi == pytest.approx(0.6)


def test_recovery_comparison_matches_sweep_budgets():
    world = World(bounds=((-0.5, 5.5), (-0.5, 5.5)))
    grid = DiscretizationGrid(world, (6, 6))
    kernel = KernelParams(length_scale=(3.0,), scale=5.0)
    hp = Hyperparameters(n_topics=2, vocab_size=5, kernel=kernel, schedule=small_schedule(n_outer=2))
    rows = recovery_comparison(world, grid, hp, kernel, n_obs=300, n_runs=2, seed=4)
    assert [(r.run, r.model_kind) for r in rows] == [
        (0, "gdrf"), (0, "rost"), (1, "gdrf"), (1, "rost"),
    ]
    for gdrf_row, rost_row in zip(rows[::2], rows[1::2]):
        assert gdrf_row.n_sweeps == rost_row.n_sweeps == 10
        assert gdrf_row.seed == rost_row.seed
        for value in (gdrf_row.topic_afmi, rost_row.topic_afmi):
            assert np.isnan(value) or -1e-9 <= value <= 1.0 + 1e-9
