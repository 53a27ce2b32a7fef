"""世界の離散化とトピック密度の推定

ρ̂_j(c) = (セル c 内でトピック j に割り当てられた観測数) / セル体積
GPの回帰目標は log(ρ̂_j + α)。空セルも log(α) として目標に含める。
"""

import numpy as np

from gdrf.errors import ContractViolation
from gdrf.models.grid import DensityField, DiscretizationGrid
from gdrf.schemas.world import World

TIME_SERIES_CELLS = 500


def bin(grid: DiscretizationGrid, location) -> int:
    """1地点のセル番号"""
    return int(grid.bin_many(np.asarray(location, dtype=np.float64).reshape(1, -1))[0])


def estimate_density(
    grid: DiscretizationGrid,
    locations: np.ndarray,
    topics: np.ndarray,
    n_topics: int,
    cells: np.ndarray | None = None,
) -> DensityField:
    """割当からセルごとの密度を数える（cells を渡すと再ビニングしない）"""
    topics = np.asarray(topics, dtype=np.int64)
    if cells is None:
        cells = (
            grid.bin_many(locations) if len(topics) else np.zeros(0, dtype=np.int64)
        )
    if len(cells) != len(topics):
        raise ContractViolation(f"{len(cells)} cells for {len(topics)} topics")
    if len(topics) and (topics.min() < 0 or topics.max() >= n_topics):
        raise ContractViolation("topic out of range")
    counts = np.zeros((grid.n_cells, n_topics), dtype=np.float64)
    np.add.at(counts, (cells, topics), 1.0)
    rho = counts / grid.cell_volume
    return DensityField(grid=grid, rho=rho, rho_total=rho.sum(axis=1))


def gp_targets(field: DensityField, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """(セル中心 C×D, 目標値 C×K)"""
    if not alpha > 0:
        raise ContractViolation(f"alpha must be > 0, got {alpha}")
    return field.grid.cell_centers(), np.log(field.rho + alpha)


def default_cells(world: World) -> tuple[int, ...]:
    """既定の分割数: 1次元は500等分、それ以外は単位格子1つにつき1セル"""
    if world.dim == 1:
        return (TIME_SERIES_CELLS,)
    return tuple(max(1, int(round(e))) for e in world.extent)


def default_grid(world: World, cells_per_dim: tuple[int, ...] | None = None) -> DiscretizationGrid:
    return DiscretizationGrid(world, cells_per_dim or default_cells(world))
