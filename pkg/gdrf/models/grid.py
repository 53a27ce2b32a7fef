from dataclasses import dataclass

import numpy as np

from gdrf.errors import ContractViolation, IngestionError
from gdrf.schemas.world import World


@dataclass(frozen=True, eq=False)
class DiscretizationGrid:
    """世界を等幅セルに分割する格子

    セル番号は多重インデックスを C 順（最後の次元が最速）に平坦化したもの。
    各セルは下端を含み上端を含まない。世界の上端だけは最後のセルに属する。
    """

    world: World
    cells_per_dim: tuple[int, ...]

    def __post_init__(self):
        cells = tuple(int(n) for n in self.cells_per_dim)
        if len(cells) != self.world.dim:
            raise ContractViolation(
                f"grid has {len(cells)} dims, world has {self.world.dim}"
            )
        if any(n < 1 for n in cells):
            raise ContractViolation(f"cells_per_dim must be positive, got {cells}")
        object.__setattr__(self, "cells_per_dim", cells)

    @property
    def dim(self) -> int:
        return self.world.dim

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells_per_dim))

    @property
    def cell_widths(self) -> np.ndarray:
        return self.world.extent / np.array(self.cells_per_dim, dtype=np.float64)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.cell_widths))

    def same_as(self, other: "DiscretizationGrid") -> bool:
        return self.cells_per_dim == other.cells_per_dim and self.world == other.world

    def cell_centers(self) -> np.ndarray:
        """全セルの中心座標（C×D、セル番号順）"""
        axes = [
            lo + (np.arange(n) + 0.5) * w
            for lo, n, w in zip(self.world.lows, self.cells_per_dim, self.cell_widths)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def cell_lows(self, cells: np.ndarray) -> np.ndarray:
        """セルの下端座標（len(cells)×D）"""
        multi = np.stack(np.unravel_index(np.asarray(cells), self.cells_per_dim), axis=1)
        return self.world.lows + multi * self.cell_widths

    def unravel(self, cell: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(int(cell), self.cells_per_dim))

    def bin_many(self, locations: np.ndarray) -> np.ndarray:
        locations = np.atleast_2d(np.asarray(locations, dtype=np.float64))
        if locations.shape[1] != self.dim:
            raise ContractViolation(
                f"locations have {locations.shape[1]} dims, grid has {self.dim}"
            )
        inside = self.world.contains(locations)
        if not inside.all():
            bad = np.flatnonzero(~inside)
            raise IngestionError(
                f"{len(bad)} locations outside the world",
                lines=bad.tolist()[:100],
            )
        n = np.array(self.cells_per_dim)
        scaled = (locations - self.world.lows) * n / self.world.extent
        multi = np.minimum(np.floor(scaled).astype(np.int64), n - 1)
        multi = np.maximum(multi, 0)
        return np.ravel_multi_index(tuple(multi.T), self.cells_per_dim)


@dataclass(frozen=True, eq=False)
class DensityField:
    """セルごとのトピック密度推定 ρ̂_j（単位: 1/体積）"""

    grid: DiscretizationGrid
    rho: np.ndarray  # C×K
    rho_total: np.ndarray  # C

    @property
    def n_topics(self) -> int:
        return self.rho.shape[1]
