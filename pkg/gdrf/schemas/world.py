import math

import numpy as np
from pydantic import BaseModel, model_validator


class World(BaseModel):
    """モデルの定義域（空間・時間の直方体）"""

    bounds: tuple[tuple[float, float], ...]  # 次元ごとの [lo, hi]

    model_config = {"frozen": True}

    @model_validator(mode="after")
    def _check_bounds(self):
        if not self.bounds:
            raise ValueError("world needs at least one dimension")
        for d, (lo, hi) in enumerate(self.bounds):
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise ValueError(f"dimension {d}: bounds must be finite")
            if not lo < hi:
                raise ValueError(f"dimension {d}: lo ({lo}) must be < hi ({hi})")
        return self

    @classmethod
    def from_arrays(cls, lo, hi) -> "World":
        return cls(bounds=tuple((float(a), float(b)) for a, b in zip(lo, hi)))

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def lows(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.bounds], dtype=np.float64)

    @property
    def highs(self) -> np.ndarray:
        return np.array([hi for _, hi in self.bounds], dtype=np.float64)

    @property
    def extent(self) -> np.ndarray:
        return self.highs - self.lows

    def contains(self, points: np.ndarray) -> np.ndarray:
        """各点が境界内（閉区間）にあるかのブールマスク"""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.all((points >= self.lows) & (points <= self.highs), axis=1)
