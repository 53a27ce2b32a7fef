from dataclasses import dataclass, field

import numpy as np

from gdrf.schemas.params import KernelParams


@dataclass(frozen=True, eq=False)
class GPState:
    """トピック1つ分の変分GPの状態（更新ごとに新しいインスタンスを作る）

    q(u) は白色化した表現で保持する: u = M·1 + L_K v, q(v) = N(m, L Lᵀ)。
    m = 0, L = I のとき q は事前分布に一致する。
    """

    kernel: KernelParams
    const_mean: float  # GP事前平均 M_j
    inducing_locations: np.ndarray  # M×D（学習中は固定）
    variational_mean: np.ndarray  # m: M
    variational_cov_factor: np.ndarray  # L: M×M 下三角
    # Adamのモーメント。シリアライズ対象外
    optimizer_state: dict | None = field(default=None, repr=False)

    @classmethod
    def prior(
        cls, kernel: KernelParams, inducing_locations: np.ndarray, const_mean: float = 0.0
    ) -> "GPState":
        inducing = np.atleast_2d(np.asarray(inducing_locations, dtype=np.float64))
        m = len(inducing)
        return cls(
            kernel=kernel,
            const_mean=float(const_mean),
            inducing_locations=inducing,
            variational_mean=np.zeros(m),
            variational_cov_factor=np.eye(m),
        )

    @property
    def n_inducing(self) -> int:
        return len(self.inducing_locations)

    @property
    def dim(self) -> int:
        return self.inducing_locations.shape[1]
