"""Matérn 3/2 カーネルと事前分布からのサンプリング（numpy版）

k(r) = σ (1 + √3 r) exp(-√3 r)、r は次元ごとの長さスケールで割った距離。
"""

import logging

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from gdrf.errors import ContractViolation, NumericalError
from gdrf.schemas.params import KernelParams
from gdrf.services.rng import as_generator

logger = logging.getLogger(__name__)

SQRT3 = np.sqrt(3.0)
DENSE_CAP = 5000
MAX_RELATIVE_JITTER = 1e-2


def _matern32_scaled(r: np.ndarray, scale: float) -> np.ndarray:
    sr = SQRT3 * r
    return scale * (1.0 + sr) * np.exp(-sr)


def matern32(r, params: KernelParams):
    """共有長さスケールでの k(r)。r は元の単位の距離。"""
    if len(set(params.length_scale)) != 1:
        raise ContractViolation("matern32 needs a single shared length scale")
    r = np.asarray(r, dtype=np.float64)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise ContractViolation("distance must be nonnegative")
    value = _matern32_scaled(r / params.length_scale[0], params.scale)
    return float(value) if value.ndim == 0 else value


def kernel_matrix(xs: np.ndarray, ys: np.ndarray, params: KernelParams) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    ys = np.atleast_2d(np.asarray(ys, dtype=np.float64))
    if xs.shape[1] != ys.shape[1]:
        raise ContractViolation(f"dimension mismatch: {xs.shape[1]} vs {ys.shape[1]}")
    ls = np.array(params.length_scales_for(xs.shape[1]))
    r = cdist(xs / ls, ys / ls)
    return _matern32_scaled(r, params.scale)


def robust_cholesky(matrix: np.ndarray, params: KernelParams) -> tuple[np.ndarray, float]:
    """ジッターを段階的に増やしながら下三角Cholesky因子を求める

    ジッターは σ·jitter から始めて10倍ずつ、σ·1e-2 まで。

    Returns:
        (下三角因子, 使用したジッター)
    """
    n = len(matrix)
    jitter = params.scale * params.jitter
    ceiling = params.scale * MAX_RELATIVE_JITTER
    while True:
        try:
            factor = linalg.cholesky(matrix + jitter * np.eye(n), lower=True)
            if jitter > params.scale * params.jitter:
                logger.warning("Cholesky needed jitter %.3g (n=%d)", jitter, n)
            return factor, jitter
        except linalg.LinAlgError:
            if jitter * 10 > ceiling * (1 + 1e-12):
                break
            jitter *= 10
    raise NumericalError(
        f"Cholesky failed on {n}x{n} kernel matrix",
        diagnostics={
            "n": n,
            "last_jitter": jitter,
            "min_diagonal": float(np.min(np.diag(matrix))) if n else None,
        },
    )


def sample_prior(
    locations: np.ndarray,
    params: KernelParams,
    mean: float,
    seed: int | np.random.Generator,
    n_draws: int | None = None,
    max_points: int = DENSE_CAP,
) -> np.ndarray:
    """GP事前分布 N(mean, K) からの厳密サンプル

    Returns:
        n_draws が None なら N ベクトル、指定時は n_draws×N 行列
    """
    locations = np.atleast_2d(np.asarray(locations, dtype=np.float64))
    n = len(locations)
    if n > max_points:
        raise ContractViolation(f"{n} points exceed the dense sampling cap {max_points}")
    rng = as_generator(seed, "simulate.fields")
    factor, _ = robust_cholesky(kernel_matrix(locations, locations, params), params)
    size = (n,) if n_draws is None else (n_draws, n)
    z = rng.standard_normal(size)
    return mean + z @ factor.T
