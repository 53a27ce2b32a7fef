"""トピックごとの疎変分GP回帰（torch float64）

白色化した誘導点表現:
    u = c·1 + L_K v,  q(v) = N(m, L Lᵀ),  p(v) = N(0, I)

ELBO = Σ_i E_q[log N(y_i | f(x_i), noise)] − KL(q(v) ‖ p(v))

カーネルのハイパーパラメータは対数領域で最適化する。
ノイズ分散は exp(raw) + noise_floor で下限を保証する。
"""

import copy
import logging
import math

import numpy as np
import torch
from torch import nn

from gdrf.errors import ContractViolation, NumericalError
from gdrf.models.gp_state import GPState
from gdrf.schemas.params import KernelParams
from gdrf.services.kernel import MAX_RELATIVE_JITTER

logger = logging.getLogger(__name__)

DTYPE = torch.float64
SQRT3 = math.sqrt(3.0)
LOG_2PI = math.log(2.0 * math.pi)
PREDICT_CHUNK = 4096


def _as_tensor(values) -> torch.Tensor:
    # 読み取り専用の配列を共有しないよう複製する
    return torch.as_tensor(np.array(values, dtype=np.float64), dtype=DTYPE)


def matern32_matrix(
    xs: torch.Tensor, ys: torch.Tensor, log_length_scale: torch.Tensor, log_scale: torch.Tensor
) -> torch.Tensor:
    ls = torch.exp(log_length_scale)
    diff = xs[:, None, :] / ls - ys[None, :, :] / ls
    # r=0 で sqrt の勾配が発散しないよう下限を置く
    r = torch.sqrt(torch.clamp((diff**2).sum(-1), min=1e-36))
    sr = SQRT3 * r
    return torch.exp(log_scale) * (1.0 + sr) * torch.exp(-sr)


def cholesky_with_jitter(matrix: torch.Tensor, scale: torch.Tensor, jitter: float) -> torch.Tensor:
    """kernel.robust_cholesky と同じジッター段階で下三角因子を求める"""
    n = matrix.shape[-1]
    eye = torch.eye(n, dtype=DTYPE)
    relative = jitter
    while True:
        factor, info = torch.linalg.cholesky_ex(matrix + relative * scale * eye)
        if int(info) == 0:
            if relative > jitter:
                logger.warning("Cholesky needed relative jitter %.3g (M=%d)", relative, n)
            return factor
        if relative * 10 > MAX_RELATIVE_JITTER * (1 + 1e-12):
            raise NumericalError(
                f"Cholesky failed on {n}x{n} inducing kernel matrix",
                diagnostics={"n": n, "last_jitter": relative * float(scale)},
            )
        relative *= 10


def evidence_lower_bound(
    x: torch.Tensor,
    y: torch.Tensor,
    inducing: torch.Tensor,
    log_length_scale: torch.Tensor,
    log_scale: torch.Tensor,
    raw_noise: torch.Tensor,
    const_mean: torch.Tensor,
    q_mean: torch.Tensor,
    q_sqrt: torch.Tensor,
    *,
    jitter: float = 1e-8,
    noise_floor: float = 1e-6,
    data_scale: float = 1.0,
) -> torch.Tensor:
    """ELBOの純関数版（全引数が微分可能なテンソル）

    data_scale はミニバッチ時の N/B 補正。
    """
    n_inducing = inducing.shape[0]
    scale = torch.exp(log_scale)
    noise = torch.exp(raw_noise) + noise_floor
    lower = torch.tril(q_sqrt)

    kuu = matern32_matrix(inducing, inducing, log_length_scale, log_scale)
    chol_kuu = cholesky_with_jitter(kuu, scale, jitter)

    expected = torch.zeros((), dtype=DTYPE)
    if x.shape[0] > 0:
        kuf = matern32_matrix(inducing, x, log_length_scale, log_scale)
        a = torch.linalg.solve_triangular(chol_kuu, kuf, upper=False)  # M×N
        mean = const_mean + a.T @ q_mean
        var = scale - (a**2).sum(0) + ((lower.T @ a) ** 2).sum(0)
        expected = torch.sum(
            -0.5 * LOG_2PI - 0.5 * torch.log(noise) - ((y - mean) ** 2 + var) / (2.0 * noise)
        )

    kl = 0.5 * (
        (lower**2).sum()
        + (q_mean**2).sum()
        - n_inducing
        - 2.0 * torch.log(torch.abs(torch.diagonal(lower))).sum()
    )
    return data_scale * expected - kl


class VariationalGP(nn.Module):
    """GPState を学習可能なパラメータとして保持するモジュール"""

    def __init__(self, state: GPState, noise_floor: float = 1e-6):
        super().__init__()
        kernel = state.kernel
        self.jitter = kernel.jitter
        self.noise_floor = noise_floor
        self.register_buffer("inducing", _as_tensor(state.inducing_locations))
        ls = kernel.length_scales_for(state.dim)
        self.log_length_scale = nn.Parameter(torch.log(_as_tensor(ls)))
        self.log_scale = nn.Parameter(torch.tensor(math.log(kernel.scale), dtype=DTYPE))
        excess = max(kernel.noise_variance - noise_floor, noise_floor * 1e-3)
        self.raw_noise = nn.Parameter(torch.tensor(math.log(excess), dtype=DTYPE))
        self.const_mean = nn.Parameter(torch.tensor(state.const_mean, dtype=DTYPE))
        self.q_mean = nn.Parameter(_as_tensor(state.variational_mean))
        self.q_sqrt = nn.Parameter(_as_tensor(state.variational_cov_factor))

    @property
    def noise(self) -> torch.Tensor:
        return torch.exp(self.raw_noise) + self.noise_floor

    def forward(self, x: torch.Tensor, y: torch.Tensor, data_scale: float = 1.0) -> torch.Tensor:
        return evidence_lower_bound(
            x,
            y,
            self.inducing,
            self.log_length_scale,
            self.log_scale,
            self.raw_noise,
            self.const_mean,
            self.q_mean,
            self.q_sqrt,
            jitter=self.jitter,
            noise_floor=self.noise_floor,
            data_scale=data_scale,
        )

    def to_state(self, optimizer_state: dict | None = None) -> GPState:
        with torch.no_grad():
            kernel = KernelParams(
                length_scale=tuple(float(v) for v in torch.exp(self.log_length_scale)),
                scale=float(torch.exp(self.log_scale)),
                noise_variance=float(self.noise),
                jitter=self.jitter,
            )
            return GPState(
                kernel=kernel,
                const_mean=float(self.const_mean),
                inducing_locations=self.inducing.numpy().copy(),
                variational_mean=self.q_mean.numpy().copy(),
                variational_cov_factor=torch.tril(self.q_sqrt).numpy().copy(),
                optimizer_state=optimizer_state,
            )


def _training_tensors(gp: GPState, x, y) -> tuple[torch.Tensor, torch.Tensor]:
    x_t = _as_tensor(x).reshape(-1, gp.dim)
    y_t = _as_tensor(y).reshape(-1)
    if x_t.shape[0] != y_t.shape[0]:
        raise ContractViolation(f"{x_t.shape[0]} inputs but {y_t.shape[0]} targets")
    return x_t, y_t


def elbo(gp: GPState, train_x, train_y, noise_floor: float = 1e-6) -> float:
    x_t, y_t = _training_tensors(gp, train_x, train_y)
    module = VariationalGP(gp, noise_floor)
    with torch.no_grad():
        value = float(module(x_t, y_t))
    if not math.isfinite(value):
        raise NumericalError("ELBO is not finite", diagnostics={"n_train": len(y_t)})
    return value


def fit_step(
    gp: GPState,
    train_x,
    train_y,
    learning_rate: float,
    *,
    max_backoff: int = 5,
    noise_floor: float = 1e-6,
    minibatch_size: int | None = None,
    rng: np.random.Generator | None = None,
) -> GPState:
    """ELBOに対するAdam 1ステップ

    ELBOが悪化する場合は学習率を半減して最大 max_backoff 回やり直す。
    それでも改善しない場合や勾配が非有限の場合はステップを棄却し、
    入力の gp をそのまま返す（呼び出し側は `is` で棄却を判定できる）。
    """
    if learning_rate < 0:
        raise ContractViolation(f"learning_rate must be >= 0, got {learning_rate}")
    if learning_rate == 0:
        return gp

    x_t, y_t = _training_tensors(gp, train_x, train_y)
    data_scale = 1.0
    n = len(y_t)
    if minibatch_size is not None and minibatch_size < n:
        if rng is None:
            raise ContractViolation("minibatching needs an rng")
        idx = torch.as_tensor(np.sort(rng.choice(n, size=minibatch_size, replace=False)))
        x_t, y_t = x_t[idx], y_t[idx]
        data_scale = n / minibatch_size

    module = VariationalGP(gp, noise_floor)
    optimizer = torch.optim.Adam(module.parameters(), lr=learning_rate)
    if gp.optimizer_state is not None:
        optimizer.load_state_dict(copy.deepcopy(gp.optimizer_state))
    for group in optimizer.param_groups:
        group["lr"] = learning_rate

    optimizer.zero_grad()
    before = module(x_t, y_t, data_scale)
    (-before).backward()
    before = before.item()
    grads = [p.grad for p in module.parameters() if p.grad is not None]
    if not math.isfinite(before) or not all(torch.isfinite(g).all() for g in grads):
        logger.warning("non-finite ELBO or gradient, step rejected (elbo=%s)", before)
        return gp

    saved_params = [p.detach().clone() for p in module.parameters()]
    saved_optimizer = copy.deepcopy(optimizer.state_dict())
    tolerance = 1e-12 * max(1.0, abs(before))
    lr = learning_rate
    for attempt in range(max_backoff + 1):
        optimizer.step()
        try:
            with torch.no_grad():
                after = float(module(x_t, y_t, data_scale))
        except NumericalError:
            after = -math.inf
        if math.isfinite(after) and after >= before - tolerance:
            return module.to_state(copy.deepcopy(optimizer.state_dict()))
        # 元に戻して学習率を半減（勾配はそのまま再利用）
        with torch.no_grad():
            for p, saved in zip(module.parameters(), saved_params):
                p.copy_(saved)
        optimizer.load_state_dict(copy.deepcopy(saved_optimizer))
        lr /= 2
        for group in optimizer.param_groups:
            group["lr"] = lr

    logger.debug("step rejected after %d backoffs (elbo=%.6g)", max_backoff, before)
    return gp


def predict_mean(gp: GPState, query) -> np.ndarray:
    """事後平均 μ̂(x) = c + K_xz L_K⁻ᵀ m"""
    query_t = _as_tensor(query).reshape(-1, gp.dim)
    module = VariationalGP(gp)
    with torch.no_grad():
        scale = torch.exp(module.log_scale)
        kuu = matern32_matrix(module.inducing, module.inducing, module.log_length_scale, module.log_scale)
        chol = cholesky_with_jitter(kuu, scale, module.jitter)
        weights = torch.linalg.solve_triangular(
            chol.T, module.q_mean.reshape(-1, 1), upper=True
        ).reshape(-1)
        out = []
        for start in range(0, query_t.shape[0], PREDICT_CHUNK):
            chunk = query_t[start : start + PREDICT_CHUNK]
            kxz = matern32_matrix(chunk, module.inducing, module.log_length_scale, module.log_scale)
            out.append(module.const_mean + kxz @ weights)
    if not out:
        return np.zeros(0)
    return torch.cat(out).numpy()


def optimal_variational(gp: GPState, train_x, train_y, noise_floor: float = 1e-6) -> GPState:
    """ハイパーパラメータ固定での最適な q(v)

    S = (I + A Aᵀ / noise)⁻¹,  m = S A (y − c) / noise,  A = L_K⁻¹ K_zx
    """
    x_t, y_t = _training_tensors(gp, train_x, train_y)
    module = VariationalGP(gp, noise_floor)
    with torch.no_grad():
        scale = torch.exp(module.log_scale)
        noise = module.noise
        kuu = matern32_matrix(module.inducing, module.inducing, module.log_length_scale, module.log_scale)
        chol = cholesky_with_jitter(kuu, scale, module.jitter)
        kuf = matern32_matrix(module.inducing, x_t, module.log_length_scale, module.log_scale)
        a = torch.linalg.solve_triangular(chol, kuf, upper=False)
        precision = torch.eye(gp.n_inducing, dtype=DTYPE) + a @ a.T / noise
        chol_precision = torch.linalg.cholesky(precision)
        covariance = torch.cholesky_inverse(chol_precision)
        rhs = (a @ (y_t - module.const_mean) / noise).reshape(-1, 1)
        mean = torch.cholesky_solve(rhs, chol_precision).reshape(-1)
        cov_factor = torch.linalg.cholesky(covariance)
    return GPState(
        kernel=gp.kernel,
        const_mean=gp.const_mean,
        inducing_locations=gp.inducing_locations,
        variational_mean=mean.numpy().copy(),
        variational_cov_factor=cov_factor.numpy().copy(),
        optimizer_state=None,
    )
