import math
import warnings

import numpy as np
import pytest
import torch
from scipy.stats import multivariate_normal

from gdrf.errors import ContractViolation
from gdrf.models.gp_state import GPState
from gdrf.schemas.params import KernelParams
from gdrf.services.kernel import kernel_matrix
from gdrf.services.rng import generator
from gdrf.services.svgp import (
    elbo,
    evidence_lower_bound,
    fit_step,
    optimal_variational,
    predict_mean,
)


def _param(value):
    return torch.tensor(value, dtype=torch.float64, requires_grad=True)


def _regression_data(n=50, seed=0):
    r = generator(seed, "test")
    x = np.linspace(0.0, 5.0, n).reshape(-1, 1)
    y = np.sin(2 * x[:, 0]) + 0.1 * r.standard_normal(n)
    return x, y


@pytest.mark.parametrize("seed", range(5))
def test_elbo_gradients_match_finite_differences(seed):
    r = generator(seed, "test")
    x = torch.tensor(r.uniform(0.0, 4.0, size=(15, 2)), dtype=torch.float64)
    y = torch.tensor(r.standard_normal(15), dtype=torch.float64)
    inducing = torch.tensor(
        [[a, b] for a in (0.0, 2.0, 4.0) for b in (0.0, 3.0)], dtype=torch.float64
    )
    m = len(inducing)
    params = (
        _param(np.log(r.uniform(0.8, 2.0, size=2))),
        _param(np.log(r.uniform(0.5, 2.0))),
        _param(np.log(0.3)),
        _param(r.standard_normal()),
        _param(0.5 * r.standard_normal(m)),
        _param(np.tril(0.1 * r.standard_normal((m, m))) + np.eye(m)),
    )

    def objective(*p):
        return evidence_lower_bound(x, y, inducing, *p)

    assert torch.autograd.gradcheck(objective, params, eps=1e-5, atol=1e-5, rtol=1e-4)


def test_elbo_without_data_at_prior_is_zero():
    gp = GPState.prior(KernelParams(), np.linspace(0, 1, 5).reshape(-1, 1))
    assert elbo(gp, np.zeros((0, 1)), np.zeros(0)) == pytest.approx(0.0, abs=1e-12)


def test_elbo_single_point_matches_monte_carlo():
    kernel = KernelParams(scale=2.0, noise_variance=0.5)
    gp = GPState.prior(kernel, [[0.0], [1.0]], const_mean=0.3)
    x, y = np.array([[0.4]]), np.array([1.2])
    value = elbo(gp, x, y)

    noise = 0.5
    f = 0.3 + math.sqrt(2.0) * generator(3, "test").standard_normal(1_000_000)
    log_lik = -0.5 * math.log(2 * math.pi * noise) - (1.2 - f) ** 2 / (2 * noise)
    standard_error = log_lik.std() / math.sqrt(len(log_lik))
    assert abs(value - log_lik.mean()) < 3 * standard_error + 1e-9


def test_elbo_bounds_dense_marginal_likelihood():
    x, y = _regression_data(n=40)
    kernel = KernelParams(length_scale=(1.0,), scale=1.5, noise_variance=0.2)
    gp = GPState.prior(kernel, x)
    dense = kernel_matrix(x, x, kernel) + 0.2 * np.eye(len(x))
    exact = multivariate_normal(mean=np.zeros(len(x)), cov=dense).logpdf(y)

    assert elbo(gp, x, y) <= exact + 1e-6
    optimal = optimal_variational(gp, x, y)
    value = elbo(optimal, x, y)
    assert value <= exact + 1e-6
    assert exact - value < 1e-3


def test_zero_learning_rate_returns_same_state():
    x, y = _regression_data(n=10)
    gp = GPState.prior(KernelParams(), x[::2])
    assert fit_step(gp, x, y, 0.0) is gp


def test_negative_learning_rate_rejected():
    x, y = _regression_data(n=10)
    with pytest.raises(ContractViolation):
        fit_step(GPState.prior(KernelParams(), x), x, y, -0.1)


def test_elbo_non_decreasing_under_fit_steps():
    x, y = _regression_data(n=50)
    gp = GPState.prior(KernelParams(length_scale=(1.0,)), np.linspace(0, 5, 10).reshape(-1, 1))
    values = [elbo(gp, x, y)]
    for _ in range(100):
        gp = fit_step(gp, x, y, 0.05)
        values.append(elbo(gp, x, y))
    values = np.array(values)
    tolerance = 1e-8 * np.maximum(1.0, np.abs(values[:-1]))
    assert np.all(np.diff(values) >= -tolerance)
    assert values[-1] > values[0]
    assert gp.optimizer_state is not None
    assert gp.kernel.noise_variance > 0
    assert all(ls > 0 for ls in gp.kernel.length_scale)


def test_minibatch_step_needs_rng():
    x, y = _regression_data(n=30)
    gp = GPState.prior(KernelParams(), x[::3])
    with pytest.raises(ContractViolation):
        fit_step(gp, x, y, 0.1, minibatch_size=10)
    updated = fit_step(gp, x, y, 0.1, minibatch_size=10, rng=generator(0, "fit.svi"))
    assert updated.n_inducing == gp.n_inducing


def test_fit_step_on_read_only_arrays_is_silent():
    x, y = _regression_data(n=20)
    x.setflags(write=False)
    y.setflags(write=False)
    gp = GPState.prior(KernelParams(), x[::4])
    with warnings.catch_warnings():
        warnings.simplefilter("error", UserWarning)
        updated = fit_step(gp, x, y, 0.05)
        elbo(updated, x, y)
        predict_mean(updated, x)
    assert updated is not gp


def test_prior_predicts_const_mean():
    gp = GPState.prior(KernelParams(), np.linspace(0, 1, 4).reshape(-1, 1), const_mean=1.7)
    np.testing.assert_allclose(predict_mean(gp, np.linspace(-2, 3, 9).reshape(-1, 1)), 1.7)


def test_single_point_interpolation_and_reversion():
    kernel = KernelParams(length_scale=(1.0,), scale=1.0, noise_variance=1e-6)
    x, y = np.array([[2.0]]), np.array([3.0])
    gp = optimal_variational(GPState.prior(kernel, x), x, y, noise_floor=1e-9)
    assert predict_mean(gp, x)[0] == pytest.approx(3.0, abs=1e-2)
    assert predict_mean(gp, [[2.0 + 100.0]])[0] == pytest.approx(0.0, abs=1e-3)
