import numpy as np
import pytest
from hypothesis import given, strategies as st

from pathgp.errors import NotPsd
from pathgp.exact_gp import (FitConfig, GpModel, fit_hyperparameters, lml_gradient,
                             log_marginal_likelihood, posterior_mean_var, posterior_moments)
from pathgp.kernels import StationaryKernelSpec
from pathgp.manifold import ManifoldKernel, sample_sphere
from pathgp.numerics import RandomSource
from pathgp.pathwise import sample_exact_prior


def random_model(seed, n=8, d=2, fam="matern52"):
    g = np.random.default_rng(seed)
    spec = StationaryKernelSpec(fam, g.uniform(0.5, 2), g.uniform(0.2, 1.0), d)
    X = g.uniform(0, 1, (n, d))
    return GpModel(spec, g.uniform(1e-3, 0.1), X, g.standard_normal(n))


def test_prior_case():
    spec = StationaryKernelSpec("matern32", 2.0, 0.5, 1)
    model = GpModel(spec)
    Xs = np.linspace(0, 1, 4)[:, None]
    mean, cov = posterior_moments(model, Xs)
    np.testing.assert_array_equal(mean, 0.0)
    np.testing.assert_allclose(cov, spec.matrix(Xs))


def test_interpolation_identity(rs):
    spec = StationaryKernelSpec("matern52", 1.0, 0.3, 1)
    X = np.linspace(0, 1, 7)[:, None]
    y = rs.standard_normal(7)
    model = GpModel(spec, 1e-12, X, y)
    mean, var = posterior_mean_var(model, X)
    assert np.max(np.abs(mean - y)) <= 1e-4
    assert np.all(var <= 1e-6)


def test_single_point_hand_values():
    spec = StationaryKernelSpec("matern12", 1.0, 1.0, 1)
    model = GpModel(spec, 0.0, [[0.0]], [1.0])
    mean, cov = posterior_moments(model, [[1.0]])
    assert np.isclose(mean[0], np.exp(-1))
    assert np.isclose(cov[0, 0], 1 - np.exp(-2))


def test_posterior_cov_psd(rs):
    model = random_model(3, n=15)
    _, cov = posterior_moments(model, rs.uniform(0, 1, (30, 2)))
    assert np.array_equal(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() >= -1e-8


def test_cache_reconstructs_gram():
    model = random_model(4)
    K = model.kernel.matrix(model.train_inputs) + model.noise_variance * np.eye(model.n)
    assert np.linalg.norm(model.factor.reconstruct() - K) <= 1e-8 * np.linalg.norm(K)


def test_lml_scalar_values():
    spec = StationaryKernelSpec("se", 1.0, 1.0, 1)
    assert np.isclose(log_marginal_likelihood(GpModel(spec, 0.0, [[0.0]], [0.0])),
                      -0.5 * np.log(2 * np.pi))
    assert np.isclose(log_marginal_likelihood(GpModel(spec, 0.0, [[0.0]], [1.0])),
                      -0.5 - 0.5 * np.log(2 * np.pi))
    with pytest.raises(ValueError):
        log_marginal_likelihood(GpModel(spec))


def test_lml_is_largest_at_zero_targets():
    model = random_model(5)
    zero = model.with_data(model.train_inputs, np.zeros(model.n))
    assert log_marginal_likelihood(zero) >= log_marginal_likelihood(model)


def test_lml_matches_scipy_density():
    from scipy.stats import multivariate_normal

    model = random_model(6)
    K = model.kernel.matrix(model.train_inputs) + model.noise_variance * np.eye(model.n)
    ref = multivariate_normal(np.zeros(model.n), K).logpdf(model.train_targets)
    assert np.isclose(log_marginal_likelihood(model), ref, rtol=1e-10)


def fd_gradient(model, name, h=1e-5):
    def at(t):
        kw = {"variance": None, "lengthscale": None, "noise": None}
        current = {"variance": model.kernel.variance, "lengthscale": model.kernel.lengthscale,
                   "noise": model.noise_variance}[name]
        kw[name] = current * np.exp(t)
        return log_marginal_likelihood(model.with_hyperparameters(**kw))

    return (at(h) - at(-h)) / (2 * h)


@given(st.integers(0, 10_000), st.sampled_from(["matern12", "matern32", "matern52", "se"]))
def test_gradient_matches_central_differences(seed, fam):
    model = random_model(seed, n=6, fam=fam)
    g = lml_gradient(model)
    for name in ("variance", "lengthscale", "noise"):
        fd = fd_gradient(model, name)
        assert abs(g[name] - fd) <= 1e-4 * max(1.0, abs(fd))


def test_manifold_kernel_gradient():
    rs = RandomSource(2)
    X = sample_sphere(8, rs)
    k = ManifoldKernel("sphere2", "matern", nu=1.5, lengthscale=0.6, variance=1.3)
    model = GpModel(k, 0.01, X, rs.standard_normal(8))
    g = lml_gradient(model)
    for name in ("variance", "lengthscale", "noise"):
        fd = fd_gradient(model, name)
        assert abs(g[name] - fd) <= 1e-4 * max(1.0, abs(fd))


def test_fit_zero_iterations_returns_input():
    model = random_model(7)
    assert fit_hyperparameters(model, FitConfig(max_iters=0)) is model


def test_fit_trace_non_decreasing():
    model = random_model(8, n=20)
    fitted = fit_hyperparameters(model, FitConfig(max_iters=40))
    trace = np.array(fitted.fit_trace)
    assert np.all(np.diff(trace) >= 0)
    assert log_marginal_likelihood(fitted) >= log_marginal_likelihood(model) - 1e-9
    assert np.isclose(trace[-1], log_marginal_likelihood(fitted))


def test_fit_needs_two_points():
    spec = StationaryKernelSpec()
    with pytest.raises(ValueError):
        fit_hyperparameters(GpModel(spec, 0.1, [[0.0]], [1.0]))


def test_lengthscale_recovery():
    errs = []
    for seed in range(10):
        rs = RandomSource(seed)
        truth = StationaryKernelSpec("matern52", 1.0, 0.2, 1)
        X = rs.uniform(0, 1, (200, 1))
        f = sample_exact_prior(truth, np.zeros((0, 1)), X, rs)(X)
        y = f + np.sqrt(1e-3) * rs.standard_normal(200)
        start = GpModel(truth.with_params(lengthscale=0.6), 1e-2, X, y)
        fitted = fit_hyperparameters(start, FitConfig(max_iters=100))
        errs.append(abs(np.log(fitted.kernel.lengthscale) - np.log(0.2)))
    assert np.median(errs) <= 0.5


def test_not_psd_propagates():
    class Broken:
        dim = 1
        variance = 1.0
        lengthscale = 1.0

        def check_points(self, X):
            return np.asarray(X, dtype=float).reshape(-1, 1)

        def matrix(self, X, X2=None):
            return -np.eye(len(X))

    with pytest.raises(NotPsd):
        GpModel(Broken(), 0.0, [[0.0], [1.0]], [0.0, 1.0]).factor
