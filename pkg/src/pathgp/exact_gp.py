"""Exact GP regression with a homoscedastic Gaussian likelihood."""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import NonFinite
from .numerics import psd_cholesky

PARAMS = ("variance", "lengthscale", "noise")


@dataclass(frozen=True, eq=False)
class GpModel:
    """Training data plus kernel; the Gram factor is computed lazily.

    ``mean`` is a constant prior mean. Observations are
    ``y = f(x) + eps`` with ``eps ~ N(0, noise_variance I)``.
    """

    kernel: object
    noise_variance: float = 0.0
    train_inputs: np.ndarray = None
    train_targets: np.ndarray = None
    mean: float = 0.0
    fit_trace: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be nonnegative")
        X = self.train_inputs
        if X is None:
            X = np.zeros((0, getattr(self.kernel, "dim", 1)))
        X = self.kernel.check_points(X)
        y = np.zeros(0) if self.train_targets is None else self.train_targets
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.size != X.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs but {y.size} targets")
        object.__setattr__(self, "train_inputs", X)
        object.__setattr__(self, "train_targets", y)

    @property
    def n(self):
        return self.train_targets.size

    @cached_property
    def gram(self):
        K = self.kernel.matrix(self.train_inputs)
        return K + self.noise_variance * np.eye(self.n)

    @cached_property
    def factor(self):
        return psd_cholesky(self.gram)

    @cached_property
    def alpha(self):
        """``(K + noise I)^{-1} (y - mean)``."""
        return self.factor.solve(self.train_targets - self.mean)

    def with_data(self, X, y):
        return replace(self, train_inputs=X, train_targets=y, fit_trace=())

    def with_hyperparameters(self, variance=None, lengthscale=None, noise=None):
        return replace(
            self,
            kernel=self.kernel.with_params(variance=variance, lengthscale=lengthscale),
            noise_variance=self.noise_variance if noise is None else float(noise),
        )


def posterior_moments(model, X_star, full_cov=True):
    """Posterior mean and covariance (or variance if ``full_cov=False``)."""
    Xs = model.kernel.check_points(X_star)
    if full_cov:
        prior_cov = model.kernel.matrix(Xs)
    else:
        prior_cov = model.kernel.diag(Xs)
    if model.n == 0:
        return np.full(Xs.shape[0], model.mean), prior_cov
    Ksx = model.kernel.matrix(Xs, model.train_inputs)
    mean = model.mean + Ksx @ model.alpha
    V = model.factor.solve_lower(Ksx.T)
    if full_cov:
        cov = prior_cov - V.T @ V
        return mean, 0.5 * (cov + cov.T)
    return mean, np.maximum(prior_cov - np.sum(V ** 2, axis=0), 0.0)


def posterior_mean_var(model, X_star):
    return posterior_moments(model, X_star, full_cov=False)


def log_marginal_likelihood(model):
    """Gaussian log evidence ``log N(y | mean, K + noise I)``."""
    if model.n < 1:
        raise ValueError("log marginal likelihood needs at least one observation")
    r = model.train_targets - model.mean
    return float(-0.5 * r @ model.alpha - 0.5 * model.factor.logdet()
                 - 0.5 * model.n * np.log(2.0 * np.pi))


def lml_gradient(model, params=PARAMS):
    """Gradient of the log evidence in log-parameter space.

    Returns a dict keyed by the names in ``params``.
    """
    Kinv = model.factor.solve(np.eye(model.n))
    a = model.alpha
    W = np.outer(a, a) - Kinv
    out = {}
    for name in params:
        if name == "variance":
            dK = model.gram - model.noise_variance * np.eye(model.n)
        elif name == "lengthscale":
            dK = model.kernel.lengthscale_grad(model.train_inputs)
        elif name == "noise":
            out[name] = 0.5 * model.noise_variance * np.trace(W)
            continue
        else:
            raise ValueError(f"unknown hyperparameter {name!r}")
        out[name] = 0.5 * np.sum(W * dK)
    return out


@dataclass(frozen=True)
class FitConfig:
    max_iters: int = 100
    learning_rate: float = 0.1
    params: tuple = PARAMS
    max_halvings: int = 30
    tol: float = 1e-9
    # bounds on log-parameters
    log_bounds: dict = field(default_factory=lambda: {
        "variance": (np.log(1e-4), np.log(1e4)),
        "lengthscale": (np.log(1e-3), np.log(1e3)),
        "noise": (np.log(1e-8), np.log(1e2)),
    })


def _get_log_params(model, params):
    values = {"variance": model.kernel.variance,
              "lengthscale": model.kernel.lengthscale,
              "noise": model.noise_variance}
    return np.log(np.array([values[p] for p in params]))


def _set_log_params(model, params, theta):
    kw = dict(zip(params, np.exp(theta)))
    return model.with_hyperparameters(**kw)


def fit_hyperparameters(model, config=None):
    """Gradient ascent on the log evidence with step halving.

    A step is accepted only if it does not decrease the log evidence, so the
    recorded trace is non-decreasing. Parameters are optimized in log space.

    Raises
    ------
    NonFinite
        If the log evidence or its gradient is not finite at an accepted point.
    """
    config = config or FitConfig()
    if config.max_iters <= 0:
        return model
    if model.n < 2:
        raise ValueError("fitting needs at least two observations")
    params = tuple(config.params)
    lo = np.array([config.log_bounds[p][0] for p in params])
    hi = np.array([config.log_bounds[p][1] for p in params])
    theta = _get_log_params(model, params)
    current = model
    lml = log_marginal_likelihood(current)
    trace = [lml]
    for _ in range(config.max_iters):
        grad_d = lml_gradient(current, params)
        grad = np.array([grad_d[p] for p in params])
        if not (np.isfinite(lml) and np.all(np.isfinite(grad))):
            raise NonFinite(f"log evidence {lml} or gradient {grad} not finite")
        step = config.learning_rate
        accepted = False
        for _ in range(config.max_halvings):
            trial_theta = np.clip(theta + step * grad, lo, hi)
            if np.allclose(trial_theta, theta, rtol=0, atol=1e-12):
                break
            try:
                trial = _set_log_params(current, params, trial_theta)
                trial_lml = log_marginal_likelihood(trial)
            except (np.linalg.LinAlgError, ValueError, FloatingPointError):
                trial_lml = -np.inf
            if np.isfinite(trial_lml) and trial_lml >= lml:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        improvement = trial_lml - lml
        theta, current, lml = trial_theta, trial, trial_lml
        trace.append(lml)
        if improvement < config.tol:
            break
    return replace(current, fit_trace=tuple(trace))
