"""Inducing-point posteriors as sparsified pathwise updates.

The data ``(x, y, noise)`` are replaced by pseudo-data ``(z, mu, Lambda)``
with ``m`` points and a learned diagonal noise ``Lambda``. Samples take the
form ``f(.) + K_{.z} (K_zz + Lambda)^{-1} (mu - f(z) - eps)`` with
``eps ~ N(0, Lambda)``.
"""

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .errors import NonFinite
from .numerics import psd_cholesky
from .pathwise import PathwisePosterior

LAMBDA_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class InducingModel:
    kernel: object
    inducing_inputs: np.ndarray
    pseudo_targets: np.ndarray
    inducing_noise: np.ndarray
    train_inputs: np.ndarray
    train_targets: np.ndarray
    noise_variance: float
    mean: float = 0.0
    fit_trace: tuple = field(default=(), compare=False)

    def __post_init__(self):
        z = self.kernel.check_points(self.inducing_inputs)
        mu = np.asarray(self.pseudo_targets, dtype=float).reshape(-1)
        lam = np.broadcast_to(np.asarray(self.inducing_noise, dtype=float), mu.shape).copy()
        if z.shape[0] < 1 or mu.size != z.shape[0]:
            raise ValueError("need m >= 1 inducing points with one pseudo-target each")
        if np.any(lam < LAMBDA_FLOOR):
            raise ValueError(f"inducing noise entries must be >= {LAMBDA_FLOOR}")
        object.__setattr__(self, "inducing_inputs", z)
        object.__setattr__(self, "pseudo_targets", mu)
        object.__setattr__(self, "inducing_noise", lam)
        object.__setattr__(self, "train_inputs", self.kernel.check_points(self.train_inputs))
        object.__setattr__(self, "train_targets",
                           np.asarray(self.train_targets, dtype=float).reshape(-1))

    @property
    def m(self):
        return self.pseudo_targets.size

    @cached_property
    def Kzz(self):
        return self.kernel.matrix(self.inducing_inputs)

    @cached_property
    def factor(self):
        return psd_cholesky(self.Kzz + np.diag(self.inducing_noise))

    @classmethod
    def from_gp(cls, model, m=None, rs=None):
        """Initialize from a GP model by uniform subsampling of its inputs.

        ``Lambda`` starts at ``noise * n / m`` (a heuristic).
        """
        n = model.n
        m = n if m is None else int(m)
        if not 1 <= m <= n:
            raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
        if m == n:
            idx = np.arange(n)
        else:
            idx = np.sort(rs.generator.choice(n, size=m, replace=False))
        lam = max(model.noise_variance * n / m, LAMBDA_FLOOR)
        return cls(model.kernel, model.train_inputs[idx], model.train_targets[idx],
                   np.full(m, lam), model.train_inputs, model.train_targets,
                   model.noise_variance, model.mean)

    @classmethod
    def consistent(cls, model):
        """The point ``z = x, mu = y, Lambda = noise`` that reproduces the exact GP."""
        lam = np.full(model.n, max(model.noise_variance, LAMBDA_FLOOR))
        return cls(model.kernel, model.train_inputs, model.train_targets, lam,
                   model.train_inputs, model.train_targets, model.noise_variance,
                   model.mean)


def sparse_posterior_moments(im, X_star, full_cov=True):
    """Mean and covariance of the sparsified posterior.

    ``mean = K_{*z} A^{-1} mu`` and ``cov = K_{**} - K_{*z} A^{-1} K_{z*}``
    with ``A = K_zz + Lambda`` (plus the constant prior mean).
    """
    Xs = im.kernel.check_points(X_star)
    Ksz = im.kernel.matrix(Xs, im.inducing_inputs)
    mean = im.mean + Ksz @ im.factor.solve(im.pseudo_targets - im.mean)
    V = im.factor.solve_lower(Ksz.T)
    if not full_cov:
        return mean, np.maximum(im.kernel.diag(Xs) - np.sum(V ** 2, axis=0), 0.0)
    cov = im.kernel.matrix(Xs) - V.T @ V
    return mean, 0.5 * (cov + cov.T)


def sparse_pathwise_sample(im, prior_path, rs, noise_draw=None):
    """Pathwise sample with ``(z, mu, Lambda)`` in place of the data."""
    z = im.inducing_inputs
    f_z = np.asarray(prior_path(z), dtype=float)
    if noise_draw is None:
        lam = im.inducing_noise.reshape((-1,) + (1,) * (f_z.ndim - 1))
        noise_draw = np.sqrt(lam) * rs.standard_normal(f_z.shape)
    mu = im.pseudo_targets.reshape((-1,) + (1,) * (f_z.ndim - 1))
    v = im.factor.solve(mu - im.mean - f_z - noise_draw)
    return PathwisePosterior(prior_path, v, z, im.kernel, im.mean, noise_draw)


class _Terms:
    """Shared intermediate quantities for the objective and its gradient."""

    def __init__(self, im):
        if im.noise_variance <= 0:
            raise ValueError("the variational objective needs a positive noise variance")
        K = im.Kzz
        lam = im.inducing_noise
        s2 = im.noise_variance
        Kxz = im.kernel.matrix(im.train_inputs, im.inducing_inputs)
        r = im.train_targets - im.mean
        B = im.factor.solve(np.eye(im.m))
        self.K, self.lam, self.B, self.s2 = K, lam, 0.5 * (B + B.T), s2
        self.G = Kxz.T @ Kxz / s2
        self.c = Kxz.T @ r / s2
        self.beta = B @ (im.pseudo_targets - im.mean)
        self.rr = r @ r / s2
        self.trace_kxx = np.sum(im.kernel.diag(im.train_inputs)) / s2
        self.logdet_A = im.factor.logdet()


def kl_term(im):
    """KL between the approximate and prior marginals at the inducing inputs."""
    t = _Terms(im)
    return float(0.5 * (np.sum(np.diag(t.B) * t.lam) - im.m + t.beta @ t.K @ t.beta
                        + t.logdet_A - np.sum(np.log(t.lam))))


def variational_objective(im):
    """``KL(q_z || p_z) + 1/2 E_q[(y - f(x))^T Sigma^{-1} (y - f(x))]``.

    Normalizing constants of the likelihood are dropped.
    """
    t = _Terms(im)
    kl = 0.5 * (np.sum(np.diag(t.B) * t.lam) - im.m + t.beta @ t.K @ t.beta
                + t.logdet_A - np.sum(np.log(t.lam)))
    fit = 0.5 * (t.rr - 2.0 * t.c @ t.beta + t.beta @ t.G @ t.beta
                 + t.trace_kxx - np.sum(t.G * t.B))
    return float(kl + fit)


def variational_gradient(im):
    """Gradient of the objective in ``(mu, log Lambda)``."""
    t = _Terms(im)
    B, lam, beta = t.B, t.lam, t.beta
    KG = t.K + t.G
    g_mu = B @ (KG @ beta - t.c)
    d_lam = (np.diag(B) - np.einsum("ij,j,ji->i", B, lam, B)
             + np.diag(B) - 1.0 / lam
             - 2.0 * (B @ KG @ beta) * beta
             + 2.0 * (B @ t.c) * beta
             + np.einsum("ij,jk,ki->i", B, t.G, B))
    return g_mu, 0.5 * d_lam * lam


def optimal_pseudo_targets(im):
    """Exact minimizer over ``mu`` with ``z`` and ``Lambda`` held fixed."""
    t = _Terms(im)
    beta = np.linalg.solve(t.K + t.G, t.c)
    return im.mean + (im.Kzz + np.diag(im.inducing_noise)) @ beta


@dataclass(frozen=True)
class SparseFitConfig:
    max_iters: int = 200
    learning_rate: float = 0.1
    max_halvings: int = 30
    tol: float = 1e-10


def fit_inducing(im, config=None):
    """Minimize the variational objective over ``mu`` and ``log Lambda``.

    Block coordinate descent: ``mu`` jumps to its exact conditional minimizer
    (the objective is quadratic in ``mu``), then ``log Lambda`` takes a
    gradient step whose length adapts by doubling after success and halving
    until the objective does not increase. Inducing inputs stay fixed.
    """
    config = config or SparseFitConfig()
    if config.max_iters <= 0:
        return im
    if im.m > im.train_targets.size:
        raise ValueError("more inducing points than data")
    current = im
    obj = variational_objective(current)
    trace = [obj]
    step = config.learning_rate
    for _ in range(config.max_iters):
        start_obj = obj
        trial = replace(current, pseudo_targets=optimal_pseudo_targets(current), fit_trace=())
        trial_obj = variational_objective(trial)
        if np.isfinite(trial_obj) and trial_obj <= obj:
            current, obj = trial, trial_obj
        _, g_loglam = variational_gradient(current)
        if not (np.isfinite(obj) and np.all(np.isfinite(g_loglam))):
            raise NonFinite("variational objective or gradient is not finite")
        log_lam = np.log(current.inducing_noise)
        for _ in range(config.max_halvings):
            new_lam = np.maximum(np.exp(log_lam - step * g_loglam), LAMBDA_FLOOR)
            try:
                trial = replace(current, inducing_noise=new_lam, fit_trace=())
                trial_obj = variational_objective(trial)
            except (np.linalg.LinAlgError, ValueError, FloatingPointError):
                trial_obj = np.inf
            if np.isfinite(trial_obj) and trial_obj <= obj:
                current, obj = trial, trial_obj
                step *= 2.0
                break
            step *= 0.5
        trace.append(obj)
        if start_obj - obj < config.tol * max(1.0, abs(obj)):
            break
    return replace(current, fit_trace=tuple(trace))
