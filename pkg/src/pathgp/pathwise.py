"""Pathwise conditioning: Matheron's update and decoupled posterior samples.

A posterior sample is built as ``prior path + sum_j v_j k(x_j, .)`` where the
coefficients ``v`` solve one linear system against the data residual. Once
built, a :class:`PathwisePosterior` is a deterministic function that can be
evaluated anywhere its prior path can.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotPsd
from .exact_gp import posterior_moments
from .numerics import psd_cholesky
from .spectral import BasisPriorSample, FourierFeatureMap

PSD_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class JointGaussian:
    """Joint Gaussian over ``(theta, y)`` given by mean and covariance blocks."""

    mean_theta: np.ndarray
    mean_y: np.ndarray
    cov_tt: np.ndarray
    cov_ty: np.ndarray
    cov_yy: np.ndarray

    def __post_init__(self):
        mt = np.atleast_1d(np.asarray(self.mean_theta, dtype=float))
        my = np.atleast_1d(np.asarray(self.mean_y, dtype=float))
        ctt = np.atleast_2d(np.asarray(self.cov_tt, dtype=float))
        cty = np.asarray(self.cov_ty, dtype=float).reshape(mt.size, my.size)
        cyy = np.atleast_2d(np.asarray(self.cov_yy, dtype=float))
        if ctt.shape != (mt.size, mt.size) or cyy.shape != (my.size, my.size):
            raise DimensionMismatch("covariance blocks do not match means")
        for name, val in zip(("mean_theta", "mean_y", "cov_tt", "cov_ty", "cov_yy"),
                             (mt, my, ctt, cty, cyy)):
            object.__setattr__(self, name, val)
        if np.linalg.eigvalsh(self.cov)[0] < -PSD_TOL:
            raise NotPsd("joint covariance is not positive semi-definite")
        if np.linalg.eigvalsh(cyy)[0] <= 1e-12:
            raise NotPsd("observation covariance block is singular")

    @classmethod
    def from_joint(cls, mean, cov, n_theta):
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(cov, dtype=float)
        t = slice(0, n_theta)
        y = slice(n_theta, None)
        return cls(mean[t], mean[y], cov[t, t], cov[t, y], cov[y, y])

    @property
    def mean(self):
        return np.concatenate([self.mean_theta, self.mean_y])

    @property
    def cov(self):
        return np.block([[self.cov_tt, self.cov_ty], [self.cov_ty.T, self.cov_yy]])

    def sample(self, rs, num_samples):
        """Joint draws, returned as ``(theta, y)`` arrays with samples in rows."""
        L = psd_cholesky(self.cov).L
        z = rs.standard_normal((num_samples, self.mean.size))
        draws = self.mean + z @ L.T
        k = self.mean_theta.size
        return draws[:, :k], draws[:, k:]


def _gain(j):
    """``Sigma_ty Sigma_yy^{-1}``, shape ``(n_theta, n_y)``."""
    return psd_cholesky(j.cov_yy).solve(j.cov_ty.T).T


def condition_mvn_distributional(j, gamma):
    """Conditional mean and covariance of ``theta`` given ``y = gamma``."""
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    G = _gain(j)
    mean = j.mean_theta + G @ (gamma - j.mean_y)
    cov = j.cov_tt - G @ j.cov_ty.T
    return mean, 0.5 * (cov + cov.T)


def condition_mvn_pathwise(j, theta_sample, y_sample, gamma):
    """Matheron's update ``theta + Sigma_ty Sigma_yy^{-1} (gamma - y)``.

    Samples may be single vectors or stacked in rows.
    """
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    theta_sample = np.asarray(theta_sample, dtype=float)
    y_sample = np.asarray(y_sample, dtype=float)
    G = _gain(j)
    return theta_sample + (gamma - y_sample) @ G.T


class ExactPriorPath:
    """A joint prior draw stored at a fixed, finite set of points.

    Only the stored points can be evaluated; this is the unbiased reference
    prior used by tests and diagnostics.
    """

    def __init__(self, points, values):
        self.points = np.asarray(points, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self._index = {p.tobytes(): i for i, p in enumerate(self.points)}

    @classmethod
    def sample(cls, kernel, points, rs, num_samples=None):
        points = kernel.check_points(points)
        points = np.unique(points, axis=0)
        L = psd_cholesky(kernel.matrix(points)).L
        shape = points.shape[0] if num_samples is None else (points.shape[0], num_samples)
        return cls(points, L @ rs.standard_normal(shape))

    @property
    def num_paths(self):
        return 1 if self.values.ndim == 1 else self.values.shape[1]

    def __call__(self, X):
        X = np.asarray(X, dtype=float).reshape(-1, self.points.shape[1])
        try:
            idx = [self._index[np.ascontiguousarray(x).tobytes()] for x in X]
        except KeyError:
            raise DimensionMismatch(
                "exact prior path evaluated off its sampling grid") from None
        return self.values[idx]


def sample_exact_prior(kernel, train_inputs, grid, rs, num_samples=None):
    """Joint prior draw over ``train_inputs`` and ``grid``."""
    X = kernel.check_points(train_inputs)
    G = kernel.check_points(grid)
    return ExactPriorPath.sample(kernel, np.vstack([X, G]), rs, num_samples)


@dataclass(frozen=True, eq=False)
class PathwisePosterior:
    """``x -> mean + prior(x) + k(x, inputs) @ coefficients``.

    ``coefficients`` has shape ``(n,)`` for a single path or ``(n, S)`` for
    ``S`` paths sharing the same inputs.
    """

    prior_path: object = field(repr=False)
    coefficients: np.ndarray
    inputs: np.ndarray
    kernel: object
    mean: float = 0.0
    noise_draw: np.ndarray = field(default=None, repr=False)

    def __call__(self, X):
        return evaluate_path(self, X)


def pathwise_condition(model, prior_path, rs, noise_draw=None):
    """Condition a prior path on the model's data by Matheron's update.

    Draws ``eps ~ N(0, noise I)`` (zero when the noise variance is zero) and
    solves ``(K + noise I) v = y - mean - f(x) - eps``.
    """
    X = model.train_inputs
    if model.n == 0:
        return PathwisePosterior(prior_path, np.zeros(0), X, model.kernel, model.mean)
    f_x = np.asarray(prior_path(X), dtype=float)
    if noise_draw is None:
        noise_draw = np.sqrt(model.noise_variance) * rs.standard_normal(f_x.shape)
    y = model.train_targets.reshape((-1,) + (1,) * (f_x.ndim - 1))
    resid = y - model.mean - f_x - noise_draw
    v = model.factor.solve(resid)
    return PathwisePosterior(prior_path, v, X, model.kernel, model.mean, noise_draw)


def evaluate_path(p, X_star):
    """Evaluate a pathwise posterior; shape ``(n*,)`` or ``(n*, S)``."""
    Xs = p.kernel.check_points(X_star)
    if Xs.shape[0] == 0:
        return np.zeros((0,) + p.coefficients.shape[1:])
    out = np.asarray(p.prior_path(Xs), dtype=float) + p.mean
    if p.coefficients.shape[0]:
        out = out + p.kernel.matrix(Xs, p.inputs) @ p.coefficients
    return out


def wasserstein2_gaussian_1d(mu1, sigma1, mu2, sigma2):
    """2-Wasserstein distance between two univariate Gaussians."""
    return np.sqrt((np.asarray(mu1) - mu2) ** 2 + (np.asarray(sigma1) - sigma2) ** 2)


def kernel_sup_error(k_approx, k_true, grid):
    """``max |k_approx - k_true|`` over ``grid x grid``.

    Either argument may be a callable ``(X, X2) -> matrix`` or a precomputed
    matrix on the grid.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be nonempty")

    def as_matrix(k):
        return np.asarray(k(grid, grid) if callable(k) else k, dtype=float)

    return float(np.max(np.abs(as_matrix(k_approx) - as_matrix(k_true))))


def rff_pathwise_marginals(model, fmap, X_star):
    """Marginal mean and std of the pathwise posterior with an RFF prior.

    For fixed frequencies the approximate posterior is Gaussian in the prior
    weights and noise, so its marginals are available in closed form.
    """
    Xs = model.kernel.check_points(X_star)
    phi_s = fmap.features(Xs)
    mean, _ = posterior_moments(model, Xs, full_cov=False)
    if model.n == 0:
        return mean, np.sqrt(np.sum(phi_s ** 2, axis=1))
    Phi = fmap.features(model.train_inputs)
    B = model.factor.solve(model.kernel.matrix(model.train_inputs, Xs)).T
    resid = phi_s - B @ Phi
    var = np.sum(resid ** 2, axis=1) + model.noise_variance * np.sum(B ** 2, axis=1)
    return mean, np.sqrt(var)


def pathwise_w2_error(model, fmap, X_star):
    """Per-point W2 between RFF-prior pathwise marginals and the exact posterior."""
    mu_a, sd_a = rff_pathwise_marginals(model, fmap, X_star)
    mu, var = posterior_moments(model, X_star, full_cov=False)
    return wasserstein2_gaussian_1d(mu_a, sd_a, mu, np.sqrt(var))


def weightspace_marginals(model, fmap, X_star):
    """Marginals of the pure feature-space posterior (features replace K)."""
    Xs = model.kernel.check_points(X_star)
    phi_s = fmap.features(Xs)
    if model.n == 0:
        return np.full(Xs.shape[0], model.mean), np.sqrt(np.sum(phi_s ** 2, axis=1))
    Phi = fmap.features(model.train_inputs)
    fac = psd_cholesky(Phi @ Phi.T + model.noise_variance * np.eye(model.n))
    cross = Phi @ phi_s.T
    mean = model.mean + cross.T @ fac.solve(model.train_targets - model.mean)
    V = fac.solve_lower(cross)
    var = np.sum(phi_s ** 2, axis=1) - np.sum(V ** 2, axis=0)
    return mean, np.sqrt(np.maximum(var, 0.0))


def moment_matched_normals(rs, num_samples, dim):
    """Standard normal rows whose sample mean is 0 and sample covariance is I.

    Falls back to plain draws when there are too few samples to whiten.
    """
    z = rs.standard_normal((num_samples, dim))
    if num_samples <= dim + 1:
        return z
    z = z - z.mean(axis=0)
    C = z.T @ z / (num_samples - 1)
    L = np.linalg.cholesky(C)
    return np.linalg.solve(L, z.T).T


@dataclass(frozen=True, eq=False)
class StarvationReport:
    points: np.ndarray
    pathwise_std: np.ndarray
    weightspace_std: np.ndarray
    exact_std: np.ndarray

    def rows(self):
        for i in range(self.points.shape[0]):
            x = self.points[i]
            yield (x if x.size > 1 else float(x[0]), float(self.pathwise_std[i]),
                   float(self.weightspace_std[i]), float(self.exact_std[i]))


def variance_starvation_report(model, num_features, points, rs, num_paths=2048,
                               moment_matched=True):
    """Compare posterior std from three constructions at ``points``.

    * pathwise: ``num_paths`` RFF-prior pathwise posterior draws;
    * weightspace: the finite-feature posterior with features replacing K;
    * exact: closed-form posterior.

    With ``moment_matched`` the joint (weights, noise) draws are whitened so
    their sample covariance is exactly the identity, which removes the Monte
    Carlo error of the sample std.
    """
    if num_features % 2:
        raise ValueError("num_features must be even")
    Xs = model.kernel.check_points(points)
    fmap = FourierFeatureMap.sample(model.kernel, num_features, rs)
    n = model.n
    if moment_matched:
        z = moment_matched_normals(rs, num_paths, num_features + n).T
    else:
        z = rs.standard_normal((num_features + n, num_paths))
    prior = BasisPriorSample(z[:num_features], fmap)
    eps = np.sqrt(model.noise_variance) * z[num_features:]
    post = pathwise_condition(model, prior, rs, noise_draw=eps)
    paths = evaluate_path(post, Xs)
    _, ws_std = weightspace_marginals(model, fmap, Xs)
    _, var = posterior_moments(model, Xs, full_cov=False)
    return StarvationReport(Xs, paths.std(axis=1, ddof=1), ws_std, np.sqrt(var))
