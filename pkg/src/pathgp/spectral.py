"""Finite-basis approximate priors.

Two constructions live here: random Fourier features drawn from a kernel's
spectral measure, and a piecewise-linear finite element prior for the
one-dimensional Matérn-3/2 process. Both expose a ``features(X)`` matrix so
that :class:`BasisPriorSample` can evaluate either one.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, InvalidDomain
from .kernels import Family, StationaryKernelSpec
from .numerics import psd_cholesky


def sample_frequencies(spec, count, rs):
    """Draw ``count`` frequencies from the spectral measure of ``spec``.

    Frequencies are in cycles per unit input, i.e. the kernel is
    ``E[cos(2 pi w . (x - x'))]`` up to variance.

    Squared exponential frequencies are Gaussian with standard deviation
    ``1 / (2 pi kappa)``. Matérn-nu frequencies are multivariate Student-t
    with ``2 nu`` degrees of freedom, sampled as a Gaussian scale mixture.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    d = spec.dim
    z = rs.standard_normal((count, d))
    if spec.family is Family.SQUARED_EXPONENTIAL:
        return z / (2.0 * np.pi * spec.lengthscale)
    nu = spec.nu
    u = rs.generator.chisquare(2.0 * nu, size=(count, 1))
    return z * np.sqrt(2.0 * nu / u) / (2.0 * np.pi * spec.lengthscale)


@dataclass(frozen=True)
class FourierFeatureMap:
    """Random Fourier feature basis ``phi(x)`` of even length ``num_features``.

    Features come in (cos, sin) pairs scaled by ``sigma / sqrt(l / 2)`` so that
    ``phi(x) . phi(x) == sigma^2`` for every ``x``.
    """

    frequencies: np.ndarray
    variance: float
    source_spec: StationaryKernelSpec = None

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.frequencies, dtype=float))
        object.__setattr__(self, "frequencies", w)

    @classmethod
    def sample(cls, spec, num_features, rs):
        if num_features < 2 or num_features % 2:
            raise ValueError(f"num_features must be a positive even number, got {num_features}")
        freqs = sample_frequencies(spec, num_features // 2, rs)
        return cls(freqs, spec.variance, spec)

    @property
    def num_features(self):
        return 2 * self.frequencies.shape[0]

    size = num_features

    @property
    def dim(self):
        return self.frequencies.shape[1]

    def _points(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None] if self.dim == 1 else X.reshape(-1, self.dim)
        if X.shape[1] != self.dim:
            raise DimensionMismatch(
                f"expected points of dimension {self.dim}, got shape {X.shape}")
        return X

    def features(self, X):
        """Feature matrix of shape ``(n, num_features)``."""
        X = self._points(X)
        proj = 2.0 * np.pi * X @ self.frequencies.T
        scale = np.sqrt(self.variance / self.frequencies.shape[0])
        out = np.empty((X.shape[0], self.num_features))
        out[:, 0::2] = np.cos(proj)
        out[:, 1::2] = np.sin(proj)
        return scale * out

    def kernel(self, X, X2=None):
        """Approximate kernel ``phi(X) phi(X2)^T``."""
        P = self.features(X)
        return P @ (P if X2 is None else self.features(X2)).T

    def gradient(self, X, weights):
        """Gradient of ``phi(x) . w`` for each row of ``X``; shape ``(n, d)``."""
        X = self._points(X)
        proj = 2.0 * np.pi * X @ self.frequencies.T
        scale = np.sqrt(self.variance / self.frequencies.shape[0])
        wc, ws = weights[0::2], weights[1::2]
        coef = scale * (-np.sin(proj) * wc + np.cos(proj) * ws)
        return 2.0 * np.pi * coef @ self.frequencies


def features(fmap, x):
    """Feature vector for a single point."""
    return fmap.features(np.atleast_1d(np.asarray(x, dtype=float))[None, :])[0]


@dataclass(frozen=True)
class BasisPriorSample:
    """Weights against a basis with a ``features`` method.

    ``weights`` may be a vector (one path) or an ``(size, S)`` matrix holding
    ``S`` independent paths; evaluation then returns ``(n, S)``.
    """

    weights: np.ndarray
    basis: object = field(repr=False)

    def __call__(self, X):
        return evaluate_basis_prior(self, X)

    @property
    def num_paths(self):
        return 1 if self.weights.ndim == 1 else self.weights.shape[1]


def sample_basis_prior(basis, rs, num_samples=None):
    """Standard normal weights for ``basis``; one path unless ``num_samples``."""
    shape = basis.size if num_samples is None else (basis.size, num_samples)
    return BasisPriorSample(rs.standard_normal(shape), basis)


def evaluate_basis_prior(sample, X, chunk=None):
    """Evaluate in row blocks so the feature matrix stays near 2**24 entries."""
    X = np.asarray(X, dtype=float)
    size = sample.weights.shape[0]
    chunk = chunk or max(1, (1 << 24) // size)
    if X.shape[0] <= chunk:
        return sample.basis.features(X) @ sample.weights
    return np.concatenate([sample.basis.features(X[i:i + chunk]) @ sample.weights
                           for i in range(0, X.shape[0], chunk)])


@dataclass(frozen=True)
class Fem1dPrior:
    """Piecewise-linear finite element prior for Matérn-3/2 on an interval.

    Weights solve ``A w = b`` with ``b ~ N(0, M)``, so their covariance is
    ``A^{-1} M A^{-T}``. Boundaries are left free (natural conditions).
    """

    node_positions: np.ndarray
    stiffness: np.ndarray
    mass: np.ndarray
    lengthscale: float

    @property
    def A(self):
        return (3.0 / self.lengthscale ** 2) * self.mass + self.stiffness

    @property
    def M(self):
        return self.mass

    @property
    def size(self):
        return self.node_positions.size

    @property
    def stationary_variance(self):
        """Marginal variance of the continuum process, ``kappa^3 / (4 3^{3/2})``."""
        return self.lengthscale ** 3 / (4.0 * 3.0 ** 1.5)

    def weight_covariance(self):
        A = self.A
        Ainv_M = np.linalg.solve(A, self.mass)
        C = np.linalg.solve(A, Ainv_M.T)
        return 0.5 * (C + C.T)

    def features(self, X):
        """Hat-function values, shape ``(n, n_nodes)``."""
        x = np.asarray(X, dtype=float).reshape(-1)
        nodes = self.node_positions
        n = nodes.size
        idx = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0, n - 2)
        t = (x - nodes[idx]) / (nodes[idx + 1] - nodes[idx])
        inside = (x >= nodes[0]) & (x <= nodes[-1])
        out = np.zeros((x.size, n))
        rows = np.arange(x.size)
        out[rows, idx] = np.where(inside, 1.0 - t, 0.0)
        out[rows, idx + 1] = np.where(inside, t, 0.0)
        return out


def build_fem1d_prior(domain, n_nodes, lengthscale):
    a, b = map(float, domain)
    if not a < b:
        raise InvalidDomain(f"need a < b, got [{a}, {b}]")
    if n_nodes < 3:
        raise InvalidDomain(f"need at least 3 nodes, got {n_nodes}")
    if not lengthscale > 0:
        raise ValueError("lengthscale must be positive")
    nodes = np.linspace(a, b, n_nodes)
    h = (b - a) / (n_nodes - 1)
    main = np.full(n_nodes, 2.0)
    main[[0, -1]] = 1.0
    off = np.ones(n_nodes - 1)
    mass = h / 6.0 * (np.diag(2.0 * main) + np.diag(off, 1) + np.diag(off, -1))
    stiff = (np.diag(main) - np.diag(off, 1) - np.diag(off, -1)) / h
    return Fem1dPrior(nodes, stiff, mass, float(lengthscale))


def sample_fem1d_prior(prior, rs, num_samples=None):
    """Draw FEM weights by solving ``A w = b`` with ``b ~ N(0, M)``."""
    L = psd_cholesky(prior.mass).L
    shape = prior.size if num_samples is None else (prior.size, num_samples)
    b = L @ rs.standard_normal(shape)
    return BasisPriorSample(np.linalg.solve(prior.A, b), prior)
