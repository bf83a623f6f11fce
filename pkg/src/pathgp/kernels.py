"""Euclidean stationary kernels: half-integer Matérn and squared exponential.

All kernels share one small duck-typed interface used by the GP code:
``matrix``, ``diag``, ``lengthscale_grad``, ``with_params`` and the
``variance`` / ``lengthscale`` attributes. Manifold kernels implement the
same surface, so GP models never need to know which geometry they live on.
"""

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch

SQRT3 = np.sqrt(3.0)
SQRT5 = np.sqrt(5.0)


class Family(str, Enum):
    MATERN12 = "matern12"
    MATERN32 = "matern32"
    MATERN52 = "matern52"
    SQUARED_EXPONENTIAL = "se"

    @property
    def nu(self):
        return {"matern12": 0.5, "matern32": 1.5, "matern52": 2.5,
                "se": np.inf}[self.value]

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {
            "matern12": "matern12", "matern-1/2": "matern12", "0.5": "matern12",
            "matern32": "matern32", "matern-3/2": "matern32", "1.5": "matern32",
            "matern52": "matern52", "matern-5/2": "matern52", "2.5": "matern52",
            "se": "se", "rbf": "se", "squared_exponential": "se",
            "squaredexponential": "se", "inf": "se",
        }
        key = str(value).strip().lower().replace(" ", "")
        if key not in aliases:
            raise ValueError(f"unknown kernel family {value!r}")
        return cls(aliases[key])

    @classmethod
    def from_nu(cls, nu):
        if np.isinf(nu):
            return cls.SQUARED_EXPONENTIAL
        for fam in (cls.MATERN12, cls.MATERN32, cls.MATERN52):
            if np.isclose(fam.nu, nu):
                return fam
        raise ValueError(f"only nu in {{1/2, 3/2, 5/2, inf}} supported, got {nu}")


def profile(family, s):
    """Unit-variance kernel as a function of scaled distance ``s = r / kappa``."""
    family = Family.parse(family)
    if family is Family.MATERN12:
        return np.exp(-s)
    if family is Family.MATERN32:
        return (1.0 + SQRT3 * s) * np.exp(-SQRT3 * s)
    if family is Family.MATERN52:
        return (1.0 + SQRT5 * s + 5.0 / 3.0 * s ** 2) * np.exp(-SQRT5 * s)
    return np.exp(-0.5 * s ** 2)


def profile_log_lengthscale_grad(family, s):
    """Derivative of ``profile(r / kappa)`` with respect to ``log kappa``."""
    family = Family.parse(family)
    if family is Family.MATERN12:
        return s * np.exp(-s)
    if family is Family.MATERN32:
        return 3.0 * s ** 2 * np.exp(-SQRT3 * s)
    if family is Family.MATERN52:
        return 5.0 / 3.0 * s ** 2 * (1.0 + SQRT5 * s) * np.exp(-SQRT5 * s)
    return s ** 2 * np.exp(-0.5 * s ** 2)


def pairwise_distance(X, X2):
    return cdist(X, X2)


@dataclass(frozen=True)
class StationaryKernelSpec:
    """Isotropic stationary kernel on R^d.

    Parameters
    ----------
    family : Family or str
        One of matern12, matern32, matern52, se.
    variance : float
        Marginal variance sigma^2.
    lengthscale : float
        Single scalar length scale kappa (no ARD).
    dim : int
        Input dimension d.
    """

    family: Family = Family.MATERN52
    variance: float = 1.0
    lengthscale: float = 1.0
    dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")
        if not self.lengthscale > 0:
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        if int(self.dim) < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def nu(self):
        return self.family.nu

    def with_params(self, variance=None, lengthscale=None):
        return replace(
            self,
            variance=self.variance if variance is None else float(variance),
            lengthscale=self.lengthscale if lengthscale is None else float(lengthscale),
        )

    def check_points(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, self.dim) if self.dim > 1 or X.size == 0 else X[:, None]
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise DimensionMismatch(
                f"expected points of dimension {self.dim}, got shape {X.shape}")
        return X

    def __call__(self, x, x2):
        return kernel_eval(self, x, x2)

    def from_distance(self, r):
        return self.variance * profile(self.family, np.asarray(r) / self.lengthscale)

    def matrix(self, X, X2=None):
        return kernel_matrix(self, X, X if X2 is None else X2)

    def diag(self, X):
        X = self.check_points(X)
        return np.full(X.shape[0], self.variance)

    def lengthscale_grad(self, X, X2=None):
        X = self.check_points(X)
        X2 = X if X2 is None else self.check_points(X2)
        s = pairwise_distance(X, X2) / self.lengthscale
        return self.variance * profile_log_lengthscale_grad(self.family, s)


def _as_point(spec, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (spec.dim,):
        raise DimensionMismatch(f"expected a point in R^{spec.dim}, got shape {x.shape}")
    return x


def kernel_eval(spec, x, x2):
    """Closed-form kernel value ``k(x, x')``."""
    x, x2 = _as_point(spec, x), _as_point(spec, x2)
    r = float(np.linalg.norm(x - x2))
    return float(spec.from_distance(r))


def kernel_matrix(spec, X, X2):
    """Kernel matrix with entries ``k(X[i], X2[j])``.

    When ``X2 is X`` (or equal), the output is exactly symmetric with the
    variance on the diagonal.
    """
    X = spec.check_points(X)
    same = X2 is X
    X2 = spec.check_points(X2)
    if same or (X.shape == X2.shape and np.array_equal(X, X2)):
        K = spec.from_distance(pairwise_distance(X, X))
        K = 0.5 * (K + K.T)
        np.fill_diagonal(K, spec.variance)
        return K
    return spec.from_distance(pairwise_distance(X, X2))
