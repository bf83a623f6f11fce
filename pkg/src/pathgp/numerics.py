"""Dense linear algebra and seeded random streams.

Everything here is pure given its inputs. ``RandomSource`` is the only
stateful object and is meant to be owned by a single caller; parallel work
should take a child stream from :meth:`RandomSource.spawn`.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NotPsd, NotSymmetric

SYMMETRY_TOL = 1e-10
JITTER_START = 1e-12
JITTER_MAX = 1e-4


@dataclass(frozen=True)
class PsdFactor:
    """Lower Cholesky factor of ``A + jitter_used * I``."""

    lower_triangular_factor: np.ndarray
    jitter_used: float = 0.0

    @property
    def L(self):
        return self.lower_triangular_factor

    def solve(self, b):
        """Solve ``(A + jitter I) x = b``."""
        from scipy.linalg import cho_solve

        return cho_solve((self.L, True), b, check_finite=False)

    def solve_lower(self, b):
        from scipy.linalg import solve_triangular

        return solve_triangular(self.L, b, lower=True, check_finite=False)

    def logdet(self):
        return 2.0 * np.sum(np.log(np.diag(self.L)))

    def reconstruct(self):
        return self.L @ self.L.T


@dataclass(frozen=True)
class SymEigen:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def apply(self, fn):
        """Matrix function ``U diag(fn(lambda)) U^T``."""
        U = self.eigenvectors
        return (U * fn(self.eigenvalues)) @ U.T


def _check_symmetric(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {A.shape}")
    if A.size and np.max(np.abs(A - A.T)) > SYMMETRY_TOL:
        raise NotSymmetric(
            f"matrix asymmetric by {np.max(np.abs(A - A.T)):.3g} (max-abs)")
    return A


def jitter_ladder():
    """Yield 0, then 1e-12, 1e-11, ..., 1e-4."""
    yield 0.0
    jitter = JITTER_START
    while jitter <= JITTER_MAX * (1 + 1e-9):
        yield jitter
        jitter *= 10.0


def psd_cholesky(A):
    """Cholesky factor of a symmetric PSD matrix, adding jitter on failure.

    Parameters
    ----------
    A : (n, n) array_like
        Symmetric matrix. Asymmetry above 1e-10 (max-abs) is rejected.

    Returns
    -------
    PsdFactor
        Factor together with the diagonal jitter that was needed.

    Raises
    ------
    NotPsd
        If factorization fails even with jitter 1e-4.
    """
    A = _check_symmetric(A)
    n = A.shape[0]
    # symmetrize exactly so LAPACK sees the same matrix regardless of triangle
    A = 0.5 * (A + A.T)
    eye = np.eye(n)
    for jitter in jitter_ladder():
        try:
            L = np.linalg.cholesky(A + jitter * eye if jitter else A)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return PsdFactor(L, jitter)
    raise NotPsd(f"Cholesky failed for {n}x{n} matrix at jitter {JITTER_MAX:g}")


def sym_eigendecompose(A):
    """Full eigendecomposition of a symmetric matrix, eigenvalues ascending."""
    A = _check_symmetric(A)
    lam, U = np.linalg.eigh(0.5 * (A + A.T))
    return SymEigen(lam, U)


class RandomSource:
    """Seeded PCG64 stream. Same seed, same draws, bit for bit."""

    def __init__(self, seed=0):
        self.seed = int(seed)
        self._seq = np.random.SeedSequence(self.seed)
        self.generator = np.random.Generator(np.random.PCG64(self._seq))

    def __repr__(self):
        return f"RandomSource(seed={self.seed})"

    def spawn(self, count):
        """Independent child streams; deterministic in the parent seed."""
        children = self._seq.spawn(count)
        out = []
        for child in children:
            rs = RandomSource.__new__(RandomSource)
            rs.seed = self.seed
            rs._seq = child
            rs.generator = np.random.Generator(np.random.PCG64(child))
            out.append(rs)
        return out

    def standard_normal(self, size):
        return self.generator.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)


def as_random_source(rs):
    if isinstance(rs, RandomSource):
        return rs
    if rs is None:
        return RandomSource(0)
    return RandomSource(rs)


def standard_normal(rs, n):
    """``n`` i.i.d. N(0, 1) draws from ``rs``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return rs.standard_normal(int(n))
