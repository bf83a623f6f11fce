"""Riemannian Matérn and squared exponential kernels on compact manifolds.

The circle, the flat torus and the 2-sphere all have Laplace-Beltrami
eigenpairs in closed form, so kernels are evaluated as truncated series

    k(x, x') = C sum_n Phi(lambda_n) f_n(x) f_n(x'),

with ``Phi(lambda) = (2 nu / kappa^2 + lambda)^(-nu - d/2)`` (Matérn) or
``exp(-kappa^2 lambda / 2)`` (squared exponential) and ``C`` chosen so that
``k(x, x) = sigma^2``. On the sphere, sums over each eigenspace collapse to
Legendre polynomials of the cosine of the geodesic angle.

Point conventions: circle points are angles ``(n, 1)``, torus points are
angle pairs ``(n, 2)``, sphere points are unit vectors ``(n, 3)``.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, FramePole, NotOnManifold
from .spectral import BasisPriorSample

log = logging.getLogger(__name__)

TAIL_TOL = 1e-8
UNIT_TOL = 1e-8
POLE_TOL = 1e-6


class Manifold(str, Enum):
    CIRCLE = "circle"
    TORUS2 = "torus2"
    SPHERE2 = "sphere2"

    @property
    def dim(self):
        """Intrinsic dimension, used in the Matérn exponent."""
        return 1 if self is Manifold.CIRCLE else 2

    @property
    def point_dim(self):
        return {"circle": 1, "torus2": 2, "sphere2": 3}[self.value]

    @property
    def default_levels(self):
        return {"circle": 200, "torus2": 40, "sphere2": 60}[self.value]

    @property
    def max_levels(self):
        return {"circle": 1 << 16, "torus2": 160, "sphere2": 4096}[self.value]


# ---------------------------------------------------------------- points


def wrap_angle(a):
    """Map angles to ``[-pi, pi)``."""
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


def check_points(manifold, X):
    manifold = Manifold(manifold)
    X = np.asarray(X, dtype=float)
    p = manifold.point_dim
    if X.ndim == 1:
        X = X[:, None] if p == 1 else X.reshape(-1, p)
    if X.ndim != 2 or X.shape[1] != p:
        raise DimensionMismatch(f"{manifold.value} points need {p} coordinates, got {X.shape}")
    if manifold is Manifold.SPHERE2 and X.shape[0]:
        off = np.max(np.abs(np.linalg.norm(X, axis=1) - 1.0))
        if off > UNIT_TOL:
            raise NotOnManifold(f"sphere points off unit norm by {off:.3g}")
    return X


def geodesic_distance(manifold, x, x2):
    """Geodesic distance; works on single points or stacked rows."""
    manifold = Manifold(manifold)
    x = check_points(manifold, np.atleast_1d(x))
    x2 = check_points(manifold, np.atleast_1d(x2))
    if manifold is Manifold.SPHERE2:
        d = np.arccos(np.clip(np.sum(x * x2, axis=1), -1.0, 1.0))
    else:
        d = np.sqrt(np.sum(wrap_angle(x - x2) ** 2, axis=1))
    return float(d[0]) if d.size == 1 else d


def sample_sphere(n, rs):
    """Uniform points on the unit 2-sphere."""
    z = rs.standard_normal((n, 3))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def random_rotation(rs):
    q, r = np.linalg.qr(rs.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# ---------------------------------------------------------------- spectra


def legendre_p(max_degree, x):
    """``P_0 .. P_L`` at ``x`` by the three-term recursion; shape ``(L+1,) + x.shape``."""
    x = np.asarray(x, dtype=float)
    out = np.empty((max_degree + 1,) + x.shape)
    out[0] = 1.0
    if max_degree >= 1:
        out[1] = x
    for ell in range(1, max_degree):
        out[ell + 1] = ((2 * ell + 1) * x * out[ell] - ell * out[ell - 1]) / (ell + 1)
    return out


def legendre_series(coefs, x):
    """``sum_l coefs[l] P_l(x)`` for a coefficient matrix ``(L+1, k)``.

    Returns shape ``x.shape + (k,)`` without storing all polynomials.
    """
    coefs = np.asarray(coefs, dtype=float)
    x = np.asarray(x, dtype=float)[..., None]
    p_prev = np.ones_like(x)
    total = coefs[0] * p_prev
    if coefs.shape[0] == 1:
        return total
    p = x.copy()
    total = total + coefs[1] * p
    for ell in range(1, coefs.shape[0] - 1):
        p_prev, p = p, ((2 * ell + 1) * x * p - ell * p_prev) / (ell + 1)
        total += coefs[ell + 1] * p
    return total


@dataclass(frozen=True, eq=False)
class ManifoldSpectrum:
    """Laplace-Beltrami eigenvalues grouped into levels up to truncation ``levels``.

    For the circle and sphere a level is an eigenspace. For the torus,
    ``levels`` bounds ``|n_i|`` per axis and the spectrum is the lattice box.
    """

    manifold: Manifold
    levels: int

    def __post_init__(self):
        object.__setattr__(self, "manifold", Manifold(self.manifold))
        object.__setattr__(self, "levels", int(self.levels))

    @property
    def eigenvalues(self):
        L = self.levels
        if self.manifold is Manifold.CIRCLE:
            return np.arange(L + 1) ** 2.0
        if self.manifold is Manifold.SPHERE2:
            ell = np.arange(L + 1)
            return ell * (ell + 1.0)
        n = np.arange(L + 1)
        return n[:, None] ** 2.0 + n[None, :] ** 2.0

    @property
    def multiplicities(self):
        L = self.levels
        if self.manifold is Manifold.CIRCLE:
            return np.where(np.arange(L + 1) == 0, 1, 2)
        if self.manifold is Manifold.SPHERE2:
            return 2 * np.arange(L + 1) + 1
        w = np.where(np.arange(L + 1) == 0, 1, 2)
        return w[:, None] * w[None, :]

    @property
    def zero_weights(self):
        """Pair evaluator at ``x == x'`` for each level: ``sum_m f_m(x)^2``."""
        if self.manifold is Manifold.CIRCLE:
            return self.multiplicities / (2.0 * np.pi)
        if self.manifold is Manifold.SPHERE2:
            return self.multiplicities / (4.0 * np.pi)
        return self.multiplicities / (4.0 * np.pi ** 2)

    def tail_eigenvalues(self):
        """Eigenvalues and zero-weights of the next level beyond the truncation."""
        L1 = self.levels + 1
        if self.manifold is Manifold.CIRCLE:
            return np.array([L1 ** 2.0]), np.array([1.0 / np.pi])
        if self.manifold is Manifold.SPHERE2:
            return np.array([L1 * (L1 + 1.0)]), np.array([(2 * L1 + 1) / (4.0 * np.pi)])
        n = np.arange(L1 + 1)
        w = np.where(n == 0, 1, 2)
        lam = L1 ** 2.0 + n ** 2.0
        wt = 2.0 * w * 2 - np.where(n == L1, 4.0, 0.0)
        return lam, wt / (4.0 * np.pi ** 2)

    def pair_series(self, coefs, X, X2):
        """``sum_levels coefs * pair evaluator`` for every pair, shape ``(n, m, k)``.

        ``coefs`` is ``(num_levels, k)`` (torus: ``(L+1, L+1, k)``) and already
        multiplied by nothing but the spectral filter.
        """
        man = self.manifold
        if man is Manifold.SPHERE2:
            cosg = np.clip(X @ X2.T, -1.0, 1.0)
            lvl = (2 * np.arange(self.levels + 1) + 1) / (4.0 * np.pi)
            return legendre_series(coefs * lvl[:, None], cosg)
        if man is Manifold.CIRCLE:
            delta = X[:, 0][:, None] - X2[:, 0][None, :]
            lvl = self.zero_weights
            scaled = coefs * lvl[:, None]
            out = np.zeros(delta.shape + (coefs.shape[1],))
            n = np.arange(self.levels + 1)
            for start in range(0, n.size, 512):
                nn = n[start:start + 512]
                out += np.cos(delta[..., None] * nn) @ scaled[start:start + 512]
            return out
        n = np.arange(self.levels + 1)
        w = np.where(n == 0, 1.0, 2.0)
        d1 = X[:, 0][:, None] - X2[:, 0][None, :]
        d2 = X[:, 1][:, None] - X2[:, 1][None, :]
        c1 = np.cos(d1[..., None] * n) * w
        c2 = np.cos(d2[..., None] * n) * w
        return np.einsum("ija,abk,ijb->ijk", c1, coefs, c2) / (4.0 * np.pi ** 2)


# ---------------------------------------------------------------- kernels


def _log_filter(family, lam, nu, lengthscale, d):
    if family == "se":
        return -0.5 * lengthscale ** 2 * lam
    return -(nu + 0.5 * d) * np.log(2.0 * nu / lengthscale ** 2 + lam)


def _log_filter_grad(family, lam, nu, lengthscale, d):
    """``d log Phi / d log kappa``."""
    if family == "se":
        return -lengthscale ** 2 * lam
    a = 2.0 * nu / lengthscale ** 2
    return 2.0 * (nu + 0.5 * d) * a / (a + lam)


def _parse_family(family, nu):
    fam = str(family).lower()
    if fam in ("se", "rbf", "squared_exponential"):
        return "se", np.inf
    if fam.startswith("matern"):
        suffix = {"matern12": 0.5, "matern32": 1.5, "matern52": 2.5}
        if fam in suffix:
            return "matern", suffix[fam]
        if nu is None or not nu > 0:
            raise ValueError("Matérn family needs nu > 0")
        return "matern", float(nu)
    raise ValueError(f"unknown family {family!r}")


@dataclass(frozen=True, eq=False)
class ManifoldKernel:
    """Normalized Riemannian Matérn / squared exponential kernel.

    The truncation grows from the manifold's default until the next level's
    coefficient is at most ``1e-8`` of the retained total (capped); the
    achieved ratio is stored in ``tail_ratio``.
    """

    manifold: Manifold
    family: str = "matern"
    nu: float = 2.5
    lengthscale: float = 1.0
    variance: float = 1.0
    levels: int = None
    auto_truncate: bool = True
    tail_ratio: float = field(default=None, init=False)

    def __post_init__(self):
        man = Manifold(self.manifold)
        fam, nu = _parse_family(self.family, self.nu)
        if not self.lengthscale > 0 or not self.variance > 0:
            raise ValueError("lengthscale and variance must be positive")
        object.__setattr__(self, "manifold", man)
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "nu", nu)
        levels = man.default_levels if self.levels is None else int(self.levels)
        ratio = self._tail_ratio(levels)
        if self.auto_truncate:
            while ratio > TAIL_TOL and levels < man.max_levels:
                levels = min(2 * levels, man.max_levels)
                ratio = self._tail_ratio(levels)
            if ratio > TAIL_TOL:
                log.warning("%s kernel truncated at %d levels with tail ratio %.2e",
                            man.value, levels, ratio)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "tail_ratio", ratio)

    @property
    def spectrum(self):
        return ManifoldSpectrum(self.manifold, self.levels)

    @property
    def dim(self):
        return self.manifold.point_dim

    def _scaled_filter(self, lam):
        d = self.manifold.dim
        lf = _log_filter(self.family, lam, self.nu, self.lengthscale, d)
        lf0 = _log_filter(self.family, 0.0, self.nu, self.lengthscale, d)
        return np.exp(lf - lf0)

    def _tail_ratio(self, levels):
        spec = ManifoldSpectrum(self.manifold, levels)
        total = np.sum(self._scaled_filter(spec.eigenvalues) * spec.zero_weights)
        lam, wt = spec.tail_eigenvalues()
        return float(np.sum(self._scaled_filter(lam) * wt) / total)

    def coefficients(self):
        """Spectral filter per level, scaled by the unit-variance constant."""
        spec = self.spectrum
        phi = self._scaled_filter(spec.eigenvalues)
        return phi / np.sum(phi * spec.zero_weights)

    def with_params(self, variance=None, lengthscale=None):
        return replace(self,
                       variance=self.variance if variance is None else float(variance),
                       lengthscale=self.lengthscale if lengthscale is None else float(lengthscale),
                       levels=self.manifold.default_levels if self.auto_truncate else self.levels)

    def check_points(self, X):
        return check_points(self.manifold, X)

    def _series(self, X, X2, with_grad=False):
        X = self.check_points(X)
        X2 = X if X2 is None else self.check_points(X2)
        c = self.coefficients()
        if with_grad:
            g = _log_filter_grad(self.family, self.spectrum.eigenvalues, self.nu,
                                 self.lengthscale, self.manifold.dim)
            stacked = np.stack([c, c * g], axis=-1)
        else:
            stacked = c[..., None]
        return self.spectrum.pair_series(stacked, X, X2), c, stacked

    def matrix(self, X, X2=None):
        same = X2 is None or X2 is X
        S, _, _ = self._series(X, None if same else X2)
        K = self.variance * S[..., 0]
        if same:
            K = 0.5 * (K + K.T)
            np.fill_diagonal(K, self.variance)
        return K

    def diag(self, X):
        return np.full(self.check_points(X).shape[0], self.variance)

    def __call__(self, x, x2):
        return manifold_kernel_eval(self, x, x2)

    def lengthscale_grad(self, X, X2=None):
        """``dK / d log kappa`` including the change of normalization."""
        S, c, stacked = self._series(X, X2, with_grad=True)
        spec = self.spectrum
        zero = np.sum(stacked * spec.zero_weights[..., None],
                      axis=tuple(range(stacked.ndim - 1)))
        # S0 == 1 by construction of c; d(S / S0) = S' - S * S0'
        return self.variance * (S[..., 1] - S[..., 0] * zero[1] / zero[0])


def manifold_kernel_eval(k, x, x2):
    """Kernel value for a single pair of points."""
    return float(k.matrix(np.atleast_2d(np.asarray(x, dtype=float)).reshape(1, -1),
                          np.atleast_2d(np.asarray(x2, dtype=float)).reshape(1, -1))[0, 0])


# ---------------------------------------------------------------- KL sampling


def _normalized_legendre_rows(max_degree, x):
    """Orthonormal associated Legendre functions, yielded one degree at a time.

    Degree ``l`` yields an ``(l+1, n)`` array holding
    ``sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!) P_l^m(x)`` for ``m = 0..l`` without
    the Condon-Shortley phase. Uses the standard stable three-term recursion
    in ``l`` for fixed ``m``.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.maximum(1.0 - x ** 2, 0.0))
    diag = np.full_like(x, 1.0 / np.sqrt(4.0 * np.pi))
    prev2 = None
    prev = diag[None]
    yield prev
    for ell in range(1, max_degree + 1):
        cur = np.empty((ell + 1, x.size))
        m = np.arange(ell - 1)
        if m.size:
            a = np.sqrt((4.0 * ell ** 2 - 1.0) / (ell ** 2 - m ** 2))
            b = np.sqrt(((ell - 1.0) ** 2 - m ** 2) / (4.0 * (ell - 1.0) ** 2 - 1.0))
            lower = np.zeros((m.size, x.size))
            lower[: prev2.shape[0]] = prev2
            cur[: ell - 1] = a[:, None] * (x * prev[: ell - 1] - b[:, None] * lower)
        cur[ell - 1] = np.sqrt(2.0 * ell + 1.0) * x * prev[ell - 1]
        diag = np.sqrt((2.0 * ell + 1.0) / (2.0 * ell)) * s * diag
        cur[ell] = diag
        prev2, prev = prev, cur
        yield cur


def real_spherical_harmonics(max_degree, X):
    """Orthonormal real spherical harmonics, shape ``(n, (L+1)^2)``.

    Columns are ordered by degree, then order ``m = -l .. l``; negative
    orders carry ``sin(|m| phi)`` and positive orders ``cos(m phi)``.
    """
    X = check_points(Manifold.SPHERE2, X)
    phi = np.arctan2(X[:, 1], X[:, 0])
    m = np.arange(1, max_degree + 1)
    cos_m = np.sqrt(2.0) * np.cos(m[:, None] * phi)
    sin_m = np.sqrt(2.0) * np.sin(m[:, None] * phi)
    out = np.empty(((max_degree + 1) ** 2, X.shape[0]))
    col = 0
    for ell, P in enumerate(_normalized_legendre_rows(max_degree, np.clip(X[:, 2], -1, 1))):
        out[col + ell] = P[0]
        if ell:
            out[col + ell + 1: col + 2 * ell + 1] = P[1:] * cos_m[:ell]
            out[col: col + ell] = (P[1:] * sin_m[:ell])[::-1]
        col += 2 * ell + 1
    return out.T


def _fourier_1d(n_max, theta):
    """Orthonormal real Fourier basis on the circle and its wavenumbers."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    n = np.arange(1, n_max + 1)
    cols = [np.full((theta.size, 1), 1.0 / np.sqrt(2.0 * np.pi))]
    if n_max:
        ang = theta[:, None] * n
        cs = np.empty((theta.size, 2 * n_max))
        cs[:, 0::2] = np.cos(ang)
        cs[:, 1::2] = np.sin(ang)
        cols.append(cs / np.sqrt(np.pi))
    waves = np.concatenate([[0], np.repeat(n, 2)])
    return np.hstack(cols), waves


@dataclass(frozen=True, eq=False)
class ManifoldKLBasis:
    """Truncated Karhunen-Loève basis ``sqrt(sigma^2 C Phi(lambda)) f_n``."""

    kernel: ManifoldKernel
    levels: int = None

    def __post_init__(self):
        levels = self.kernel.levels if self.levels is None else min(self.levels, self.kernel.levels)
        object.__setattr__(self, "levels", int(levels))

    @property
    def size(self):
        L = self.levels
        if self.kernel.manifold is Manifold.CIRCLE:
            return 2 * L + 1
        if self.kernel.manifold is Manifold.SPHERE2:
            return (L + 1) ** 2
        return (2 * L + 1) ** 2

    def _scales(self):
        k = self.kernel
        spec = ManifoldSpectrum(k.manifold, self.levels)
        phi = k._scaled_filter(spec.eigenvalues)
        total = np.sum(phi * spec.zero_weights)
        return spec, k.variance * phi / total

    def features(self, X):
        k = self.kernel
        X = k.check_points(X)
        spec, scale = self._scales()
        L = self.levels
        if k.manifold is Manifold.CIRCLE:
            F, waves = _fourier_1d(L, X[:, 0])
            return F * np.sqrt(scale[waves])
        if k.manifold is Manifold.SPHERE2:
            Y = real_spherical_harmonics(L, X)
            degree = np.repeat(np.arange(L + 1), 2 * np.arange(L + 1) + 1)
            return Y * np.sqrt(scale[degree])
        F1, w1 = _fourier_1d(L, X[:, 0])
        F2, w2 = _fourier_1d(L, X[:, 1])
        feats = (F1[:, :, None] * F2[:, None, :]) * np.sqrt(scale[w1][:, w2])
        return feats.reshape(X.shape[0], -1)


def sample_manifold_prior(k, rs, num_samples=None, levels=None):
    """Truncated Karhunen-Loève prior sample with standard normal weights."""
    basis = ManifoldKLBasis(k, levels)
    shape = basis.size if num_samples is None else (basis.size, num_samples)
    return BasisPriorSample(rs.standard_normal(shape), basis)


# ---------------------------------------------------------------- vector fields


def _latlong_frame(X):
    X = check_points(Manifold.SPHERE2, X)
    rho = np.hypot(X[:, 0], X[:, 1])
    if np.any(rho < POLE_TOL):
        raise FramePole("latitude-longitude frame is undefined at the poles")
    cos_t, sin_t = X[:, 2], rho
    cos_p, sin_p = X[:, 0] / rho, X[:, 1] / rho
    e_theta = np.stack([cos_t * cos_p, cos_t * sin_p, -sin_t], axis=1)
    e_phi = np.stack([-sin_p, cos_p, np.zeros_like(cos_p)], axis=1)
    return np.stack([e_theta, e_phi], axis=1)


@dataclass(frozen=True)
class SphereFrame:
    """Tangent frame on the sphere; ``P(x)`` has orthonormal rows in R^3.

    ``rotation`` optionally maps a point to an in-plane angle, turning the
    latitude-longitude frame by ``A(x) = [[c, -s], [s, c]]``.
    """

    rotation: object = None

    def rotation_matrices(self, X):
        X = check_points(Manifold.SPHERE2, X)
        if self.rotation is None:
            return np.broadcast_to(np.eye(2), (X.shape[0], 2, 2))
        a = np.asarray(self.rotation(X), dtype=float).reshape(-1)
        c, s = np.cos(a), np.sin(a)
        return np.stack([np.stack([c, -s], 1), np.stack([s, c], 1)], 1)

    def __call__(self, X):
        """Frame matrices, shape ``(n, 2, 3)``."""
        return self.rotation_matrices(X) @ _latlong_frame(X)

    def frame(self, x):
        return self(np.asarray(x, dtype=float).reshape(1, 3))[0]


def projected_kernel_eval(frame, scalar_k, x, x2):
    """``k(x, x') P(x) P(x')^T`` for independent identical ambient components."""
    x = np.asarray(x, dtype=float).reshape(1, 3)
    x2 = np.asarray(x2, dtype=float).reshape(1, 3)
    return scalar_k.matrix(x, x2)[0, 0] * frame(x)[0] @ frame(x2)[0].T


def projected_kernel_matrix(frame, scalar_k, X, X2=None):
    """Stacked ``(2n, 2m)`` cross-covariance, point-major ordering."""
    X = check_points(Manifold.SPHERE2, X)
    X2 = X if X2 is None else check_points(Manifold.SPHERE2, X2)
    K = scalar_k.matrix(X, X2)
    P, P2 = frame(X), frame(X2)
    blocks = K[:, :, None, None] * np.einsum("iac,jbc->ijab", P, P2)
    return blocks.transpose(0, 2, 1, 3).reshape(2 * X.shape[0], 2 * X2.shape[0])


@dataclass(frozen=True, eq=False)
class VectorFieldSample:
    """``x -> P(x) (f_1, f_2, f_3)(x)`` from three scalar prior samples."""

    frame: SphereFrame
    components: tuple

    def ambient(self, X):
        """Unprojected ambient field, shape ``(n, 3)`` or ``(n, 3, S)``."""
        return np.stack([c(X) for c in self.components], axis=1)

    def __call__(self, X):
        """Frame coordinates, shape ``(n, 2)`` or ``(n, 2, S)``."""
        P = self.frame(X)
        F = self.ambient(X)
        if F.ndim == 2:
            return np.einsum("iac,ic->ia", P, F)
        return np.einsum("iac,ics->ias", P, F)

    def tangent_vectors(self, X):
        """Field in ambient coordinates, ``P(x)^T field(x)``."""
        P = self.frame(X)
        V = self(X)
        if V.ndim == 2:
            return np.einsum("iac,ia->ic", P, V)
        return np.einsum("iac,ias->ics", P, V)


def sample_vector_field(frame, scalar_k, rs, num_samples=None, levels=None):
    comps = tuple(sample_manifold_prior(scalar_k, rs, num_samples, levels) for _ in range(3))
    return VectorFieldSample(frame, comps)
