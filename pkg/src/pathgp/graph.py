"""Graph Laplacians and graph Matérn / squared exponential kernels.

Kernels are built by functional calculus on the Laplacian's eigenpairs:
``K = U Phi(Lambda) U^T``. The Laplacian is ``D - W`` (positive
semi-definite, so it plays the role of the negated Laplace-Beltrami operator).
"""

from dataclasses import dataclass

import numpy as np

from .errors import AlphaOutOfRange, IsolatedNode, NotPsd
from .numerics import psd_cholesky, sym_eigendecompose

MAX_NODES = 2048


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected graph with positive edge weights, each edge stored once."""

    node_count: int
    edges: tuple = ()

    def __post_init__(self):
        n = int(self.node_count)
        if n < 0:
            raise ValueError("node_count must be nonnegative")
        seen = {}
        for e in self.edges:
            i, j, w = int(e[0]), int(e[1]), float(e[2])
            if i == j:
                raise ValueError(f"self-loop at node {i}")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) out of range for {n} nodes")
            if not w > 0:
                raise ValueError(f"edge ({i}, {j}) has non-positive weight {w}")
            seen.setdefault((min(i, j), max(i, j)), w)
        object.__setattr__(self, "node_count", n)
        object.__setattr__(self, "edges", tuple((i, j, w) for (i, j), w in seen.items()))

    def adjacency(self):
        W = np.zeros((self.node_count, self.node_count))
        for i, j, w in self.edges:
            W[i, j] = W[j, i] = w
        return W

    def degrees(self):
        return self.adjacency().sum(axis=1)

    def permuted(self, perm):
        """Relabel node ``i`` as ``perm[i]``."""
        perm = np.asarray(perm)
        return WeightedGraph(self.node_count,
                             tuple((int(perm[i]), int(perm[j]), w) for i, j, w in self.edges))


def build_laplacian(g, normalized=False):
    """``D - W``, or ``D^{-1/2} (D - W) D^{-1/2}`` if ``normalized``."""
    W = g.adjacency()
    d = W.sum(axis=1)
    L = np.diag(d) - W
    if not normalized:
        return L
    if np.any(d <= 0):
        raise IsolatedNode(f"node {int(np.argmin(d))} has zero degree")
    s = 1.0 / np.sqrt(d)
    L = s[:, None] * L * s[None, :]
    return 0.5 * (L + L.T)


@dataclass(frozen=True, eq=False)
class GraphSpectrum:
    eigen: object
    normalized: bool = False

    @property
    def eigenvalues(self):
        return self.eigen.eigenvalues

    @property
    def eigenvectors(self):
        return self.eigen.eigenvectors

    @property
    def n(self):
        return self.eigenvalues.size


def graph_spectrum(g, normalized=False, max_nodes=MAX_NODES):
    if g.node_count > max_nodes:
        raise ValueError(
            f"graph has {g.node_count} nodes; dense spectra are capped at {max_nodes}")
    eig = sym_eigendecompose(build_laplacian(g, normalized))
    # clamp roundoff: the Laplacian is PSD with a zero eigenvalue
    lam = np.maximum(eig.eigenvalues, 0.0)
    lam[0] = 0.0 if abs(eig.eigenvalues[0]) < 1e-8 else eig.eigenvalues[0]
    return GraphSpectrum(type(eig)(lam, eig.eigenvectors), normalized)


def log_spectral_filter(family, lam, nu=None, lengthscale=1.0):
    """Log of ``(2 nu / kappa^2 + lam)^(-nu)`` or ``exp(-kappa^2 lam / 2)``."""
    lam = np.asarray(lam, dtype=float)
    if family in ("se", "squared_exponential"):
        return -0.5 * lengthscale ** 2 * lam
    if not nu or nu <= 0:
        raise ValueError("Matérn smoothness nu must be positive")
    return -nu * np.log(2.0 * nu / lengthscale ** 2 + lam)


def spectral_filter(family, lam, nu=None, lengthscale=1.0):
    """``(2 nu / kappa^2 + lam)^(-nu)`` or ``exp(-kappa^2 lam / 2)``."""
    return np.exp(log_spectral_filter(family, lam, nu, lengthscale))


def graph_kernel_matrix(spec, family="matern", nu=1.5, lengthscale=1.0, variance=1.0,
                        normalize_variance=True):
    """Graph kernel ``U Phi(Lambda) U^T``.

    With ``normalize_variance`` the matrix is rescaled so its mean diagonal is
    ``variance``; the per-node pattern is kept. Otherwise it is multiplied by
    ``variance``.
    """
    log_phi = log_spectral_filter(family, spec.eigenvalues, nu, lengthscale)
    if normalize_variance:
        # large nu underflows; the overall scale cancels anyway
        log_phi = log_phi - log_phi.max()
    phi = np.exp(log_phi)
    K = spec.eigen.apply(lambda _: phi)
    K = 0.5 * (K + K.T)
    if normalize_variance:
        return variance * K / np.mean(np.diag(K))
    return variance * K


def graph_gp_regress(K, observed, noise_variance=0.0):
    """Posterior mean and std at every node given ``(node, value)`` pairs."""
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if len(observed) == 0:
        return np.zeros(n), np.sqrt(np.maximum(np.diag(K), 0.0))
    idx = np.array([int(i) for i, _ in observed])
    if np.unique(idx).size != idx.size:
        raise ValueError("observed node indices must be distinct")
    y = np.array([float(v) for _, v in observed])
    fac = psd_cholesky(K[np.ix_(idx, idx)] + noise_variance * np.eye(idx.size))
    Kno = K[:, idx]
    mean = Kno @ fac.solve(y)
    V = fac.solve_lower(Kno.T)
    var = np.diag(K) - np.sum(V ** 2, axis=0)
    if np.min(var) < -1e-6 * np.max(np.diag(K)):
        raise NotPsd("posterior variance significantly negative")
    return mean, np.sqrt(np.maximum(var, 0.0))


def random_walk_kernel(spec, lengthscale, steps):
    """``(I - (1 - alpha) L_sym)^s`` with ``alpha = 1 - kappa^2 / (2 s)``."""
    alpha = 1.0 - lengthscale ** 2 / (2.0 * steps)
    if not 0.0 < alpha < 1.0:
        raise AlphaOutOfRange(f"alpha = {alpha} outside (0, 1)")
    lam = spec.eigenvalues
    return spec.eigen.apply(lambda _: (1.0 - (1.0 - alpha) * lam) ** steps)


def random_walk_limit_check(spec, lengthscale, steps):
    """Max-abs gap between the random-walk kernel and its heat-kernel limit."""
    if not spec.normalized:
        raise ValueError("the random-walk limit is stated for the normalized Laplacian")
    alpha = 1.0 - lengthscale ** 2 / (2.0 * steps)
    if not 0.0 < alpha < 1.0:
        raise AlphaOutOfRange(f"alpha = {alpha} outside (0, 1)")
    lam = spec.eigenvalues
    gap = (1.0 - (1.0 - alpha) * lam) ** steps - np.exp(-0.5 * lengthscale ** 2 * lam)
    return float(np.max(np.abs(spec.eigen.apply(lambda _: gap))))


def erdos_renyi(n, p, rs, weight_range=(0.5, 2.0)):
    gen = rs.generator
    edges = [(i, j, float(gen.uniform(*weight_range)))
             for i in range(n) for j in range(i + 1, n) if gen.uniform() < p]
    return WeightedGraph(n, tuple(edges))


def road_like_graph(rows, cols, rs, drop=0.15, shortcut=0.05):
    """Perturbed grid graph: a stand-in for a small road network.

    Grid edges are dropped with probability ``drop`` (never disconnecting a
    node completely) and diagonal shortcuts added with probability
    ``shortcut``. Weights are inverse segment lengths.
    """
    gen = rs.generator
    n = rows * cols
    pos = np.array([(r + 0.2 * gen.standard_normal(), c + 0.2 * gen.standard_normal())
                    for r in range(rows) for c in range(cols)])
    cand = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols:
                cand.append((i, i + 1, drop))
            if r + 1 < rows:
                cand.append((i, i + cols, drop))
            if r + 1 < rows and c + 1 < cols:
                cand.append((i, i + cols + 1, 1.0 - shortcut))
    degree = np.zeros(n, dtype=int)
    edges = []
    for i, j, p_drop in cand:
        if gen.uniform() < p_drop:
            continue
        w = 1.0 / max(np.linalg.norm(pos[i] - pos[j]), 1e-3)
        edges.append((i, j, float(w)))
        degree[i] += 1
        degree[j] += 1
    for i in np.flatnonzero(degree == 0):
        j = i + 1 if (i + 1) % cols else i - 1
        edges.append((int(i), int(j), 1.0))
    return WeightedGraph(n, tuple(edges)), pos
