"""Bayesian optimization and bandit experiments.

Everything here minimizes. Thompson sampling draws pathwise posterior
samples, which are ordinary deterministic functions, and minimizes each one
by candidate search followed by finite-difference refinement.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

from .errors import ConfigError, DimensionMismatch
from .exact_gp import FitConfig, GpModel, fit_hyperparameters, posterior_mean_var
from .kernels import StationaryKernelSpec
from .manifold import ManifoldKernel, sample_manifold_prior, sample_sphere
from .numerics import RandomSource
from .pathwise import pathwise_condition, sample_exact_prior
from .spectral import FourierFeatureMap, sample_basis_prior

# ---------------------------------------------------------------- benchmarks


def ackley(X):
    X = np.atleast_2d(X)
    d = X.shape[1]
    a = np.sqrt(np.sum(X ** 2, axis=1) / d)
    b = np.sum(np.cos(2.0 * np.pi * X), axis=1) / d
    return 20.0 - 20.0 * np.exp(-0.2 * a) - np.exp(b) + np.e


def levy(X):
    X = np.atleast_2d(X)
    w = 1.0 + (X - 1.0) / 4.0
    head = np.sin(np.pi * w[:, 0]) ** 2
    body = np.sum((w[:, :-1] - 1.0) ** 2 * (1.0 + 10.0 * np.sin(np.pi * w[:, :-1] + 1.0) ** 2),
                  axis=1)
    tail = (w[:, -1] - 1.0) ** 2 * (1.0 + np.sin(2.0 * np.pi * w[:, -1]) ** 2)
    return head + body + tail


def rosenbrock(X):
    X = np.atleast_2d(X)
    return np.sum(100.0 * (X[:, 1:] - X[:, :-1] ** 2) ** 2 + (X[:, :-1] - 1.0) ** 2, axis=1)


_ANALYTIC = {"ackley": (ackley, 0.0), "levy": (levy, 1.0), "rosenbrock": (rosenbrock, 1.0)}


@dataclass(frozen=True, eq=False)
class BenchmarkFunction:
    """Benchmark target ``x -> f(x - shift)``.

    ``rff`` targets are prior samples ``phi(x) . w`` from a random Fourier
    feature approximation; their optimum is located once by multi-start
    L-BFGS-B and cached, so regret for them is relative to that estimate.
    """

    name: str
    dim: int
    shift: np.ndarray = None
    features: FourierFeatureMap = field(default=None, repr=False)
    weights: np.ndarray = field(default=None, repr=False)
    domain: object = field(default=None, repr=False)
    optimum_starts: int = 64

    def __post_init__(self):
        name = self.name.lower()
        if name in ("rff", "rffsample", "rff_sample"):
            name = "rff"
        elif name not in _ANALYTIC:
            raise ValueError(f"unknown benchmark {self.name!r}")
        object.__setattr__(self, "name", name)
        shift = np.zeros(self.dim) if self.shift is None else np.asarray(self.shift, float)
        object.__setattr__(self, "shift", shift)

    @classmethod
    def rff_sample(cls, spec, num_features, domain, rs, optimum_starts=64):
        fmap = FourierFeatureMap.sample(spec, num_features, rs)
        return cls("rff", spec.dim, None, fmap, rs.standard_normal(num_features),
                   domain, optimum_starts)

    @classmethod
    def on_sphere(cls, name, minimizer):
        """Ambient benchmark shifted so its minimizer lies at ``minimizer``."""
        base = _ANALYTIC[name.lower()][1]
        return cls(name, 3, np.asarray(minimizer, float) - base)

    def __call__(self, X):
        return eval_benchmark(self, X)

    @property
    def minimizer(self):
        if self.name == "rff":
            return self._rff_optimum[0]
        return np.full(self.dim, _ANALYTIC[self.name][1]) + self.shift

    @property
    def optimum_value(self):
        if self.name == "rff":
            return self._rff_optimum[1]
        return 0.0

    def gradient(self, X):
        X = np.atleast_2d(X)
        return self.features.gradient(X, self.weights)

    @cached_property
    def _rff_optimum(self):
        rs = RandomSource(0)
        cand = self.domain.sample(1 << 14, rs)
        vals = self(cand)
        starts = cand[np.argsort(vals)[: self.optimum_starts]]
        best_x, best_f = starts[0], float(np.min(vals))
        bounds = list(zip(self.domain.lower, self.domain.upper))
        for x0 in starts:
            res = minimize(lambda x: float(self(x[None])[0]), x0,
                           jac=lambda x: self.gradient(x[None])[0],
                           method="L-BFGS-B", bounds=bounds)
            if res.fun < best_f:
                best_x, best_f = res.x, float(res.fun)
        return np.asarray(best_x), best_f


def eval_benchmark(b, X):
    """Benchmark values at the rows of ``X`` (or a single point)."""
    X = np.asarray(X, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != b.dim:
        raise DimensionMismatch(f"benchmark is {b.dim}-dimensional, got {X.shape[1]}")
    if b.name == "rff":
        out = b.features.features(X) @ b.weights
    else:
        out = _ANALYTIC[b.name][0](X - b.shift)
    return float(out[0]) if single else out


# ---------------------------------------------------------------- domains


@dataclass(frozen=True, eq=False)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, float))
        hi = np.atleast_1d(np.asarray(self.upper, float))
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError("box needs lower < upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim):
        return cls(np.zeros(dim), np.ones(dim))

    @property
    def dim(self):
        return self.lower.size

    @property
    def scale(self):
        return float(np.max(self.upper - self.lower))

    def sample(self, n, rs):
        return rs.uniform(self.lower, self.upper, size=(n, self.dim))

    def project(self, X):
        return np.clip(X, self.lower, self.upper)

    def tangent(self, X, G):
        return G

    def contains(self, X, tol=0.0):
        X = np.atleast_2d(X)
        return np.all((X >= self.lower - tol) & (X <= self.upper + tol), axis=1)


@dataclass(frozen=True)
class Sphere2:
    dim: int = 3
    scale: float = 1.0

    def sample(self, n, rs):
        return sample_sphere(n, rs)

    def project(self, X):
        return X / np.linalg.norm(X, axis=-1, keepdims=True)

    def tangent(self, X, G):
        return G - np.sum(G * X, axis=-1, keepdims=True) * X

    def contains(self, X, tol=1e-10):
        return np.abs(np.linalg.norm(np.atleast_2d(X), axis=1) - 1.0) <= tol


# ---------------------------------------------------------------- acquisitions


def ucb_acquisition(mu, sigma, c):
    """Upper confidence bound ``mu + c sigma``."""
    return np.asarray(mu) + c * np.asarray(sigma)


def ucb_schedule(T):
    """Hoeffding schedule ``sqrt(2 ln T)``."""
    return np.sqrt(2.0 * np.log(T))


def expected_improvement(mu, sigma, best):
    """``E max(0, best - f)`` for ``f ~ N(mu, sigma^2)`` (minimization)."""
    mu, sigma = np.broadcast_arrays(np.asarray(mu, float), np.asarray(sigma, float))
    gap = best - mu
    out = np.maximum(gap, 0.0)
    pos = sigma > 0
    z = gap[pos] / sigma[pos]
    out = np.array(out, dtype=float)
    out[pos] = gap[pos] * norm.cdf(z) + sigma[pos] * norm.pdf(z)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------- optimization


@dataclass(frozen=True)
class CandidateConfig:
    num_candidates: int = 4096
    refine_steps: int = 50
    fd_step: float = 1e-5
    init_step: float = 0.05


def refine(fn, x0, domain, steps, fd_step=1e-5, init_step=0.05):
    """Projected finite-difference descent on a deterministic function.

    Moves are accepted only if they lower ``fn``; the step length doubles
    after success and halves after failure.
    """
    x = np.asarray(x0, dtype=float)
    fx = float(fn(x[None])[0])
    if steps <= 0:
        return x, fx
    d = x.size
    h = fd_step * domain.scale
    step = init_step * domain.scale
    eye = np.eye(d) * h
    for _ in range(steps):
        # probes are retracted, so on the sphere this is the Riemannian gradient
        probes = domain.project(np.vstack([x + eye, x - eye]))
        vals = fn(probes)
        g = (vals[:d] - vals[d:]) / (2.0 * h)
        g = domain.tangent(x[None], g[None])[0]
        gn = np.linalg.norm(g)
        if not np.isfinite(gn) or gn == 0.0:
            break
        trial = domain.project((x - step * g / gn)[None])[0]
        ft = float(fn(trial[None])[0])
        if ft < fx:
            x, fx = trial, ft
            step *= 2.0
        else:
            step *= 0.5
            if step < 1e-9 * domain.scale:
                break
    return x, fx


def _prior_path(model, prior_mode, num_features, rs, candidates=None):
    kernel = model.kernel
    if prior_mode == "exact":
        return sample_exact_prior(kernel, model.train_inputs, candidates, rs)
    if isinstance(kernel, ManifoldKernel):
        return sample_manifold_prior(kernel, rs)
    fmap = FourierFeatureMap.sample(kernel, num_features, rs)
    return sample_basis_prior(fmap, rs)


def thompson_batch(model, prior_mode, num_features, p, candidate_config, rs, domain):
    """``p`` parallel Thompson sampling points, one pathwise draw each.

    ``prior_mode`` is ``"basis"`` (Fourier features in R^d, Karhunen-Loève on
    manifolds) or ``"exact"`` (joint draw on the candidate set; no refinement).
    """
    if p < 1:
        raise ValueError("batch size must be >= 1")
    cc = candidate_config or CandidateConfig()
    out = []
    for child in rs.spawn(p):
        cand = domain.sample(cc.num_candidates, child)
        prior = _prior_path(model, prior_mode, num_features, child, cand)
        path = pathwise_condition(model, prior, child)
        vals = path(cand)
        x0 = cand[int(np.argmin(vals))]
        if prior_mode != "exact":
            x0, _ = refine(path, x0, domain, cc.refine_steps, cc.fd_step, cc.init_step)
        out.append(x0)
    return np.array(out)


def _acquisition_batch(model, kind, p, cc, rs, domain, ucb_c):
    cand = domain.sample(cc.num_candidates, rs)
    if model.n == 0:
        return cand[:p]
    best = float(np.min(model.train_targets))

    def score(X):
        mu, var = posterior_mean_var(model, X)
        if kind == "ei":
            return -expected_improvement(mu, np.sqrt(var), best)
        # minimization: lower confidence bound
        return -ucb_acquisition(-mu, np.sqrt(var), ucb_c)

    vals = score(cand)
    order = np.argsort(vals)[:p]
    points = []
    for i in order:
        x, _ = refine(score, cand[i], domain, cc.refine_steps, cc.fd_step, cc.init_step)
        points.append(x)
    return np.array(points)


# ---------------------------------------------------------------- BO loop


@dataclass(frozen=True, eq=False)
class RegretTrace:
    seed: int
    points: np.ndarray
    observed: np.ndarray
    values: np.ndarray
    optimum: float

    @property
    def simple_regret(self):
        if self.values.size == 0:
            return np.zeros(0)
        return np.minimum.accumulate(self.values) - self.optimum

    @property
    def cumulative_regret(self):
        return np.cumsum(self.values - self.optimum)

    def __len__(self):
        return self.values.size


ACQUISITIONS = ("ts", "ucb", "ei", "random")
TARGETS = ("ackley", "levy", "rosenbrock", "rff")


@dataclass(frozen=True)
class BOConfig:
    """Declarative BO experiment.

    ``lengthscale=None`` means ``sqrt(dim / 100)``. For ``domain="sphere2"``
    the target is the named benchmark restricted to the unit sphere with its
    minimizer moved to a random point on the sphere.
    """

    target: str = "rff"
    dim: int = 2
    domain: str = "box"
    lower: float = 0.0
    upper: float = 1.0
    family: str = "matern52"
    variance: float = 1.0
    lengthscale: float = None
    noise_variance: float = 1e-3
    num_features: int = 1024
    target_features: int = 2048
    batch_size: int = 1
    num_evals: int = 64
    acquisition: str = "ts"
    seeds: tuple = (0,)
    num_candidates: int = 4096
    refine_steps: int = 50
    refit: bool = True
    refit_every: int = 1
    fit_iters: int = 30
    ucb_c: float = 2.0
    optimum_starts: int = 64

    def validate(self):
        def bad(name, msg):
            raise ConfigError(msg, field=name)

        if self.target not in TARGETS:
            bad("target", f"must be one of {TARGETS}")
        if self.domain not in ("box", "sphere2"):
            bad("domain", "must be 'box' or 'sphere2'")
        if self.domain == "sphere2" and self.target == "rff":
            bad("target", "rff targets are only defined on boxes")
        if self.acquisition not in ACQUISITIONS:
            bad("acquisition", f"must be one of {ACQUISITIONS}")
        if self.dim < 1:
            bad("dim", "must be >= 1")
        if not self.lower < self.upper:
            bad("upper", "must exceed lower")
        if not self.variance > 0:
            bad("variance", "must be positive")
        if self.lengthscale is not None and not self.lengthscale > 0:
            bad("kappa", "lengthscale kappa must be positive")
        if self.noise_variance < 0:
            bad("noise_variance", "must be nonnegative")
        for name in ("num_features", "target_features"):
            v = getattr(self, name)
            if v < 2 or v % 2:
                bad(name, "must be a positive even integer")
        if self.batch_size < 1:
            bad("batch_size", "must be >= 1")
        if self.num_evals < 0:
            bad("num_evals", "must be >= 0")
        if self.num_candidates < 1:
            bad("num_candidates", "must be >= 1")
        if self.refine_steps < 0:
            bad("refine_steps", "must be >= 0")
        if self.refit_every < 1:
            bad("refit_every", "must be >= 1")
        if self.ucb_c < 0:
            bad("ucb_c", "must be nonnegative")
        return self

    @property
    def kappa(self):
        if self.lengthscale is not None:
            return self.lengthscale
        d = 2 if self.domain == "sphere2" else self.dim
        return float(np.sqrt(d / 100.0))


def _make_domain(cfg):
    if cfg.domain == "sphere2":
        return Sphere2()
    return Box(np.full(cfg.dim, cfg.lower), np.full(cfg.dim, cfg.upper))


def _make_kernel(cfg):
    if cfg.domain == "sphere2":
        return ManifoldKernel("sphere2", cfg.family, nu=None, lengthscale=cfg.kappa,
                              variance=cfg.variance)
    return StationaryKernelSpec(cfg.family, cfg.variance, cfg.kappa, cfg.dim)


def _make_target(cfg, domain, rs):
    if cfg.target == "rff":
        spec = StationaryKernelSpec(cfg.family, cfg.variance, cfg.kappa, cfg.dim)
        return BenchmarkFunction.rff_sample(spec, cfg.target_features, domain, rs,
                                            cfg.optimum_starts)
    if cfg.domain == "sphere2":
        return BenchmarkFunction.on_sphere(cfg.target, sample_sphere(1, rs)[0])
    # centre the minimizer in the box
    centre = 0.5 * (domain.lower + domain.upper)
    base = _ANALYTIC[cfg.target][1]
    return BenchmarkFunction(cfg.target, cfg.dim, centre - base)


def _build_model(cfg, kernel, X, y, noise):
    mean = float(np.mean(y)) if y.size else 0.0
    return GpModel(kernel, noise, X, y, mean)


def run_single(cfg, seed):
    """One BO run; returns its :class:`RegretTrace`."""
    rs = RandomSource(seed)
    target_rs, noise_rs, acq_rs = rs.spawn(3)
    domain = _make_domain(cfg)
    target = _make_target(cfg, domain, target_rs)
    optimum = target.optimum_value
    kernel = _make_kernel(cfg)
    noise = cfg.noise_variance
    cc = CandidateConfig(cfg.num_candidates, cfg.refine_steps)
    X = np.zeros((0, domain.dim))
    y_obs = np.zeros(0)
    y_true = np.zeros(0)
    rounds = 0
    while y_true.size < cfg.num_evals:
        p = min(cfg.batch_size, cfg.num_evals - y_true.size)
        (step_rs,) = acq_rs.spawn(1)
        if cfg.acquisition == "random":
            new = domain.sample(p, step_rs)
        else:
            model = _build_model(cfg, kernel, X, y_obs, noise)
            if cfg.acquisition == "ts":
                new = thompson_batch(model, "basis", cfg.num_features, p, cc, step_rs, domain)
            else:
                new = _acquisition_batch(model, cfg.acquisition, p, cc, step_rs, domain,
                                         cfg.ucb_c)
        f_new = target(new)
        obs = f_new + np.sqrt(cfg.noise_variance) * noise_rs.standard_normal(p)
        X = np.vstack([X, new])
        y_true = np.concatenate([y_true, f_new])
        y_obs = np.concatenate([y_obs, obs])
        rounds += 1
        if (cfg.refit and cfg.acquisition != "random" and y_obs.size >= 2
                and rounds % cfg.refit_every == 0):
            model = _build_model(cfg, kernel, X, y_obs, noise)
            model = fit_hyperparameters(model, FitConfig(max_iters=cfg.fit_iters))
            kernel, noise = model.kernel, model.noise_variance
    return RegretTrace(int(seed), X, y_obs, y_true, float(optimum))


def run_bo(cfg, executor=None):
    """Run every seed in ``cfg.seeds``; traces come back in seed order."""
    cfg.validate()
    if executor is None:
        return [run_single(cfg, s) for s in cfg.seeds]
    return list(executor.map(lambda s: run_single(cfg, s), cfg.seeds))


# ---------------------------------------------------------------- bandits


@dataclass(frozen=True, eq=False)
class BanditInstance:
    """Bernoulli arms with success probabilities ``means``."""

    means: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.means, dtype=float))
        if m.size < 1 or np.any((m < 0) | (m > 1)):
            raise ValueError("need at least one arm with mean in [0, 1]")
        object.__setattr__(self, "means", m)

    @property
    def K(self):
        return self.means.size

    @property
    def gaps(self):
        return self.means.max() - self.means


def bandit_ucb_sim(b, T, rs):
    """Hoeffding UCB on a Bernoulli bandit.

    Plays each arm once, then ``argmax mu_hat + sqrt(2 ln T / n)`` with ties
    to the lowest index. Returns cumulative pseudo-regret per round (regret
    counted as ``sum_x gap(x) n_t(x)``) and final pull counts.
    """
    K = b.K
    if T < K:
        raise ValueError(f"need T >= K (got T={T}, K={K})")
    rewards = rs.uniform(size=(T, K)) < b.means
    c = ucb_schedule(T) if T > 1 else 0.0
    counts = np.zeros(K, dtype=np.int64)
    sums = np.zeros(K)
    arms = np.empty(T, dtype=np.int64)
    for t in range(T):
        if t < K:
            x = t
        else:
            x = int(np.argmax(sums / counts + c * np.sqrt(1.0 / counts)))
        arms[t] = x
        counts[x] += 1
        sums[x] += rewards[t, x]
    return np.cumsum(b.gaps[arms]), counts


def bandit_random_sim(b, T, rs):
    """Uniform random policy; same outputs as :func:`bandit_ucb_sim`."""
    arms = rs.generator.integers(0, b.K, size=T)
    return np.cumsum(b.gaps[arms]), np.bincount(arms, minlength=b.K)
