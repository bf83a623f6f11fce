"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before
asserting, and also checks its wall-clock budget.
"""

import time

import numpy as np
import pytest

from conftest import mc_se, record
from pathgp.bayesopt import BanditInstance, BOConfig, bandit_random_sim, bandit_ucb_sim, run_bo
from pathgp.exact_gp import GpModel, lml_gradient, log_marginal_likelihood, posterior_moments
from pathgp.graph import (WeightedGraph, erdos_renyi, graph_kernel_matrix, graph_spectrum,
                          random_walk_limit_check)
from pathgp.kernels import StationaryKernelSpec, profile
from pathgp.manifold import (ManifoldKernel, SphereFrame, projected_kernel_eval,
                             random_rotation, sample_sphere)
from pathgp.numerics import RandomSource
from pathgp.pathwise import (JointGaussian, condition_mvn_distributional,
                             condition_mvn_pathwise, kernel_sup_error, pathwise_condition,
                             pathwise_w2_error, sample_exact_prior, variance_starvation_report)
from pathgp.spectral import FourierFeatureMap, build_fem1d_prior

FEATURES = (16, 64, 256, 1024)


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds
        self.start = time.perf_counter()

    @property
    def elapsed(self):
        return time.perf_counter() - self.start

    def ok(self):
        return self.elapsed < self.seconds

    def __str__(self):
        return f"{self.elapsed:.1f}s of {self.seconds}s"


def gp_setup(seed=0):
    """n=8 noisy observations of a smooth function on [0, 1], Matérn-5/2."""
    rs = RandomSource(seed)
    spec = StationaryKernelSpec("matern52", 1.0, 0.2, 1)
    X = rs.uniform(0, 1, (8, 1))
    y = np.sin(6 * X[:, 0]) + 0.03 * rs.standard_normal(8)
    return GpModel(spec, 1e-3, X, y), rs


def test_c01_matheron_equivalence():
    budget = Budget(10)
    g = np.random.default_rng(101)
    rs = RandomSource(101)
    worst = 0.0
    for _ in range(20):
        k = int(g.integers(1, 5))
        m = int(g.integers(1, 7 - k))
        B = g.standard_normal((k + m, k + m + 2))
        C = B @ B.T / (k + m) + 0.05 * np.eye(k + m)
        j = JointGaussian.from_joint(g.standard_normal(k + m), C, k)
        gamma = g.standard_normal(m)
        theta, y = j.sample(rs, 100_000)
        out = condition_mvn_pathwise(j, theta, y, gamma)
        mean, cov = condition_mvn_distributional(j, gamma)
        z_mean = np.abs(out.mean(axis=0) - mean) / mc_se(out)
        c = out - out.mean(axis=0)
        prods = c[:, :, None] * c[:, None, :]
        z_cov = np.abs(prods.mean(axis=0) - cov) / mc_se(prods)
        worst = max(worst, z_mean.max(), z_cov.max())
    ok = record(1, "Matheron equivalence", worst <= 4 and budget.ok(),
                f"worst z = {worst:.2f}, {budget}")
    assert ok


def test_c02_pathwise_matches_distributional():
    budget = Budget(10)
    model, rs = gp_setup(0)
    grid = np.linspace(0, 1, 50)[:, None]
    prior = sample_exact_prior(model.kernel, model.train_inputs, grid, rs, num_samples=4096)
    paths = pathwise_condition(model, prior, rs)(grid)
    mean, var = posterior_moments(model, grid, full_cov=False)
    std = np.sqrt(var)
    emp_mean = paths.mean(axis=1)
    emp_std = paths.std(axis=1, ddof=1)
    z_mean = np.abs(emp_mean - mean) / mc_se(paths, axis=1)
    sq = (paths - emp_mean[:, None]) ** 2
    # delta method: se(std) = se(var) / (2 std)
    z_std = np.abs(emp_std - std) / (mc_se(sq, axis=1) / (2 * emp_std))
    worst = max(z_mean.max(), z_std.max())
    ok = record(2, "GP pathwise = distributional", worst <= 4 and budget.ok(),
                f"worst z = {worst:.2f}, {budget}")
    assert ok


def test_c03_rff_kernel_error_decay():
    budget = Budget(30)
    spec = StationaryKernelSpec("matern52", 1.0, 0.2, 1)
    grid = np.linspace(0, 1, 50)[:, None]
    K = spec.matrix(grid)
    errs = np.empty((20, len(FEATURES)))
    for seed in range(20):
        rs = RandomSource(seed)
        for i, ell in enumerate(FEATURES):
            F = FourierFeatureMap.sample(spec, ell, rs).features(grid)
            errs[seed, i] = kernel_sup_error(F @ F.T, K, grid)
    med = np.median(errs, axis=0)
    monotone = np.all(np.diff(med) <= 0)
    ratio = med[0] / med[-1]
    ok = record(3, "RFF kernel error decay", monotone and ratio >= 4 and budget.ok(),
                f"medians {np.round(med, 4).tolist()}, decrease {ratio:.1f}x, {budget}")
    assert ok


def test_c04_w2_monotone_in_features():
    budget = Budget(60)
    model, _ = gp_setup(0)
    grid = np.linspace(0, 1, 50)[:, None]
    med = []
    for ell in FEATURES:
        # one number per seed: the W2 of each grid marginal, averaged over the grid
        w2 = [pathwise_w2_error(model, FourierFeatureMap.sample(model.kernel, ell,
                                                               RandomSource(seed)), grid).mean()
              for seed in range(20)]
        med.append(float(np.median(w2)))
    monotone = bool(np.all(np.diff(med) <= 0))
    ok = record(4, "W2 monotone in features", monotone and budget.ok(),
                f"medians {np.round(med, 5).tolist()}, {budget}")
    assert ok


def test_c05_variance_starvation():
    budget = Budget(30)
    spec = StationaryKernelSpec("matern52", 1.0, 0.1, 1)
    sigma = np.sqrt(spec.variance)
    pw, ws = [], []
    for seed in range(20):
        rs = RandomSource(seed)
        X = rs.uniform(0, 1, (10, 1))
        y = sample_exact_prior(spec, np.zeros((0, 1)), X, rs)(X) + \
            0.03 * rs.standard_normal(10)
        rep = variance_starvation_report(GpModel(spec, 1e-3, X, y), 100, [[3.0]], rs)
        pw.append(abs(rep.pathwise_std[0] - sigma))
        ws.append(abs(rep.weightspace_std[0] - sigma))
    within = max(pw) <= 0.01 * sigma
    starved = np.median(ws) > np.median(pw)
    ok = record(5, "variance starvation", within and starved and budget.ok(),
                f"max |pathwise - sigma| = {max(pw):.2e}, median |weightspace - sigma| = "
                f"{np.median(ws):.3f}, {budget}")
    assert ok


def test_c06_graph_exactness_and_psd():
    budget = Budget(10)
    K3 = WeightedGraph(3, ((0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)))
    K = graph_kernel_matrix(graph_spectrum(K3), "matern", nu=1.0, lengthscale=np.sqrt(2.0),
                            variance=1.0, normalize_variance=False)
    exact = np.max(np.abs(K - (0.25 + 0.25 * np.eye(3))))
    rs = RandomSource(6)
    worst = np.inf
    for i in range(50):
        g = erdos_renyi(int(rs.generator.integers(2, 31)), 0.3, rs)
        Kg = graph_kernel_matrix(graph_spectrum(g), ("matern", "se")[i % 2], nu=1.5,
                                 lengthscale=1.0)
        worst = min(worst, np.linalg.eigvalsh(Kg).min())
    ok = record(6, "graph kernel exactness and PSD",
                exact <= 1e-10 and worst >= -1e-8 and budget.ok(),
                f"K3 error {exact:.1e}, min eigenvalue {worst:.2e}, {budget}")
    assert ok


def test_c07_random_walk_limit():
    budget = Budget(5)
    edges = [(i, (i + 1) % 10, 1.0 + 0.1 * i) for i in range(10)] + [(0, 5, 0.7), (2, 7, 1.3)]
    spec = graph_spectrum(WeightedGraph(10, tuple(edges)), normalized=True)
    devs = [random_walk_limit_check(spec, 1.0, s) for s in (10, 100, 1000)]
    ok = record(7, "random-walk limit", devs[0] > devs[1] > devs[2] and budget.ok(),
                f"deviations {[f'{d:.2e}' for d in devs]}, {budget}")
    assert ok


def test_c08_circle_poisson_oracle():
    budget = Budget(10)
    theta = np.linspace(-np.pi, np.pi, 100)
    shifts = 2 * np.pi * np.arange(-50, 51)
    worst = 0.0
    for nu, fam in ((0.5, "matern12"), (1.5, "matern32")):
        for kappa in (0.3, 1.0):
            k = ManifoldKernel("circle", "matern", nu, kappa)
            series = k.matrix(theta[:, None], np.zeros((1, 1)))[:, 0]
            oracle = profile(fam, np.abs(theta[:, None] + shifts) / kappa).sum(axis=1)
            oracle /= profile(fam, np.abs(shifts) / kappa).sum()
            worst = max(worst, np.max(np.abs(series - oracle)))
    ok = record(8, "circle kernel vs Poisson summation", worst <= 1e-4 and budget.ok(),
                f"max error {worst:.2e}, {budget}")
    assert ok


def test_c09_sphere_kernel():
    budget = Budget(10)
    rs = RandomSource(9)
    X = sample_sphere(50, rs)
    k = ManifoldKernel("sphere2", "matern", 1.5, 0.5)
    K = k.matrix(X)
    diag = np.array([k(x, x) for x in X])
    spread = np.max(np.abs(diag - k.variance))
    min_eig = np.linalg.eigvalsh(K).min()
    R = random_rotation(rs)
    rot = np.max(np.abs(k.matrix(X @ R.T) - K))
    ok = record(9, "sphere kernel isotropy and PSD",
                spread <= 1e-10 and min_eig >= -1e-8 and rot <= 1e-8 and budget.ok(),
                f"diag spread {spread:.1e}, min eigenvalue {min_eig:.2e}, "
                f"rotation error {rot:.1e}, {budget}")
    assert ok


def test_c10_projected_kernel_equivariance():
    budget = Budget(5)
    rs = RandomSource(10)
    k = ManifoldKernel("sphere2", "matern", 2.5, 0.7)
    X = sample_sphere(200, rs)
    X = X[np.abs(X[:, 2]) < 0.95][:40].reshape(20, 2, 3)
    coef = rs.standard_normal(3)
    rotated = SphereFrame(lambda Z: 2.0 * Z @ coef)
    worst = 0.0
    for x, x2 in X:
        A, A2 = (rotated.rotation_matrices(z[None])[0] for z in (x, x2))
        lhs = projected_kernel_eval(rotated, k, x, x2)
        rhs = A @ projected_kernel_eval(SphereFrame(), k, x, x2) @ A2.T
        worst = max(worst, np.max(np.abs(lhs - rhs)))
    ok = record(10, "projected kernel frame equivariance", worst <= 1e-10 and budget.ok(),
                f"max error {worst:.1e}, {budget}")
    assert ok


def test_c11_fem_prior():
    budget = Budget(30)
    kappa = 0.1

    def tridiagonal_symmetric(A):
        return (np.array_equal(A, A.T) and not np.any(np.triu(A, 2))
                and not np.any(np.tril(A, -2)))

    def interior_error(n_nodes):
        p = build_fem1d_prior((0.0, 1.0), n_nodes, kappa)
        x = p.node_positions
        mid = (x > 1 / 3) & (x < 2 / 3)
        C = p.weight_covariance()[np.ix_(mid, mid)]
        ref = StationaryKernelSpec("matern32", p.stationary_variance, kappa, 1)
        K = ref.matrix(x[mid, None])
        return np.linalg.norm(C - K) / np.linalg.norm(K), p

    e16, p16 = interior_error(17)
    e64, p64 = interior_error(65)
    structural = all(tridiagonal_symmetric(A) for p in (p16, p64) for A in (p.A, p.M))
    ok = record(11, "FEM prior structure and refinement",
                structural and e64 < e16 and budget.ok(),
                f"relative error h=1/16: {e16:.2e}, h=1/64: {e64:.2e}, {budget}")
    assert ok


def test_c12_bandit_regret():
    budget = Budget(60)
    rs = RandomSource(12)
    ucb, rnd, rate_long, rate_short = [], [], [], []
    for child in rs.spawn(50):
        means_rs, ucb_rs, rnd_rs, short_rs = child.spawn(4)
        b = BanditInstance(means_rs.uniform(size=10))
        r = bandit_ucb_sim(b, 10_000, ucb_rs)[0][-1]
        ucb.append(r)
        rnd.append(bandit_random_sim(b, 10_000, rnd_rs)[0][-1])
        rate_long.append(r / 10_000)
        rate_short.append(bandit_ucb_sim(b, 1_000, short_rs)[0][-1] / 1_000)
    frac = np.mean(ucb) / np.mean(rnd)
    rate = np.median(rate_long) / np.median(rate_short)
    ok = record(12, "bandit UCB regret", frac <= 0.2 and rate < 0.5 and budget.ok(),
                f"UCB/random = {frac:.3f}, R(T)/T ratio = {rate:.3f}, {budget}")
    assert ok


def final_regrets(cfg):
    return np.array([t.simple_regret[-1] for t in run_bo(cfg)])


@pytest.mark.slow
def test_c13_parallel_thompson_sampling():
    budget = Budget(300)
    base = dict(target="rff", dim=2, family="matern52", variance=1.0, noise_variance=1e-3,
                num_evals=64, batch_size=2, seeds=tuple(range(10)), refit=False)
    cfg = BOConfig(**base, acquisition="ts")
    assert cfg.kappa == pytest.approx(np.sqrt(2 / 100))
    ts = final_regrets(cfg)
    rnd = final_regrets(BOConfig(**base, acquisition="random"))
    ok = record(13, "parallel Thompson sampling beats random search",
                np.median(ts) < np.median(rnd) and budget.ok(),
                f"median regret TS {np.median(ts):.2e} vs random {np.median(rnd):.2e}, {budget}")
    assert ok


@pytest.mark.slow
def test_c14_geometry_aware_bo_on_sphere():
    budget = Budget(300)
    base = dict(target="ackley", domain="sphere2", family="matern52", num_evals=50,
                seeds=tuple(range(10)))
    ei = final_regrets(BOConfig(**base, acquisition="ei"))
    rnd = final_regrets(BOConfig(**base, acquisition="random"))
    ok = record(14, "geometry-aware BO on the sphere beats random search",
                np.median(ei) < np.median(rnd) and budget.ok(),
                f"median regret EI {np.median(ei):.3f} vs random {np.median(rnd):.3f}, {budget}")
    assert ok


def test_c15_lml_gradient_check():
    budget = Budget(10)
    worst = 0.0
    for seed in range(20):
        g = np.random.default_rng(seed)
        fam = ("matern12", "matern32", "matern52", "se")[seed % 4]
        spec = StationaryKernelSpec(fam, g.uniform(0.5, 2), g.uniform(0.2, 1.0), 2)
        X = g.uniform(0, 1, (10, 2))
        model = GpModel(spec, g.uniform(1e-3, 0.1), X, g.standard_normal(10))
        grad = lml_gradient(model)
        h = 1e-5
        for name in ("variance", "lengthscale", "noise"):
            def at(t):
                kw = {"variance": None, "lengthscale": None, "noise": None}
                cur = {"variance": spec.variance, "lengthscale": spec.lengthscale,
                       "noise": model.noise_variance}[name]
                kw[name] = cur * np.exp(t)
                return log_marginal_likelihood(model.with_hyperparameters(**kw))

            fd = (at(h) - at(-h)) / (2 * h)
            worst = max(worst, abs(grad[name] - fd) / max(abs(fd), 1e-8))
    ok = record(15, "LML gradient vs central differences", worst <= 1e-4 and budget.ok(),
                f"worst relative error {worst:.1e}, {budget}")
    assert ok
