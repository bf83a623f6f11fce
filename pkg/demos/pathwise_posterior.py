"""Posterior sampling by pathwise conditioning.

Draws a random Fourier feature prior, conditions each path on data with
Matheron's update, and compares the sample moments with the closed-form
posterior. Then shows how the error shrinks as the number of features grows.

Run with ``python3 demos/pathwise_posterior.py``.
"""

import numpy as np

from pathgp import FourierFeatureMap, GpModel, RandomSource, StationaryKernelSpec
from pathgp.exact_gp import posterior_moments
from pathgp.pathwise import pathwise_condition, pathwise_w2_error
from pathgp.spectral import sample_basis_prior


def main():
    rs = RandomSource(0)
    spec = StationaryKernelSpec("matern52", variance=1.0, lengthscale=0.2, dim=1)
    X = rs.uniform(0, 1, (8, 1))
    y = np.sin(6 * X[:, 0])
    model = GpModel(spec, 1e-3, X, y)
    grid = np.linspace(0, 1, 11)[:, None]

    fmap = FourierFeatureMap.sample(spec, 2048, rs)
    prior = sample_basis_prior(fmap, rs, num_samples=2000)
    paths = pathwise_condition(model, prior, rs)(grid)
    mean, var = posterior_moments(model, grid, full_cov=False)

    print(f"{'x':>5} {'mean':>8} {'MC mean':>8} {'std':>7} {'MC std':>7}")
    for x, m, mm, s, ms in zip(grid[:, 0], mean, paths.mean(1), np.sqrt(var), paths.std(1)):
        print(f"{x:5.2f} {m:8.4f} {mm:8.4f} {s:7.4f} {ms:7.4f}")

    # each path is an ordinary function: evaluate one anywhere, no re-sampling
    single = pathwise_condition(model, sample_basis_prior(fmap, rs), rs)
    print("\none path at 0.123 and 0.456:", single(np.array([[0.123], [0.456]])))

    print("\nmean 1-D W2 to the exact posterior, by feature count")
    for ell in (16, 64, 256, 1024):
        w2 = [pathwise_w2_error(model, FourierFeatureMap.sample(spec, ell, RandomSource(s)),
                                grid).mean() for s in range(10)]
        print(f"  {ell:5d} features: {np.median(w2):.4f}")


if __name__ == "__main__":
    main()
