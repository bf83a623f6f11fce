"""Interpolating node values on a road-like graph.

Builds a perturbed grid graph, observes a smooth signal at a few nodes and
predicts the rest with a graph Matérn kernel.
"""

import numpy as np

from pathgp import RandomSource
from pathgp.graph import graph_gp_regress, graph_kernel_matrix, graph_spectrum, road_like_graph


def main():
    rs = RandomSource(3)
    g, pos = road_like_graph(8, 10, rs)
    truth = np.sin(pos[:, 0] / 2.0) + np.cos(pos[:, 1] / 3.0)

    observed = np.sort(rs.generator.choice(g.node_count, size=15, replace=False))
    data = [(int(i), float(truth[i])) for i in observed]

    spec = graph_spectrum(g)
    for nu in (0.5, 1.5, 3.0):
        K = graph_kernel_matrix(spec, "matern", nu=nu, lengthscale=2.0)
        mean, std = graph_gp_regress(K, data, noise_variance=1e-3)
        hidden = np.setdiff1d(np.arange(g.node_count), observed)
        rmse = np.sqrt(np.mean((mean[hidden] - truth[hidden]) ** 2))
        print(f"nu={nu:3.1f}: RMSE on unobserved nodes {rmse:.3f}, "
              f"mean std there {std[hidden].mean():.3f}, at observed {std[observed].mean():.3f}")

    # prior variance is not uniform on a graph: poorly connected nodes vary more
    K = graph_kernel_matrix(spec, "matern", nu=1.5, lengthscale=2.0)
    deg = g.degrees()
    print("\nprior variance vs degree (lowest and highest degree node):",
          f"{K[np.argmin(deg), np.argmin(deg)]:.3f} / {K[np.argmax(deg), np.argmax(deg)]:.3f}")


if __name__ == "__main__":
    main()
