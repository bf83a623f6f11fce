"""Matérn kernels and vector fields on the sphere.

Evaluates the kernel along a great circle, draws a Karhunen-Loève prior
sample, and builds a tangent vector field from three scalar samples.
"""

import numpy as np

from pathgp import ManifoldKernel, RandomSource, SphereFrame, sample_manifold_prior
from pathgp.manifold import geodesic_distance, sample_sphere, sample_vector_field


def main():
    rs = RandomSource(1)
    k = ManifoldKernel("sphere2", "matern", nu=1.5, lengthscale=0.5)
    print(f"truncation L={k.levels}, tail ratio {k.tail_ratio:.1e}")

    north = np.array([0.0, 0.0, 1.0])
    for t in np.linspace(0, np.pi, 7):
        x = np.array([np.sin(t), 0.0, np.cos(t)])
        print(f"  d={geodesic_distance('sphere2', north, x):.3f}  k={k(north, x):+.4f}")

    f = sample_manifold_prior(ManifoldKernel("sphere2", "matern", 2.5, 0.5, levels=30,
                                             auto_truncate=False), rs)
    X = sample_sphere(5, rs)
    print("\nprior sample at five random points:", np.round(f(X), 3))

    scalar = ManifoldKernel("sphere2", "matern", 2.5, 0.5, levels=30, auto_truncate=False)
    field = sample_vector_field(SphereFrame(), scalar, rs)
    X = X[np.abs(X[:, 2]) < 0.99]
    V = field.tangent_vectors(X)
    print("tangent field, |v . x| per point:", np.abs(np.sum(V * X, axis=1)).max())


if __name__ == "__main__":
    main()
