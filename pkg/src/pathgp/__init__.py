"""Gaussian processes by pathwise conditioning.

Posterior samples are built as a prior sample plus a data-dependent update.
Kernels cover Euclidean space, weighted graphs, the circle, the flat torus
and the 2-sphere; a small Bayesian optimization and bandit harness sits on
top.
"""

from .errors import (
    AlphaOutOfRange,
    ConfigError,
    DimensionMismatch,
    FramePole,
    InvalidDomain,
    InvalidEdge,
    IsolatedNode,
    NonFinite,
    NotOnManifold,
    NotPsd,
    NotSymmetric,
    ParseError,
    PathGPError,
)
from .bayesopt import BanditInstance, BenchmarkFunction, BOConfig, bandit_ucb_sim, run_bo
from .exact_gp import GpModel, fit_hyperparameters, log_marginal_likelihood, posterior_moments
from .graph import WeightedGraph, graph_gp_regress, graph_kernel_matrix, graph_spectrum
from .kernels import Family, StationaryKernelSpec, kernel_eval, kernel_matrix
from .manifold import ManifoldKernel, SphereFrame, sample_manifold_prior
from .numerics import PsdFactor, RandomSource, psd_cholesky, sym_eigendecompose
from .pathwise import pathwise_condition, sample_exact_prior
from .spectral import FourierFeatureMap, build_fem1d_prior, sample_basis_prior

__version__ = "0.1.0"

__all__ = [
    "AlphaOutOfRange", "ConfigError", "DimensionMismatch", "FramePole", "InvalidDomain",
    "InvalidEdge", "IsolatedNode", "NonFinite", "NotOnManifold", "NotPsd", "NotSymmetric",
    "ParseError", "PathGPError",
    "BanditInstance", "BenchmarkFunction", "BOConfig", "bandit_ucb_sim", "run_bo",
    "GpModel", "fit_hyperparameters", "log_marginal_likelihood", "posterior_moments",
    "WeightedGraph", "graph_gp_regress", "graph_kernel_matrix", "graph_spectrum",
    "Family", "StationaryKernelSpec", "kernel_eval", "kernel_matrix",
    "ManifoldKernel", "SphereFrame", "sample_manifold_prior",
    "PsdFactor", "RandomSource", "psd_cholesky", "sym_eigendecompose",
    "pathwise_condition", "sample_exact_prior",
    "FourierFeatureMap", "build_fem1d_prior", "sample_basis_prior",
]
