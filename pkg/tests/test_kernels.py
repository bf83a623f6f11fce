import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gammaln, kve

from pathgp.errors import DimensionMismatch
from pathgp.kernels import Family, StationaryKernelSpec, kernel_eval, kernel_matrix

FAMILIES = [f.value for f in Family]


def bessel_matern(nu, r, kappa=1.0, variance=1.0):
    """General-nu Matérn via the modified Bessel function (independent oracle)."""
    s = np.sqrt(2 * nu) * r / kappa
    log_k = (1 - nu) * np.log(2) - gammaln(nu) + nu * np.log(s) + np.log(kve(nu, s)) - s
    return variance * np.exp(log_k)


def test_zero_distance_gives_variance():
    for fam in FAMILIES:
        spec = StationaryKernelSpec(fam, 2.5, 0.3, 2)
        assert kernel_eval(spec, [0.1, 0.2], [0.1, 0.2]) == 2.5


def test_frozen_values():
    spec = StationaryKernelSpec("matern12", 1.0, 1.0, 1)
    assert np.isclose(kernel_eval(spec, 0.0, 1.0), 0.36787944117144233, rtol=1e-12)
    spec = StationaryKernelSpec("matern32", 1.0, 1.0, 1)
    assert np.isclose(kernel_eval(spec, 0.0, 1.0), 0.4833577245965077, rtol=1e-12)


@pytest.mark.parametrize("fam,nu", [("matern12", 0.5), ("matern32", 1.5), ("matern52", 2.5)])
def test_matches_bessel_oracle(fam, nu):
    r = np.linspace(0.01, 4.0, 50)
    spec = StationaryKernelSpec(fam, 1.7, 0.8, 1)
    np.testing.assert_allclose(spec.from_distance(r), bessel_matern(nu, r, 0.8, 1.7),
                               rtol=1e-10)


def test_se_matches_large_nu_bessel_oracle():
    r = np.linspace(0.2, 2.0, 20)
    se = StationaryKernelSpec("se", 1.0, 0.7, 1).from_distance(r)
    assert np.max(np.abs(bessel_matern(200.0, r, 0.7) - se)) < 5e-3


def test_dimension_mismatch():
    spec = StationaryKernelSpec("se", 1.0, 1.0, 2)
    with pytest.raises(DimensionMismatch):
        kernel_eval(spec, [0.0], [0.0, 1.0])
    with pytest.raises(DimensionMismatch):
        spec.matrix(np.zeros((3, 3)))


def test_invalid_parameters():
    with pytest.raises(ValueError):
        StationaryKernelSpec("se", -1.0, 1.0, 1)
    with pytest.raises(ValueError):
        StationaryKernelSpec("se", 1.0, 0.0, 1)
    with pytest.raises(ValueError):
        StationaryKernelSpec("matern72", 1.0, 1.0, 1)


def test_matrix_examples(rs):
    spec = StationaryKernelSpec("matern52", 1.3, 0.5, 3)
    np.testing.assert_array_equal(spec.matrix(np.zeros((1, 3))), [[1.3]])
    X = rs.standard_normal((20, 3))
    K = spec.matrix(X)
    assert np.max(np.abs(K - K.T)) <= 1e-12
    assert np.linalg.eigvalsh(K).min() >= -1e-8
    np.testing.assert_allclose(kernel_matrix(spec, X, X[::-1]), K[:, ::-1], atol=1e-15)
    np.testing.assert_allclose(K[2, 5], kernel_eval(spec, X[2], X[5]), rtol=1e-14)


@given(st.sampled_from(FAMILIES), st.integers(1, 30), st.integers(1, 5),
       st.floats(0.05, 5.0), st.integers(0, 10_000))
def test_gram_is_psd(fam, n, d, kappa, seed):
    X = np.random.default_rng(seed).uniform(-1, 1, (n, d))
    spec = StationaryKernelSpec(fam, 2.0, kappa, d)
    assert np.linalg.eigvalsh(spec.matrix(X)).min() >= -1e-8 * 2.0


@pytest.mark.parametrize("fam", FAMILIES)
def test_monotone_decay(fam):
    r = np.linspace(0, 10, 2001)
    k = StationaryKernelSpec(fam, 1.0, 0.7, 1).from_distance(r)
    assert np.all(np.diff(k) <= 0)


@pytest.mark.parametrize("fam", FAMILIES)
def test_lengthscale_gradient_matches_finite_difference(fam, rs):
    X = rs.uniform(0, 1, (6, 2))
    spec = StationaryKernelSpec(fam, 1.4, 0.6, 2)
    h = 1e-6
    up = spec.with_params(lengthscale=0.6 * np.exp(h)).matrix(X)
    dn = spec.with_params(lengthscale=0.6 * np.exp(-h)).matrix(X)
    np.testing.assert_allclose(spec.lengthscale_grad(X), (up - dn) / (2 * h), atol=1e-7)


def test_family_parsing():
    assert Family.parse("RBF") is Family.SQUARED_EXPONENTIAL
    assert Family.from_nu(1.5) is Family.MATERN32
    assert Family.MATERN52.nu == 2.5
    with pytest.raises(ValueError):
        Family.from_nu(3.5)
