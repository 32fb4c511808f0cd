import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_array_equal

from wickwave.gaussian_fields import (
    BLOCK,
    sample_mu,
    sample_mu_ensemble,
    sample_wiener,
    standard_normals,
    white_noise_functional,
)
from wickwave.renormalization import hermite
from wickwave.spectral_basis import SpectralField, build_basis


@pytest.fixture(scope="module")
def torus():
    return build_basis("torus", 20.0)


def test_constant_mode_variance_and_centering(torus):
    M = 100_000
    a, b = sample_mu_ensemble(torus, 11, M)
    v = a[:, 0].var()
    assert abs(v - 1.0) <= 3 * math.sqrt(2 / M)
    assert np.all(np.abs(a.mean(axis=0)) <= 3 / math.sqrt(M) / torus.bracket + 1e-12)
    assert np.all(np.abs(b.mean(axis=0)) <= 3 / math.sqrt(M) * 1.5)


def test_expected_negative_sobolev_norm(torus):
    M = 20_000
    s = -0.25
    a, _ = sample_mu_ensemble(torus, 12, M)
    sq = ((a * torus.bracket**s) ** 2).sum(axis=1)
    exact = (torus.bracket ** (2 * s - 2)).sum()
    se = sq.std(ddof=1) / math.sqrt(M)
    assert abs(sq.mean() - exact) < 4 * se


def test_draws_are_chunk_and_thread_independent(torus):
    a1, b1 = sample_mu_ensemble(torus, 5, 600, threads=1)
    a4, b4 = sample_mu_ensemble(torus, 5, 600, threads=4)
    assert_array_equal(a1, a4)
    assert_array_equal(b1, b4)
    part, _ = sample_mu_ensemble(torus, 5, range(300, 400))
    assert_array_equal(part, a1[300:400])
    single = sample_mu(torus, 5, 417)
    assert_array_equal(single.u0.coeffs, a1[417])


def test_mode_prefix_property():
    small, big = build_basis("sphere", 6.0), build_basis("sphere", 12.0)
    a_s, _ = sample_mu_ensemble(small, 3, 10)
    a_b, _ = sample_mu_ensemble(big, 3, 10)
    assert_array_equal(a_s, a_b[:, : small.n_modes])
    p_s = sample_wiener(small, 1.0, 0.01, 3, 4).increments()
    p_b = sample_wiener(big, 1.0, 0.01, 3, 4).increments()
    assert_array_equal(p_s, p_b[:, : small.n_modes])


def test_seeds_and_purposes_decorrelate():
    x = standard_normals(1, "mu0", range(4), 50)
    assert not np.array_equal(x, standard_normals(2, "mu0", range(4), 50))
    assert not np.array_equal(x, standard_normals(1, "mu1", range(4), 50))
    assert_array_equal(x, standard_normals(1, "mu0", range(4), 50))


def test_wiener_endpoint_variance_and_independence():
    M, T = 10_000, 0.7
    path = sample_wiener(6, T, 0.05, 21, M)
    beta = path.endpoint()
    tol = 3 * T * math.sqrt(2 / M)
    assert np.all(np.abs(beta.var(axis=0) - T) <= tol)
    c = beta[:, 0] @ beta[:, 1] / M
    assert abs(c) <= 4 * T / math.sqrt(M)


def test_single_increment_when_dt_equals_T():
    path = sample_wiener(3, 0.4, 0.4, 2, 50_000)
    inc = path.increments()
    assert inc.shape == (50_000, 3, 1)
    assert abs(inc[:, 0, 0].var() - 0.4) <= 3 * 0.4 * math.sqrt(2 / 50_000)


def test_steps_cross_block_boundaries_consistently():
    n = BLOCK + 37
    path = sample_wiener(4, n * 0.01, 0.01, 8, 3)
    inc = path.increments()
    stepped = np.stack([d for _, d in path.steps()], axis=2)
    assert inc.shape[2] == n
    assert_array_equal(inc, stepped)
    sub = path.subset([1]).increments()
    assert_array_equal(sub[0], inc[1])


@pytest.mark.parametrize("T, dt", [(1.0, 0.0), (1.0, -0.1), (1.0, 0.3)])
def test_wiener_rejects_bad_mesh(T, dt):
    with pytest.raises(ValueError):
        sample_wiener(3, T, dt, 0, 1)


def _orthonormal_pair(basis, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((basis.n_modes, 2)))
    return q[:, 0], q[:, 1]


def test_white_noise_functional_isometry(torus):
    M = 40_000
    f, g = _orthonormal_pair(torus, 2)
    xi = standard_normals(4, "xi0", range(M), torus.n_modes)
    wf = white_noise_functional(SpectralField(f, torus), xi)
    wg = white_noise_functional(g, xi)
    assert abs(wf.var() - 1) <= 4 * math.sqrt(2 / M)
    prod = wf * wg
    assert abs(prod.mean()) <= 4 * prod.std() / math.sqrt(M)


@pytest.mark.parametrize("cosine", [0.0, 0.4, 0.8])
def test_second_chaos_correlation(torus, cosine):
    M = 40_000
    f, g0 = _orthonormal_pair(torus, 3)
    g = cosine * f + math.sqrt(1 - cosine**2) * g0
    xi = standard_normals(6, "xi0", range(M), torus.n_modes)
    x = hermite(2, white_noise_functional(f, xi)) * hermite(2, white_noise_functional(g, xi))
    se = x.std(ddof=1) / math.sqrt(M)
    assert abs(x.mean() - 2 * cosine**2) < 4 * se


@settings(max_examples=10, deadline=None)
@given(k=st.integers(0, 4), l=st.integers(0, 4))
def test_hermite_product_orthogonality(k, l):
    M = 20_000
    b = build_basis("torus", 10.0)
    f, g0 = _orthonormal_pair(b, 9)
    c = 0.6
    g = c * f + math.sqrt(1 - c * c) * g0
    xi = standard_normals(10, "xi0", range(M), b.n_modes)
    x = hermite(k, white_noise_functional(f, xi)) * hermite(l, white_noise_functional(g, xi))
    exact = math.factorial(k) * c**k if k == l else 0.0
    se = x.std(ddof=1) / math.sqrt(M)
    if se == 0:
        assert x.mean() == exact
    else:
        assert abs(x.mean() - exact) < 4 * se
