import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate, stats

from wickwave.dynamics import EquationSpec, evolve_ensemble
from wickwave.gaussian_fields import sample_mu_ensemble, sample_wiener
from wickwave.gibbs import (
    LowESSError,
    default_observables,
    effective_sample_size,
    exact_potential_cauchy,
    gibbs_convergence_scan,
    invariance_test,
    quadratic_potential_variance,
    sample_gibbs,
    weighted_ks,
    weighted_mean,
)
from wickwave.renormalization import gibbs_potential_batch, hermite
from wickwave.spectral_basis import build_basis


@pytest.mark.parametrize("manifold", ["torus", "sphere"])
def test_single_mode_normalizer_matches_quadrature(manifold):
    b = build_basis(manifold, 10.0)
    N = 0.9 * math.sqrt(b.lambda_sq[1])
    phi0 = 1 / math.sqrt(b.area)
    sig = phi0**2

    def integrand(g):
        return stats.norm.pdf(g) * math.exp(-b.area / 4 * hermite(4, g * phi0, sig))

    exact, _ = integrate.quad(integrand, -np.inf, np.inf, epsabs=1e-13)
    ens = sample_gibbs(b, N, 3, 20_000, seed=3)
    Z, se = ens.Z
    assert abs(Z - exact) < 4 * se


def test_weights_are_positive_and_normalizer_is_stable():
    b = build_basis("torus", 12.0)
    small = sample_gibbs(b, 12.0, 3, 10_000, seed=8)
    big = sample_gibbs(b, 12.0, 3, 20_000, seed=9)
    assert small.weights.min() > 0
    (z1, s1), (z2, s2) = small.Z, big.Z
    assert abs(z1 - z2) < 3 * math.hypot(s1, s2)


def test_even_k_and_low_ess_are_rejected():
    b = build_basis("torus", 12.0)
    with pytest.raises(ValueError):
        sample_gibbs(b, 12.0, 2, 100, seed=0)
    with pytest.raises(LowESSError):
        sample_gibbs(b, 12.0, 3, 1000, seed=0, ess_floor=0.999)


def test_quadratic_potential_variance_identity():
    b = build_basis("torus", 20.0)
    N, M = 14.0, 40_000
    a, _ = sample_mu_ensemble(b, 12, M)
    G = gibbs_potential_batch(a, b, N, 1)
    exact = quadratic_potential_variance(b, N)
    v = G.var(ddof=1)
    # SE of a sample variance from the fourth central moment
    c = G - G.mean()
    se = math.sqrt(((c**2 - v) ** 2).mean() / M)
    assert abs(v - exact) < 4 * se


def test_potential_telescoping_is_exact():
    b = build_basis("torus", 16.0)
    a, _ = sample_mu_ensemble(b, 2, 5)
    g = gibbs_potential_batch(a, b, 8.0, 3)
    assert np.all(g - gibbs_potential_batch(a, b, 8.0, 3) == 0)


def test_convergence_scan_matches_exact_values_and_decreases():
    ladder = [4.0, 8.0]
    mc = gibbs_convergence_scan("torus", 3, ladder, 4000, seed=1)
    for row in mc:
        ex = exact_potential_cauchy("torus", 3, row["N"], 2 * row["N"])
        assert abs(row["rms"] - ex) < 4 * row["se"] + 1e-12
    assert mc[1]["rms"] < mc[0]["rms"]


def test_exact_cauchy_of_identical_cutoffs_is_zero():
    assert exact_potential_cauchy("torus", 3, 6.0, 6.0) == 0.0


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(20, 200), m=st.integers(20, 200))
def test_unit_weight_ks_matches_scipy(seed, n, m):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(n), rng.standard_normal(m) + 0.3
    D, p = weighted_ks(x, np.ones(n), y, np.ones(m))
    ref = stats.ks_2samp(x, y, method="asymp")
    assert_allclose(D, ref.statistic, rtol=1e-12)
    en = math.sqrt(n * m / (n + m))
    assert_allclose(p, stats.kstwobign.sf(en * ref.statistic), rtol=1e-10)


def test_weighted_ks_equals_expanded_unit_sample():
    # integer weights are the same as repeating samples
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal(30), rng.standard_normal(40)
    wx = rng.integers(1, 4, 30).astype(float)
    D, _ = weighted_ks(x, wx, y, np.ones(40))
    ref = stats.ks_2samp(np.repeat(x, wx.astype(int)), y).statistic
    assert_allclose(D, ref, rtol=1e-12)


def test_effective_sample_size_and_weighted_mean():
    assert effective_sample_size(np.ones(50)) == 50
    assert_allclose(effective_sample_size(np.r_[1.0, np.zeros(9)]), 1.0)
    x = np.arange(5.0)
    m, se = weighted_mean(x, np.ones(5))
    assert_allclose(m, 2.0)
    assert_allclose(se, x.std() / math.sqrt(5))


def test_weighted_mean_of_weight_independent_observable():
    b = build_basis("torus", 30.0)
    N = 10.0
    ens = sample_gibbs(b, N, 3, 10_000, seed=21)
    high = ens.basis.lam > math.sqrt(2) * N  # modes the weight never sees
    f = np.tanh(ens.a[:, high][:, 0] * ens.basis.bracket[high][0])
    mw, _ = weighted_mean(f, ens.weights)
    mu = f.mean()
    # paired difference removes the common sampling noise
    d = f * (ens.weights / ens.weights.mean() - 1)
    assert abs(mw - mu) < 4 * d.std(ddof=1) / math.sqrt(f.size) + 1e-12


def test_observables_are_bounded():
    b = build_basis("torus", 12.0)
    spec = EquationSpec("SDNLW_truncNonlin", 3, 12.0)
    a, v = sample_mu_ensemble(b, 0, 500)
    for o in default_observables(b, spec):
        vals = o(a * 50, v * 50)
        lo, hi = o.bounds
        assert np.all((vals >= lo) & (vals <= hi)), o.name


def test_small_invariance_run_passes():
    b = build_basis("torus", 8.0)
    rep = invariance_test(b, 8.0, 3, 0.5, 0.01, 2000, seed=4)
    assert rep.passed, (rep.max_abs_z, rep.min_ks_p)
    assert rep.ess > 100
    assert {r["t"] for r in rep.rows} == {0.25, 0.5}


def test_time_shift_composition():
    b = build_basis("torus", 8.0)
    N, M, dt = 8.0, 3000, 0.02
    spec = EquationSpec("SDNLW_truncNonlin", 3, N)
    ens = sample_gibbs(b, N, 3, M, seed=6)
    kw = dict(method="direct", scheme="exact", record_every=10**6)
    one = evolve_ensemble(spec, b, (ens.a, ens.b), sample_wiener(b, 1.0, dt / 2, 6, M, "one"), 1.0, dt, **kw)
    h1 = evolve_ensemble(spec, b, (ens.a, ens.b), sample_wiener(b, 0.5, dt / 2, 6, M, "leg1"), 0.5, dt, **kw)
    h2 = evolve_ensemble(spec, b, (h1.a[-1], h1.b[-1]), sample_wiener(b, 0.5, dt / 2, 6, M, "leg2"), 0.5, dt, **kw)
    for o in default_observables(b, spec):
        m1, s1 = weighted_mean(o(one.a[-1], one.b[-1]), ens.weights)
        m2, s2 = weighted_mean(o(h2.a[-1], h2.b[-1]), ens.weights)
        assert abs(m1 - m2) < 4 * math.hypot(s1, s2), o.name
