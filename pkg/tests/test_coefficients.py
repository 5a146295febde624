from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpmanifold.coefficients import (
    CUTOFF_SLOPE,
    SATURATING_SLOPE,
    NonlinearPair,
    TruncatedPair,
    audit_lipschitz,
    cutoff_profile,
    cutoff_profile_prime,
    cutoff_radius,
    holder_norm,
    saturating,
    saturating_prime,
    saturating_second,
    scale_amplitudes,
    second_difference_G,
)
from lpmanifold.spectral import SpectralModel

MODEL = SpectralModel.shifted_laplacian(6, 2.5, 1.0, -1.0)
PAIR = NonlinearPair(MODEL, 0.3, 0.2)
vectors = st.lists(st.floats(-3, 3, allow_subnormal=False), min_size=6, max_size=6).map(np.array)


def test_saturating_profile():
    x = np.linspace(-5, 5, 1001)
    np.testing.assert_allclose(saturating(-x), -saturating(x))
    assert saturating(0.0) == 0 and saturating_prime(0.0) == 0
    assert SATURATING_SLOPE == pytest.approx(9 / 8, rel=1e-6)
    h = 1e-6
    np.testing.assert_allclose(saturating_prime(x), (saturating(x + h) - saturating(x - h)) / (2 * h), atol=1e-8)
    np.testing.assert_allclose(
        saturating_second(x), (saturating_prime(x + h) - saturating_prime(x - h)) / (2 * h), atol=1e-7
    )


def test_cutoff_profile():
    r = np.linspace(0, 2, 2001)
    psi = cutoff_profile(r)
    assert np.all(psi[r <= 0.5] == 1) and np.all(psi[r >= 1] == 0)
    assert np.all(np.diff(psi) <= 0)
    assert np.max(np.abs(cutoff_profile_prime(r))) == pytest.approx(CUTOFF_SLOPE)
    h = 1e-7
    np.testing.assert_allclose(cutoff_profile_prime(r[1:-1]), (cutoff_profile(r[1:-1] + h) - cutoff_profile(r[1:-1] - h)) / (2 * h), atol=1e-6)


def test_flat_at_zero():
    z = np.zeros(6)
    assert np.all(PAIR.drift(z) == 0)
    assert np.all(PAIR.diffusion(z) == 0)
    v = np.ones(6)
    assert np.all(PAIR.drift_derivative(z, v) == 0)
    assert np.all(PAIR.diffusion_derivative_apply(z, v, v) == 0)


@given(vectors, vectors)
@settings(max_examples=60, deadline=None)
def test_global_lipschitz(u, v):
    d = np.linalg.norm(u - v)
    assert np.linalg.norm(PAIR.drift(u) - PAIR.drift(v)) <= PAIR.lipschitz_F * d * (1 + 1e-12) + 1e-14
    dw = np.linalg.norm(PAIR.weights * (u - v))
    dG = np.linalg.norm(PAIR.diffusion(u) - PAIR.diffusion(v))
    assert dG <= PAIR.lipschitz_G * dw * (1 + 1e-12) + 1e-14


@given(vectors)
@settings(max_examples=60, deadline=None)
def test_quadratic_smallness(u):
    # |F(u)| <= const |u|^2: the derivative vanishes at zero
    n = np.linalg.norm(u)
    assert np.linalg.norm(PAIR.drift(u)) <= PAIR.eps_F * 2 * n * n + 1e-14


def test_diffusion_apply_matches_matrix():
    rng = np.random.default_rng(0)
    u, d = rng.standard_normal((2, 6))
    np.testing.assert_allclose(PAIR.diffusion_apply(u, d), PAIR.diffusion(u) @ d, atol=1e-15)


def test_derivatives_against_finite_differences():
    rng = np.random.default_rng(1)
    u, v, d = rng.standard_normal((3, 6))
    h = 1e-6
    fd_F = (PAIR.drift(u + h * v) - PAIR.drift(u - h * v)) / (2 * h)
    np.testing.assert_allclose(PAIR.drift_derivative(u, v), fd_F, atol=1e-8)
    fd_G = (PAIR.diffusion_apply(u + h * v, d) - PAIR.diffusion_apply(u - h * v, d)) / (2 * h)
    np.testing.assert_allclose(PAIR.diffusion_derivative_apply(u, v, d), fd_G, atol=1e-8)


def test_audit_within_declared_constants():
    report = audit_lipschitz(PAIR, 0.5)
    assert report["sampled_F"] <= report["global_F"]
    assert report["sampled_G"] <= report["global_G"]
    assert report["sampled_F"] <= report["declared_local_F"] * (1 + 1e-12)
    assert report["sampled_G"] <= report["declared_local_G"] * (1 + 1e-12)
    assert report["second_difference_G"] <= 1.0


@given(vectors, vectors, vectors, vectors)
@settings(max_examples=60, deadline=None)
def test_second_difference_bound(u1, v1, u2, v2):
    for pair in (PAIR, NonlinearPair(MODEL, 0.3, 0.2, scale=0.5), NonlinearPair(MODEL, 0.3, 0.2, linear=True)):
        lhs, bound = second_difference_G(pair, u1, v1, u2, v2)
        assert lhs <= bound * (1 + 1e-12) + 1e-14


def test_second_difference_pairs_u1_minus_v1_with_u2_minus_v2():
    # for linear G the combination u1 - v1 - u2 + v2 is the whole story
    lin = NonlinearPair(MODEL, 0.3, 0.2, linear=True)
    rng = np.random.default_rng(7)
    u1, v1, d = rng.standard_normal((3, 6))
    lhs, bound = second_difference_G(lin, u1, v1, u1 + d, v1 + d)
    assert lhs < 1e-14 and bound < 1e-14
    lhs, _ = second_difference_G(lin, u1, v1, v1 + d, u1 + d)
    assert lhs > 1e-3


def test_linear_and_uncoupled_variants():
    lin = NonlinearPair(MODEL, 0.5, 0.5, linear=True, coupling=False)
    u = np.arange(6.0)
    np.testing.assert_allclose(lin.drift(u), 0.5 * u)
    assert lin.local_F == np.inf
    un = NonlinearPair(MODEL, 0.5, 0.5, coupling=False)
    np.testing.assert_allclose(un.drift(u), 0.5 * saturating(u))
    with pytest.raises(ValueError):
        NonlinearPair(MODEL, -1.0, 0.0)


def test_holder_norm_examples():
    n = 16
    t = np.linspace(0, 1, n + 1)
    assert holder_norm(np.zeros((n + 1, 2)), 1 / n, None, 0.6) == 0
    const = np.tile([3.0, 4.0], (n + 1, 1))
    assert holder_norm(const, 1 / n, None, 0.6) == pytest.approx(5.0)
    assert holder_norm(const, 1 / n, None, 0.6, rho=2.0) == pytest.approx(5.0)
    lin = np.outer(t, [1.0, 0.0])
    # sup 1 plus the widest Hoelder quotient 1/1^beta
    assert holder_norm(lin, 1 / n, None, 0.6) == pytest.approx(2.0)


def _path(scale, seed=0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, 17)[:, None]
    base = np.sin(2 * t + rng.uniform(0, 3, 6)) * rng.standard_normal(6)
    return scale * base / holder_norm(base, 1 / 16, PAIR.weights, PAIR.beta)


def test_truncation_identity_and_vanishing():
    tp = TruncatedPair(PAIR, 1.0)
    small = _path(0.4)
    np.testing.assert_array_equal(tp.drift(small, 1 / 16), PAIR.drift(small))
    big = _path(1.2)
    assert np.all(tp.drift(big, 1 / 16) == 0)
    assert np.all(tp.diffusion_apply(big[:-1], np.ones((16, 6)), 1 / 16) == 0)
    with pytest.raises(ValueError):
        TruncatedPair(PAIR, 0.0)


def test_cutoff_derivative_matches_finite_difference():
    tp = TruncatedPair(PAIR, 1.0)
    u = _path(0.75, seed=2)
    v = np.random.default_rng(3).standard_normal(u.shape) * 0.1
    h = 1e-7
    _, dchi = tp.cutoff_derivative(u, v, 1 / 16)
    fd = (tp.truncate(u + h * v, 1 / 16) - tp.truncate(u - h * v, 1 / 16)) / (2 * h)
    np.testing.assert_allclose(dchi, fd, atol=1e-6)


def test_cutoff_radius_formula():
    sn = np.array([0.0, 1.0, 3.0])
    R = cutoff_radius(sn, 0.2, PAIR, 1.5)
    cS = MODEL.c_S
    np.testing.assert_allclose(R, 0.2 / (cS * PAIR.local_F + cS * 1.5 * PAIR.local_G * sn))
    assert R[0] == pytest.approx(0.2 / (cS * PAIR.local_F))
    np.testing.assert_allclose(cutoff_radius(sn, 0.4, PAIR, 1.5), 2 * R)
    assert np.all(np.isinf(cutoff_radius(sn, 0.2, NonlinearPair(MODEL, 0, 0), 1.0)))


def test_scale_amplitudes_reaches_target():
    sn = np.array([1.0, 2.5, 1.7])
    pair, trail = scale_amplitudes(NonlinearPair(MODEL, 1.0, 1.0), sn, 0.15, 1.0, 0.5)
    assert np.min(cutoff_radius(sn, 0.15, pair, 1.0)) >= 0.5
    assert trail[-1][2] >= 0.5 > trail[-2][2]
    assert pair.eps_F == pytest.approx(2.0 ** -(len(trail) - 1))
