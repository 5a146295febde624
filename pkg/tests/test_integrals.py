from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from lpmanifold.integrals import (
    FracParams,
    beta_identity,
    drift_convolution,
    fractional_integral,
    k1,
    k1_profile,
    k1_quadrature,
    k2,
    noise_convolution,
    singular_quadrature,
    weyl_left,
    weyl_right,
    young_integral,
)
from lpmanifold.noise import sample_fbm_1d

PARAMS = FracParams()


# -- exponents ------------------------------------------------------------------


def test_frac_params_defaults():
    p = FracParams()
    assert p.alpha == pytest.approx(0.45)
    assert p.alpha_prime == pytest.approx(0.725)
    assert p.young_order == pytest.approx(0.3)


@pytest.mark.parametrize(
    "kw",
    [
        dict(hurst=0.4, beta_prime=0.35, beta=0.3),
        dict(hurst=0.75, beta_prime=0.6, beta=0.7),
        dict(hurst=0.75, beta_prime=0.7, beta=0.6, alpha=0.2),
        dict(hurst=0.75, beta_prime=0.7, beta=0.6, alpha=0.5, alpha_prime=0.4),
    ],
)
def test_frac_params_chain_enforced(kw):
    with pytest.raises(ValueError):
        FracParams(**kw)


# -- Beta identity and kernels ------------------------------------------------------------


def test_beta_identity_examples():
    assert beta_identity(0, 0, 1, 3) == pytest.approx(2.0)
    assert beta_identity(1, 0, 0, 2) == pytest.approx(2.0)
    exact = math.gamma(0.6) * math.gamma(0.7) / math.gamma(1.3)
    assert beta_identity(-0.4, -0.3) == pytest.approx(exact, rel=1e-14)
    # independent oracle: scipy's algebraic-weight adaptive quadrature
    quad = integrate.quad(lambda r: 1.0, 0, 1, weight="alg", wvar=(-0.3, -0.4))[0]
    assert singular_quadrature(None, -0.4, -0.3) == pytest.approx(quad, rel=1e-8)
    with pytest.raises(ValueError):
        beta_identity(-1.0, 0.5)


@given(st.floats(-0.95, 2.0), st.floats(-0.95, 2.0), st.floats(0.1, 3.0))
@settings(max_examples=60, deadline=None)
def test_singular_quadrature_matches_beta(a, b, length):
    exact = beta_identity(a, b, 1.0, 1.0 + length)
    assert singular_quadrature(None, a, b, 1.0, 1.0 + length) == pytest.approx(exact, rel=1e-8)


def test_k1_profile_matches_quadrature():
    a, b = -PARAMS.alpha, PARAMS.alpha + PARAMS.beta_prime - 1
    for rho in (0.0, 0.5, 7.0, 40.0):
        for d in (0.1, 1.0):
            assert float(k1_profile(rho, d, a, b)) == pytest.approx(k1_quadrature(rho, d, a, b), rel=1e-10)


def test_k1_at_zero_is_beta_identity():
    a, b = -PARAMS.alpha, PARAMS.alpha + PARAMS.beta_prime - 1
    assert k1(0.0, PARAMS) == pytest.approx(beta_identity(a, b), rel=1e-12)


def test_k1_monotone_and_vanishing():
    rhos = np.concatenate([[0.0], np.geomspace(0.01, 1e4, 40)])
    values = np.array([k1(r, PARAMS) for r in rhos])
    assert np.all(np.diff(values) <= 1e-15)
    # bisection oracle for the first rho with K1 < K1(0)/10
    lo, hi = 0.0, 1e4
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if k1(mid, PARAMS) >= values[0] / 10 else (lo, mid)
    assert k1(hi, PARAMS) < values[0] / 10 <= k1(lo, PARAMS)
    assert hi < 1e4


def test_k1_rejects_negative_rho():
    with pytest.raises(ValueError):
        k1(-1.0)


def test_k2():
    assert k2(0.0, 2.5) == 2.5
    assert k2(1e-12, 2.5) == pytest.approx(2.5)
    assert k2(1.0) == pytest.approx(1 - math.exp(-1))
    grid = np.linspace(0, 50, 200)
    assert np.all(np.diff([k2(r) for r in grid]) < 0)


# -- Weyl derivatives ---------------------------------------------------------------------------


def test_weyl_left_closed_forms():
    t = np.linspace(0, 1, 9)
    assert weyl_left(t, t, 0.5, 0.0, 1.0)[0] == pytest.approx(2 / math.sqrt(math.pi), rel=1e-13)
    c = weyl_left(t, np.full(9, 3.0), 0.3, 0.0, np.array([0.25, 1.0]))
    np.testing.assert_allclose(c, 3.0 / (math.gamma(0.7) * np.array([0.25, 1.0]) ** 0.3), rtol=1e-13)
    with pytest.raises(ValueError):
        weyl_left(t, t, 0.5, 0.5, 0.5)


def test_weyl_right_closed_forms():
    t = np.linspace(0, 1, 9)
    r = np.array([0.0, 0.3, 0.9])
    np.testing.assert_allclose(weyl_right(t, t, 0.5, 1.0, r), (1 - r) ** 0.5 / math.gamma(1.5), rtol=1e-13)
    np.testing.assert_allclose(weyl_right(t, np.full(9, 2.0), 0.4, 1.0, r), 0.0, atol=1e-15)
    with pytest.raises(ValueError):
        weyl_right(t, t, 0.5, 1.0, 1.0)


def _ramp_left(t, f, alpha, r):
    """Exact oracle: a piecewise-linear path is a constant plus ramps ``(q - t_k)_+``.

    Each ramp has derivative ``(r - t_k)_+^{1-alpha} / Gamma(2 - alpha)``.
    """
    slopes = np.diff(f) / np.diff(t)
    kinks = np.concatenate([[slopes[0]], np.diff(slopes)])
    ramps = np.sum(kinks * np.clip(r - t[:-1], 0, None) ** (1 - alpha)) / math.gamma(2 - alpha)
    return f[0] / (math.gamma(1 - alpha) * r**alpha) + ramps


def _ramp_right(t, g, order, r):
    # reflecting x = t_end - q turns the right derivative into a left one of h(x) = g(t_end) - g(t_end - x)
    alpha = 1 - order
    x, h = t[-1] - t[::-1], g[-1] - g[::-1]
    slopes = np.diff(h) / np.diff(x)
    kinks = np.concatenate([[slopes[0]], np.diff(slopes)])
    return np.sum(kinks * np.clip(t[-1] - r - x[:-1], 0, None) ** alpha) / math.gamma(1 + alpha)


@given(st.floats(0.05, 0.95), st.floats(0.01, 0.99), st.integers(0, 10_000))
@settings(max_examples=60, deadline=None)
def test_weyl_against_ramp_oracle(alpha, r, seed):
    t = np.linspace(0, 1, 17)
    f = np.cumsum(np.random.default_rng(seed).standard_normal(17))
    assert weyl_left(t, f, alpha, 0.0, r)[0] == pytest.approx(_ramp_left(t, f, alpha, r), rel=1e-10, abs=1e-10)
    assert weyl_right(t, f, 1 - alpha, 1.0, r)[0] == pytest.approx(_ramp_right(t, f, 1 - alpha, r), rel=1e-10, abs=1e-10)


def test_weyl_left_against_adaptive_quadrature():
    t = np.linspace(0, 1, 9)
    f = t**2
    alpha, r = 0.45, 0.8
    fi = lambda q: np.interp(q, t, f)  # noqa: E731
    nodes = [0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75]
    val = sum(
        integrate.quad(lambda q: (fi(r) - fi(q)) / (r - q) ** (1 + alpha), lo, hi, epsabs=1e-13)[0]
        for lo, hi in zip(nodes[:-1], nodes[1:])
    )
    # last cell: f is linear, so the quotient is its slope times (r - q)^{-alpha}
    val += integrate.quad(lambda q: 1.0, 0.75, r, weight="alg", wvar=(0.0, -alpha))[0] * (f[7] - f[6]) * 8
    oracle = (fi(r) / r**alpha + alpha * val) / math.gamma(1 - alpha)
    assert weyl_left(t, f, alpha, 0.0, r)[0] == pytest.approx(oracle, rel=1e-8)


def test_weyl_right_holder_bound():
    grid = np.linspace(0, 1, 257)
    w = sample_fbm_1d(0.75, grid, seed=3)
    alpha, bp = PARAMS.alpha, PARAMS.beta_prime
    d = np.abs(w[:, None] - w[None, :])
    lag = np.abs(grid[:, None] - grid[None, :])
    sn = np.max(np.where(lag > 0, d / np.where(lag > 0, lag, 1) ** bp, 0))
    r = grid[:-1]
    dw = np.abs(weyl_right(grid, w, 1 - alpha, 1.0, r))
    # the bound carries an explicit constant from the elementary integral
    const = (1 + (1 - alpha) / (alpha + bp - 1)) / math.gamma(alpha)
    assert np.all(dw <= const * sn * (1 - r) ** (alpha + bp - 1) * (1 + 1e-10))


# -- integrals -------------------------------------------------------------------------------


def _fbm_paths(seed, n, modes=3, size=None):
    grid = np.linspace(0, 1, n + 1)
    rng = np.random.default_rng(seed)
    return grid, np.stack([sample_fbm_1d(0.75, grid, rng=rng) for _ in range(modes)], axis=1)


def test_young_constant_telescopes():
    t, w = _fbm_paths(0, 64)
    Z = np.random.default_rng(1).standard_normal((2, 3))
    np.testing.assert_allclose(young_integral(Z, t, w, 0.25, 1.0), Z @ (w[-1] - w[16]), atol=1e-14)


def test_young_additivity_and_linearity():
    t, w = _fbm_paths(2, 128)
    rng = np.random.default_rng(3)
    Z = rng.standard_normal((129, 3, 3))
    whole = young_integral(Z, t, w, 0.0, 1.0)
    split = young_integral(Z, t, w, 0.0, 0.375) + young_integral(Z, t, w, 0.375, 1.0)
    np.testing.assert_allclose(whole, split, atol=1e-12)
    Z2 = rng.standard_normal((129, 3, 3))
    np.testing.assert_allclose(
        young_integral(2 * Z + Z2, t, w, 0, 1), 2 * whole + young_integral(Z2, t, w, 0, 1), atol=1e-12
    )
    np.testing.assert_allclose(young_integral(Z, t, 3 * w, 0, 1), 3 * whole, atol=1e-12)


def test_young_rejects_bad_input():
    t, w = _fbm_paths(0, 16)
    with pytest.raises(ValueError):
        young_integral(np.eye(3), t, w, 0.1, 1.0)
    with pytest.raises(ValueError):
        young_integral(np.eye(3), t, w, 0.5, 0.25)


def test_weighted_young_matches_classical_integral():
    lam = np.array([1.5, -1.5, -6.5])
    n = 1024
    t = np.linspace(0, 1, n + 1)
    v = np.array([1.0, -2.0, 0.5])
    w = np.outer(t, v)
    got = young_integral(np.eye(3), t, w, 0.0, 1.0, lam=lam)
    exact = np.expm1(lam) / lam * v
    np.testing.assert_allclose(got, exact, rtol=5e-3)


def test_fractional_matches_young_for_constant_integrand():
    n = 256
    t = np.linspace(0, 1, n + 1)
    w = np.stack([np.sin(3 * t), t**2, np.cos(t) - 1], axis=1)
    Z = np.random.default_rng(4).standard_normal((3, 3))
    y = young_integral(Z, t, w, 0, 1)
    f = fractional_integral(Z, t, w, PARAMS, 0, 1)
    np.testing.assert_allclose(f, y, rtol=1e-3)


def test_fractional_chain_rule():
    # the piecewise-linear Riemann-Stieltjes integral of w dw telescopes to w^2/2
    n = 64
    t = np.linspace(0, 1, n + 1)
    w = sample_fbm_1d(0.75, t, seed=9)
    Z = w[:, None, None]
    f = fractional_integral(Z, t, w[:, None], PARAMS, 0, 1)[0]
    assert f == pytest.approx(0.5 * w[-1] ** 2, rel=1e-3, abs=1e-4)


def test_fractional_shift_identity():
    t, w = _fbm_paths(5, 128)
    Z = np.eye(3)
    lhs = fractional_integral(Z, t, w, PARAMS, 0.25, 1.0)
    ts, ws = t[32:] - t[32], w[32:] - w[32]
    rhs = fractional_integral(Z, ts, ws, PARAMS, 0.0, 0.75)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_young_refinement_rate():
    # Young sums of a smooth integrand against fBm converge under refinement
    grid = np.linspace(0, 1, 2049)
    rng = np.random.default_rng(8)
    errs = {n: [] for n in (64, 128, 256)}
    for _ in range(20):
        w = sample_fbm_1d(0.75, grid, rng=rng)[:, None]
        Z = np.cos(3 * w[:, :, None])
        ref = young_integral(Z, grid, w, 0, 1)
        for n in errs:
            k = 2048 // n
            errs[n].append(abs(young_integral(Z[::k], grid[::k], w[::k], 0, 1) - ref)[0])
    e = np.array([np.mean(errs[n]) for n in (64, 128, 256)])
    order = -np.polyfit(np.log([64, 128, 256]), np.log(e), 1)[0]
    # order 2H - 1 in mean; the worst-case exponent is beta + beta' - 1
    assert PARAMS.young_order / 2 <= order <= 2 * (2 * 0.75 - 1) + 0.2


# -- semigroup convolutions ---------------------------------------------------------------------------


def test_drift_convolution_exact_for_linear_integrands():
    lam = np.array([1.5, -1.5, -30.0])
    n = 8
    t = np.linspace(0, 1, n + 1)
    F = np.outer(1 + 2 * t, np.ones(3))
    got = drift_convolution(lam, F, 1 / n)
    # int_0^t e^{lam (t-r)} (1 + 2r) dr
    exact = (np.expm1(lam * t[:, None]) / lam) * (1 + 2 / lam) - 2 * t[:, None] / lam
    np.testing.assert_allclose(got, exact, rtol=1e-12, atol=1e-14)


def test_noise_convolution_is_weighted_young_sum():
    lam = np.array([1.5, -1.5, -6.5])
    t, w = _fbm_paths(6, 32)
    X = np.diff(w, axis=0)
    out = noise_convolution(lam, X, 1 / 32)
    for j in (1, 17, 32):
        np.testing.assert_allclose(out[j], young_integral(np.eye(3), t, w, 0, t[j], lam=lam), atol=1e-14)
