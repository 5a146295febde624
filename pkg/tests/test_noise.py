from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from lpmanifold.noise import (
    FbmSpec,
    NoisePath,
    block_seminorms,
    fgn_autocovariance,
    holder_seminorm,
    sample_fbm_1d,
    sample_noise,
    sliding_holder_seminorms,
    temperedness_trend,
    wiener_shift,
)
from lpmanifold.spectral import SpectralModel

MODEL = SpectralModel.shifted_laplacian(6, 2.5, 1.0, -1.0)


@pytest.fixture(scope="module")
def omega():
    return sample_noise(FbmSpec(0.75, 4, 32, seed=7), MODEL)


def test_fgn_autocovariance_half_is_white():
    g = fgn_autocovariance(0.5, 5)
    np.testing.assert_allclose(g, [1, 0, 0, 0, 0, 0], atol=1e-15)


def test_brownian_increments_uncorrelated():
    paths = sample_fbm_1d(0.5, np.linspace(0, 1, 65), seed=1, size=4000)
    inc = np.diff(paths, axis=1)
    c = np.corrcoef(inc[:, 10], inc[:, 11])[0, 1]
    assert abs(c) < 0.06


def test_fbm_variance_and_covariance():
    grid = np.linspace(0, 1, 33)
    paths = sample_fbm_1d(0.75, grid, seed=3, size=6000)
    var = paths.var(axis=0)
    np.testing.assert_allclose(var[1:], grid[1:] ** 1.5, rtol=0.08)
    s, t = 8, 24
    cov = np.mean(paths[:, s] * paths[:, t])
    exact = 0.5 * (grid[s] ** 1.5 + grid[t] ** 1.5 - (grid[t] - grid[s]) ** 1.5)
    assert cov == pytest.approx(exact, rel=0.08)


def test_marginal_is_gaussian():
    paths = sample_fbm_1d(0.75, np.linspace(0, 1, 17), seed=11, size=2000)
    assert stats.normaltest(paths[:, -1]).pvalue > 0.01


def test_cholesky_fallback_matches_law(monkeypatch):
    import lpmanifold.noise as noise

    monkeypatch.setattr(noise, "_fgn_davies_harte", lambda *a: None)
    grid = np.linspace(0, 1, 17)
    paths = noise.sample_fbm_1d(0.75, grid, seed=5, size=4000)
    np.testing.assert_allclose(paths.var(axis=0)[1:], grid[1:] ** 1.5, rtol=0.1)


@pytest.mark.parametrize("grid", [np.array([0.0, 0.1, 0.3]), np.array([0.1, 0.2, 0.3]), np.array([0.0])])
def test_bad_grid_rejected(grid):
    with pytest.raises(ValueError):
        sample_fbm_1d(0.75, grid, seed=0)


def test_hurst_out_of_range():
    with pytest.raises(ValueError):
        sample_fbm_1d(0.4, np.linspace(0, 1, 5), seed=0)
    with pytest.raises(ValueError):
        FbmSpec(hurst=1.0)


def test_trace_class_second_moment():
    model = SpectralModel.shifted_laplacian(6, 2.5, 1.0, -1.0)
    sq = []
    for seed in range(600):
        om = sample_noise(FbmSpec(0.75, 1, 8, seed=seed), model)
        sq.append(np.sum(om.values[8] ** 2))
    assert np.mean(sq) == pytest.approx(model.trace, rel=0.1)


def test_zero_weight_gives_zero_coordinate():
    model = SpectralModel(np.array([1.5, -1.5, -6.5]), 1.0, -1.0, covariance_weights=np.array([1.0, 0.0, 0.25]))
    om = sample_noise(FbmSpec(0.75, 1, 16, seed=1), model)
    assert np.all(om.values[:, 1] == 0)
    assert np.any(om.values[:, 0] != 0)


def test_determinism_and_seed_dependence():
    a = sample_noise(FbmSpec(0.75, 2, 16, seed=4), MODEL)
    b = sample_noise(FbmSpec(0.75, 2, 16, seed=4), MODEL)
    c = sample_noise(FbmSpec(0.75, 2, 16, seed=5), MODEL)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.allclose(a.values, c.values)


def test_modes_independent_of_truncation():
    big = SpectralModel.shifted_laplacian(10, 2.5, 1.0, -1.0)
    a = sample_noise(FbmSpec(0.75, 2, 16, seed=4), MODEL)
    b = sample_noise(FbmSpec(0.75, 2, 16, seed=4), big)
    np.testing.assert_array_equal(a.values, b.values[:, :6])


def test_shift_zero_is_identity(omega):
    s = wiener_shift(omega, 0.0)
    np.testing.assert_array_equal(s.values, omega.values)


@given(st.integers(0, 48), st.integers(0, 48))
@settings(max_examples=30, deadline=None)
def test_shift_composition(i, j):
    om = sample_noise(FbmSpec(0.75, 4, 32, seed=7), MODEL)
    lhs = om.shift(i / 32).shift(j / 32)
    rhs = om.shift((i + j) / 32)
    np.testing.assert_allclose(lhs.values, rhs.values, atol=1e-14)


def test_shift_errors(omega):
    with pytest.raises(ValueError):
        wiener_shift(omega, 5.0)
    with pytest.raises(ValueError):
        wiener_shift(omega, 0.01)
    with pytest.raises(ValueError):
        omega.window(3.5)


def test_window_and_subsample(omega):
    w = omega.window(1)
    assert w.length == 1.0
    np.testing.assert_allclose(w.values, omega.values[32:65] - omega.values[32])
    c = omega.subsample(4)
    assert c.steps_per_unit == 8
    np.testing.assert_array_equal(c.values, omega.values[::4])


def _path(values, n=16):
    values = np.asarray(values, dtype=float)
    return NoisePath(np.arange(values.shape[0]) / n, values, 0.75, n)


def test_seminorm_examples():
    assert holder_seminorm(_path(np.full(17, 3.0)), 0.7).value == 0.0
    lin = _path(np.linspace(0, 1, 17))
    assert holder_seminorm(lin, 0.5).value == pytest.approx(1.0)
    assert holder_seminorm(lin, 1.0).value == pytest.approx(1.0)


def test_seminorm_modes(omega):
    exact = holder_seminorm(omega, 0.7, 0, 2).value
    dyadic = holder_seminorm(omega, 0.7, 0, 2, mode="dyadic").value
    assert 0 < dyadic <= exact
    with pytest.raises(ValueError):
        holder_seminorm(omega, 0.7, mode="other")
    with pytest.raises(ValueError):
        holder_seminorm(omega, 0.7, 2, 1)


@given(st.integers(0, 2), st.integers(1, 2))
@settings(max_examples=10, deadline=None)
def test_seminorm_monotone_in_interval(a, extra):
    om = sample_noise(FbmSpec(0.75, 4, 32, seed=7), MODEL)
    inner = holder_seminorm(om, 0.7, a, a + 1).value
    outer = holder_seminorm(om, 0.7, max(0, a - 1), min(4, a + 1 + extra)).value
    assert inner <= outer


def test_sliding_matches_direct(omega):
    sl = sliding_holder_seminorms(omega, 0.7, 1.0)
    assert sl.size == 3 * 32 + 1
    for k in (0, 5, 32, 40, 96):
        direct = holder_seminorm(omega, 0.7, k / 32, k / 32 + 1).value
        assert sl[k] == pytest.approx(direct, rel=1e-14)
    np.testing.assert_allclose(sl[::32][:4], block_seminorms(omega, 0.7, 4), rtol=1e-14)


def test_temperedness_trend_small(omega):
    trend = temperedness_trend(omega, 0.7, 3)
    assert trend.shape == (3,)
    assert np.all(trend >= 0)
    assert np.all(trend < 2)
