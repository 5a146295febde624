"""Fractional Brownian motion paths, Wiener shifts and Hoelder seminorms."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .spectral import SpectralModel

log = logging.getLogger(__name__)

_CHOLESKY_MAX_POINTS = 1024


@dataclass(frozen=True)
class FbmSpec:
    """Parameters of a sampled noise path on ``[0, horizon]``.

    ``steps_per_unit`` grid cells per unit time, so the grid has
    ``horizon * steps_per_unit + 1`` points.
    """

    hurst: float = 0.75
    horizon: int = 17
    steps_per_unit: int = 64
    seed: int = 0

    def __post_init__(self):
        if not 0.5 < self.hurst < 1.0:
            raise ValueError(f"hurst must lie in (1/2, 1), got {self.hurst}")
        if self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        if self.steps_per_unit < 8:
            raise ValueError("steps_per_unit must be at least 8")

    @property
    def n_steps(self) -> int:
        return self.horizon * self.steps_per_unit

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) / self.steps_per_unit


@dataclass(frozen=True)
class NoisePath:
    """A Hilbert-valued path sampled on a uniform grid starting at 0.

    ``values`` has shape ``(len(times), n_modes)`` with ``values[0] == 0``.
    """

    times: np.ndarray
    values: np.ndarray
    hurst: float
    steps_per_unit: int

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if t.ndim != 1 or v.shape[0] != t.size:
            raise ValueError("values must have one row per grid time")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def step(self) -> float:
        return 1.0 / self.steps_per_unit

    @property
    def length(self) -> float:
        return float(self.times[-1])

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def shift(self, tau: float) -> "NoisePath":
        return wiener_shift(self, tau)

    def window(self, start: float, length: float = 1.0) -> "NoisePath":
        """``theta_start omega`` restricted to ``[0, length]``."""
        shifted = wiener_shift(self, start)
        k = _grid_index(length, self.steps_per_unit)
        if k > shifted.times.size - 1:
            raise ValueError(
                f"window [{start}, {start + length}] exceeds the path horizon {self.length}"
            )
        return NoisePath(shifted.times[: k + 1], shifted.values[: k + 1], self.hurst, self.steps_per_unit)

    def subsample(self, factor: int) -> "NoisePath":
        """Keep every ``factor``-th grid point (the same path on a coarser grid)."""
        if factor < 1 or self.steps_per_unit % factor:
            raise ValueError("factor must divide steps_per_unit")
        return NoisePath(
            self.times[::factor], self.values[::factor], self.hurst, self.steps_per_unit // factor
        )


def _grid_index(tau: float, steps_per_unit: int) -> int:
    k = tau * steps_per_unit
    kr = int(round(k))
    if abs(k - kr) > 1e-9 * max(1.0, abs(k)):
        raise ValueError(f"shift {tau} is not aligned with the grid step 1/{steps_per_unit}")
    return kr


def fgn_autocovariance(hurst: float, n: int) -> np.ndarray:
    """Autocovariance of unit-step fractional Gaussian noise at lags ``0..n``."""
    k = np.arange(n + 1, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


def _fgn_davies_harte(hurst, n, rng, size):
    gamma = fgn_autocovariance(hurst, n)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    eig = np.fft.fft(row).real
    if eig.min() < -1e-10 * eig.max():
        return None
    eig = np.clip(eig, 0.0, None)
    m = row.size
    xi = rng.standard_normal((size, m)) + 1j * rng.standard_normal((size, m))
    x = np.fft.fft(np.sqrt(eig / m) * xi, axis=-1)
    return x.real[:, :n]


def _fgn_cholesky(hurst, n, rng, size):
    gamma = fgn_autocovariance(hurst, n)
    idx = np.arange(n)
    cov = gamma[np.abs(idx[:, None] - idx[None, :])]
    chol = np.linalg.cholesky(cov)
    return rng.standard_normal((size, n)) @ chol.T


def sample_fbm_1d(hurst: float, grid, seed=None, size: int | None = None, rng=None) -> np.ndarray:
    """Exact samples of scalar fBm on a uniform grid starting at 0.

    Uses circulant embedding of the increments; falls back to a Cholesky
    factorisation on small grids should the embedding fail to be
    nonnegative definite. Returns shape ``(len(grid),)`` or
    ``(size, len(grid))``.
    """
    if not 0.5 <= hurst < 1.0:
        raise ValueError(f"hurst must lie in [1/2, 1), got {hurst}")
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValueError("grid must be 1-D with at least two points")
    if t[0] != 0.0:
        raise ValueError("grid must start at 0")
    dt = np.diff(t)
    if np.any(dt <= 0) or np.ptp(dt) > 1e-9 * dt.mean():
        raise ValueError("grid must be uniform and increasing")
    h = dt.mean()
    n = dt.size
    if rng is None:
        rng = np.random.default_rng(seed)
    batch = 1 if size is None else int(size)

    inc = _fgn_davies_harte(hurst, n, rng, batch)
    if inc is None:
        if n + 1 > _CHOLESKY_MAX_POINTS:
            raise RuntimeError("circulant embedding is not nonnegative definite on this grid")
        log.info("circulant embedding failed, using Cholesky on %d points", n + 1)
        inc = _fgn_cholesky(hurst, n, rng, batch)
    inc = inc * h**hurst
    path = np.concatenate([np.zeros((batch, 1)), np.cumsum(inc, axis=1)], axis=1)
    return path[0] if size is None else path


def mode_rng(seed: int, mode: int) -> np.random.Generator:
    """Independent generator for coordinate ``mode`` (0-based) under root ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(mode,)))


def sample_noise(spec: FbmSpec, model: SpectralModel) -> NoisePath:
    """``omega(t) = sum_i sqrt(mu_i) beta_i(t) e_i`` on ``[0, spec.horizon]``.

    Coordinate ``i`` depends only on ``(spec.seed, i)``, so truncating or
    extending the number of modes leaves the shared coordinates unchanged.
    """
    t = spec.times
    mu = model.covariance_weights
    values = np.zeros((t.size, mu.size))
    for i, w in enumerate(mu):
        if w == 0:
            continue
        values[:, i] = np.sqrt(w) * sample_fbm_1d(spec.hurst, t, rng=mode_rng(spec.seed, i))
    return NoisePath(t, values, spec.hurst, spec.steps_per_unit)


def wiener_shift(omega: NoisePath, tau: float) -> NoisePath:
    """``(theta_tau omega)(t) = omega(t + tau) - omega(tau)`` on the remaining horizon."""
    if tau < 0:
        raise ValueError("shift must be nonnegative")
    k = _grid_index(tau, omega.steps_per_unit)
    if k > omega.times.size - 1:
        raise ValueError(f"shift {tau} lies beyond the path horizon {omega.length}")
    vals = omega.values[k:] - omega.values[k]
    return NoisePath(omega.times[: vals.shape[0]].copy(), vals, omega.hurst, omega.steps_per_unit)


class SeminormEstimate(NamedTuple):
    value: float
    mode: str


def _pair_quotients(values, h, exponent, lag):
    d = values[lag:] - values[:-lag]
    norm = np.sqrt(np.sum(d * d, axis=-1)) if d.ndim > 1 else np.abs(d)
    return norm / (lag * h) ** exponent


def holder_seminorm(
    omega: NoisePath, exponent: float, a: float = 0.0, b: float | None = None, mode: str = "exact"
) -> SeminormEstimate:
    """``sup_{a<=s<t<=b} |omega(t)-omega(s)| / (t-s)**exponent`` over grid points.

    ``mode="exact"`` scans every grid pair; ``mode="dyadic"`` only scans the
    aligned dyadic pairs and gives a lower estimate in linear time.
    """
    if not 0 < exponent <= 1:
        raise ValueError("exponent must lie in (0, 1]")
    if b is None:
        b = omega.length
    i0 = _grid_index(a, omega.steps_per_unit)
    i1 = _grid_index(b, omega.steps_per_unit)
    if not 0 <= i0 < i1 <= omega.times.size - 1:
        raise ValueError(f"interval [{a}, {b}] is empty or outside the path")
    v = omega.values[i0 : i1 + 1]
    h = omega.step
    n = i1 - i0
    best = 0.0
    if mode == "exact":
        for lag in range(1, n + 1):
            best = max(best, float(np.max(_pair_quotients(v, h, exponent, lag))))
    elif mode == "dyadic":
        lag = 1
        while lag <= n:
            sub = v[::lag]
            best = max(best, float(np.max(_pair_quotients(sub, lag * h, exponent, 1))))
            lag *= 2
    else:
        raise ValueError(f"mode must be 'exact' or 'dyadic', got {mode!r}")
    return SeminormEstimate(best, mode)


def sliding_holder_seminorms(omega: NoisePath, exponent: float, length: float = 1.0) -> np.ndarray:
    """``|||theta_s omega|||_{exponent,0,length}`` for every grid-aligned ``s``.

    Entry ``k`` belongs to ``s = k * step`` and covers the window
    ``[s, s + length]``; windows must fit inside the path.
    """
    n = _grid_index(length, omega.steps_per_unit)
    n_total = omega.times.size - 1
    n_windows = n_total - n + 1
    if n_windows < 1:
        raise ValueError("window longer than the path")
    h = omega.step
    out = np.zeros(n_windows)
    for lag in range(1, n + 1):
        q = _pair_quotients(omega.values, h, exponent, lag)
        # pairs (j, j+lag) inside [k, k+n] have k <= j <= k + n - lag
        width = n - lag + 1
        m = np.lib.stride_tricks.sliding_window_view(q, width).max(axis=1)
        out = np.maximum(out, m)
    return out


def block_seminorms(omega: NoisePath, exponent: float, n_blocks: int) -> np.ndarray:
    """``|||theta_i omega|||_{exponent,0,1}`` for ``i = 0..n_blocks-1``."""
    return np.array(
        [holder_seminorm(omega, exponent, i, i + 1).value for i in range(n_blocks)]
    )


def temperedness_trend(omega: NoisePath, exponent: float, n_blocks: int | None = None) -> np.ndarray:
    """``(1/i) log+ |||theta_i omega|||_{exponent,0,1}`` for ``i = 1..n_blocks``.

    A tempered path has this sequence tending to zero.
    """
    if n_blocks is None:
        n_blocks = int(np.floor(omega.length)) - 1
    norms = block_seminorms(omega, exponent, n_blocks + 1)[1:]
    i = np.arange(1, n_blocks + 1)
    return np.log(np.maximum(norms, 1.0)) / i
