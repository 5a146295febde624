"""Pathwise Young/fractional integration, Weyl derivatives and the Beta/K kernels.

Paths are piecewise linear between grid points. Weyl derivatives of such
paths are evaluated in closed form cell by cell, which makes the fractional
integration formula usable as an independent check of the Riemann-Stieltjes
sums used by the solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import hyp1f1, roots_jacobi, roots_legendre

# -- exponents --------------------------------------------------------------


@dataclass(frozen=True)
class FracParams:
    """Hoelder exponents of the solution (``beta``) and the noise (``beta_prime``).

    ``alpha`` defaults to the middle of ``(1 - beta_prime, beta)`` and
    ``alpha_prime`` to the middle of ``(alpha, 1)``.
    """

    hurst: float = 0.75
    beta_prime: float = 0.70
    beta: float = 0.60
    alpha: float | None = None
    alpha_prime: float | None = None

    def __post_init__(self):
        H, bp, b = self.hurst, self.beta_prime, self.beta
        if not 0.5 < b < bp < H < 1.0:
            raise ValueError(
                f"need 1/2 < beta < beta_prime < hurst < 1, got {b}, {bp}, {H}"
            )
        a = self.alpha if self.alpha is not None else 0.5 * (1 - bp + b)
        if not 1 - bp < a < b:
            raise ValueError(f"alpha={a} must lie in (1 - beta_prime, beta) = ({1 - bp}, {b})")
        ap = self.alpha_prime if self.alpha_prime is not None else 0.5 * (a + 1)
        if not a < ap < 1:
            raise ValueError(f"alpha_prime={ap} must lie in (alpha, 1)")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "alpha_prime", ap)

    @property
    def young_order(self) -> float:
        """``beta + beta_prime - 1``, the sewing exponent of the Young sums."""
        return self.beta + self.beta_prime - 1


# -- Beta identity and the K kernels -----------------------------------------


def beta_identity(a: float, b: float, s: float = 0.0, t: float = 1.0) -> float:
    """``int_s^t (t-r)^a (r-s)^b dr`` in closed form (``a, b > -1``)."""
    if a <= -1 or b <= -1:
        raise ValueError("exponents must exceed -1")
    if t <= s:
        raise ValueError("need s < t")
    return math.gamma(a + 1) * math.gamma(b + 1) / math.gamma(a + b + 2) * (t - s) ** (a + b + 1)


@lru_cache(maxsize=256)
def _jacobi(n: int, a: float, b: float):
    x, w = roots_jacobi(n, a, b)
    return x, w


def singular_quadrature(f, a: float, b: float, s: float = 0.0, t: float = 1.0, nodes: int = 24) -> float:
    """``int_s^t (t-r)^a (r-s)^b f(r) dr`` by Gauss-Jacobi on each half interval.

    Each endpoint singularity is absorbed into the weight of the half that
    contains it; the other factor is smooth there. ``f=None`` means ``f = 1``.
    """
    if a <= -1 or b <= -1:
        raise ValueError("exponents must exceed -1")
    if t <= s:
        raise ValueError("need s < t")
    m = 0.5 * (s + t)
    half = 0.5 * (m - s)
    # left half [s, m]: weight (r - s)^b; Jacobi weight (1-x)^alpha (1+x)^beta
    x, w = _jacobi(nodes, 0.0, float(b))
    r = s + half * (x + 1)
    val = half ** (b + 1) * np.sum(w * (t - r) ** a * (1.0 if f is None else f(r)))
    # right half [m, t]: weight (t - r)^a
    x, w = _jacobi(nodes, float(a), 0.0)
    r = m + half * (x + 1)
    val += half ** (a + 1) * np.sum(w * (r - s) ** b * (1.0 if f is None else f(r)))
    return float(val)


def k1_profile(rho: float, d, a: float, b: float) -> np.ndarray:
    """``d^{a+b+1} int_0^1 e^{-rho d (1-x)} x^a (1-x)^b dx`` via the confluent series."""
    d = np.asarray(d, dtype=float)
    return d ** (a + b + 1) * beta_fn(a + 1, b + 1) * hyp1f1(b + 1, a + b + 2, -rho * d)


def k1(rho: float, params: FracParams | None = None, T: float = 1.0, n_grid: int = 64,
       a: float | None = None, b: float | None = None) -> float:
    """``K_1(rho) = sup_{0<d<=T} d^{a+b+1} int_0^1 e^{-rho d(1-x)} x^a (1-x)^b dx``.

    Defaults ``a = -alpha`` and ``b = alpha + beta_prime - 1``. The supremum
    is taken over ``d = jT/n_grid`` and is nonincreasing in ``rho``.
    """
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if params is None:
        params = FracParams()
    if a is None:
        a = -params.alpha
    if b is None:
        b = params.alpha + params.beta_prime - 1
    d = T * np.arange(1, n_grid + 1) / n_grid
    return float(np.max(k1_profile(rho, d, a, b)))


def k1_quadrature(rho: float, d: float, a: float, b: float, nodes: int = 32) -> float:
    """Direct Gauss-Jacobi evaluation of one ``K_1`` profile value."""
    x, w = _jacobi(nodes, float(b), float(a))  # (1-x)^b (1+x)^a on [-1, 1]
    y = 0.5 * (x + 1)
    return float(d ** (a + b + 1) * 0.5 ** (a + b + 1) * np.sum(w * np.exp(-rho * d * (1 - y))))


def k2(rho: float, T: float = 1.0) -> float:
    """``K_2(rho) = int_0^T e^{-rho r} dr``."""
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if rho == 0:
        return float(T)
    return float(-np.expm1(-rho * T) / rho)


# -- Weyl derivatives of piecewise-linear paths -------------------------------


def _as_grid(times, values):
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if v.shape[0] != t.size:
        raise ValueError("values must have one entry per grid time")
    return t, v


def _interp(t, v, r):
    """Piecewise-linear interpolation of ``v`` (leading axis = time) at ``r``."""
    idx = np.clip(np.searchsorted(t, r, side="right") - 1, 0, t.size - 2)
    theta = (r - t[idx]) / (t[idx + 1] - t[idx])
    theta = theta.reshape(theta.shape + (1,) * (v.ndim - 1))
    return v[idx] * (1 - theta) + v[idx + 1] * theta


def weyl_left(times, f, alpha: float, s: float, r) -> np.ndarray:
    """Left Weyl derivative ``D^alpha_{s+} f`` at points ``r > s``.

    ``(1/Gamma(1-alpha)) [f(r)/(r-s)^alpha + alpha int_s^r (f(r)-f(q))/(r-q)^{1+alpha} dq]``
    for the piecewise-linear interpolant of ``f``. Trailing axes of ``f`` are
    carried along.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    t, v = _as_grid(times, f)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= s) or np.any(r > t[-1] + 1e-12) or s < t[0] - 1e-12:
        raise ValueError("evaluation points must satisfy s < r <= last grid time")
    tail = v.shape[1:]
    flat = v.reshape(t.size, -1)
    fr = _interp(t, flat, r)  # (P, K)
    out = fr / (r - s)[:, None] ** alpha

    slopes = np.diff(flat, axis=0) / np.diff(t)[:, None]  # (C, K)
    lo = np.maximum(t[:-1], s)
    integral = np.zeros_like(fr)
    for c0 in range(0, r.size, 256):
        rr = r[c0 : c0 + 256, None]  # (P, 1)
        ql = lo[None, :]
        qr = np.minimum(t[1:][None, :], rr)
        active = qr > ql  # cells intersecting [s, r]
        u1 = np.where(active, rr - qr, 1.0)
        u2 = np.where(active, rr - ql, 1.0)
        # f(r) - f(q) = B + slope * u with u = r - q on this cell
        fa = flat[:-1][None, :, :] + slopes[None, :, :] * (ql - t[:-1][None, :])[..., None]
        B = fr[c0 : c0 + 256, None, :] - fa - slopes[None, :, :] * (rr - ql)[..., None]
        contains = active & (u1 <= 0.0)
        B = np.where(contains[..., None], 0.0, B)
        with np.errstate(divide="ignore", invalid="ignore"):
            m0 = np.where(u1 > 0, u1 ** (-alpha), 0.0) - u2 ** (-alpha)
            m1 = u2 ** (1 - alpha) - np.where(u1 > 0, u1 ** (1 - alpha), 0.0)
        m0 = np.where(active, m0 / alpha, 0.0)
        m1 = np.where(active, m1 / (1 - alpha), 0.0)
        integral[c0 : c0 + 256] = np.einsum("pck,pc->pk", B, m0) + np.einsum(
            "ck,pc->pk", slopes, m1
        )
    out = (out + alpha * integral) / math.gamma(1 - alpha)
    return out.reshape((r.size,) + tail)


def weyl_right(times, g, order: float, t_end: float, r) -> np.ndarray:
    """Right Weyl derivative of order ``1 - alpha`` of ``g_{t-}`` at points ``r < t_end``.

    Uses the sign convention in which the ``(-1)`` factors of the integration
    formula are absorbed, so that ``int f dg = int D^alpha_{s+} f * weyl_right(g) dr``:

    ``(1/Gamma(alpha)) [(g(t)-g(r))/(t-r)^{1-alpha} + (1-alpha) int_r^t (g(q)-g(r))/(q-r)^{2-alpha} dq]``

    with ``order = 1 - alpha``. For ``g(r) = r`` this equals ``(t-r)^alpha / Gamma(1+alpha)``.
    """
    if not 0 < order < 1:
        raise ValueError("order must lie in (0, 1)")
    alpha = 1 - order
    t, v = _as_grid(times, g)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r >= t_end) or np.any(r < t[0] - 1e-12) or t_end > t[-1] + 1e-12:
        raise ValueError("evaluation points must satisfy first grid time <= r < t_end")
    tail = v.shape[1:]
    flat = v.reshape(t.size, -1)
    gr = _interp(t, flat, r)
    gt = _interp(t, flat, np.array([t_end]))[0]
    out = (gt[None, :] - gr) / (t_end - r)[:, None] ** order

    slopes = np.diff(flat, axis=0) / np.diff(t)[:, None]
    hi = np.minimum(t[1:], t_end)
    integral = np.zeros_like(gr)
    for c0 in range(0, r.size, 256):
        rr = r[c0 : c0 + 256, None]
        ql = np.maximum(t[:-1][None, :], rr)
        qr = hi[None, :]
        active = qr > ql
        u1 = np.where(active, ql - rr, 1.0)
        u2 = np.where(active, qr - rr, 1.0)
        # g(q) - g(r) = A + slope * u with u = q - r on this cell
        ga = flat[:-1][None, :, :] + slopes[None, :, :] * (ql - t[:-1][None, :])[..., None]
        A = ga - slopes[None, :, :] * (ql - rr)[..., None] - gr[c0 : c0 + 256, None, :]
        contains = active & (u1 <= 0.0)
        A = np.where(contains[..., None], 0.0, A)
        with np.errstate(divide="ignore", invalid="ignore"):
            # int u^{alpha-2} = (u2^{alpha-1} - u1^{alpha-1}) / (alpha-1)
            m0 = np.where(u1 > 0, u1 ** (alpha - 1), 0.0) - u2 ** (alpha - 1)
            m1 = u2**alpha - np.where(u1 > 0, u1**alpha, 0.0)
        m0 = np.where(active, m0 / (1 - alpha), 0.0)
        m1 = np.where(active, m1 / alpha, 0.0)
        integral[c0 : c0 + 256] = np.einsum("pck,pc->pk", A, m0) + np.einsum(
            "ck,pc->pk", slopes, m1
        )
    out = (out + order * integral) / math.gamma(alpha)
    return out.reshape((r.size,) + tail)


# -- integrals -----------------------------------------------------------------


def _grid_slice(times, s, t):
    times = np.asarray(times, dtype=float)
    h = times[1] - times[0]
    i0 = int(round((s - times[0]) / h))
    i1 = int(round((t - times[0]) / h))
    if abs(times[0] + i0 * h - s) > 1e-9 * max(1, abs(s)) or abs(times[0] + i1 * h - t) > 1e-9 * max(1, abs(t)):
        raise ValueError("integration limits must be grid points")
    if not 0 <= i0 < i1 <= times.size - 1:
        raise ValueError("need s < t inside the grid")
    return i0, i1


def _broadcast_integrand(Z, n_pts, n_modes):
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 2:
        Z = np.broadcast_to(Z, (n_pts,) + Z.shape)
    if Z.ndim != 3 or Z.shape[0] != n_pts or Z.shape[2] != n_modes:
        raise ValueError("integrand must be (m, N) or (n_pts, m, N) operator values")
    return Z


def young_integral(Z, times, omega, s: float, t: float, params: FracParams | None = None,
                   lam=None) -> np.ndarray:
    """Left-point Riemann-Stieltjes sum ``sum_k Z(t_k) (omega(t_{k+1}) - omega(t_k))`` on ``[s, t]``.

    With ``lam`` (eigenvalues) each term is weighted by ``S(t - t_k)``, giving
    the discrete stochastic convolution. ``params`` only serves to validate the
    Young condition ``beta + beta_prime > 1``.
    """
    if params is not None and params.young_order <= 0:
        raise ValueError("Young condition beta + beta_prime > 1 violated")
    times = np.asarray(times, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if omega.ndim == 1:
        omega = omega[:, None]
    i0, i1 = _grid_slice(times, s, t)
    Z = _broadcast_integrand(Z, times.size, omega.shape[1])
    d = np.diff(omega[i0 : i1 + 1], axis=0)
    terms = np.einsum("kij,kj->ki", Z[i0:i1], d)
    if lam is not None:
        w = np.exp(np.multiply.outer(t - times[i0:i1], np.asarray(lam, dtype=float)))
        terms = terms * w
    return terms.sum(axis=0)


def fractional_integral(Z, times, omega, params: FracParams, s: float, t: float,
                        nodes: int = 12) -> np.ndarray:
    """``int_s^t Z domega`` through the fractional integration-by-parts formula.

    ``int_s^t D^alpha_{s+} Z(r) D^{1-alpha}_{t-} omega_{t-}(r) dr`` with both
    derivatives evaluated exactly for the piecewise-linear interpolants and the
    outer integral by composite Gauss rules (Gauss-Jacobi on the first cell to
    absorb the ``(r-s)^{-alpha}`` singularity).
    """
    alpha = params.alpha
    times = np.asarray(times, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if omega.ndim == 1:
        omega = omega[:, None]
    i0, i1 = _grid_slice(times, s, t)
    Z = _broadcast_integrand(Z, times.size, omega.shape[1])
    tt = times[i0 : i1 + 1]
    Zs = Z[i0 : i1 + 1]
    ws = omega[i0 : i1 + 1]

    xl, wl = roots_legendre(nodes)
    xj, wj = _jacobi(nodes, 0.0, -alpha)  # weight (1+x)^{-alpha}
    h = np.diff(tt)
    # first cell: r = t0 + h0 (x+1)/2, (r-s)^{-alpha} absorbed in the weight
    r_first = tt[0] + 0.5 * h[0] * (xj + 1)
    w_first = wj * (0.5 * h[0]) ** (1 - alpha)
    r_rest = (tt[1:-1, None] + 0.5 * h[1:, None] * (xl[None, :] + 1)).ravel()
    w_rest = (0.5 * h[1:, None] * wl[None, :]).ravel()

    out = np.zeros(Z.shape[1])
    for r, w, first in ((r_first, w_first, True), (r_rest, w_rest, False)):
        if r.size == 0:
            continue
        dz = weyl_left(tt, Zs, alpha, tt[0], r)  # (P, m, N)
        dw = weyl_right(tt, ws, 1 - alpha, tt[-1], r)  # (P, N)
        integrand = np.einsum("pij,pj->pi", dz, dw)
        if first:
            integrand = integrand * ((r - tt[0]) ** alpha)[:, None]
        out += np.einsum("p,pi->i", w, integrand)
    return out


# -- semigroup convolutions on one grid ------------------------------------------


def _phi12(z):
    """``phi_1(z) = (e^z - 1)/z`` and ``phi_2(z) = (e^z - 1 - z)/z^2`` (stable near 0)."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-3
    zs = np.where(small, 1.0, z)
    phi1 = np.where(small, 1 + z / 2 + z * z / 6 + z**3 / 24, np.expm1(zs) / zs)
    phi2 = np.where(small, 0.5 + z / 6 + z * z / 24 + z**3 / 120, (np.expm1(zs) - zs) / (zs * zs))
    return phi1, phi2


def drift_convolution(lam, values, h: float) -> np.ndarray:
    """``D(t_j) = int_0^{t_j} S(t_j - tau) F(tau) dtau`` for piecewise-linear ``F``.

    Exact exponential product integration, mode by mode. ``values`` has shape
    ``(n_pts, N)``.
    """
    lam = np.asarray(lam, dtype=float)
    F = np.asarray(values, dtype=float)
    decay = np.exp(lam * h)
    phi1, phi2 = _phi12(lam * h)
    w_left = h * (phi1 - phi2)
    w_right = h * phi2
    out = np.zeros_like(F)
    acc = np.zeros(F.shape[1:])
    for j in range(F.shape[0] - 1):
        acc = decay * acc + w_left * F[j] + w_right * F[j + 1]
        out[j + 1] = acc
    return out


def noise_convolution(lam, X, h: float) -> np.ndarray:
    """``N(t_j) = sum_{k<j} S(t_j - t_k) X_k`` where ``X_k = G(u_k) domega_k``.

    ``X`` has shape ``(n_pts - 1, N)``; the result has ``n_pts`` rows.
    """
    lam = np.asarray(lam, dtype=float)
    X = np.asarray(X, dtype=float)
    decay = np.exp(lam * h)
    out = np.zeros((X.shape[0] + 1,) + X.shape[1:])
    acc = np.zeros(X.shape[1:])
    for j in range(X.shape[0]):
        acc = decay * (acc + X[j])
        out[j + 1] = acc
    return out
