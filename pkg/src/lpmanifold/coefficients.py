"""Drift/diffusion nonlinearities, their derivatives and the path-level cutoff."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import SpectralModel


def saturating(x, scale: float = 1.0):
    """``c s(x/c)`` with ``s(x) = x^3 / (1 + x^2)``: cubic at 0, linear at infinity."""
    y = np.asarray(x, dtype=float) / scale
    return scale * y**3 / (1 + y * y)


def saturating_prime(x, scale: float = 1.0):
    y = np.asarray(x, dtype=float) / scale
    return y * y * (3 + y * y) / (1 + y * y) ** 2


def saturating_second(x, scale: float = 1.0):
    y = np.asarray(x, dtype=float) / scale
    return 2 * y * (3 - y * y) / (1 + y * y) ** 3 / scale


_y = np.linspace(1e-6, 10.0, 200001)
SATURATING_SLOPE = float(np.max(saturating_prime(_y)))  # sup s' = 9/8
SATURATING_QUOTIENT = float(np.max(saturating_prime(_y) / _y))  # sup s'(x)/|x|
SATURATING_CURVATURE = float(np.max(np.abs(saturating_second(_y))))
del _y


# -- cutoff profile ------------------------------------------------------------


def cutoff_profile(r):
    """Smooth nonincreasing profile: 1 on ``[0, 1/2]``, 0 on ``[1, inf)``."""
    x = np.clip(2.0 * np.asarray(r, dtype=float) - 1.0, 0.0, 1.0)
    return 1.0 - x**3 * (10 - 15 * x + 6 * x * x)


def cutoff_profile_prime(r):
    x = np.clip(2.0 * np.asarray(r, dtype=float) - 1.0, 0.0, 1.0)
    return -60.0 * x * x * (1 - x) ** 2


CUTOFF_SLOPE = 3.75  # max |psi'|
CUTOFF_LIPSCHITZ = 1.0 + CUTOFF_SLOPE  # Lipschitz constant of u -> u psi(|u|)


# -- nonlinear pairs -----------------------------------------------------------


@dataclass(frozen=True)
class NonlinearPair:
    """Drift ``F`` and diffusion ``G`` built from the saturating profile.

    ``F(u) = eps_F (s(u) + <a, s(u)> a)`` and
    ``G(u) = eps_G (diag(s(w)) + a s(w)^T)`` with ``w = |lambda|^{-beta} u``
    and ``a`` a unit vector with entries proportional to ``1/i``. The rank-one
    terms couple stable and unstable modes. Setting ``coupling=False`` drops
    them, and ``linear=True`` replaces ``s`` by the identity (a linear pair
    that is useful as an oracle).
    """

    model: SpectralModel
    eps_F: float = 0.1
    eps_G: float = 0.1
    scale: float = 1.0
    beta: float = 0.6
    coupling: bool = True
    linear: bool = False

    def __post_init__(self):
        if self.eps_F < 0 or self.eps_G < 0:
            raise ValueError("amplitudes must be nonnegative")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def n_modes(self) -> int:
        return self.model.n_modes

    @property
    def mix(self) -> np.ndarray:
        if not self.coupling:
            return np.zeros(self.n_modes)
        a = 1.0 / np.arange(1, self.n_modes + 1)
        return a / np.linalg.norm(a)

    @property
    def weights(self) -> np.ndarray:
        """``|lambda_i|^{-beta}``, the weights of the ``B_{-beta}`` norm."""
        return np.abs(self.model.eigenvalues) ** (-self.beta)

    def _s(self, x):
        return np.asarray(x, dtype=float) if self.linear else saturating(x, self.scale)

    def _ds(self, x):
        return np.ones_like(np.asarray(x, dtype=float)) if self.linear else saturating_prime(x, self.scale)

    def with_amplitudes(self, eps_F: float, eps_G: float) -> "NonlinearPair":
        return NonlinearPair(self.model, eps_F, eps_G, self.scale, self.beta, self.coupling, self.linear)

    # values ----------------------------------------------------------------
    def drift(self, u):
        s = self._s(u)
        a = self.mix
        return self.eps_F * (s + (s @ a)[..., None] * a)

    def diffusion(self, u):
        s = self._s(self.weights * np.asarray(u, dtype=float))
        a = self.mix
        eye = np.eye(self.n_modes)
        return self.eps_G * (s[..., None, :] * eye + a[:, None] * s[..., None, :])

    def diffusion_apply(self, u, d):
        """``G(u) d`` without forming the matrix."""
        s = self._s(self.weights * np.asarray(u, dtype=float))
        d = np.asarray(d, dtype=float)
        sd = s * d
        return self.eps_G * (sd + np.sum(sd, axis=-1, keepdims=True) * self.mix)

    # derivatives -------------------------------------------------------------
    def drift_derivative(self, u, v):
        ds = self._ds(u) * np.asarray(v, dtype=float)
        a = self.mix
        return self.eps_F * (ds + (ds @ a)[..., None] * a)

    def diffusion_derivative_apply(self, u, v, d):
        """``(DG(u) v) d``."""
        w = self.weights
        ds = self._ds(w * np.asarray(u, dtype=float)) * w * np.asarray(v, dtype=float)
        sd = ds * np.asarray(d, dtype=float)
        return self.eps_G * (sd + np.sum(sd, axis=-1, keepdims=True) * self.mix)

    # Lipschitz metadata -------------------------------------------------------
    @property
    def _mix_factor(self) -> float:
        return 1.0 + float(np.linalg.norm(self.mix)) ** 2

    @property
    def lipschitz_F(self) -> float:
        """Global Lipschitz constant of ``F`` on ``B``."""
        slope = 1.0 if self.linear else SATURATING_SLOPE
        return self.eps_F * self._mix_factor * slope

    @property
    def lipschitz_G(self) -> float:
        """Global Lipschitz constant of ``G: B_{-beta} -> L_2``."""
        slope = 1.0 if self.linear else SATURATING_SLOPE
        return self.eps_G * self._mix_factor * slope

    @property
    def local_F(self) -> float:
        """``C_F`` with ``L_F(R) = C_F R`` after the cutoff at radius ``R``."""
        if self.linear:
            return float("inf")
        return CUTOFF_LIPSCHITZ * self.eps_F * self._mix_factor * SATURATING_QUOTIENT / self.scale

    @property
    def local_G(self) -> float:
        if self.linear:
            return float("inf")
        return CUTOFF_LIPSCHITZ * self.eps_G * self._mix_factor * SATURATING_QUOTIENT / self.scale


def second_difference_G(pair: NonlinearPair, u1, v1, u2, v2) -> tuple[np.ndarray, np.ndarray]:
    """``|G(u1) - G(v1) - G(u2) + G(v2)|_HS`` and its bound.

    The bound is ``eps_G c (S1 |w(u1 - v1 - u2 + v2)| + S2 |w(u2 - v2)|
    (|w(u1 - u2)| + |w(v1 - v2)|))`` with ``S1 = sup|s'|``, ``S2 = sup|s''|``
    and ``w`` the ``B_{-beta}`` weights. Inputs broadcast over leading axes.
    """
    u1, v1, u2, v2 = (np.asarray(x, dtype=float) for x in (u1, v1, u2, v2))
    d = pair.diffusion(u1) - pair.diffusion(v1) - pair.diffusion(u2) + pair.diffusion(v2)
    lhs = np.sqrt(np.sum(d * d, axis=(-2, -1)))
    w = pair.weights
    nrm = lambda x: np.linalg.norm(w * x, axis=-1)  # noqa: E731
    s1 = 1.0 if pair.linear else SATURATING_SLOPE
    s2 = 0.0 if pair.linear else SATURATING_CURVATURE / pair.scale
    bound = pair.eps_G * pair._mix_factor * (
        s1 * nrm(u1 - v1 - u2 + v2) + s2 * nrm(u2 - v2) * (nrm(u1 - u2) + nrm(v1 - v2))
    )
    return lhs, bound


def audit_lipschitz(pair: NonlinearPair, radius: float, n_samples: int = 500, seed: int = 0) -> dict:
    """Sampled difference quotients of ``F`` and ``G`` inside the ball of ``radius``.

    Returns the largest observed quotients next to the declared local
    constants ``C R / D_chi`` (the pointwise part of the cutoff bound) and the
    global constants, the flat-at-zero ratios ``|F(u)| / |u|`` and the largest
    ratio of ``second_difference_G`` to its bound.
    """
    rng = np.random.default_rng(seed)
    N = pair.n_modes

    def ball(k):
        x = rng.standard_normal((k, N))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        return x * radius * rng.uniform(0, 1, (k, 1))

    u, v = ball(n_samples), ball(n_samples)
    du = np.linalg.norm(u - v, axis=1)
    qF = np.linalg.norm(pair.drift(u) - pair.drift(v), axis=1) / du
    w = pair.weights
    dw = np.linalg.norm(w * (u - v), axis=1)
    dG = pair.diffusion(u) - pair.diffusion(v)
    qG = np.sqrt(np.sum(dG * dG, axis=(1, 2))) / dw
    flat = np.linalg.norm(pair.drift(u), axis=1) / np.linalg.norm(u, axis=1)
    lhs, bound = second_difference_G(pair, u, v, ball(n_samples), ball(n_samples))
    second = np.divide(lhs, bound, out=np.zeros_like(lhs), where=bound > 0)
    local = CUTOFF_LIPSCHITZ
    return {
        "radius": radius,
        "sampled_F": float(qF.max()),
        "sampled_G": float(qG.max()),
        "declared_local_F": pair.local_F * radius / local,
        "declared_local_G": pair.local_G * radius / local,
        "global_F": pair.lipschitz_F,
        "global_G": pair.lipschitz_G,
        "flat_ratio_F": float(flat.max()),
        "second_difference_G": float(second.max()),
    }


# -- path-level cutoff ------------------------------------------------------------


def holder_norm(values, h: float, weights, beta: float, rho: float = 0.0, return_argmax: bool = False):
    """``sup e^{-rho t}|u(t)| + sup e^{-rho t}|u(t)-u(s)|_w / (t-s)^beta`` on a uniform grid.

    ``values`` has shape ``(n_pts, N)`` on the grid ``t_j = j h``. ``weights``
    gives the norm in the Hoelder part (``|lambda|^{-beta}`` for the
    ``B_{-beta}`` norm); ``None`` means the plain norm.
    With ``return_argmax`` also returns ``(j_sup, (s_idx, t_idx))``.
    """
    u = np.asarray(values, dtype=float)
    n = u.shape[0] - 1
    t = np.arange(n + 1) * h
    decay = np.exp(-rho * t)
    sup_vals = decay * np.sqrt(np.sum(u * u, axis=-1))
    j_sup = int(np.argmax(sup_vals))
    best_hold = 0.0
    pair = (0, 0)
    uw = u if weights is None else u * weights
    for lag in range(1, n + 1):
        d = uw[lag:] - uw[:-lag]
        q = np.sqrt(np.sum(d * d, axis=-1)) * decay[lag:] / (lag * h) ** beta
        k = int(np.argmax(q))
        if q[k] > best_hold:
            best_hold = float(q[k])
            pair = (k, k + lag)
    total = float(sup_vals[j_sup]) + best_hold
    if return_argmax:
        return total, j_sup, pair
    return total


@dataclass(frozen=True)
class TruncatedPair:
    """``F_R(u) = F(chi_R(u))`` and ``G_R(u) = G(chi_R(u))`` for block paths.

    ``chi_R(u) = u psi(||u||_{beta,-beta} / R)`` acts on the whole block path,
    so these methods take arrays of shape ``(n_pts, N)`` on ``[0, 1]``.
    """

    pair: NonlinearPair
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("cutoff radius must be positive")

    def factor(self, values, h: float) -> float:
        n = holder_norm(values, h, self.pair.weights, self.pair.beta)
        return float(cutoff_profile(n / self.radius))

    def truncate(self, values, h: float) -> np.ndarray:
        return self.factor(values, h) * np.asarray(values, dtype=float)

    def drift(self, values, h):
        return self.pair.drift(self.truncate(values, h))

    def diffusion_apply(self, values, d, h):
        return self.pair.diffusion_apply(self.truncate(values, h), d)

    def cutoff_derivative(self, values, v, h: float):
        """``(psi, D chi_R(u) v)`` with the norm differentiated at its maximising pair.

        The norm is a supremum; its directional derivative is taken along the
        active sup point and the active Hoelder pair.
        """
        u = np.asarray(values, dtype=float)
        v = np.asarray(v, dtype=float)
        w = self.pair.weights
        beta = self.pair.beta
        nrm, j, (a, b) = holder_norm(u, h, w, beta, return_argmax=True)
        psi = float(cutoff_profile(nrm / self.radius))
        dpsi = float(cutoff_profile_prime(nrm / self.radius))
        if dpsi == 0.0:
            return psi, psi * v
        dn = 0.0
        uj = u[j]
        if np.any(uj):
            dn += float(uj @ v[j]) / float(np.linalg.norm(uj))
        if b > a:
            du = w * (u[b] - u[a])
            dv = w * (v[b] - v[a])
            nd = float(np.linalg.norm(du))
            if nd > 0:
                dn += float(du @ dv) / nd / ((b - a) * h) ** beta
        return psi, psi * v + (dpsi * dn / self.radius) * u

    def drift_derivative(self, values, v, h):
        u = np.asarray(values, dtype=float)
        psi, dchi = self.cutoff_derivative(u, v, h)
        return self.pair.drift_derivative(psi * u, dchi)

    def diffusion_derivative_apply(self, values, v, d, h):
        u = np.asarray(values, dtype=float)
        psi, dchi = self.cutoff_derivative(u, v, h)
        return self.pair.diffusion_derivative_apply(psi * u, dchi, d)


def cutoff_radius(seminorms, K: float, pair: NonlinearPair, c_alpha_beta: float) -> np.ndarray:
    """Solve ``c_S (C_F + C_ab C_G |||theta_i omega|||) R = K`` for each block.

    The local Lipschitz constants grow linearly in ``R``, so the equation has
    the explicit positive solution returned here (infinite for vanishing or
    linear coefficients).
    """
    sn = np.asarray(seminorms, dtype=float)
    if pair.linear:
        # globally Lipschitz coefficients need no cutoff
        return np.full(sn.shape, np.inf)
    cS = pair.model.c_S
    denom = cS * pair.local_F + cS * c_alpha_beta * pair.local_G * sn
    with np.errstate(divide="ignore"):
        return np.where(denom > 0, K / np.where(denom > 0, denom, 1.0), np.inf)


def scale_amplitudes(
    pair: NonlinearPair,
    seminorms,
    K: float,
    c_alpha_beta: float,
    target_radius: float,
    max_halvings: int = 80,
) -> tuple[NonlinearPair, list]:
    """Halve ``eps_F`` and ``eps_G`` until the smallest cutoff radius reaches ``target_radius``.

    Returns the scaled pair and the search log as ``(eps_F, eps_G, min R)`` rows.
    """
    trail = []
    current = pair
    for _ in range(max_halvings + 1):
        r = float(np.min(cutoff_radius(seminorms, K, current, c_alpha_beta)))
        trail.append((current.eps_F, current.eps_G, r))
        if r >= target_radius:
            return current, trail
        current = current.with_amplitudes(current.eps_F / 2, current.eps_G / 2)
    raise RuntimeError("amplitude search did not reach the target radius")
