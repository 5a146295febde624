"""Discrete Lyapunov-Perron operator, its fixed point and the stable manifold.

A sequence ``U = (u_0, ..., u_{M-1})`` stores block paths on ``[0, 1]``;
block ``m`` lives on ``[m, m+1]`` and is driven by ``theta_m omega``. The
operator is assembled from one convolution per block,

    C_m(t) = int_0^t S(t-r) F_R(u_m) dr + int_0^t S(t-r) G_R(u_m) d theta_m omega,

with ``a_m = C_m(1)``. The infinite sums over blocks collapse to two linear
recursions:

    b_0 = 0,  b_{m+1} = S^-(1) b_m + a^-_m           (past, stable part)
    p_M = 0,  p_m = S^+(-1) (a^+_m + p_{m+1})         (future, unstable part)
    J(U)_m(t) = S(t) (S^-(m) xi + b_m - p_m) + C_m(t).

The ``-S^+(t) p_m`` term cancels the unstable part of ``C_m`` on ``[0, t]``
and leaves ``-int_t^1 S^+(t-r) ...`` plus the forward tail, so consecutive
blocks match exactly at their endpoints.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .coefficients import NonlinearPair, TruncatedPair, cutoff_radius, holder_norm
from .integrals import FracParams, drift_convolution, noise_convolution
from .mild import C_ALPHA_BETA, block_convolution, solve_forward
from .noise import NoisePath, block_seminorms, sliding_holder_seminorms
from .spectral import SpectralModel

log = logging.getLogger(__name__)


# -- gap condition ---------------------------------------------------------------


def gap_value(K: float, kappa: float, mu_hat: float, mu_check: float, k_mult: int = 1, gamma: float = 0.0) -> float:
    """``K (-1/(1 - e^{-(mu_check + k kappa + gamma)}) + 1/(1 - e^{-(mu_hat + k kappa + gamma)}))``."""
    shift = k_mult * kappa + gamma
    if not 0 < shift < min(-mu_check, mu_hat):
        raise ValueError(
            f"k*kappa+gamma={shift} must lie in (0, min(-mu_check, mu_hat)) = (0, {min(-mu_check, mu_hat)})"
        )
    bracket = -1.0 / (-np.expm1(-(mu_check + shift))) + 1.0 / (-np.expm1(-(mu_hat + shift)))
    return float(K * bracket)


def check_gap(K: float, kappa: float, mu_hat: float, mu_check: float, k_mult: int = 1, gamma: float = 0.0):
    """``(value <= 1/2, value)`` for the gap condition."""
    if K < 0:
        raise ValueError("K must be nonnegative")
    value = gap_value(K, kappa, mu_hat, mu_check, k_mult, gamma)
    return value <= 0.5, value


def max_gap_K(kappa: float, mu_hat: float, mu_check: float, k_mult: int = 1, gamma: float = 0.0) -> float:
    """Largest ``K`` satisfying the gap condition."""
    return 0.5 / gap_value(1.0, kappa, mu_hat, mu_check, k_mult, gamma)


@dataclass(frozen=True)
class GapParams:
    kappa: float
    K: float
    mu_hat: float
    mu_check: float
    gamma0: float = 0.0

    def __post_init__(self):
        if not self.mu_check < 0 < self.kappa < min(-self.mu_check, self.mu_hat):
            raise ValueError("need mu_check < 0 < kappa < min(-mu_check, mu_hat)")
        if self.K <= 0:
            raise ValueError("K must be positive")

    @property
    def value(self) -> float:
        return gap_value(self.K, self.kappa, self.mu_hat, self.mu_check)

    @property
    def holds(self) -> bool:
        return self.value <= 0.5


# -- sequences ------------------------------------------------------------------------


def _block_norms(values, model: SpectralModel, beta: float) -> np.ndarray:
    n = values.shape[1] - 1
    w = np.abs(model.eigenvalues) ** (-beta)
    return np.array([holder_norm(v, 1.0 / n, w, beta) for v in values])


def hkappa_norm(U, kappa: float, model: SpectralModel, beta: float, atol: float = 1e-12) -> float:
    """``sup_i e^{kappa i} ||u_i||_{beta,-beta}`` of a block sequence of shape ``(M, n+1, N)``.

    Raises ``ValueError`` when consecutive blocks do not share endpoints.
    """
    values = U.values if isinstance(U, SequenceU) else np.asarray(U, dtype=float)
    if values.ndim != 3:
        raise ValueError("sequence must have shape (M, n+1, N)")
    gap = np.abs(values[:-1, -1] - values[1:, 0])
    scale = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
    if gap.size and np.max(gap) > atol * scale:
        raise ValueError(f"blocks do not match at their endpoints (gap {np.max(gap):.3e})")
    norms = _block_norms(values, model, beta)
    return float(np.max(np.exp(kappa * np.arange(values.shape[0])) * norms))


@dataclass
class SequenceU:
    """Matched block sequence with its ``H_kappa`` norm."""

    values: np.ndarray
    kappa: float
    norm: float

    @property
    def n_blocks(self) -> int:
        return self.values.shape[0]

    def block(self, m: int) -> np.ndarray:
        return self.values[m]

    def at_integer(self) -> np.ndarray:
        """States ``u(m)`` at ``m = 0..M``."""
        return np.concatenate([self.values[:, 0], self.values[-1:, -1]], axis=0)


@dataclass
class ManifoldSolution:
    sequence: SequenceU
    m_value: np.ndarray  # Gamma^+(xi)(0, 0)
    iterations: int
    contraction: float
    residual: float
    tail_bound: np.ndarray  # per block
    history: list = field(default_factory=list)


# -- operator -------------------------------------------------------------------------


class LyapunovPerron:
    """Truncated Lyapunov-Perron operator for one noise path on ``M`` blocks.

    Parameters
    ----------
    model, params, pair
        Linear part, exponents and the (untruncated) nonlinearity.
    omega : NoisePath
        Noise on ``[0, L]`` with ``L >= n_blocks``.
    kappa, K : float
        Decay rate of ``H_kappa`` and the cutoff constant of the radius equation.
    radii : array_like, optional
        Cutoff radii per block; defaults to the solution of the radius equation.
    tail_cut : int, optional
        Blocks ``>= tail_cut`` are dropped from the forward sums (default ``n_blocks``).
    """

    def __init__(
        self,
        model: SpectralModel,
        params: FracParams,
        pair: NonlinearPair,
        omega: NoisePath,
        n_blocks: int,
        kappa: float,
        K: float,
        c_alpha_beta: float = C_ALPHA_BETA,
        radii=None,
        tail_cut: int | None = None,
        seminorms=None,
    ):
        if n_blocks < 1:
            raise ValueError("need at least one block")
        if omega.length < n_blocks - 1e-12:
            raise ValueError(f"noise horizon {omega.length} shorter than {n_blocks} blocks")
        if tail_cut is None:
            tail_cut = n_blocks
        if not 1 <= tail_cut <= n_blocks:
            raise ValueError("tail_cut must lie in [1, n_blocks]")
        self.model = model
        self.params = params
        self.pair = pair
        self.omega = omega
        self.n_blocks = n_blocks
        self.kappa = kappa
        self.K = K
        self.c_alpha_beta = c_alpha_beta
        self.tail_cut = tail_cut
        ok, value = check_gap(K, kappa, model.mu_hat, model.mu_check)
        self.gap = value
        if not ok:
            log.warning("gap condition fails: value %.4f > 1/2", value)
        if seminorms is None:
            seminorms = block_seminorms(omega, params.beta_prime, n_blocks)
        self.seminorms = np.asarray(seminorms, dtype=float)[:n_blocks]
        if radii is None:
            radii = cutoff_radius(self.seminorms, K, pair, c_alpha_beta)
        self.radii = np.asarray(radii, dtype=float)[:n_blocks]
        self.n = omega.steps_per_unit
        self.h = 1.0 / self.n
        self.d_omega = np.stack([omega.window(i).increments for i in range(n_blocks)])
        self.truncated = [TruncatedPair(pair, float(R)) for R in self.radii]
        lam = model.eigenvalues
        self._t = np.arange(self.n + 1) * self.h
        self._S_t = np.exp(np.multiply.outer(self._t, lam))  # (n+1, N)

    # -- helpers
    @property
    def shape(self):
        return (self.n_blocks, self.n + 1, self.model.n_modes)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def norm(self, U, kappa: float | None = None) -> float:
        # a cut tail leaves the blocks beyond tail_cut unmatched
        atol = 1e-12 if self.tail_cut == self.n_blocks else np.inf
        return hkappa_norm(U, self.kappa if kappa is None else kappa, self.model, self.params.beta, atol)

    def _check_xi(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.model.n_modes,):
            raise ValueError("xi must be a state vector")
        plus = xi[self.model.plus_mask]
        if np.any(np.abs(plus) > 1e-14 * max(1.0, float(np.max(np.abs(xi))))):
            raise ValueError("xi must lie in the stable subspace B^-")
        return np.where(self.model.minus_mask, xi, 0.0)

    def shifted(self, k: int) -> "LyapunovPerron":
        """The same operator for ``theta_k omega`` on the remaining ``n_blocks - k`` blocks."""
        if not 0 <= k < self.n_blocks:
            raise ValueError("shift must leave at least one block")
        return LyapunovPerron(
            self.model,
            self.params,
            self.pair,
            self.omega.shift(k),
            self.n_blocks - k,
            self.kappa,
            self.K,
            self.c_alpha_beta,
            radii=self.radii[k:],
            tail_cut=max(1, self.tail_cut - k),
            seminorms=self.seminorms[k:],
        )

    # -- assembly
    def convolutions(self, U) -> np.ndarray:
        U = np.asarray(U, dtype=float)
        return np.stack(
            [
                block_convolution(U[m], self.d_omega[m], self.truncated[m], self.model)
                for m in range(self.n_blocks)
            ]
        )

    def assemble(self, convs, xi) -> np.ndarray:
        """Combine per-block convolutions into ``J`` (see the module docstring)."""
        model = self.model
        lam = model.eigenvalues
        minus = model.minus_mask
        plus = model.plus_mask
        M = self.n_blocks
        a = convs[:, -1, :]
        e1 = np.exp(lam)
        e_inv = np.exp(-np.where(plus, lam, 0.0))
        b = np.zeros_like(a)
        for m in range(M - 1):
            b[m + 1] = np.where(minus, e1 * b[m] + a[m], 0.0)
        p = np.zeros_like(a)
        for m in range(M - 1, -1, -1):
            # the current block always contributes; later blocks only below tail_cut
            tail = p[m + 1] if m + 1 < min(self.tail_cut, M) else 0.0
            p[m] = np.where(plus, e_inv * (a[m] + tail), 0.0)
        free = np.where(minus, np.exp(np.outer(np.arange(M), np.where(minus, lam, 0.0))) * xi, 0.0)
        x = free + b - p  # (M, N)
        return self._S_t[None, :, :] * x[:, None, :] + convs

    def apply(self, U, xi) -> np.ndarray:
        """``J(U, xi)``."""
        xi = self._check_xi(xi)
        return self.assemble(self.convolutions(U), xi)

    def tail_bound(self, norm_U: float) -> np.ndarray:
        """``c_S e^{(mu_hat + kappa)(m - tail_cut)} ||U||_{H_kappa} K`` per block ``m``."""
        m = np.arange(self.n_blocks)
        return self.model.c_S * np.exp((self.model.mu_hat + self.kappa) * (m - self.tail_cut)) * norm_U * self.K

    def contraction_ratio(self, U, V, xi) -> float:
        """``||J(U) - J(V)||_{H_kappa} / ||U - V||_{H_kappa}``."""
        d = self.norm(np.asarray(U) - np.asarray(V))
        return self.norm(self.apply(U, xi) - self.apply(V, xi)) / d

    def random_sequence(self, rng: np.random.Generator, amplitude: float = 0.5) -> np.ndarray:
        """A matched random sequence with block norms up to ``amplitude * R_m`` and ``e^{-kappa m}`` decay.

        Built from one smooth global path on ``[0, M]`` so endpoints match.
        """
        M, n, N = self.n_blocks, self.n, self.model.n_modes
        t = np.arange(M * n + 1) * self.h
        # slow oscillations keep the sup part of the block norm dominant
        freq = rng.uniform(0.02, 0.4, (4, N))
        phase = rng.uniform(0, 2 * np.pi, (4, N))
        coef = rng.standard_normal((4, N)) / np.arange(1, N + 1)
        path = np.sum(coef[:, None, :] * np.sin(2 * np.pi * freq[:, None, :] * t[None, :, None] + phase[:, None, :]), axis=0)
        path *= np.exp(-self.kappa * t)[:, None]
        blocks = np.stack([path[m * n : (m + 1) * n + 1] for m in range(M)])
        norms = _block_norms(blocks, self.model, self.params.beta) / np.exp(-self.kappa * np.arange(M))
        ref = float(np.min(self.radii))
        if not np.isfinite(ref):
            ref = 1.0
        scale = amplitude * ref / max(float(np.max(norms)), 1e-300)
        return blocks * scale * rng.uniform(0.2, 1.0)

    # -- fixed point
    def solve(self, xi, tol: float = 1e-9, max_iter: int = 100, U0=None, relative: bool = False) -> ManifoldSolution:
        """Fixed point ``Gamma(xi, omega)`` by Picard iteration from ``U0`` (default 0).

        Stops once the ``H_kappa`` increment is below ``tol`` (times the norm of
        the iterate when ``relative``). Raises ``RuntimeError`` when the measured
        contraction exceeds 0.95 or ``max_iter`` is reached.
        """
        xi = self._check_xi(xi)
        U = self.zeros() if U0 is None else np.asarray(U0, dtype=float).copy()
        hist = []
        ratio = 0.0
        prev = None
        for it in range(1, max_iter + 1):
            new = self.apply(U, xi)
            diff = self.norm(new - U)
            nrm = self.norm(new)
            hist.append(diff)
            floor = 1e-13 * nrm
            if prev is not None and prev > floor and diff > floor:
                ratio = max(ratio, diff / prev)
                if ratio > 0.95 and it > 3:
                    raise RuntimeError(f"Lyapunov-Perron iteration does not contract (factor {ratio:.3f})")
            prev = diff
            U = new
            threshold = tol * nrm if relative else tol
            if diff <= threshold:
                seq = SequenceU(U, self.kappa, nrm)
                return ManifoldSolution(
                    seq, U[0, 0][self.model.plus_mask].copy(), it, ratio, diff, self.tail_bound(nrm), hist
                )
        raise RuntimeError(f"Lyapunov-Perron iteration reached max_iter={max_iter} (increment {prev:.3e})")

    def manifold_point(self, xi, **kw) -> np.ndarray:
        """``m(xi, omega)`` as a vector on the unstable modes."""
        return self.solve(xi, **kw).m_value

    # -- linearisation
    def linear_convolutions(self, V, U) -> np.ndarray:
        """Per-block convolutions of ``DF_R(u_m) v_m`` and ``DG_R(u_m) v_m domega``."""
        lam = self.model.eigenvalues
        out = np.empty(self.shape)
        for m in range(self.n_blocks):
            tp = self.truncated[m]
            u, v = U[m], V[m]
            psi, dchi = tp.cutoff_derivative(u, v, self.h)
            x = psi * u
            f = tp.pair.drift_derivative(x, dchi)
            g = tp.pair.diffusion_derivative_apply(x[:-1], dchi[:-1], self.d_omega[m])
            out[m] = drift_convolution(lam, f, self.h) + noise_convolution(lam, g, self.h)
        return out

    def linear_apply(self, V, U) -> np.ndarray:
        """``L(V)`` along the sequence ``U`` (the derivative operator without source)."""
        return self.assemble(self.linear_convolutions(V, U), np.zeros(self.model.n_modes))

    def derivative(self, U, h, tol: float = 1e-14, max_iter: int = 200, relative: bool = True):
        """Solve ``V = L(V) + S^-(. + m) h``; returns ``(D_xi Gamma . h, iterations, contraction)``."""
        h = self._check_xi(h)
        U = U.values if isinstance(U, SequenceU) else np.asarray(U, dtype=float)
        V = self.zeros()
        ratio = 0.0
        prev = None
        for it in range(1, max_iter + 1):
            new = self.assemble(self.linear_convolutions(V, U), h)
            diff = self.norm(new - V)
            nrm = self.norm(new)
            floor = 1e-13 * nrm
            if prev is not None and prev > floor and diff > floor:
                ratio = max(ratio, diff / prev)
                if ratio > 0.95 and it > 3:
                    raise RuntimeError(f"derivative operator does not contract (factor {ratio:.3f})")
            prev = diff
            V = new
            if diff <= (tol * nrm if relative else tol):
                return V, it, ratio
        raise RuntimeError(f"derivative iteration reached max_iter={max_iter}")


# -- diagnostics -----------------------------------------------------------------------


def shift_identity_residual(lp: LyapunovPerron, solution: ManifoldSolution, tol: float = 1e-12) -> dict:
    """Compare ``Gamma(xi)(m+1, .)`` with ``Gamma(u^-(1), theta_1 omega)(m, .)``.

    The right-hand side is re-solved on the remaining ``M - 1`` blocks.
    """
    U = solution.sequence.values
    u1 = U[1, 0]
    xi1 = np.where(lp.model.minus_mask, u1, 0.0)
    shifted = lp.shifted(1)
    other = shifted.solve(xi1, tol=tol, max_iter=200)
    diff = np.abs(U[1:] - other.sequence.values)
    return {
        "residual": float(np.max(diff)) if diff.size else 0.0,
        "per_block": np.max(diff, axis=(1, 2)).tolist(),
        "tail_bound": float(np.max(other.tail_bound)),
    }


def tempered_radii(lp: LyapunovPerron) -> dict:
    """Finite-horizon radii ``r_hat_i``, ``rho_hat``, ``r_bar_i``, ``rho_bar``.

    ``r_hat_i = R(theta_i omega) / (2 L_Gamma)`` with ``L_Gamma = 2 c_S``;
    ``r_bar_i`` is the minimum of ``r_hat`` over grid-aligned shifts in
    ``[i, i+1]``, which needs noise on ``[0, n_blocks + 1]``.
    """
    L = 2.0 * lp.model.c_S
    M = lp.n_blocks
    kappa = lp.kappa
    r_hat = lp.radii / (2 * L)
    i = np.arange(M)
    rho_hat = float(np.min(np.exp(kappa * i) * r_hat) / L)
    n = lp.n
    available = int(np.floor(lp.omega.length + 1e-12)) - 1  # windows [s, s+1] inside the path
    if available < 1:
        raise ValueError("noise horizon too short for the shifted radii")
    sn = sliding_holder_seminorms(lp.omega, lp.params.beta_prime, 1.0)
    R_s = cutoff_radius(sn, lp.K, lp.pair, lp.c_alpha_beta) / (2 * L)
    nb = min(M, available)
    r_bar = np.array([np.min(R_s[k * n : (k + 1) * n + 1]) for k in range(nb)])
    rho_bar = float(np.min(np.exp(kappa * np.arange(nb)) * r_bar) / L)
    return {"L_Gamma": L, "r_hat": r_hat, "rho_hat": rho_hat, "r_bar": r_bar, "rho_bar": rho_bar}


def _fit_rate(norms, window):
    m = np.arange(norms.size)
    sel = (m >= window[0]) & (m <= window[1]) & (norms > 0)
    if np.count_nonzero(sel) < 2:
        return float("nan")
    return float(np.polyfit(m[sel], np.log(norms[sel]), 1)[0])


def verify_stable_manifold(
    lp: LyapunovPerron,
    xis,
    T_verify: int = 6,
    tol: float = 1e-13,
    control_size: float = 0.05,
) -> dict:
    """Forward-integrate from points on the computed manifold and check decay and invariance.

    For each ``xi``: the trajectory from ``xi + m(xi)`` (untruncated dynamics)
    is fitted for its exponential rate over integer times in
    ``[2, min(M - 2, T_verify)]``; the invariance residual
    ``|phi^+(m) - m(phi^-(m), theta_m omega)|`` is computed for ``m = 1..T_verify``
    by re-solving on the remaining blocks; a control started at
    ``xi + m(xi) + control_size |xi| e^+`` is fitted the same way.
    """
    model = lp.model
    plus = model.plus_mask
    T = min(T_verify, lp.n_blocks - 1)
    window = (2, max(2, min(lp.n_blocks - 2, T)))
    points = []
    for xi in np.atleast_2d(np.asarray(xis, dtype=float)):
        sol = lp.solve(xi, tol=tol, max_iter=200)
        x0 = xi.copy()
        x0[plus] = sol.m_value
        r = {"xi": xi.tolist(), "m": sol.m_value.tolist(), "contraction": sol.contraction}
        nxi = float(np.linalg.norm(xi))
        if nxi == 0:
            r.update(rate=float("-inf"), control_rate=float("-inf"), invariance=[0.0] * T,
                     invariance_tail=[0.0] * T, consistency=0.0, max_cutoff_ratio=0.0)
            points.append(r)
            continue
        blocks = solve_forward(x0, lp.omega, lp.pair, model, lp.params, T, tol=1e-15)
        traj = np.stack([b.values for b in blocks])
        states = np.concatenate([traj[:, 0], traj[-1:, -1]])
        norms = np.linalg.norm(states, axis=1)
        r["rate"] = _fit_rate(norms, window)
        r["consistency"] = float(np.max(np.abs(traj - sol.sequence.values[:T])))
        bn = _block_norms(traj, model, lp.params.beta)
        r["max_cutoff_ratio"] = float(np.max(bn / lp.radii[:T]))
        inv, tails = [], []
        for m in range(1, T + 1):
            if m >= lp.n_blocks:
                break
            sub = lp.shifted(m)
            xm = np.where(model.minus_mask, states[m], 0.0)
            s2 = sub.solve(xm, tol=tol, max_iter=200)
            inv.append(float(np.linalg.norm(states[m][plus] - s2.m_value)))
            tails.append(float(s2.tail_bound[0]))
        r["invariance"] = inv
        r["invariance_tail"] = tails
        xc = x0.copy()
        xc[plus] += control_size * nxi
        cblocks = solve_forward(xc, lp.omega, lp.pair, model, lp.params, T, tol=1e-15)
        cstates = np.concatenate([np.stack([b.values[0] for b in cblocks]), cblocks[-1].values[-1:]])
        r["control_rate"] = _fit_rate(np.linalg.norm(cstates, axis=1), window)
        r["state_norms"] = norms.tolist()
        points.append(r)
    return {"T_verify": T, "fit_window": list(window), "kappa": lp.kappa, "points": points}
