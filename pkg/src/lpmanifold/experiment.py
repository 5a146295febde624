"""Build the numerical objects of a configured experiment and run its stages."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from functools import cached_property

import numpy as np

from .coefficients import NonlinearPair, audit_lipschitz, scale_amplitudes
from .config import ExperimentConfig, derive_seed
from .integrals import beta_identity, k1, k1_quadrature, k1_profile, k2, singular_quadrature
from .manifold import LyapunovPerron, max_gap_K, tempered_radii, verify_stable_manifold
from .mild import choose_rho, convolution_audit, join_blocks, solve_block, weighted_norm
from .noise import FbmSpec, block_seminorms, holder_seminorm, sample_noise, temperedness_trend
from .spectral import smoothing_constant_audit

log = logging.getLogger(__name__)


class Experiment:
    """Lazily constructed model, noise path, coefficients and LP operator for one config."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.model = config.spectral_model()
        self.params = config.frac_params()
        self.seed = config.noise.seed

    @cached_property
    def omega(self):
        n = self.config.noise
        spec = FbmSpec(n.hurst, n.n_blocks + 1, n.steps_per_unit, derive_seed(self.seed, "noise"))
        return sample_noise(spec, self.model)

    @cached_property
    def seminorms(self) -> np.ndarray:
        return block_seminorms(self.omega, self.params.beta_prime, self.config.noise.n_blocks)

    @cached_property
    def K(self) -> float:
        lp = self.config.lp
        if lp.K == "auto":
            return lp.K_fraction * max_gap_K(lp.kappa, self.model.mu_hat, self.model.mu_check)
        return float(lp.K)

    @cached_property
    def _pair_and_trail(self):
        c = self.config.coefficients
        if c.preset == "zero":
            base = NonlinearPair(self.model, 0.0, 0.0, c.scale, self.params.beta)
        elif c.preset == "linear":
            base = NonlinearPair(self.model, c.eps_F, c.eps_G, c.scale, self.params.beta, coupling=False, linear=True)
        else:
            base = NonlinearPair(
                self.model, c.eps_F, c.eps_G, c.scale, self.params.beta, coupling=c.preset == "saturating"
            )
        if not c.auto_scale or c.preset in ("zero", "linear"):
            return base, []
        pair, trail = scale_amplitudes(base, self.seminorms, self.K, c.c_alpha_beta, c.target_radius)
        for eF, eG, r in trail:
            log.info("amplitude search: eps_F=%.6g eps_G=%.6g min R=%.6g", eF, eG, r)
        return pair, trail

    @property
    def pair(self) -> NonlinearPair:
        return self._pair_and_trail[0]

    @property
    def amplitude_trail(self) -> list:
        return self._pair_and_trail[1]

    @cached_property
    def lp(self) -> LyapunovPerron:
        return LyapunovPerron(
            self.model,
            self.params,
            self.pair,
            self.omega,
            self.config.noise.n_blocks,
            self.config.lp.kappa,
            self.K,
            self.config.coefficients.c_alpha_beta,
            tail_cut=self.config.lp.tail_cut,
            seminorms=self.seminorms,
        )

    def xi_points(self, count: int, radius: float | None = None, stream: str = "xi_grid") -> np.ndarray:
        """Deterministic points of ``B^-`` with norms spread over ``(0, radius]``.

        ``radius`` defaults to ``verify.radius_fraction`` times the smallest cutoff radius.
        """
        if radius is None:
            ref = float(np.min(self.lp.radii))
            radius = self.config.verify.radius_fraction * (ref if np.isfinite(ref) else 1.0)
        rng = np.random.default_rng(derive_seed(self.seed, stream))
        minus = self.model.minus_mask
        N = self.model.n_modes
        decay = 1.0 / np.arange(1, N + 1)
        pts = []
        for k in range(count):
            d = np.where(minus, rng.standard_normal(N) * decay, 0.0)
            d /= np.linalg.norm(d)
            pts.append(d * radius * (k + 1) / count)
        return np.array(pts)


# -- stages -----------------------------------------------------------------------


def stage_simulate_noise(exp: Experiment) -> tuple[dict, dict]:
    """Noise path and its seminorm diagnostics. Returns ``(arrays, report)``."""
    om = exp.omega
    header = ["t"] + [f"omega_{i + 1}" for i in range(om.values.shape[1])]
    arrays = {"noise.csv": (header, np.column_stack([om.times, om.values]))}
    trend = temperedness_trend(om, exp.params.beta_prime, exp.config.noise.n_blocks - 1)
    report = {
        "hurst": om.hurst,
        "steps_per_unit": om.steps_per_unit,
        "horizon": om.length,
        "block_seminorms": exp.seminorms,
        "seminorm_mode": "exact",
        "temperedness_trend": trend,
        "trace": exp.model.trace,
        "trace_tail_estimate": exp.model.trace_tail_estimate(),
    }
    return arrays, report


def stage_solve(exp: Experiment) -> tuple[dict, dict]:
    """Forward solution (untruncated coefficients) from the largest verification point plus an unstable kick."""
    xi = exp.xi_points(exp.config.verify.n_points)[-1]
    u0 = xi.copy()
    u0[exp.model.plus_mask] = 0.1 * np.linalg.norm(xi)
    blocks, stats = [], []
    x = u0
    for i in range(exp.config.verify.T_verify):
        w = exp.omega.window(i)
        sn = holder_seminorm(w, exp.params.beta_prime, 0.0, 1.0).value
        rho0, rho1 = choose_rho(
            exp.pair, exp.model, exp.params, sn, radius=float(np.linalg.norm(x)),
            c_alpha_beta=exp.config.coefficients.c_alpha_beta,
        )
        sol = solve_block(x, w, exp.pair, exp.model, exp.params, tol=1e-13, rho=rho1, index=i)
        blocks.append(sol.path)
        stats.append({"block": i, "iterations": sol.iterations, "contraction": sol.contraction,
                      "rho0": rho0, "rho1": rho1, "error_bound": sol.error_bound,
                      "norm": weighted_norm(sol.path, exp.model, exp.params.beta)})
        x = sol.path.values[-1]
    traj = join_blocks(blocks)
    t = np.arange(traj.shape[0]) / exp.config.noise.steps_per_unit
    header = ["t"] + [f"u_{i + 1}" for i in range(traj.shape[1])]
    return {"trajectory.csv": (header, np.column_stack([t, traj]))}, {"u0": u0, "blocks": stats}


def _solve_point(args):
    lp, xi, tol, max_iter = args
    sol = lp.solve(xi, tol=tol, max_iter=max_iter)
    return sol.sequence.values, sol.m_value, sol.iterations, sol.contraction, float(np.max(sol.tail_bound))


def map_points(func, items, jobs: int = 1):
    """Ordered map over independent work items with a bounded process pool."""
    if jobs <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def stage_manifold(exp: Experiment, jobs: int = 1) -> tuple[dict, dict]:
    """Manifold graph ``xi -> m(xi)`` on the configured grid, with Lipschitz ratios and decay rates."""
    lp = exp.lp
    cfg = exp.config
    xis = exp.xi_points(cfg.verify.grid_points)
    results = map_points(_solve_point, [(lp, xi, cfg.lp.tol, cfg.lp.max_iter) for xi in xis], jobs)
    seqs = [r[0] for r in results]
    L = 2 * exp.model.c_S
    rows, lip, rates = [], [], []
    for k, xi in enumerate(xis):
        ratios = [
            lp.norm(seqs[k] - seqs[j]) / np.linalg.norm(xi - xis[j]) for j in range(len(xis)) if j != k
        ]
        lip.append(max(ratios))
        states = np.concatenate([seqs[k][:, 0], seqs[k][-1:, -1]])
        norms = np.linalg.norm(states, axis=1)
        m = np.arange(norms.size)
        sel = (m >= 2) & (m <= lp.n_blocks - 2) & (norms > 0)
        rates.append(float(np.polyfit(m[sel], np.log(norms[sel]), 1)[0]))
        rows.append(np.concatenate([xi, results[k][1], [lip[-1], rates[-1]]]))
    N = exp.model.n_modes
    kp = exp.model.split_index
    header = [f"xi_{i + 1}" for i in range(N)] + [f"m_{i + 1}" for i in range(kp)] + ["lipschitz_ratio", "decay_rate"]
    radii = tempered_radii(lp)
    report = {
        "K": exp.K,
        "gap_value": lp.gap,
        "kappa": lp.kappa,
        "L_Gamma": L,
        "max_lipschitz_ratio": max(lip),
        "iterations": [r[2] for r in results],
        "contraction": [r[3] for r in results],
        "tail_bound": [r[4] for r in results],
        "radii": lp.radii,
        "tempered": radii,
        "amplitudes": {"eps_F": exp.pair.eps_F, "eps_G": exp.pair.eps_G, "search": exp.amplitude_trail},
    }
    return {"manifold.csv": (header, np.array(rows))}, report


def _verify_point(args):
    lp, xi, T, tol = args
    return verify_stable_manifold(lp, [xi], T_verify=T, tol=tol)["points"][0]


def stage_verify(exp: Experiment, jobs: int = 1) -> tuple[dict, dict]:
    lp = exp.lp
    cfg = exp.config
    xis = exp.xi_points(cfg.verify.n_points)
    points = map_points(_verify_point, [(lp, xi, cfg.verify.T_verify, cfg.lp.tol) for xi in xis], jobs)
    T = min(cfg.verify.T_verify, lp.n_blocks - 1)
    report = {
        "T_verify": T,
        "fit_window": [2, max(2, min(lp.n_blocks - 2, T))],
        "kappa": lp.kappa,
        "points": points,
        "max_rate": max(p["rate"] for p in points),
        "max_invariance": max(max(p["invariance"]) for p in points),
    }
    return {}, report


def stage_audit(exp: Experiment) -> tuple[dict, dict]:
    """Constants and inequality replays: semigroup, Lipschitz, convolution estimate, kernels."""
    model, params = exp.model, exp.params
    sm = smoothing_constant_audit(model, params.beta, beta=params.beta)
    R = float(np.min(exp.lp.radii))
    lip = audit_lipschitz(exp.pair, R if np.isfinite(R) else 1.0)
    conv = convolution_audit(exp.pair, model, params, exp.omega.window(0))
    rng = np.random.default_rng(derive_seed(exp.seed, "beta_pairs"))
    ab = rng.uniform(-0.9, 2.0, (20, 2))
    beta_err = max(
        abs(singular_quadrature(None, a, b) - beta_identity(a, b)) / beta_identity(a, b) for a, b in ab
    )
    a, b = -params.alpha, params.alpha + params.beta_prime - 1
    k1_err = max(
        abs(k1_quadrature(rho, d, a, b) - float(k1_profile(rho, d, a, b)))
        for rho in (0.0, 1.0, 10.0) for d in (0.25, 1.0)
    )
    sn = float(exp.seminorms[0])
    rho0, rho1 = choose_rho(exp.pair, model, params, sn, radius=R if np.isfinite(R) else 0.0,
                            c_alpha_beta=exp.config.coefficients.c_alpha_beta)
    report = {
        "smoothing": {k: getattr(sm, k) for k in (
            "sigma", "c_S", "smoothing_sup", "increment_sup", "difference_sup",
            "double_difference_sup", "dichotomy_sup", "block_norm_sup", "problems")},
        "lipschitz": lip,
        "convolution_constant": conv,
        "beta_identity_max_rel_error": beta_err,
        "k1_max_abs_error": k1_err,
        "k1": {"rho0": k1(0.0, params), "rho1": k1(rho1, params)},
        "k2": {"rho0": k2(0.0), "rho1": k2(rho1)},
        "rho": {"rho0": rho0, "rho1": rho1},
        "gap": {"K": exp.K, "value": exp.lp.gap},
    }
    return {}, report
