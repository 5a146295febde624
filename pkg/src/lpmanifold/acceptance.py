"""Acceptance criteria 1-10, runnable from the CLI and from the test suite."""

from __future__ import annotations

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .coefficients import NonlinearPair
from .config import ExperimentConfig, derive_seed
from .experiment import Experiment
from .integrals import FracParams, beta_identity, fractional_integral, singular_quadrature, young_integral
from .manifold import shift_identity_residual, verify_stable_manifold
from .mild import choose_rho, picard_step, solve_block, weighted_norm
from .noise import FbmSpec, holder_seminorm, sample_fbm_1d, sample_noise
from .spectral import SpectralModel

log = logging.getLogger(__name__)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict
    runtime: float = 0.0
    runtime_limit: float = math.inf
    status: str = ""

    def __post_init__(self):
        if not self.status:
            self.status = "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        return f"{self.status} criterion {self.number}: {self.name}"

    def table_row(self) -> dict:
        """Deterministic summary (runtimes are reported separately)."""
        return {"number": self.number, "name": self.name, "status": self.status, "measured": self.measured}


def _timed(limit, func, *args):
    t0 = time.perf_counter()
    res = func(*args)
    dt = time.perf_counter() - t0
    res.runtime = dt
    res.runtime_limit = limit
    if dt > limit:
        res.passed = False
        res.status = "FAIL"
        res.measured["runtime_exceeded"] = True
    return res


# -- criteria ---------------------------------------------------------------------------


def criterion_beta(seed: int) -> CriterionResult:
    rng = np.random.default_rng(derive_seed(seed, "beta_pairs"))
    pairs = rng.uniform(-0.9, 2.0, (20, 2))
    errs = [abs(singular_quadrature(None, a, b) - beta_identity(a, b)) / beta_identity(a, b) for a, b in pairs]
    worst = max(errs)
    return CriterionResult(1, "Beta identity by singular quadrature", worst <= 1e-7,
                           {"max_rel_error": worst, "threshold": 1e-7, "pairs": 20})


def criterion_fbm_law(seed: int, n_samples: int = 10_000, steps: int = 128, hurst: float = 0.75) -> CriterionResult:
    grid = np.arange(2 * steps + 1) / steps
    paths = sample_fbm_1d(hurst, grid, seed=derive_seed(seed, "fbm_law"), size=n_samples)
    x, y = paths[:, steps], paths[:, 2 * steps]
    var_est, var_se = float(np.mean(x * x)), float(np.std(x * x) / math.sqrt(n_samples))
    cov_est, cov_se = float(np.mean(x * y)), float(np.std(x * y) / math.sqrt(n_samples))
    cov_true = 2 ** (2 * hurst - 1)
    z_var = abs(var_est - 1.0) / var_se
    z_cov = abs(cov_est - cov_true) / cov_se
    return CriterionResult(2, "fBm variance and covariance within 3 standard errors", z_var <= 3 and z_cov <= 3,
                           {"var": var_est, "var_se": var_se, "z_var": z_var, "cov": cov_est,
                            "cov_true": cov_true, "cov_se": cov_se, "z_cov": z_cov})


def _small_model(n_modes=4) -> SpectralModel:
    return SpectralModel.shifted_laplacian(n_modes, mu_hat=1.0, mu_check=-1.0)


def criterion_integrals(seed: int, n_paths: int = 50, steps: int = 256) -> CriterionResult:
    model = _small_model(4)
    params = FracParams()
    rng = np.random.default_rng(derive_seed(seed, "integral_paths"))
    rel, shift_res = [], []
    for k in range(n_paths):
        om = sample_noise(FbmSpec(0.75, 2, steps, int(rng.integers(2**62))), model)
        Z = rng.standard_normal((4, 4))
        yi = young_integral(Z, om.times, om.values, 0.0, 1.0, params)
        fi = fractional_integral(Z, om.times, om.values, params, 0.0, 1.0)
        rel.append(float(np.linalg.norm(fi - yi) / np.linalg.norm(yi)))
        # additivity over [0, 1/2] + [1/2, 3/2] and the Wiener-shift identity on [1/2, 3/2]
        Zt = Z[None] * (1 + 0.5 * np.sin(3 * om.times))[:, None, None]
        whole = young_integral(Zt, om.times, om.values, 0.0, 1.5)
        parts = young_integral(Zt, om.times, om.values, 0.0, 0.5) + young_integral(Zt, om.times, om.values, 0.5, 1.5)
        sh = om.shift(0.5)
        shifted = young_integral(Zt[steps // 2 :], sh.times, sh.values, 0.0, 1.0)
        direct = young_integral(Zt, om.times, om.values, 0.5, 1.5)
        shift_res.append(max(float(np.max(np.abs(whole - parts))), float(np.max(np.abs(shifted - direct)))))
    worst, worst_shift = max(rel), max(shift_res)
    return CriterionResult(3, "Young sum vs fractional formula; shift additivity",
                           worst <= 1e-3 and worst_shift <= 1e-10,
                           {"max_rel_disagreement": worst, "max_shift_residual": worst_shift, "paths": n_paths})


def linear_noise_errors(seed: int, n_paths: int = 20, steps: int = 256, sigma: float = 0.1):
    """Relative errors of the mild solver against ``u0 exp(lambda t + sigma omega(t))`` at ``steps`` and ``steps/2``."""
    model = _small_model(4)
    params = FracParams()
    pair = NonlinearPair(model, 0.0, sigma, beta=0.0, coupling=False, linear=True)
    rng = np.random.default_rng(derive_seed(seed, "linear_paths"))
    fine, coarse = [], []
    for _ in range(n_paths):
        om = sample_noise(FbmSpec(0.75, 1, steps, int(rng.integers(2**62))), model)
        u0 = rng.uniform(0.5, 1.5, 4)
        for path, out in ((om, fine), (om.subsample(2), coarse)):
            sol = solve_block(u0, path, pair, model, params, tol=1e-15, max_iter=500)
            exact = u0 * np.exp(np.multiply.outer(path.times, model.eigenvalues) + sigma * path.values)
            out.append(float(np.max(np.abs(sol.path.values - exact) / np.abs(exact))))
    return np.array(fine), np.array(coarse)


def criterion_linear_oracle(seed: int) -> CriterionResult:
    fine, coarse = linear_noise_errors(seed)
    order = math.log2(float(np.mean(coarse)) / float(np.mean(fine)))
    young = FracParams().young_order
    ok_order = young / 2 <= order <= 2 * young
    worst = float(np.max(fine))
    return CriterionResult(4, "Mild solver vs diagonal linear-noise closed form", worst <= 1e-3 and ok_order,
                           {"max_rel_error": worst, "richardson_order": order, "young_order": young})


def criterion_picard(exp: Experiment, n_pairs: int = 20) -> CriterionResult:
    """Contraction of the block Picard map at ``rho1`` for the unscaled coefficient preset."""
    cfg = exp.config
    c = cfg.coefficients
    pair = dataclasses.replace(exp.pair, eps_F=c.eps_F, eps_G=c.eps_G)
    w = exp.omega.window(0)
    sn = holder_seminorm(w, exp.params.beta_prime, 0.0, 1.0).value
    rng = np.random.default_rng(derive_seed(exp.seed, "picard_pairs"))
    N = exp.model.n_modes
    n = w.times.size - 1
    t = w.times[:, None]
    radius = 1.0
    rho0, rho1 = choose_rho(pair, exp.model, exp.params, sn, radius=radius, c_alpha_beta=c.c_alpha_beta)
    ratios = []
    d = w.increments
    for _ in range(n_pairs):
        u0 = rng.standard_normal(N) / np.arange(1, N + 1)
        u0 *= radius / np.linalg.norm(u0)

        def rand_path():
            f = rng.uniform(0.5, 4, N)
            ph = rng.uniform(0, 2 * np.pi, N)
            return np.exp(np.multiply.outer(w.times, exp.model.eigenvalues)) * u0 + 0.3 * radius * np.sin(
                2 * np.pi * f * t + ph) * rng.standard_normal(N) / np.arange(1, N + 1)

        u, v = rand_path(), rand_path()
        pu = picard_step(u, u0, d, pair, exp.model)
        pv = picard_step(v, u0, d, pair, exp.model)
        ratios.append(weighted_norm(pu - pv, exp.model, exp.params.beta, rho1)
                      / weighted_norm(u - v, exp.model, exp.params.beta, rho1))
    worst = max(ratios)
    return CriterionResult(5, "Picard contraction at the chosen rho1", worst <= 0.55,
                           {"max_ratio": worst, "rho0": rho0, "rho1": rho1, "eps": c.eps_F, "grid": n})


def criterion_lp_contraction(exp: Experiment, n_pairs: int = 20) -> CriterionResult:
    lp = exp.lp
    rng = np.random.default_rng(derive_seed(exp.seed, "lp_pairs"))
    ratios = []
    for _ in range(n_pairs):
        U = lp.random_sequence(rng, rng.uniform(0.3, 1.5))
        V = lp.random_sequence(rng, rng.uniform(0.3, 1.5))
        xi = exp.xi_points(1, stream="lp_pairs")[0] * rng.uniform(0, 1)
        ratios.append(lp.contraction_ratio(U, V, xi))
    worst = max(ratios)
    return CriterionResult(6, "Lyapunov-Perron contraction in H_kappa", worst <= 0.55 and lp.gap <= 0.5,
                           {"max_ratio": worst, "gap_value": lp.gap, "K": exp.K,
                            "blocks": lp.n_blocks, "modes": exp.model.n_modes, "steps": lp.n})


def criterion_manifold(exp: Experiment) -> CriterionResult:
    lp = exp.lp
    cfg = exp.config
    tol = cfg.lp.tol
    zero = lp.solve(np.zeros(exp.model.n_modes), tol=tol, max_iter=cfg.lp.max_iter)
    zero_max = float(np.max(np.abs(zero.sequence.values)))
    xis = exp.xi_points(16)
    sols = [lp.solve(xi, tol=tol, max_iter=cfg.lp.max_iter) for xi in xis]
    L = 2 * exp.model.c_S
    lip = 0.0
    for i in range(len(xis)):
        for j in range(i + 1, len(xis)):
            lip = max(lip, lp.norm(sols[i].sequence.values - sols[j].sequence.values) / np.linalg.norm(xis[i] - xis[j]))
    decay_excess = -np.inf
    beta = exp.params.beta
    for xi, s in zip(xis, sols):
        for m in range(min(13, lp.n_blocks)):
            nm = weighted_norm(s.sequence.values[m], exp.model, beta)
            decay_excess = max(decay_excess, nm / (L * math.exp(-lp.kappa * m) * np.linalg.norm(xi)))
    sh = shift_identity_residual(lp, sols[-1], tol=tol)
    ok = (zero_max <= 1e-8 and lip <= L and decay_excess <= 1.0 and sh["residual"] <= 1e-6 + sh["tail_bound"])
    return CriterionResult(7, "Manifold: zero section, Lipschitz, decay, shift identity", ok,
                           {"zero_max": zero_max, "lipschitz_ratio": lip, "L_Gamma": L,
                            "decay_ratio_max": float(decay_excess), "shift_residual": sh["residual"],
                            "shift_tail_bound": sh["tail_bound"]})


def criterion_verify(exp: Experiment) -> CriterionResult:
    lp = exp.lp
    cfg = exp.config
    xis = exp.xi_points(cfg.verify.n_points)
    rep = verify_stable_manifold(lp, xis, T_verify=cfg.verify.T_verify, tol=cfg.lp.tol)
    pts = rep["points"]
    max_rate = max(p["rate"] for p in pts)
    inv_excess = max(max(i - 1e-5 - tb for i, tb in zip(p["invariance"], p["invariance_tail"])) for p in pts)
    ctrl = all(p["control_rate"] > p["rate"] for p in pts)
    ok = max_rate <= -lp.kappa + 0.1 and inv_excess <= 0 and ctrl
    return CriterionResult(8, "Stable-manifold decay, invariance and off-manifold controls", ok,
                           {"max_rate": max_rate, "rate_bound": -lp.kappa + 0.1,
                            "max_invariance": max(max(p["invariance"]) for p in pts),
                            "invariance_excess": inv_excess,
                            "min_control_rate": min(p["control_rate"] for p in pts),
                            "controls_slower": ctrl, "max_cutoff_ratio": max(p["max_cutoff_ratio"] for p in pts)})


def derivative_check(exp: Experiment, eps=(1e-2, 1e-3, 1e-4), n_random: int = 20):
    """``(L contraction, FD errors, fitted order)`` around a point with block norms near ``R/4``."""
    lp = exp.lp
    R = float(np.min(lp.radii))
    rng = np.random.default_rng(derive_seed(exp.seed, "derivative"))
    minus = exp.model.minus_mask
    N = exp.model.n_modes
    d = np.where(minus, rng.standard_normal(N) / np.arange(1, N + 1), 0.0)
    xi0 = 0.15 * R * d / np.linalg.norm(d)
    h = np.where(minus, rng.standard_normal(N) / np.arange(1, N + 1), 0.0)
    h /= np.linalg.norm(h)
    solve = lambda x: lp.solve(x, tol=1e-16, max_iter=300, relative=True).sequence.values  # noqa: E731
    U = solve(xi0)
    ratios = []
    for _ in range(n_random):
        V = lp.random_sequence(rng, rng.uniform(0.3, 1.5))
        ratios.append(lp.norm(lp.linear_apply(V, U)) / lp.norm(V))
    D, _, _ = lp.derivative(U, h, tol=1e-15)
    errs = [lp.norm((solve(xi0 + e * h) - solve(xi0 - e * h)) / (2 * e) - D) for e in eps]
    order = float(np.polyfit(np.log(eps), np.log(errs), 1)[0])
    return max(ratios), errs, order


def criterion_smoothness(exp: Experiment) -> CriterionResult:
    contraction, errs, order = derivative_check(exp)
    return CriterionResult(9, "Derivative operator contraction and finite-difference order",
                           contraction <= 0.55 and order >= 1.0,
                           {"L_contraction": contraction, "fd_errors": errs, "fd_order": order})


LIMITS = {1: 1.0, 2: 30.0, 3: 120.0, 4: 120.0, 5: 60.0, 6: 300.0, 7: 600.0, 8: 600.0, 9: 600.0}


def run_criteria(config: ExperimentConfig) -> list[CriterionResult]:
    """Criteria 1-9 for ``config`` (criterion 10 compares two runs, see ``run_accept``)."""
    seed = config.noise.seed
    exp = Experiment(config)
    steps = [
        (1, criterion_beta, seed),
        (2, criterion_fbm_law, seed),
        (3, criterion_integrals, seed),
        (4, criterion_linear_oracle, seed),
        (5, criterion_picard, exp),
        (6, criterion_lp_contraction, exp),
        (7, criterion_manifold, exp),
        (8, criterion_verify, exp),
        (9, criterion_smoothness, exp),
    ]
    out = []
    for number, func, arg in steps:
        res = _timed(LIMITS[number], func, arg)
        log.info("%s (%.2fs)", res.line(), res.runtime)
        out.append(res)
    return out


def determinism_result(manifest_a: dict, manifest_b: dict) -> CriterionResult:
    same = manifest_a == manifest_b
    diff = sorted(k for k in set(manifest_a) | set(manifest_b) if manifest_a.get(k) != manifest_b.get(k))
    return CriterionResult(10, "Two accept runs give identical manifests", same, {"differing_fields": diff})
