"""Diagonal spectral model of the linear part: semigroup, projections, graded norms.

States are coefficient arrays in the eigenbasis with the mode axis last, so
every routine here broadcasts over leading (time, sample) axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SpectralModel:
    """Truncated diagonal generator with an exponential dichotomy.

    Parameters
    ----------
    eigenvalues : array_like
        Strictly decreasing, nonzero eigenvalues ``lambda_1 > ... > lambda_N``.
    mu_hat, mu_check : float
        Dichotomy rates with ``mu_check < 0 < mu_hat``, ``mu_hat`` not above the
        smallest positive eigenvalue and ``mu_check`` not below the largest
        negative one.
    c_S : float
        Uniform semigroup constant used by every bound that carries it.
    covariance_weights : array_like
        Nonnegative weights ``mu_i`` of the noise covariance (same length).
    """

    eigenvalues: np.ndarray
    mu_hat: float
    mu_check: float
    c_S: float = 2.0
    covariance_weights: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float).copy()
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("eigenvalues must be a nonempty 1-D sequence")
        if np.any(np.diff(lam) >= 0):
            raise ValueError("eigenvalues must be strictly decreasing")
        if np.any(lam == 0):
            raise ValueError("0 must not be an eigenvalue")
        if self.covariance_weights is None:
            mu = np.zeros_like(lam)
        else:
            mu = np.asarray(self.covariance_weights, dtype=float).copy()
        if mu.shape != lam.shape:
            raise ValueError("covariance_weights must match the number of modes")
        if np.any(mu < 0) or not np.all(np.isfinite(mu)):
            raise ValueError("covariance_weights must be finite and nonnegative")
        lam.setflags(write=False)
        mu.setflags(write=False)
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "covariance_weights", mu)

        k = self.split_index
        if not self.mu_check < 0 < self.mu_hat:
            raise ValueError("need mu_check < 0 < mu_hat")
        if k > 0 and self.mu_hat > lam[k - 1]:
            raise ValueError(
                f"mu_hat={self.mu_hat} exceeds the smallest positive eigenvalue {lam[k - 1]}"
            )
        if k < lam.size and self.mu_check < lam[k]:
            raise ValueError(
                f"mu_check={self.mu_check} is below the largest negative eigenvalue {lam[k]}"
            )
        if self.c_S < 1:
            raise ValueError("c_S must be >= 1")

    @classmethod
    def shifted_laplacian(
        cls,
        n_modes: int = 32,
        shift: float = 2.5,
        mu_hat: float | None = None,
        mu_check: float | None = None,
        c_S: float = 2.0,
        cov_scale: float = 1.0,
        cov_power: float = 2.0,
    ) -> "SpectralModel":
        """``lambda_i = shift - i**2`` with covariance ``mu_i = cov_scale * i**-cov_power``.

        Unset dichotomy rates default to two thirds of the distance from zero
        to the nearest eigenvalue on each side.
        """
        i = np.arange(1, n_modes + 1, dtype=float)
        lam = shift - i**2
        if cov_power <= 1:
            raise ValueError("cov_power must exceed 1 for a trace-class covariance")
        pos = lam[lam > 0]
        neg = lam[lam < 0]
        if mu_hat is None:
            mu_hat = 2.0 / 3.0 * pos.min() if pos.size else 1.0
        if mu_check is None:
            mu_check = 2.0 / 3.0 * neg.max() if neg.size else -1.0
        return cls(lam, mu_hat, mu_check, c_S, cov_scale * i ** (-cov_power))

    @property
    def n_modes(self) -> int:
        return self.eigenvalues.size

    @property
    def split_index(self) -> int:
        """Dimension of the unstable block (number of positive eigenvalues)."""
        return int(np.count_nonzero(self.eigenvalues > 0))

    @property
    def plus_mask(self) -> np.ndarray:
        return self.eigenvalues > 0

    @property
    def minus_mask(self) -> np.ndarray:
        return self.eigenvalues < 0

    @property
    def trace(self) -> float:
        """Truncated trace of the noise covariance."""
        return float(self.covariance_weights.sum())

    def trace_tail_estimate(self) -> float:
        """Power-law extrapolation of the covariance mass beyond the last mode.

        Fits ``mu_i ~ c i**-p`` to the last half of the modes and integrates the
        tail; returns 0 when the weights are not strictly positive there.
        """
        mu = self.covariance_weights
        n = mu.size
        tail = mu[n // 2 :]
        if n < 4 or np.any(tail <= 0):
            return 0.0
        i = np.arange(n // 2 + 1, n + 1, dtype=float)
        p, logc = np.polyfit(np.log(i), np.log(tail), 1)
        p = -p
        if p <= 1:
            return float("inf")
        return float(np.exp(logc) * (n + 0.5) ** (1 - p) / (p - 1))

    # -- operations --------------------------------------------------------

    def graded_norm(self, x, gamma: float) -> np.ndarray:
        return graded_norm(self, x, gamma)

    def project(self, x, sign: str) -> np.ndarray:
        return project(self, x, sign)

    def semigroup(self, t, x, which: str = "full") -> np.ndarray:
        return semigroup_apply(self, t, x, which)


def graded_norm(model: SpectralModel, x, gamma: float) -> np.ndarray:
    """``(sum_i |lambda_i|**(2 gamma) x_i**2) ** 0.5`` along the last axis."""
    x = np.asarray(x, dtype=float)
    w = np.abs(model.eigenvalues) ** gamma
    return np.sqrt(np.sum((w * x) ** 2, axis=-1))


def embedding_constant(model: SpectralModel, gamma_low: float, gamma_high: float) -> float:
    """Smallest ``C`` with ``|x|_{gamma_low} <= C |x|_{gamma_high}`` for all x."""
    return float(np.max(np.abs(model.eigenvalues) ** (gamma_low - gamma_high)))


def project(model: SpectralModel, x, sign: str) -> np.ndarray:
    """Orthogonal projection onto the unstable (``"plus"``) or stable (``"minus"``) block."""
    x = np.asarray(x, dtype=float)
    if sign == "plus":
        mask = model.plus_mask
    elif sign == "minus":
        mask = model.minus_mask
    else:
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")
    return np.where(mask, x, 0.0)


def semigroup_apply(model: SpectralModel, t, x, which: str = "full") -> np.ndarray:
    """Apply ``S(t)`` (or its restriction to one spectral block) to ``x``.

    ``t`` may be an array; the result then has shape ``t.shape + x.shape``
    when ``x`` is a single state, or broadcasts ``t[..., None]`` against ``x``
    otherwise. Negative times are only allowed on the finite-dimensional
    unstable block, where the semigroup is a group.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if which not in ("full", "plus", "minus"):
        raise ValueError(f"which must be 'full', 'plus' or 'minus', got {which!r}")
    if which != "plus" and np.any(t < 0):
        raise ValueError("negative time is only defined on the unstable block")
    lam = model.eigenvalues
    if which == "plus":
        lam_eff = np.where(model.plus_mask, lam, 0.0)
        mask = model.plus_mask
    elif which == "minus":
        lam_eff = np.where(model.minus_mask, lam, 0.0)
        mask = model.minus_mask
    else:
        lam_eff = lam
        mask = np.ones_like(lam, dtype=bool)
    factor = np.where(mask, np.exp(t[..., None] * lam_eff), 0.0)
    return factor * x


@dataclass
class SmoothingAudit:
    """Empirical suprema of the semigroup smoothing and dichotomy bounds."""

    sigma: float
    c_S: float
    smoothing_sup: float  # sup t^s |lam|^s e^{lam t}
    increment_sup: float  # sup |e^{lam t} - 1| / (t |lam|)^s
    difference_sup: float  # sampled two-time difference bound ratio
    double_difference_sup: float  # sampled four-time difference bound ratio
    dichotomy_sup: float  # sup of the dichotomy ratios on both blocks
    block_norm_sup: float  # sup_x ||S^-(.)x||_{beta,-beta} / |x| on [0, 1]
    beta: float
    problems: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems


def smoothing_constant_audit(
    model: SpectralModel,
    sigma: float,
    t_grid=None,
    beta: float = 0.6,
    n_samples: int = 2000,
    seed: int = 0,
) -> SmoothingAudit:
    """Check the analytic-semigroup bounds on the stable block against ``c_S``.

    The smoothing and increment suprema run over ``t_grid`` and all stable
    modes. The two- and four-time difference bounds are sampled with random
    exponents in their admissible ranges. A ``c_S`` below any measured
    supremum is reported in ``problems`` rather than raised.
    """
    if not 0.0 <= sigma <= 1.0:
        raise ValueError("sigma must lie in [0, 1]")
    if t_grid is None:
        t_grid = np.linspace(1e-3, 5.0, 2000)
    t = np.asarray(t_grid, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t_grid must be strictly positive")
    lam = model.eigenvalues[model.minus_mask]
    a = np.abs(lam)
    tt = t[:, None]
    smoothing = float(np.max((tt * a) ** sigma * np.exp(-tt * a))) if lam.size else 0.0
    increment = float(np.max(-np.expm1(-tt * a) / (tt * a) ** sigma)) if lam.size else 0.0

    rng = np.random.default_rng(seed)
    diff_sup = 0.0
    ddiff_sup = 0.0
    if lam.size:
        # ||S(t-r) - S(t-tau)||_{B_eta -> B_gamma} <= c (r-tau)^nu (t-r)^{-(nu+gamma-eta)}
        nu = rng.uniform(0, 1, n_samples)
        sig = rng.uniform(0, 1, n_samples)
        gam_minus_eta = sig - nu
        tau = rng.uniform(0, 2, n_samples)
        r = tau + rng.uniform(1e-3, 2, n_samples)
        tf = r + rng.uniform(1e-3, 2, n_samples)
        lhs = np.max(
            a[None, :] ** gam_minus_eta[:, None]
            * np.abs(np.exp(-(tf - r)[:, None] * a) - np.exp(-(tf - tau)[:, None] * a)),
            axis=1,
        )
        rhs = (r - tau) ** nu * (tf - r) ** (-sig)
        diff_sup = float(np.max(lhs / rhs))
        # ||S(t-r)-S(s-r)-S(t-tau)+S(s-tau)|| <= c (t-s)^k (r-tau)^i (s-r)^{-(k+i)}
        kk = rng.uniform(0, 1, n_samples)
        ii = rng.uniform(0, 1, n_samples)
        tau = rng.uniform(0, 2, n_samples)
        r = tau + rng.uniform(1e-3, 2, n_samples)
        s = r + rng.uniform(1e-3, 2, n_samples)
        tf = s + rng.uniform(1e-3, 2, n_samples)

        def e(x):
            return np.exp(-x[:, None] * a)

        lhs = np.max(np.abs(e(tf - r) - e(s - r) - e(tf - tau) + e(s - tau)), axis=1)
        rhs = (tf - s) ** kk * (r - tau) ** ii * (s - r) ** (-(kk + ii))
        ddiff_sup = float(np.max(lhs / rhs))

    dich = dichotomy_ratio(model, np.linspace(0.0, 5.0, 501))
    block = stable_block_norm_constant(model, beta)

    audit = SmoothingAudit(
        sigma=sigma,
        c_S=model.c_S,
        smoothing_sup=smoothing,
        increment_sup=increment,
        difference_sup=diff_sup,
        double_difference_sup=ddiff_sup,
        dichotomy_sup=dich,
        block_norm_sup=block,
        beta=beta,
    )
    for name in (
        "smoothing_sup",
        "increment_sup",
        "difference_sup",
        "double_difference_sup",
        "dichotomy_sup",
        "block_norm_sup",
    ):
        value = getattr(audit, name)
        if value > model.c_S * (1 + 1e-12):
            audit.problems.append(f"{name}={value:.6g} exceeds c_S={model.c_S}")
    return audit


def dichotomy_ratio(model: SpectralModel, t) -> float:
    """Largest ratio of ``|S^+(-t)x| e^{mu_hat t}`` and ``|S^-(t)x| e^{-mu_check t}`` to ``|x|``.

    Diagonal operators attain their norm on a basis vector, so the sup over
    modes is exact.
    """
    t = np.asarray(t, dtype=float)
    lam = model.eigenvalues
    out = 0.0
    if model.split_index:
        lp = lam[model.plus_mask]
        out = max(out, float(np.max(np.exp(-t[:, None] * lp + model.mu_hat * t[:, None]))))
    if model.split_index < lam.size:
        lm = lam[model.minus_mask]
        out = max(out, float(np.max(np.exp(t[:, None] * lm - model.mu_check * t[:, None]))))
    return out


def stable_block_norm_constant(model: SpectralModel, beta: float, n_grid: int = 400) -> float:
    """``sup_x ||S^-(.)x||_{beta,-beta,[0,1]} / |x|``, evaluated mode by mode.

    For one stable mode the two suprema of the block norm are ``1`` and
    ``sup_d |lam|^{-beta} (1 - e^{lam d}) / d^beta`` (the Hoelder quotient
    is largest when the left point sits at 0).
    """
    lam = model.eigenvalues[model.minus_mask]
    if lam.size == 0:
        return 0.0
    d = np.linspace(1.0 / n_grid, 1.0, n_grid)[:, None]
    a = np.abs(lam)[None, :]
    hold = np.max(a ** (-beta) * (-np.expm1(-a * d)) / d**beta, axis=0)
    return float(np.max(1.0 + hold))
