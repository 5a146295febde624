"""Numerical random stable manifolds for semilinear evolution equations driven by fBm.

The package builds a diagonal (spectral Galerkin) model of the linear part,
samples Hilbert-valued fractional Brownian motion, integrates pathwise with
Young sums, and computes the stable manifold as the fixed point of a
discrete Lyapunov-Perron operator on unit time blocks.
"""

from .coefficients import NonlinearPair, TruncatedPair, cutoff_radius
from .config import ExperimentConfig, load_config
from .integrals import FracParams, beta_identity, fractional_integral, k1, k2, young_integral
from .manifold import (
    LyapunovPerron,
    check_gap,
    hkappa_norm,
    max_gap_K,
    shift_identity_residual,
    tempered_radii,
    verify_stable_manifold,
)
from .mild import choose_rho, solve_block, solve_forward, weighted_norm
from .noise import FbmSpec, NoisePath, holder_seminorm, sample_fbm_1d, sample_noise, wiener_shift
from .spectral import SpectralModel, graded_norm, project, semigroup_apply, smoothing_constant_audit

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "FbmSpec",
    "FracParams",
    "LyapunovPerron",
    "NoisePath",
    "NonlinearPair",
    "SpectralModel",
    "TruncatedPair",
    "beta_identity",
    "check_gap",
    "choose_rho",
    "cutoff_radius",
    "fractional_integral",
    "graded_norm",
    "hkappa_norm",
    "holder_seminorm",
    "k1",
    "k2",
    "load_config",
    "max_gap_K",
    "project",
    "sample_fbm_1d",
    "sample_noise",
    "semigroup_apply",
    "shift_identity_residual",
    "smoothing_constant_audit",
    "solve_block",
    "solve_forward",
    "tempered_radii",
    "verify_stable_manifold",
    "weighted_norm",
    "wiener_shift",
    "young_integral",
]
