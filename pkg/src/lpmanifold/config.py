"""Experiment configuration: TOML loading, validation and seed streams."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .integrals import FracParams
from .spectral import SpectralModel

# Stream ids of the seed counter scheme: sub-seed = SeedSequence(root, spawn_key=(id,)).
STREAMS = {
    "noise": 0,
    "random_pairs": 1,
    "beta_pairs": 2,
    "fbm_law": 3,
    "integral_paths": 4,
    "linear_paths": 5,
    "picard_pairs": 6,
    "lp_pairs": 7,
    "xi_grid": 8,
    "derivative": 9,
}


def derive_seed(root: int, stream: str | int) -> int:
    """Independent 63-bit seed for a named stream under ``root``."""
    sid = STREAMS[stream] if isinstance(stream, str) else int(stream)
    state = np.random.SeedSequence(entropy=int(root), spawn_key=(sid,)).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 31 ^ int(state[1])


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class ModelConfig:
    n_modes: int = 16
    shift: float = 2.5
    mu_hat: float = 1.0
    mu_check: float = -1.0
    c_S: float = 2.0
    cov_scale: float = 1.0
    cov_power: float = 2.0


@dataclass(frozen=True)
class NoiseConfig:
    hurst: float = 0.75
    beta_prime: float = 0.70
    beta: float = 0.60
    alpha: float | None = None
    alpha_prime: float | None = None
    steps_per_unit: int = 64
    n_blocks: int = 16
    seed: int = 2024


@dataclass(frozen=True)
class CoefficientConfig:
    preset: str = "saturating"
    eps_F: float = 1.0
    eps_G: float = 1.0
    scale: float = 1.0
    coupling: bool = True
    auto_scale: bool = True
    target_radius: float = 0.5
    c_alpha_beta: float = 1.0


@dataclass(frozen=True)
class LPConfig:
    kappa: float = 0.5
    K: float | str = "auto"
    K_fraction: float = 0.9
    tol: float = 1e-12
    max_iter: int = 100
    tail_cut: int | None = None


@dataclass(frozen=True)
class VerifyConfig:
    n_points: int = 8
    radius_fraction: float = 0.1
    grid_points: int = 16
    T_verify: int = 6


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "runs"
    formats: tuple = ("csv", "json")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    coefficients: CoefficientConfig = field(default_factory=CoefficientConfig)
    lp: LPConfig = field(default_factory=LPConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        validate(self)

    # derived objects ------------------------------------------------------------
    def spectral_model(self) -> SpectralModel:
        m = self.model
        return SpectralModel.shifted_laplacian(
            m.n_modes, m.shift, m.mu_hat, m.mu_check, m.c_S, m.cov_scale, m.cov_power
        )

    def frac_params(self) -> FracParams:
        n = self.noise
        return FracParams(n.hurst, n.beta_prime, n.beta, n.alpha, n.alpha_prime)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(self, noise=dataclasses.replace(self.noise, seed=int(seed)))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["output"]["formats"] = list(d["output"]["formats"])
        return d

    def digest(self) -> str:
        """sha256 of the canonical JSON form (output location excluded)."""
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def validate(cfg: ExperimentConfig) -> None:
    m, n, c, lp, v = cfg.model, cfg.noise, cfg.coefficients, cfg.lp, cfg.verify
    if m.n_modes < 2:
        raise ConfigError("model.n_modes must be at least 2")
    if not m.mu_check < 0 < m.mu_hat:
        raise ConfigError("model.mu_check < 0 < model.mu_hat required")
    if m.c_S < 1:
        raise ConfigError("model.c_S must be >= 1")
    if m.cov_power <= 1:
        raise ConfigError("model.cov_power must exceed 1 (trace-class covariance)")
    try:
        cfg.spectral_model()
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None
    if not 0.5 < n.beta < n.beta_prime < n.hurst < 1:
        raise ConfigError(
            "noise: exponent chain 1/2 < beta < beta_prime < hurst < 1 violated "
            f"(beta={n.beta}, beta_prime={n.beta_prime}, hurst={n.hurst})"
        )
    try:
        cfg.frac_params()
    except ValueError as exc:
        raise ConfigError(f"noise.alpha: {exc}") from None
    if n.steps_per_unit < 8:
        raise ConfigError("noise.steps_per_unit must be at least 8")
    if n.n_blocks < 4:
        raise ConfigError("noise.n_blocks must be at least 4")
    if c.preset not in ("saturating", "uncoupled", "linear", "zero"):
        raise ConfigError(f"coefficients.preset: unknown preset {c.preset!r}")
    if c.eps_F < 0 or c.eps_G < 0:
        raise ConfigError("coefficients.eps_F and eps_G must be nonnegative")
    if c.scale <= 0 or c.target_radius <= 0 or c.c_alpha_beta <= 0:
        raise ConfigError("coefficients.scale, target_radius and c_alpha_beta must be positive")
    if not 0 < lp.kappa < min(-m.mu_check, m.mu_hat):
        raise ConfigError(
            f"lp.kappa={lp.kappa} must lie in (0, min(-mu_check, mu_hat)) = (0, {min(-m.mu_check, m.mu_hat)})"
        )
    if isinstance(lp.K, str):
        if lp.K != "auto":
            raise ConfigError("lp.K must be a positive number or 'auto'")
        if not 0 < lp.K_fraction <= 1:
            raise ConfigError("lp.K_fraction must lie in (0, 1]")
    else:
        from .manifold import check_gap

        if lp.K <= 0:
            raise ConfigError("lp.K must be positive")
        ok, value = check_gap(lp.K, lp.kappa, m.mu_hat, m.mu_check)
        if not ok:
            raise ConfigError(f"lp.K={lp.K} violates the gap condition (value {value:.4f} > 1/2)")
    if lp.tol <= 0 or lp.max_iter < 1:
        raise ConfigError("lp.tol must be positive and lp.max_iter >= 1")
    if lp.tail_cut is not None and not 1 <= lp.tail_cut <= n.n_blocks:
        raise ConfigError("lp.tail_cut must lie in [1, noise.n_blocks]")
    if v.n_points < 1 or v.grid_points < 2:
        raise ConfigError("verify.n_points >= 1 and verify.grid_points >= 2 required")
    if not 0 < v.radius_fraction <= 0.5:
        raise ConfigError("verify.radius_fraction must lie in (0, 1/2]")
    if not 2 <= v.T_verify < n.n_blocks:
        raise ConfigError("verify.T_verify must lie in [2, n_blocks)")


_SECTIONS = {
    "model": ModelConfig,
    "noise": NoiseConfig,
    "coefficients": CoefficientConfig,
    "lp": LPConfig,
    "verify": VerifyConfig,
    "output": OutputConfig,
}


def from_dict(data: dict) -> ExperimentConfig:
    kwargs = {}
    for key, value in data.items():
        if key not in _SECTIONS:
            raise ConfigError(f"unknown config section [{key}]")
        cls = _SECTIONS[key]
        names = {f.name for f in dataclasses.fields(cls)}
        for k in value:
            if k not in names:
                raise ConfigError(f"unknown field {key}.{k}")
        value = dict(value)
        if key == "output" and "formats" in value:
            value["formats"] = tuple(value["formats"])
        if key == "lp" and value.get("tail_cut") == 0:
            value["tail_cut"] = None
        kwargs[key] = cls(**value)
    return ExperimentConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(Path(path), "rb") as fh:
        data = tomllib.load(fh)
    return from_dict(data)
