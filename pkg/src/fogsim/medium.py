"""Homogeneous scattering medium: phase function, transmittance, free flight.

Angle convention: `cos_theta` is the cosine of the deflection angle between
the *propagation* direction of the incident ray and the propagation
direction of the scattered ray, so cos_theta = +1 means "continue straight
ahead" and receives the peak density for g > 0. Under this convention the
mean scattering cosine equals g and the density is

    p(cos_theta) = (1/4pi) (1 - g^2) / (1 + g^2 - 2 g cos_theta)^{3/2}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import Spectrum  # noqa: F401  (re-exported for scene configs)

#: MOR = MOR_COEFF / sigma_s (visibility at the 5% contrast threshold).
MOR_COEFF = 2.996

#: |g| below this uses uniform-sphere sampling; the closed-form inverse is
#: numerically unstable near g = 0.
G_EPS = 1e-3

FOUR_PI = 4.0 * math.pi


class DomainError(ValueError):
    """An argument is outside the physically meaningful domain."""


@dataclass(frozen=True)
class Medium:
    """Homogeneous fog. Coefficients in 1/m, wavelength-independent."""

    sigma_s: float
    sigma_a: float = 0.0
    g: float = 0.87

    def __post_init__(self):
        if self.sigma_s < 0 or self.sigma_a < 0:
            raise DomainError("scattering/absorption coefficients must be >= 0")
        if not -1.0 < self.g < 1.0:
            raise DomainError("asymmetry parameter g must be in (-1, 1)")

    @property
    def sigma_t(self) -> float:
        return self.sigma_s + self.sigma_a


_TIER_SIGMAS = {"heavy": 0.005, "thick": 0.01, "dense": 0.02}


@dataclass(frozen=True)
class FogTier:
    """A named fog density level; visibility follows from sigma_s."""

    name: str
    sigma_s: float
    visibility_m: float

    def __post_init__(self):
        if self.name not in ("heavy", "thick", "dense", "custom"):
            raise DomainError(f"unknown fog tier name {self.name!r}")
        if self.sigma_s < 0:
            raise DomainError("tier sigma_s must be >= 0")
        if self.sigma_s == 0.0:
            if not math.isinf(self.visibility_m):
                raise DomainError("sigma_s = 0 requires infinite visibility")
            return
        rel = abs(self.visibility_m - MOR_COEFF / self.sigma_s)
        if rel > 1e-9 * max(1.0, abs(self.visibility_m)):
            raise DomainError("visibility_m inconsistent with sigma_s")

    @classmethod
    def from_sigma(cls, sigma_s: float) -> "FogTier":
        if sigma_s == 0.0:
            return cls("custom", 0.0, math.inf)
        for name, s in _TIER_SIGMAS.items():
            if sigma_s == s:
                return cls(name, s, MOR_COEFF / s)
        return cls("custom", sigma_s, MOR_COEFF / sigma_s)

    @classmethod
    def from_name(cls, name: str) -> "FogTier":
        if name not in _TIER_SIGMAS:
            raise DomainError(f"no preset fog tier named {name!r}")
        s = _TIER_SIGMAS[name]
        return cls(name, s, MOR_COEFF / s)


def standard_tiers() -> list[FogTier]:
    """The three density levels used for dataset generation."""
    return [FogTier.from_name(n) for n in ("heavy", "thick", "dense")]


def hg_phase(cos_theta, g: float):
    """Phase density per steradian at deflection cosine `cos_theta`.

    Accepts scalars or numpy arrays for `cos_theta`. Integrates to 1 over
    the sphere; strictly positive for |g| < 1.
    """
    if not abs(g) < 1.0:
        raise DomainError("|g| must be < 1")
    c = np.asarray(cos_theta, dtype=np.float64)
    if np.any(np.abs(c) > 1.0 + 1e-12):
        raise DomainError("|cos_theta| must be <= 1")
    c = np.clip(c, -1.0, 1.0)
    denom = 1.0 + g * g - 2.0 * g * c
    out = (1.0 - g * g) / (FOUR_PI * denom * np.sqrt(denom))
    return float(out) if np.isscalar(cos_theta) else out


def hg_cos_cdf(cos_theta, g: float):
    """CDF of the deflection cosine; closed form, used by sampling tests."""
    c = np.asarray(cos_theta, dtype=np.float64)
    if abs(g) < G_EPS:
        return (c + 1.0) / 2.0
    d = np.sqrt(1.0 + g * g - 2.0 * g * c)
    return (1.0 - g * g) / (2.0 * g) * (1.0 / d - 1.0 / (1.0 + g))


def sample_hg_cos(g: float, u1: float) -> float:
    """Inverse-CDF sample of the deflection cosine."""
    if abs(g) < G_EPS:
        return 1.0 - 2.0 * u1
    s = (1.0 - g * g) / (1.0 - g + 2.0 * g * u1)
    return (1.0 + g * g - s * s) / (2.0 * g)


def _orthonormal_basis(w: np.ndarray):
    # stable helper axis: pick the axis least aligned with w
    a = np.array([0.0, 1.0, 0.0]) if abs(w[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
    t1 = np.cross(w, a)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(w, t1)
    return t1, t2


def sample_hg(g: float, u1: float, u2: float, incident_dir: np.ndarray):
    """Sample a scattered direction around the incident propagation direction.

    Returns (unit direction, pdf per steradian). The pdf equals
    hg_phase(cos_theta, g) at the sampled angle, so phase/pdf cancels to 1
    in estimators that importance-sample the phase function.
    """
    if not abs(g) < 1.0:
        raise DomainError("|g| must be < 1")
    w = np.asarray(incident_dir, dtype=np.float64)
    cos_t = sample_hg_cos(g, u1)
    cos_t = min(1.0, max(-1.0, cos_t))
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    phi = 2.0 * math.pi * u2
    t1, t2 = _orthonormal_basis(w)
    d = cos_t * w + sin_t * (math.cos(phi) * t1 + math.sin(phi) * t2)
    d /= np.linalg.norm(d)
    return d, hg_phase(cos_t, g)


def transmittance(sigma_t: float, distance: float) -> float:
    """Fraction of radiance surviving `distance` meters, exp(-sigma_t * d)."""
    if sigma_t < 0 or distance < 0:
        raise DomainError("sigma_t and distance must be >= 0")
    return math.exp(-sigma_t * distance)


@dataclass(frozen=True)
class Scatter:
    """A medium interaction at distance t before any surface."""

    t: float
    pdf: float


@dataclass(frozen=True)
class PassThrough:
    """The path reached the surface; `prob` is the sampling probability."""

    prob: float


def sample_distance(sigma_t: float, u: float, surface_hit_distance: float):
    """Free-flight sampling against a surface at `surface_hit_distance`."""
    if surface_hit_distance <= 0:
        raise DomainError("surface_hit_distance must be > 0")
    if sigma_t < 0:
        raise DomainError("sigma_t must be >= 0")
    if sigma_t == 0.0:
        return PassThrough(1.0)
    t = -math.log1p(-u) / sigma_t
    if t < surface_hit_distance:
        return Scatter(t, sigma_t * math.exp(-sigma_t * t))
    return PassThrough(math.exp(-sigma_t * surface_hit_distance))


def mor_from_sigma(sigma_s: float) -> float:
    """Meteorological optical range in meters for a scattering coefficient."""
    if sigma_s <= 0:
        raise DomainError("sigma_s must be > 0")
    return MOR_COEFF / sigma_s


def sigma_from_mor(mor: float) -> float:
    if mor <= 0:
        raise DomainError("MOR must be > 0")
    return MOR_COEFF / mor


def sigma_from_power(p0: float, pu: float, path_length: float) -> float:
    """Scattering coefficient from laser power before/after a fog path."""
    if p0 <= 0 or pu <= 0 or path_length <= 0:
        raise DomainError("powers and path length must be > 0")
    if pu > p0:
        raise DomainError("attenuated power exceeds clear power")
    return math.log(p0 / pu) / path_length
