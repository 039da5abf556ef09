"""fogsim: physically-based foggy image simulation.

Spectral scene radiance through a homogeneous scattering medium via Monte
Carlo volumetric path tracing, a parametric optics/sensor/ISP camera chain,
the classical closed-form fog baseline, and the measurement tools used to
validate the fog/noise trends.
"""

from .medium import (
    FogTier,
    Medium,
    hg_phase,
    mor_from_sigma,
    sample_distance,
    sample_hg,
    sigma_from_mor,
    sigma_from_power,
    standard_tiers,
    transmittance,
)
from .render import DepthMap, RadianceImage, RenderSettings, render, render_variants
from .scene import CameraPose, Scene, intersect, parse_scene, sample_light
from .spectral import N_BANDS, VISIBLE, Spectrum

__version__ = "0.1.0"

__all__ = [
    "Medium", "FogTier", "hg_phase", "sample_hg", "transmittance",
    "sample_distance", "mor_from_sigma", "sigma_from_mor", "sigma_from_power",
    "standard_tiers",
    "RenderSettings", "RadianceImage", "DepthMap", "render", "render_variants",
    "Scene", "CameraPose", "parse_scene", "intersect", "sample_light",
    "Spectrum", "VISIBLE", "N_BANDS",
    "__version__",
]
