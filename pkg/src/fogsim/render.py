"""Monte Carlo volumetric renderer: spectral radiance images plus depth AOV.

Determinism contract: for fixed (seed, resolution, spp) the output is
bit-identical regardless of tile size or thread count, because every random
draw derives from a per-(pixel, sample) counter-based stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tracer
from .medium import FogTier, Medium
from .scene import Scene
from .spectral import VISIBLE, N_BANDS


class RenderError(ValueError):
    pass


@dataclass(frozen=True)
class RenderSettings:
    samples_per_pixel: int = 64
    max_bounces: int = 32  # combined surface+medium path-segment budget
    rr_start_bounce: int = 4
    seed: int = 0
    tile_size: int = 64
    jitter: bool = True  # False = pixel-center rays (diagnostic/oracle mode)

    def __post_init__(self):
        if self.samples_per_pixel < 1:
            raise RenderError("samples_per_pixel must be >= 1")
        if self.max_bounces < 1:
            raise RenderError("max_bounces must be >= 1")
        if self.rr_start_bounce < 1:
            raise RenderError("rr_start_bounce must be >= 1")
        if self.tile_size < 1:
            raise RenderError("tile_size must be >= 1")


@dataclass(frozen=True)
class RadianceImage:
    """Per-pixel spectral radiance, W·sr^-1·m^-2·nm^-1 on the build grid."""

    data: np.ndarray  # (h, w, N_BANDS) float64
    samples_per_pixel: int

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def luminance(self) -> np.ndarray:
        """Band-mean proxy, used for trend metrics."""
        return self.data.mean(axis=2)


@dataclass(frozen=True)
class DepthMap:
    """First-surface-hit distance in meters; +inf where no sample hit."""

    depth: np.ndarray  # (h, w) float64

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    @property
    def height(self) -> int:
        return self.depth.shape[0]


def primary_ray(scene: Scene, px: float, py: float):
    """Camera ray through continuous pixel coordinate (px, py).

    (0, 0) is the top-left image corner; pixel centers are at +0.5. Used by
    the quadrature oracles in the test suite.
    """
    cam = scene.camera
    right, up, fwd = cam.basis()
    w, h = cam.resolution
    tanv = math.tan(math.radians(cam.vertical_fov_deg) / 2.0)
    ndc_x = 2.0 * px / w - 1.0
    ndc_y = 1.0 - 2.0 * py / h
    d = fwd + ndc_x * tanv * (w / h) * right + ndc_y * tanv * up
    d = d / np.linalg.norm(d)
    return np.asarray(cam.position, dtype=np.float64), d


def project_point(scene: Scene, point) -> tuple[float, float]:
    """Continuous pixel coordinate of a world point (inverse of primary_ray)."""
    cam = scene.camera
    right, up, fwd = cam.basis()
    w, h = cam.resolution
    tanv = math.tan(math.radians(cam.vertical_fov_deg) / 2.0)
    v = np.asarray(point, dtype=np.float64) - np.asarray(cam.position, np.float64)
    z = float(np.dot(v, fwd))
    if z <= 0:
        raise RenderError("point is behind the camera")
    ndc_x = float(np.dot(v, right)) / (z * tanv * (w / h))
    ndc_y = float(np.dot(v, up)) / (z * tanv)
    return (ndc_x + 1.0) / 2.0 * w, (1.0 - ndc_y) / 2.0 * h


def render(scene: Scene, settings: RenderSettings,
           medium_override: Medium | None = None):
    """Render the scene; returns (RadianceImage, DepthMap).

    Depth records the first surface hit along primary rays, averaged over
    the samples that hit anything; medium scattering never terminates depth.
    """
    if scene.camera is None:
        raise RenderError("scene has no camera")
    flat = tracer.flatten_scene(scene, medium_override=medium_override)
    rad, dsum, dcnt = tracer.trace(
        flat,
        spp=settings.samples_per_pixel,
        max_bounces=settings.max_bounces,
        rr_start=settings.rr_start_bounce,
        seed=settings.seed,
        tile_size=settings.tile_size,
        jitter=settings.jitter,
    )
    if not np.all(np.isfinite(rad)):
        raise RenderError("non-finite radiance produced")
    depth = np.full(dsum.shape, np.inf)
    hit = dcnt > 0
    depth[hit] = dsum[hit] / dcnt[hit]
    return RadianceImage(rad, settings.samples_per_pixel), DepthMap(depth)


def render_variants(scene: Scene, tiers: list[FogTier], settings: RenderSettings):
    """Render the scene once per fog tier plus a clear pass.

    Returns (list of (tier, RadianceImage), clear RadianceImage, DepthMap).
    All variants share the seed so geometry noise is correlated; depth is
    taken from the clear pass (it is fog-independent by construction).
    """
    if not tiers:
        raise RenderError("tier list must not be empty")
    base = scene.medium
    clear_img, depth = render(
        scene, settings, medium_override=Medium(0.0, base.sigma_a, base.g)
    )
    out = []
    for tier in tiers:
        m = Medium(tier.sigma_s, base.sigma_a, base.g)
        img, _ = render(scene, settings, medium_override=m)
        out.append((tier, img))
    return out, clear_img, depth


def wavelengths_nm() -> np.ndarray:
    return VISIBLE.wavelengths_nm


__all__ = [
    "RenderSettings", "RadianceImage", "DepthMap", "RenderError",
    "render", "render_variants", "primary_ray", "N_BANDS", "wavelengths_nm",
]
