"""Classical single-scattering fog baseline on clear image + depth.

Operates strictly in linear space; callers remove/reapply gamma:

    out = clear * exp(-beta d) + airlight * (1 - exp(-beta d)),

with the +inf depth sentinel (sky) mapping to pure airlight. Airlight is
estimated from the clear image as the per-channel median over the pixels
with the largest dark-channel values (top 0.1% by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import minimum_filter


class AsmError(ValueError):
    pass


@dataclass(frozen=True)
class AsmParams:
    beta: float  # scattering coefficient, 1/m
    airlight: np.ndarray  # per-channel, working color space

    def __post_init__(self):
        if self.beta < 0:
            raise AsmError("beta must be >= 0")
        a = np.atleast_1d(np.asarray(self.airlight, dtype=np.float64))
        if np.any(a < 0):
            raise AsmError("airlight must be >= 0")
        object.__setattr__(self, "airlight", a)

    def scalar_collapse(self) -> "AsmParams":
        """Channel-mean airlight variant."""
        return AsmParams(self.beta, np.full_like(self.airlight, self.airlight.mean()))


def synthesize_asm(clear: np.ndarray, depth: np.ndarray, params: AsmParams) -> np.ndarray:
    """Apply the fog model per pixel per channel; linear in, linear out."""
    c = np.asarray(clear, dtype=np.float64)
    d = np.asarray(getattr(depth, "depth", depth), dtype=np.float64)
    if c.ndim == 2:
        c = c[:, :, None]
    if c.shape[:2] != d.shape:
        raise AsmError(f"image {c.shape[:2]} and depth {d.shape} dimensions differ")
    if np.any(d < 0):
        raise AsmError("depth must be >= 0")
    if params.airlight.shape[0] not in (1, c.shape[2]):
        raise AsmError("airlight channel count does not match the image")
    with np.errstate(invalid="ignore"):
        t = np.exp(-params.beta * d)
    t = np.where(np.isinf(d), 0.0, t)  # sky sentinel -> pure airlight
    a = params.airlight.reshape(1, 1, -1)
    out = c * t[:, :, None] + a * (1.0 - t)[:, :, None]
    return out if clear.ndim == 3 else out[:, :, 0]


def invert_asm(foggy: np.ndarray, depth: np.ndarray, params: AsmParams,
               t_floor: float = 1e-3) -> np.ndarray:
    """Recover the clear image where transmission exceeds t_floor."""
    f = np.asarray(foggy, dtype=np.float64)
    d = np.asarray(getattr(depth, "depth", depth), dtype=np.float64)
    t = np.where(np.isinf(d), 0.0, np.exp(-params.beta * d))
    a = params.airlight.reshape(1, 1, -1)
    t3 = np.maximum(t, t_floor)[:, :, None]
    return (f - a * (1.0 - t)[:, :, None]) / t3


def dark_channel(image: np.ndarray, patch_radius: int) -> np.ndarray:
    """Minimum over channels then over the (2r+1)^2 window, edge-clamped."""
    if patch_radius < 0:
        raise AsmError("patch_radius must be >= 0")
    a = np.asarray(image, dtype=np.float64)
    px_min = a.min(axis=2) if a.ndim == 3 else a
    if patch_radius == 0:
        return px_min
    return minimum_filter(px_min, size=2 * patch_radius + 1, mode="nearest")


def estimate_airlight(image: np.ndarray, patch_radius: int = 7,
                      top_fraction: float = 0.001) -> np.ndarray:
    """Per-channel airlight from the brightest dark-channel pixels.

    Selects ceil(top_fraction * N) pixels with the largest dark-channel
    value (ties broken by ascending row-major pixel index) and returns the
    per-channel lower median of their RGB values.
    """
    a = np.asarray(image, dtype=np.float64)
    if a.ndim != 3 or a.size == 0:
        raise AsmError("expected a non-empty (h, w, 3) image")
    if not 0.0 < top_fraction <= 1.0:
        raise AsmError("top_fraction must be in (0, 1]")
    dc = dark_channel(a, patch_radius).ravel()
    n = dc.shape[0]
    k = max(1, math.ceil(top_fraction * n))
    # order by (-dark value, pixel index): lexsort keys, last is primary
    order = np.lexsort((np.arange(n), -dc))
    sel = a.reshape(n, 3)[order[:k]]
    lower_med = np.sort(sel, axis=0)[(k - 1) // 2]
    return lower_med
