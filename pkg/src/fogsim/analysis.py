"""Measurement tools: regional contrast stretching, flat-region noise
estimation, and color-patch trends across fog densities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter, minimum_filter


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class Rect:
    """Pixel rectangle: x, y of the top-left corner plus width, height."""

    x: int
    y: int
    w: int
    h: int

    def slices(self):
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)


def _as_float_channels(image) -> np.ndarray:
    a = np.asarray(getattr(image, "data", image))
    if a.dtype == np.uint8:
        a = a.astype(np.float64) / 255.0
    else:
        a = a.astype(np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    return a


def regional_contrast_stretch(image, window: int) -> np.ndarray:
    """Per-pixel min/max normalization over an odd window, edge-clamped.

    Windows with zero range map to 0.5. Output is in [0, 1]; shape follows
    the input (2-d stays 2-d).
    """
    if window < 3 or window % 2 == 0:
        raise AnalysisError("window must be odd and >= 3")
    a = _as_float_channels(image)
    out = np.empty_like(a)
    for c in range(a.shape[2]):
        lo = minimum_filter(a[:, :, c], size=window, mode="nearest")
        hi = maximum_filter(a[:, :, c], size=window, mode="nearest")
        rng = hi - lo
        flat = rng <= 0
        safe = np.where(flat, 1.0, rng)
        out[:, :, c] = np.where(flat, 0.5, (a[:, :, c] - lo) / safe)
    out = np.clip(out, 0.0, 1.0)
    return out if np.asarray(getattr(image, "data", image)).ndim == 3 else out[:, :, 0]


def noise_std_estimate(image, region: Rect) -> np.ndarray:
    """Per-channel residual std after removing a least-squares plane fit.

    The plane fit removes illumination gradients (vignetting, cos^4) so the
    estimate reflects noise, not shading. Region must be at least 8x8.
    """
    a = _as_float_channels(image)
    h, w = a.shape[:2]
    if region.w < 8 or region.h < 8:
        raise AnalysisError("region must be at least 8x8")
    if (region.x < 0 or region.y < 0
            or region.x + region.w > w or region.y + region.h > h):
        raise AnalysisError("region out of bounds")
    ys, xs = np.mgrid[0:region.h, 0:region.w]
    basis = np.column_stack(
        [np.ones(region.h * region.w), xs.ravel(), ys.ravel()]
    )
    sl = region.slices()
    out = np.empty(a.shape[2])
    for c in range(a.shape[2]):
        z = a[sl[0], sl[1], c].ravel()
        coef, *_ = np.linalg.lstsq(basis, z, rcond=None)
        out[c] = np.std(z - basis @ coef)
    return out


@dataclass(frozen=True)
class PatchTrend:
    """Channel means of one patch across the density series."""

    patch_id: int
    sigmas: tuple
    means: np.ndarray  # (n_sigma, channels)
    verdict: str  # pass | fail | insufficient
    direction: str  # increasing | decreasing | flat | mixed | n/a

    def luminance(self) -> np.ndarray:
        return self.means.mean(axis=1)


def patch_trend(series, patches) -> list[PatchTrend]:
    """Per-patch channel means vs fog density, with a monotonicity verdict.

    `series` is a list of (sigma_s, image); the verdict is computed on the
    patch luminance (channel mean): pass when the sequence moves
    monotonically toward its final, airlight-dominated value.
    """
    if not patches:
        raise AnalysisError("no patches given")
    series = sorted(series, key=lambda kv: kv[0])
    sigmas = tuple(s for s, _ in series)
    images = [_as_float_channels(img) for _, img in series]
    h, w = images[0].shape[:2]
    for img in images:
        if img.shape[:2] != (h, w):
            raise AnalysisError("series images must share dimensions")
    out = []
    for pid, rect in enumerate(patches):
        if (rect.x < 0 or rect.y < 0 or rect.x + rect.w > w
                or rect.y + rect.h > h):
            raise AnalysisError(f"patch {pid} out of bounds")
        sl = rect.slices()
        means = np.stack([img[sl[0], sl[1]].mean(axis=(0, 1)) for img in images])
        if len(series) < 2:
            out.append(PatchTrend(pid, sigmas, means, "insufficient", "n/a"))
            continue
        lum = means.mean(axis=1)
        d = np.diff(lum)
        if np.all(d >= 0) and np.any(d > 0):
            verdict, direction = "pass", "increasing"
        elif np.all(d <= 0) and np.any(d < 0):
            verdict, direction = "pass", "decreasing"
        elif np.all(d == 0):
            verdict, direction = "pass", "flat"
        else:
            verdict, direction = "fail", "mixed"
        out.append(PatchTrend(pid, sigmas, means, verdict, direction))
    return out


def trend_csv(trends: list[PatchTrend]) -> str:
    """CSV rows: patch_id, sigma_s, mean_R, mean_G, mean_B."""
    lines = ["patch_id,sigma_s,mean_R,mean_G,mean_B"]
    for t in trends:
        for sigma, row in zip(t.sigmas, t.means):
            ch = list(row) + [row[-1]] * (3 - len(row))
            lines.append(
                f"{t.patch_id},{sigma:g},{ch[0]:.8g},{ch[1]:.8g},{ch[2]:.8g}"
            )
    return "\n".join(lines) + "\n"
