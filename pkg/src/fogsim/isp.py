"""Raw-to-RGB processing.

Stage order is fixed: black level subtraction and normalization, white
balance at the CFA sites, bilinear demosaic, color correction matrix,
clamp, gamma encode, 8-bit quantization (round half away from zero).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve

from .camera import RawImage


class IspError(ValueError):
    pass


_KERNEL = np.array([[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]])
_CHANNELS = {"R": 0, "G": 1, "B": 2}


@dataclass(frozen=True)
class IspConfig:
    wb_gains: object = (1.0, 1.0, 1.0)  # (R, G, B) or the string "gray-world"
    ccm: np.ndarray = field(default_factory=lambda: np.eye(3))
    gamma: float = 1.0 / 2.2  # encoding exponent

    def __post_init__(self):
        if isinstance(self.wb_gains, str):
            if self.wb_gains != "gray-world":
                raise IspError("wb_gains must be 3 gains or 'gray-world'")
        else:
            g = tuple(float(x) for x in self.wb_gains)
            if len(g) != 3 or any(x <= 0 for x in g):
                raise IspError("wb_gains must be 3 positive numbers")
            object.__setattr__(self, "wb_gains", g)
        m = np.asarray(self.ccm, dtype=np.float64)
        if m.shape != (3, 3):
            raise IspError("ccm must be 3x3")
        if np.any(np.abs(m.sum(axis=1) - 1.0) > 1e-6):
            raise IspError("ccm rows must sum to 1")
        object.__setattr__(self, "ccm", m)
        if not 0.0 < self.gamma <= 1.0:
            raise IspError("gamma must be in (0, 1]")


@dataclass(frozen=True)
class RgbImage:
    data: np.ndarray  # (h, w, 3); uint8 when gamma-encoded, float when linear
    colorspace: str  # "linear" | "gamma"

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise IspError("RgbImage wants (h, w, 3)")
        if self.colorspace not in ("linear", "gamma"):
            raise IspError("colorspace must be 'linear' or 'gamma'")

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


def cfa_masks(cfa, height: int, width: int):
    """Boolean (h, w) site masks for R, G, B."""
    idx = np.array([[_CHANNELS[cfa[0]], _CHANNELS[cfa[1]]],
                    [_CHANNELS[cfa[2]], _CHANNELS[cfa[3]]]])
    ys = np.arange(height)[:, None] % 2
    xs = np.arange(width)[None, :] % 2
    chan = idx[ys, xs]
    return [chan == c for c in range(3)]


def demosaic_bilinear(mosaic: np.ndarray, cfa) -> np.ndarray:
    """Bilinear CFA interpolation; known sites pass through unchanged.

    Missing values are the weighted average of the nearest same-channel
    neighbors in the 3x3 window; at image borders the average renormalizes
    over the neighbors that exist.
    """
    m = np.asarray(mosaic, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2 or m.shape[1] < 2:
        raise IspError("mosaic must be at least 2x2")
    h, w = m.shape
    out = np.empty((h, w, 3))
    for c, mask in enumerate(cfa_masks(cfa, h, w)):
        vals = convolve(m * mask, _KERNEL, mode="constant", cval=0.0)
        wts = convolve(mask.astype(np.float64), _KERNEL, mode="constant", cval=0.0)
        out[:, :, c] = vals / wts
    return out


def gray_world_gains(raw: RawImage) -> tuple[float, float, float]:
    """Per-channel gains equalizing CFA site means to the green mean."""
    spec = raw.metadata.get("sensor", {})
    black = float(spec.get("black_level", 0))
    m = np.maximum(raw.dn.astype(np.float64) - black, 0.0)
    masks = cfa_masks(raw.cfa, m.shape[0], m.shape[1])
    means = [float(m[mask].mean()) for mask in masks]
    if any(x <= 0 for x in means):
        raise IspError("gray-world gains undefined: a channel mean is zero")
    return (means[1] / means[0], 1.0, means[1] / means[2])


def gamma_encode(v: np.ndarray, gamma: float) -> np.ndarray:
    return np.power(np.clip(v, 0.0, 1.0), gamma)


def gamma_decode(v: np.ndarray, gamma: float) -> np.ndarray:
    return np.power(np.clip(v, 0.0, 1.0), 1.0 / gamma)


def quantize8(v: np.ndarray) -> np.ndarray:
    """Round half away from zero to 8 bits (values already in [0, 1])."""
    return np.floor(np.clip(v, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def process_linear(raw: RawImage, cfg: IspConfig) -> np.ndarray:
    """Stages 1-5: black level through CCM; returns linear (h, w, 3) floats."""
    sensor = raw.metadata.get("sensor")
    if not sensor or "black_level" not in sensor or "bit_depth" not in sensor:
        raise IspError("raw metadata missing sensor black_level/bit_depth")
    black = float(sensor["black_level"])
    white = float(2 ** int(sensor["bit_depth"]) - 1)
    m = np.maximum(raw.dn.astype(np.float64) - black, 0.0) / (white - black)

    gains = cfg.wb_gains
    if isinstance(gains, str):
        gains = gray_world_gains(raw)
    for g, mask in zip(gains, cfa_masks(raw.cfa, m.shape[0], m.shape[1])):
        m[mask] *= g

    rgb = demosaic_bilinear(m, raw.cfa)
    rgb = rgb @ cfg.ccm.T
    return np.clip(rgb, 0.0, 1.0)


def process(raw: RawImage, cfg: IspConfig) -> RgbImage:
    """Full chain to a gamma-encoded 8-bit image."""
    rgb = process_linear(raw, cfg)
    return RgbImage(quantize8(gamma_encode(rgb, cfg.gamma)), "gamma")
