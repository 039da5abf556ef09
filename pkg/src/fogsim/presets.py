"""Built-in camera presets.

The "smartphone" preset is a generic smartphone-class sensor (RGGB,
1.6 um pixels, QE peak 0.6, 2 e- read noise, 6000 e- full well, 10-bit,
black level 64). It is a documented repo convention, not a claim about
any specific commercial sensor; the IR cut filter is folded into the QE
curves.
"""

from __future__ import annotations

import numpy as np

from .camera import SensorSpec
from .spectral import VISIBLE


def smartphone_qe() -> np.ndarray:
    """Gaussian-lobe QE curves per CFA channel, (3, bands), peak 0.6."""
    wl = VISIBLE.wavelengths_nm
    centers = (610.0, 530.0, 460.0)  # R, G, B
    widths = (55.0, 50.0, 45.0)
    qe = np.stack(
        [0.6 * np.exp(-0.5 * ((wl - c) / s) ** 2) for c, s in zip(centers, widths)]
    )
    # small broadband leakage, keeps channels coupled like real dyes
    qe += 0.02
    return np.clip(qe, 0.0, 1.0)


def smartphone_sensor(width: int, height: int, **overrides) -> SensorSpec:
    kw = dict(
        width=width,
        height=height,
        qe=smartphone_qe(),
        cfa=("R", "G", "G", "B"),
        pixel_area=(1.6e-6) ** 2,
        exposure_time=1.0 / 60.0,
        full_well=6000.0,
        conversion_gain=0.16,
        analog_gain=1.0,
        read_noise_std=2.0,
        dark_current=1.0,
        prnu_std=0.01,
        dsnu_std=0.5,
        bit_depth=10,
        black_level=64,
    )
    kw.update(overrides)
    return SensorSpec(**kw)


SENSOR_PRESETS = {"smartphone": smartphone_sensor}


def sensor_from_preset(name: str, width: int, height: int, **overrides) -> SensorSpec:
    try:
        make = SENSOR_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown sensor preset {name!r}") from None
    return make(width, height, **overrides)
