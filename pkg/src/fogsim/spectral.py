"""Spectral representation: a fixed wavelength grid and element-wise spectra.

All light transport in this package is carried on a shared 31-band grid
covering the visible range (400..700 nm, 10 nm spacing). Images store one
plane per band; scalar quantities (albedos, light intensities, airlight)
use the `Spectrum` wrapper below.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class WavelengthGrid:
    """Uniform wavelength sampling, band centers in nanometers."""

    start_nm: float
    step_nm: float
    count: int

    @property
    def wavelengths_nm(self) -> np.ndarray:
        return self.start_nm + self.step_nm * np.arange(self.count)

    @property
    def wavelengths_m(self) -> np.ndarray:
        return self.wavelengths_nm * 1e-9


#: The build-wide grid: 31 bands at 400-700 nm, 10 nm spacing.
VISIBLE = WavelengthGrid(start_nm=400.0, step_nm=10.0, count=31)
N_BANDS = VISIBLE.count


class SpectrumGridError(ValueError):
    """Raised when spectra on different wavelength grids are combined."""


@dataclass(frozen=True)
class Spectrum:
    """Non-negative radiometric samples on a wavelength grid.

    Arithmetic is element-wise and only defined between spectra sharing the
    same grid object; mixing grids raises `SpectrumGridError`.
    """

    values: np.ndarray
    grid: WavelengthGrid = field(default=VISIBLE)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.shape[0] != self.grid.count:
            raise ValueError(
                f"spectrum needs {self.grid.count} samples, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("spectrum samples must be finite")
        if np.any(v < 0):
            raise ValueError("spectrum samples must be >= 0")
        object.__setattr__(self, "values", v)

    @classmethod
    def flat(cls, value: float, grid: WavelengthGrid = VISIBLE) -> "Spectrum":
        return cls(np.full(grid.count, float(value)), grid)

    def _check(self, other: "Spectrum") -> None:
        if self.grid != other.grid:
            raise SpectrumGridError("cannot combine spectra on different grids")

    def __add__(self, other: "Spectrum") -> "Spectrum":
        self._check(other)
        return Spectrum(self.values + other.values, self.grid)

    def __mul__(self, other):
        if isinstance(other, Spectrum):
            self._check(other)
            return Spectrum(self.values * other.values, self.grid)
        return Spectrum(self.values * float(other), self.grid)

    __rmul__ = __mul__

    def scale(self, k: float) -> "Spectrum":
        return Spectrum(self.values * float(k), self.grid)

    def mean(self) -> float:
        return float(self.values.mean())

    def max(self) -> float:
        return float(self.values.max())
