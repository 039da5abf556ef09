"""Optics and sensor simulation.

Radiance-to-irradiance conversion uses the thin-lens relative aperture
with cosine-fourth off-axis falloff:

    E = pi * L / (1 + 4 (F (1 - m))^2) * cos(phi)^4,

phi being the field angle of the pixel (0 at the image center). The sensor
stage converts spectral irradiance to photo-electrons band by band with
lambda/(h c), then applies the noise chain in order: shot (Poisson, signal
plus dark current) -> PRNU gain -> DSNU offset -> read noise -> full-well
clip -> conversion/analog gain -> black level offset and quantization.

All draws are counter-based on (seed, x, y, frame), so exposures are
bit-exact for any thread count; the PRNU/DSNU pattern is keyed by
(seed, x, y) only and is therefore identical across frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
from numba import njit, prange

from .rng import (
    SALT_FIXED_PATTERN,
    SALT_SENSOR,
    next_f64,
    normal_pairs_vec,
    stream_init,
    stream_init_vec,
)
from .spectral import N_BANDS, VISIBLE

PLANCK_H = 6.62607015e-34  # J s
LIGHT_C = 2.99792458e8  # m/s


class CameraConfigError(ValueError):
    pass


@dataclass(frozen=True)
class OpticsSpec:
    f_number: float = 2.0
    magnification: float = 0.0  # <= 0 for real images; 0 ~ distant scene
    vertical_fov_deg: float = 40.0  # field-angle mapping, from the scene camera
    psf_sigma_px: float = 0.0  # optional Gaussian blur hook, 0 = off

    def __post_init__(self):
        if self.f_number <= 0:
            raise CameraConfigError("f_number must be > 0")


def _cos4_field(width: int, height: int, vfov_deg: float) -> np.ndarray:
    tanv = math.tan(math.radians(vfov_deg) / 2.0)
    aspect = width / height
    xs = (2.0 * (np.arange(width) + 0.5) / width - 1.0) * tanv * aspect
    ys = (1.0 - 2.0 * (np.arange(height) + 0.5) / height) * tanv
    u, v = np.meshgrid(xs, ys)
    cos_phi2 = 1.0 / (1.0 + u * u + v * v)
    return cos_phi2 * cos_phi2  # cos^4


def optics_irradiance(radiance, spec: OpticsSpec) -> np.ndarray:
    """Per-band sensor-plane irradiance (W·m^-2·nm^-1) from scene radiance."""
    data = getattr(radiance, "data", radiance)
    a = np.asarray(data, dtype=np.float64)
    if a.ndim != 3:
        raise CameraConfigError("radiance must be (h, w, bands)")
    h, w, _ = a.shape
    f_eff = spec.f_number * (1.0 - spec.magnification)
    scale = math.pi / (1.0 + 4.0 * f_eff * f_eff)
    out = a * (scale * _cos4_field(w, h, spec.vertical_fov_deg))[:, :, None]
    if spec.psf_sigma_px > 0:
        from scipy.ndimage import gaussian_filter

        out = gaussian_filter(out, sigma=(spec.psf_sigma_px, spec.psf_sigma_px, 0))
    return out


_DEFAULT_CFA = ("R", "G", "G", "B")  # row-major 2x2


@dataclass(frozen=True)
class SensorSpec:
    width: int
    height: int
    qe: np.ndarray  # (3, N_BANDS) e-/photon for R, G, B filter channels
    cfa: tuple = _DEFAULT_CFA
    pixel_area: float = (1.6e-6) ** 2  # m^2
    exposure_time: float = 1.0 / 60.0  # s
    full_well: float = 6000.0  # e-
    conversion_gain: float = 0.16  # DN/e- before analog gain
    analog_gain: float = 1.0
    read_noise_std: float = 2.0  # e- RMS
    dark_current: float = 1.0  # e-/s
    prnu_std: float = 0.01  # fractional gain non-uniformity
    dsnu_std: float = 0.5  # e- offset non-uniformity
    bit_depth: int = 10
    black_level: int = 64  # DN

    def __post_init__(self):
        q = np.asarray(self.qe, dtype=np.float64)
        if q.shape != (3, N_BANDS):
            raise CameraConfigError(f"qe must be (3, {N_BANDS})")
        if np.any(q < 0) or np.any(q > 1):
            raise CameraConfigError("qe must be within [0, 1]")
        object.__setattr__(self, "qe", q)
        if len(self.cfa) != 4 or any(c not in "RGB" for c in self.cfa):
            raise CameraConfigError("cfa must be a 2x2 pattern over R, G, B")
        object.__setattr__(self, "cfa", tuple(self.cfa))
        if self.full_well <= 0:
            raise CameraConfigError("full_well must be > 0")
        if not 8 <= self.bit_depth <= 16:
            raise CameraConfigError("bit_depth must be in 8..16")
        if not 0 <= self.black_level < 2 ** self.bit_depth:
            raise CameraConfigError("black_level must fit the bit depth")
        if self.width < 1 or self.height < 1:
            raise CameraConfigError("sensor dimensions must be >= 1")

    @property
    def white_point(self) -> int:
        return 2 ** self.bit_depth - 1

    def cfa_channel_map(self) -> np.ndarray:
        """(h, w) int map: 0=R, 1=G, 2=B per pixel site."""
        lut = {"R": 0, "G": 1, "B": 2}
        pat = np.array(
            [[lut[self.cfa[0]], lut[self.cfa[1]]],
             [lut[self.cfa[2]], lut[self.cfa[3]]]], dtype=np.int64
        )
        ys = np.arange(self.height)[:, None] % 2
        xs = np.arange(self.width)[None, :] % 2
        return pat[ys, xs]

    def snapshot(self) -> dict:
        d = asdict(self)
        d["qe"] = [list(map(float, row)) for row in self.qe]
        d["cfa"] = "".join(self.cfa)
        return d


@dataclass(frozen=True)
class RawImage:
    dn: np.ndarray  # (h, w) uint16 digital numbers
    cfa: tuple
    metadata: dict = field(default_factory=dict)

    @property
    def width(self) -> int:
        return self.dn.shape[1]

    @property
    def height(self) -> int:
        return self.dn.shape[0]


def fixed_patterns(spec: SensorSpec, seed: int):
    """Seed-keyed PRNU gain and DSNU offset fields, frame-independent."""
    ys, xs = np.mgrid[0:spec.height, 0:spec.width]
    state = stream_init_vec(seed, xs, ys, 0, SALT_FIXED_PATTERN)
    _, z1, z2 = normal_pairs_vec(state)
    return 1.0 + spec.prnu_std * z1, spec.dsnu_std * z2


def mean_signal_electrons(irradiance: np.ndarray, spec: SensorSpec) -> np.ndarray:
    """Expected photo-electrons per pixel (before dark current and noise)."""
    a = np.asarray(irradiance, dtype=np.float64)
    if a.shape != (spec.height, spec.width, N_BANDS):
        raise CameraConfigError(
            f"irradiance shape {a.shape} does not match sensor "
            f"({spec.height}, {spec.width}, {N_BANDS})"
        )
    lam_m = VISIBLE.wavelengths_m
    photons = a * (VISIBLE.step_nm * spec.pixel_area * spec.exposure_time
                   * lam_m / (PLANCK_H * LIGHT_C))
    per_channel = photons @ spec.qe.T  # (h, w, 3)
    chan = spec.cfa_channel_map()
    return np.take_along_axis(per_channel, chan[:, :, None], axis=2)[:, :, 0]


@njit(cache=True, inline="always")
def _normal_draw(state):
    state, u1 = next_f64(state)
    state, u2 = next_f64(state)
    return state, math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(2.0 * math.pi * u2)


@njit(cache=True, inline="always")
def _poisson_draw(state, lam):
    if lam <= 0.0:
        return state, 0.0
    if lam < 10.0:
        # inversion by uniform products
        limit = math.exp(-lam)
        prod = 1.0
        k = -1
        while prod > limit:
            state, u = next_f64(state)
            prod *= u
            k += 1
        return state, float(k)
    # PTRS transformed rejection (Hormann), exact for lam >= 10
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        state, u0 = next_f64(state)
        u = u0 - 0.5
        state, v = next_f64(state)
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return state, k
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= -lam + k * loglam - math.lgamma(k + 1.0)):
            return state, k


@njit(cache=True, parallel=True)
def _noise_chain(mean_sig, dark_e, prnu_gain, dsnu, read_std, full_well,
                 gain, black_level, dn_max, seed, frame, out_dn):
    h, w = mean_sig.shape
    for y in prange(h):
        for x in range(w):
            state = stream_init(seed, x, y, frame, SALT_SENSOR)
            state, e = _poisson_draw(state, mean_sig[y, x] + dark_e)
            e = e * prnu_gain[y, x]
            e = e + dsnu[y, x]
            if read_std > 0.0:
                state, z = _normal_draw(state)
                e += read_std * z
            if e < 0.0:
                e = 0.0
            elif e > full_well:
                e = full_well
            dn = math.floor(black_level + e * gain + 0.5)
            if dn < 0.0:
                dn = 0.0
            elif dn > dn_max:
                dn = dn_max
            out_dn[y, x] = np.uint16(dn)


def expose(irradiance: np.ndarray, spec: SensorSpec, seed: int,
           frame: int = 0) -> RawImage:
    """One exposure of the sensor to a spectral irradiance field."""
    mean_sig = mean_signal_electrons(irradiance, spec)
    if not np.all(np.isfinite(mean_sig)):
        raise CameraConfigError("irradiance contains non-finite values")
    prnu_gain, dsnu = fixed_patterns(spec, seed)
    out = np.zeros((spec.height, spec.width), dtype=np.uint16)
    _noise_chain(
        mean_sig,
        spec.dark_current * spec.exposure_time,
        prnu_gain,
        dsnu,
        spec.read_noise_std,
        spec.full_well,
        spec.conversion_gain * spec.analog_gain,
        float(spec.black_level),
        float(spec.white_point),
        seed,
        frame,
        out,
    )
    meta = {"seed": int(seed), "frame": int(frame), "sensor": spec.snapshot()}
    return RawImage(dn=out, cfa=spec.cfa, metadata=meta)


def snr_curve(spec: SensorSpec, mean_electron_grid) -> list[tuple[float, float]]:
    """Analytic per-pixel SNR in dB at each mean signal level (electrons)."""
    out = []
    dark = spec.dark_current * spec.exposure_time
    for mu in mean_electron_grid:
        mu = float(mu)
        if mu <= 0:
            raise CameraConfigError("mean electron grid values must be > 0")
        var = (mu + dark + spec.read_noise_std ** 2
               + (spec.prnu_std * mu) ** 2 + spec.dsnu_std ** 2)
        out.append((mu, 20.0 * math.log10(mu / math.sqrt(var))))
    return out
