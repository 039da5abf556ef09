"""On-disk image containers.

Three formats, documented byte-exactly in docs/formats.md:

* Float container (`.img`): ASCII header then 32-bit little-endian floats,
  row-major, band-planar. Used for spectral radiance/irradiance, depth,
  and linear RGB intermediates.
* Raw sensor output (`.pgm` + `.meta`): binary PGM, maxval 65535, sample
  bytes little-endian (deviating from netpbm's big-endian convention, by
  contract), plus a TOML sidecar with the sensor snapshot, CFA and seed.
* Display output (`.ppm`): binary 8-bit PPM.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

MAGIC = "FSIMG"
VERSION = 1


class ImageFormatError(ValueError):
    pass


def write_float_image(path, data: np.ndarray, wavelengths_nm=None, kind: str = "radiance"):
    """Write (h, w) or (h, w, bands) float data; returns the path."""
    path = Path(path)
    a = np.asarray(data, dtype=np.float32)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3:
        raise ImageFormatError(f"expected 2-d or 3-d data, got shape {data.shape}")
    h, w, bands = a.shape
    if wavelengths_nm is None:
        wl = "none"
    else:
        wl_arr = np.asarray(wavelengths_nm, dtype=float)
        if wl_arr.shape[0] != bands:
            raise ImageFormatError("wavelength list length must equal band count")
        wl = " ".join(f"{x:g}" for x in wl_arr)
    header = (
        f"{MAGIC} {VERSION}\n"
        f"kind {kind}\n"
        f"width {w}\n"
        f"height {h}\n"
        f"bands {bands}\n"
        f"wavelengths_nm {wl}\n"
        "encoding float32 little_endian row_major band_planar\n"
        "end_header\n"
    )
    planar = np.ascontiguousarray(np.moveaxis(a, 2, 0))  # (bands, h, w)
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(planar.astype("<f4").tobytes())
    return path


def read_float_image(path):
    """Returns (data, meta); data is (h, w) for 1 band else (h, w, bands)."""
    path = Path(path)
    with open(path, "rb") as f:
        blob = f.read()
    end = blob.find(b"end_header\n")
    if end < 0:
        raise ImageFormatError(f"{path}: missing end_header")
    head = blob[:end].decode("ascii").splitlines()
    if not head or not head[0].startswith(f"{MAGIC} "):
        raise ImageFormatError(f"{path}: bad magic")
    meta = {}
    for line in head[1:]:
        key, _, val = line.partition(" ")
        meta[key] = val
    try:
        w = int(meta["width"])
        h = int(meta["height"])
        bands = int(meta["bands"])
    except (KeyError, ValueError):
        raise ImageFormatError(f"{path}: malformed header") from None
    wl = meta.get("wavelengths_nm", "none")
    meta["wavelengths_nm"] = None if wl == "none" else np.array(
        [float(x) for x in wl.split()]
    )
    body = blob[end + len(b"end_header\n"):]
    expect = w * h * bands * 4
    if len(body) != expect:
        raise ImageFormatError(f"{path}: payload is {len(body)} bytes, expected {expect}")
    planar = np.frombuffer(body, dtype="<f4").reshape(bands, h, w)
    data = np.moveaxis(planar, 0, 2).astype(np.float64)
    if bands == 1:
        data = data[:, :, 0]
    return data, meta


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isinf(x) or math.isnan(x):
            raise ImageFormatError("non-finite value in sidecar metadata")
        return repr(x)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ImageFormatError(f"cannot serialize {type(v)} to sidecar")


def dump_toml(table: dict) -> str:
    """Minimal TOML writer for flat tables of scalars/lists/sub-tables."""
    lines = []
    subtables = []
    for k, v in table.items():
        if isinstance(v, dict):
            subtables.append((k, v))
        else:
            lines.append(f"{k} = {_toml_value(v)}")
    for name, sub in subtables:
        lines.append("")
        lines.append(f"[{name}]")
        for k, v in sub.items():
            lines.append(f"{k} = {_toml_value(v)}")
    return "\n".join(lines) + "\n"


def write_pgm16(path, dn: np.ndarray):
    """16-bit grayscale PGM, sample bytes little-endian."""
    path = Path(path)
    a = np.asarray(dn)
    if a.ndim != 2:
        raise ImageFormatError("raw image must be 2-d")
    if a.min() < 0 or a.max() > 65535:
        raise ImageFormatError("raw DN out of 16-bit range")
    h, w = a.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(a.astype("<u2").tobytes())
    return path


def write_raw_pgm(path, dn: np.ndarray, metadata: dict):
    """16-bit little-endian grayscale PGM plus `<path>.meta` TOML sidecar."""
    path = Path(path)
    write_pgm16(path, dn)
    sidecar = path.with_suffix(path.suffix + ".meta")
    sidecar.write_text(dump_toml(metadata), encoding="utf-8")
    return path


def read_raw_pgm(path):
    """Returns (dn uint16 array, metadata dict from the sidecar if present)."""
    path = Path(path)
    with open(path, "rb") as f:
        blob = f.read()
    parts = blob.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5" or parts[2] != b"65535":
        raise ImageFormatError(f"{path}: not a 16-bit PGM")
    w, h = (int(x) for x in parts[1].split())
    body = parts[3]
    if len(body) != w * h * 2:
        raise ImageFormatError(f"{path}: truncated payload")
    dn = np.frombuffer(body, dtype="<u2").reshape(h, w)
    meta = {}
    sidecar = path.with_suffix(path.suffix + ".meta")
    if sidecar.exists():
        try:
            import tomllib
        except ModuleNotFoundError:  # pragma: no cover
            import tomli as tomllib
        with open(sidecar, "rb") as f:
            meta = tomllib.load(f)
    return dn, meta


def write_ppm8(path, rgb: np.ndarray):
    path = Path(path)
    a = np.asarray(rgb)
    if a.ndim != 3 or a.shape[2] != 3 or a.dtype != np.uint8:
        raise ImageFormatError("expected (h, w, 3) uint8")
    h, w, _ = a.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(a.tobytes())
    return path


def read_ppm8(path):
    path = Path(path)
    with open(path, "rb") as f:
        blob = f.read()
    parts = blob.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P6" or parts[2] != b"255":
        raise ImageFormatError(f"{path}: not an 8-bit PPM")
    w, h = (int(x) for x in parts[1].split())
    body = parts[3]
    if len(body) != w * h * 3:
        raise ImageFormatError(f"{path}: truncated payload")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3).copy()
