#!/usr/bin/env python3
"""Generate scenes/chamber.scene: a 24-patch color checker viewed through
fog, lit by four emissive bars around the camera aperture.

The checker sits 100 m from the camera so the standard scattering
coefficients (0.005 / 0.01 / 0.02 1/m) produce optical depths 0.5 / 1 / 2
along the viewing axis. Patch reflectances are smooth Gaussian-lobe
spectra; the bottom row is the neutral ramp white -> black.

Layout constants here are mirrored by tests/chamber_layout.py.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fogsim.spectral import VISIBLE  # noqa: E402

WL = VISIBLE.wavelengths_nm

# (name, base, [(amplitude, center_nm, width_nm), ...])
PATCHES = [
    ("dark_skin", 0.05, [(0.22, 650, 80)]),
    ("light_skin", 0.15, [(0.40, 640, 90)]),
    ("blue_sky", 0.08, [(0.28, 450, 40)]),
    ("foliage", 0.04, [(0.24, 550, 35)]),
    ("blue_flower", 0.10, [(0.32, 440, 45), (0.12, 680, 40)]),
    ("bluish_green", 0.10, [(0.34, 500, 45)]),
    ("orange", 0.05, [(0.52, 620, 55)]),
    ("purplish_blue", 0.07, [(0.33, 430, 40)]),
    ("moderate_red", 0.06, [(0.46, 640, 50)]),
    ("purple", 0.05, [(0.18, 420, 35), (0.18, 690, 40)]),
    ("yellow_green", 0.06, [(0.44, 560, 45)]),
    ("orange_yellow", 0.06, [(0.52, 600, 55)]),
    ("blue", 0.04, [(0.34, 440, 30)]),
    ("green", 0.04, [(0.38, 540, 35)]),
    ("red", 0.04, [(0.52, 660, 45)]),
    ("yellow", 0.06, [(0.56, 580, 55)]),
    ("magenta", 0.07, [(0.32, 430, 40), (0.40, 670, 45)]),
    ("cyan", 0.06, [(0.34, 480, 45)]),
    ("white", 0.90, []),
    ("neutral_8", 0.59, []),
    ("neutral_65", 0.36, []),
    ("neutral_5", 0.20, []),
    ("neutral_35", 0.09, []),
    ("black", 0.03, []),
]

# geometry (meters)
CHECKER_Z = 100.0
PATCH = 4.0
GAP = 0.5
COLS, ROWS = 6, 4
# light bars form a wall ring around the camera aperture, just behind it,
# like the bars on the front face of the physical chamber
BAR_Z = -2.0
BAR_HOLE = 6.0
BAR_OUTER = 40.0
BAR_RADIANCE = 10.0
BACKDROP_ALBEDO = 0.05


def reflectance(base, lobes):
    r = np.full(WL.shape, base)
    for amp, center, width in lobes:
        r = r + amp * np.exp(-0.5 * ((WL - center) / width) ** 2)
    return np.clip(r, 0.02, 0.95)


def spectrum_toml(values) -> str:
    return "[" + ", ".join(f"{v:.4f}" for v in values) + "]"


def main() -> None:
    out = Path(__file__).resolve().parent.parent / "scenes" / "chamber.scene"
    width = COLS * PATCH + (COLS - 1) * GAP
    height = ROWS * PATCH + (ROWS - 1) * GAP
    x_left = -width / 2
    y_top = height / 2

    lines = [
        "# Fog-chamber fixture: 24-patch checker + backdrop, four light bars.",
        "# Generated by scripts/make_chamber_scene.py; do not edit by hand.",
        "",
        "[camera]",
        "position = [0.0, 0.0, 0.0]",
        f"look_at = [0.0, 0.0, {CHECKER_Z}]",
        "up = [0.0, 1.0, 0.0]",
        "vertical_fov = 16.0",
        "resolution = [256, 256]",
        "",
        "[medium]",
        "sigma_s = 0.01",
        "sigma_a = 0.0",
        "g = 0.87",
        "extent_center = [0.0, 0.0, 50.0]",
        "extent_radius = 130.0",
        "",
        "[materials.backdrop]",
        'kind = "lambertian"',
        f'albedo = "flat {BACKDROP_ALBEDO}"',
    ]
    for name, base, lobes in PATCHES:
        lines += [
            "",
            f"[materials.{name}]",
            'kind = "lambertian"',
            f"albedo = {spectrum_toml(reflectance(base, lobes))}",
        ]

    for i, (name, _, _) in enumerate(PATCHES):
        r, c = divmod(i, COLS)
        x0 = x_left + c * (PATCH + GAP)
        y0 = y_top - r * (PATCH + GAP) - PATCH
        lines += [
            "",
            "[[primitives]]",
            'shape = "quad"',
            f'material = "{name}"',
            f'name = "patch_{r}{c}"',
            f"origin = [{x0}, {y0}, {CHECKER_Z}]",
            f"edge_u = [{PATCH}, 0.0, 0.0]",
            f"edge_v = [0.0, {PATCH}, 0.0]",
        ]

    lines += [
        "",
        "[[primitives]]",
        'shape = "quad"',
        'material = "backdrop"',
        'name = "backdrop"',
        f"origin = [-20.0, -15.0, {CHECKER_Z + 0.5}]",
        "edge_u = [40.0, 0.0, 0.0]",
        "edge_v = [0.0, 30.0, 0.0]",
    ]

    h, o = BAR_HOLE, BAR_OUTER
    bars = [
        ("top", (-o, h, BAR_Z), (2 * o, 0.0, 0.0), (0.0, o - h, 0.0)),
        ("bottom", (-o, -o, BAR_Z), (2 * o, 0.0, 0.0), (0.0, o - h, 0.0)),
        ("left", (-o, -h, BAR_Z), (o - h, 0.0, 0.0), (0.0, 2 * h, 0.0)),
        ("right", (h, -h, BAR_Z), (o - h, 0.0, 0.0), (0.0, 2 * h, 0.0)),
    ]
    for _, origin, eu, ev in bars:
        lines += [
            "",
            "[[lights]]",
            'kind = "area"',
            f"origin = [{origin[0]}, {origin[1]}, {origin[2]}]",
            f"edge_u = [{eu[0]}, {eu[1]}, {eu[2]}]",
            f"edge_v = [{ev[0]}, {ev[1]}, {ev[2]}]",
            f'radiance = "flat {BAR_RADIANCE}"',
            'role = "active"',
        ]

    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
