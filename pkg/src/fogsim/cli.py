"""Command-line interface.

Subcommands: render, asm-fog, expose, isp, dataset, chamber, analyze.
Each accepts --config (the dataset TOML dialect) with flags overriding
config values; --seed is mandatory for stochastic stages. Exit code is 0
only when every requested output was produced.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analysis, asm, isp, medium, pipeline
from .camera import OpticsSpec, expose as sensor_expose, optics_irradiance, RawImage
from .imgio import (
    dump_toml,
    read_float_image,
    read_ppm8,
    read_raw_pgm,
    write_float_image,
    write_ppm8,
    write_raw_pgm,
)
from .presets import sensor_from_preset
from .render import RenderSettings, render
from .scene import parse_scene
from .spectral import VISIBLE


def _require_seed(args) -> int:
    if args.seed is None:
        raise SystemExit("error: --seed is required for this stage")
    return args.seed


def _load_config(args) -> pipeline.JobConfig | None:
    if getattr(args, "config", None):
        return pipeline.load_job_config(args.config, {"seed": args.seed})
    return None


def _cmd_render(args) -> int:
    cfg = _load_config(args)
    scene = parse_scene(args.scene or (cfg and cfg.scene_path))
    settings = cfg.render if cfg else RenderSettings()
    overrides = {}
    if args.spp is not None:
        overrides["samples_per_pixel"] = args.spp
    if args.max_bounces is not None:
        overrides["max_bounces"] = args.max_bounces
    if args.tile_size is not None:
        overrides["tile_size"] = args.tile_size
    from dataclasses import replace

    settings = replace(settings, seed=_require_seed(args), **overrides)
    img, depth = render(scene, settings)
    out = Path(args.out_prefix)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_float_image(f"{out}_radiance.img", img.data, VISIBLE.wavelengths_nm,
                      "radiance")
    write_float_image(f"{out}_depth.img", depth.depth, None, "depth")
    print(f"wrote {out}_radiance.img and {out}_depth.img")
    return 0


def _read_linear_rgb(path: str, gamma: float) -> np.ndarray:
    p = Path(path)
    if p.suffix == ".ppm":
        encoded = read_ppm8(p).astype(np.float64) / 255.0
        return isp.gamma_decode(encoded, gamma)
    data, _ = read_float_image(p)
    return data


def _cmd_asm_fog(args) -> int:
    clear = _read_linear_rgb(args.clear, args.gamma)
    depth, _ = read_float_image(args.depth)
    if args.airlight is not None:
        airlight = np.array(args.airlight, dtype=np.float64)
    else:
        airlight = asm.estimate_airlight(clear, patch_radius=args.patch_radius)
    out = asm.synthesize_asm(clear, depth, asm.AsmParams(args.beta, airlight))
    dst = Path(args.out)
    if dst.suffix == ".ppm":
        write_ppm8(dst, isp.quantize8(isp.gamma_encode(out, args.gamma)))
    else:
        write_float_image(dst, out, None, "rgb_linear")
    print(f"wrote {dst} (airlight {np.array2string(airlight, precision=5)})")
    return 0


def _cmd_expose(args) -> int:
    seed = _require_seed(args)
    radiance, meta = read_float_image(args.radiance)
    if radiance.ndim != 3:
        raise SystemExit("error: expose expects a spectral radiance image")
    h, w = radiance.shape[:2]
    sensor = sensor_from_preset(args.sensor_preset, w, h,
                                exposure_time=args.exposure_time)
    optics = OpticsSpec(f_number=args.f_number, magnification=args.magnification,
                        vertical_fov_deg=args.vertical_fov)
    raw = sensor_expose(optics_irradiance(radiance, optics), sensor, seed=seed)
    write_raw_pgm(args.out, raw.dn, raw.metadata)
    print(f"wrote {args.out} (+.meta)")
    return 0


def _cmd_isp(args) -> int:
    dn, meta = read_raw_pgm(args.raw)
    cfa = tuple(meta.get("sensor", {}).get("cfa", "RGGB"))
    raw = RawImage(dn=dn, cfa=cfa, metadata=meta)
    wb = "gray-world" if args.gray_world else tuple(args.wb_gains)
    cfg = isp.IspConfig(
        wb_gains=wb,
        ccm=np.array(args.ccm, dtype=np.float64).reshape(3, 3),
        gamma=args.gamma,
    )
    rgb = isp.process(raw, cfg)
    write_ppm8(args.out, rgb.data)
    print(f"wrote {args.out}")
    return 0


def _cmd_dataset(args) -> int:
    cfg = pipeline.load_job_config(args.config, {"seed": args.seed})
    if cfg.seed is None:
        raise SystemExit("error: seed required (config or --seed)")
    manifest = pipeline.run(cfg)
    print(f"manifest: {manifest.path}")
    for name, digest in manifest.entries:
        print(f"  {name} {digest[:12]}")
    if not manifest.ok:
        for label, msg in manifest.failures:
            print(f"FAILED {label}: {msg}", file=sys.stderr)
        return 1
    return 0


def _cmd_chamber(args) -> int:
    if args.what == "mor-from-sigma":
        print(f"{medium.mor_from_sigma(args.value):.6g}")
    elif args.what == "sigma-from-mor":
        print(f"{medium.sigma_from_mor(args.value):.6g}")
    else:
        if args.p0 is None or args.pu is None or args.path_length is None:
            raise SystemExit("error: sigma-from-power needs --p0 --pu --path-length")
        print(f"{medium.sigma_from_power(args.p0, args.pu, args.path_length):.6g}")
    return 0


def _load_display(path: str) -> np.ndarray:
    p = Path(path)
    if p.suffix == ".ppm":
        return read_ppm8(p).astype(np.float64) / 255.0
    data, _ = read_float_image(p)
    return data


def _cmd_analyze(args) -> int:
    if args.what == "stretch":
        img = _load_display(args.image[0])
        out = analysis.regional_contrast_stretch(img, args.window)
        write_ppm8(args.out, isp.quantize8(out if out.ndim == 3 else
                                           np.repeat(out[:, :, None], 3, axis=2)))
        print(f"wrote {args.out}")
        return 0
    if args.what == "noise":
        img = _load_display(args.image[0])
        rect = analysis.Rect(*args.region)
        std = analysis.noise_std_estimate(img, rect)
        print(" ".join(f"{s:.6g}" for s in np.atleast_1d(std)))
        return 0
    # trend: images paired with --sigmas, patches from --patch (repeatable)
    if len(args.sigmas) != len(args.image):
        raise SystemExit("error: --sigmas count must match image count")
    series = [(s, _load_display(p)) for s, p in zip(args.sigmas, args.image)]
    patches = [analysis.Rect(*p) for p in args.patch]
    trends = analysis.patch_trend(series, patches)
    csv = analysis.trend_csv(trends)
    if args.out:
        Path(args.out).write_text(csv, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(csv, end="")
    for t in trends:
        print(f"# patch {t.patch_id}: {t.verdict} ({t.direction})", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fogsim",
                                 description="physically-based fog image simulation")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="path-trace a scene to radiance + depth")
    p.add_argument("--config")
    p.add_argument("--scene")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--spp", type=int)
    p.add_argument("--max-bounces", type=int)
    p.add_argument("--tile-size", type=int)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("asm-fog", help="synthesize fog from clear image + depth")
    p.add_argument("--config")
    p.add_argument("--clear", required=True, help=".ppm (gamma) or .img (linear)")
    p.add_argument("--depth", required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--airlight", type=float, nargs=3)
    p.add_argument("--patch-radius", type=int, default=7)
    p.add_argument("--gamma", type=float, default=1.0 / 2.2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_asm_fog)

    p = sub.add_parser("expose", help="optics + sensor on a radiance image")
    p.add_argument("--config")
    p.add_argument("--radiance", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--sensor-preset", default="smartphone")
    p.add_argument("--exposure-time", type=float, default=1.0 / 60.0)
    p.add_argument("--f-number", type=float, default=2.0)
    p.add_argument("--magnification", type=float, default=0.0)
    p.add_argument("--vertical-fov", type=float, default=40.0)
    p.set_defaults(func=_cmd_expose)

    p = sub.add_parser("isp", help="raw PGM to 8-bit PPM")
    p.add_argument("--config")
    p.add_argument("--raw", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--wb-gains", type=float, nargs=3, default=[1.0, 1.0, 1.0])
    p.add_argument("--gray-world", action="store_true")
    p.add_argument("--ccm", type=float, nargs=9,
                   default=[1, 0, 0, 0, 1, 0, 0, 0, 1])
    p.add_argument("--gamma", type=float, default=1.0 / 2.2)
    p.set_defaults(func=_cmd_isp)

    p = sub.add_parser("dataset", help="full multi-tier dataset run")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("chamber", help="visibility calculators")
    p.add_argument("what", choices=["mor-from-sigma", "sigma-from-mor",
                                    "sigma-from-power"])
    p.add_argument("--value", type=float)
    p.add_argument("--p0", type=float)
    p.add_argument("--pu", type=float)
    p.add_argument("--path-length", type=float)
    p.set_defaults(func=_cmd_chamber)

    p = sub.add_parser("analyze", help="contrast stretch / noise / trend tools")
    p.add_argument("what", choices=["stretch", "noise", "trend"])
    p.add_argument("--image", action="append", required=True)
    p.add_argument("--window", type=int, default=31)
    p.add_argument("--region", type=int, nargs=4, metavar=("X", "Y", "W", "H"))
    p.add_argument("--sigmas", type=float, nargs="+", default=[])
    p.add_argument("--patch", type=int, nargs=4, action="append", default=[],
                   metavar=("X", "Y", "W", "H"))
    p.add_argument("--out")
    p.set_defaults(func=_cmd_analyze)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
