"""End-to-end composition and dataset generation.

One TOML config drives everything: scene, fog tiers, render settings,
optics/sensor/ISP parameters, requested outputs. Per tier the chain is
render -> optics -> sensor -> ISP; the classical fog baseline is
synthesized from the same clear image and depth map. A manifest lists
every produced file with its sha256, the seed, and the resolved config
snapshot; outputs are written atomically and are byte-reproducible.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from . import asm as asm_mod
from . import isp as isp_mod
from .camera import OpticsSpec, SensorSpec, expose, optics_irradiance
from .imgio import dump_toml, write_float_image, write_pgm16, write_ppm8
from .medium import FogTier
from .presets import sensor_from_preset
from .render import RadianceImage, RenderSettings, render_variants
from .scene import Scene, parse_scene
from .spectral import VISIBLE

VALID_OUTPUTS = ("radiance", "depth", "raw", "rgb", "asm_rgb")


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class JobConfig:
    scene_path: Path
    seed: int
    output_dir: Path
    outputs: tuple
    tiers: tuple  # of FogTier
    render: RenderSettings
    optics: OpticsSpec
    sensor_preset: str = "smartphone"
    sensor_overrides: dict = field(default_factory=dict)
    isp: isp_mod.IspConfig = field(default_factory=isp_mod.IspConfig)
    lighting: str = "sky_plus_active"
    workers: int = 1

    def __post_init__(self):
        if not self.outputs:
            raise PipelineError("at least one output must be requested")
        for o in self.outputs:
            if o not in VALID_OUTPUTS:
                raise PipelineError(f"unknown output {o!r}")
        if not self.tiers:
            raise PipelineError("at least one fog tier is required")
        if self.lighting not in ("sky_only", "sky_plus_active"):
            raise PipelineError("lighting must be sky_only or sky_plus_active")
        if self.workers < 1:
            raise PipelineError("workers must be >= 1")


_TOP_KEYS = {"scene", "seed", "output_dir", "outputs", "tiers", "lighting",
             "workers", "render", "optics", "sensor", "isp"}


def _tier_from_value(v) -> FogTier:
    if isinstance(v, str):
        return FogTier.from_name(v)
    return FogTier.from_sigma(float(v))


def load_job_config(path, overrides: dict | None = None) -> JobConfig:
    """Read a job config file; `overrides` replace top-level keys."""
    path = Path(path)
    with open(path, "rb") as f:
        doc = tomllib.load(f)
    if overrides:
        doc.update({k: v for k, v in overrides.items() if v is not None})
    for k in doc:
        if k not in _TOP_KEYS:
            raise PipelineError(f"config: unknown key {k!r}")
    for req in ("scene", "seed", "outputs", "tiers"):
        if req not in doc:
            raise PipelineError(f"config: missing {req!r}")

    r = dict(doc.get("render", {}))
    settings = RenderSettings(
        samples_per_pixel=int(r.pop("samples_per_pixel", 64)),
        max_bounces=int(r.pop("max_bounces", 32)),
        rr_start_bounce=int(r.pop("rr_start_bounce", 4)),
        tile_size=int(r.pop("tile_size", 64)),
        jitter=bool(r.pop("jitter", True)),
        seed=int(doc["seed"]),
    )
    if r:
        raise PipelineError(f"config [render]: unknown keys {sorted(r)}")

    o = dict(doc.get("optics", {}))
    optics = OpticsSpec(
        f_number=float(o.pop("f_number", 2.0)),
        magnification=float(o.pop("magnification", 0.0)),
        psf_sigma_px=float(o.pop("psf_sigma_px", 0.0)),
    )
    if o:
        raise PipelineError(f"config [optics]: unknown keys {sorted(o)}")

    s = dict(doc.get("sensor", {}))
    preset = s.pop("preset", "smartphone")

    i = dict(doc.get("isp", {}))
    isp_cfg = isp_mod.IspConfig(
        wb_gains=(tuple(i.pop("wb_gains")) if isinstance(i.get("wb_gains"), list)
                  else i.pop("wb_gains", (1.0, 1.0, 1.0))),
        ccm=np.array(i.pop("ccm", np.eye(3).tolist()), dtype=np.float64),
        gamma=float(i.pop("gamma", 1.0 / 2.2)),
    )
    if i:
        raise PipelineError(f"config [isp]: unknown keys {sorted(i)}")

    scene_path = Path(doc["scene"])
    if not scene_path.is_absolute():
        scene_path = path.parent / scene_path
    out_dir = Path(doc.get("output_dir", "out"))
    if not out_dir.is_absolute():
        out_dir = path.parent / out_dir
    return JobConfig(
        scene_path=scene_path,
        seed=int(doc["seed"]),
        output_dir=out_dir,
        outputs=tuple(doc["outputs"]),
        tiers=tuple(_tier_from_value(v) for v in doc["tiers"]),
        render=settings,
        optics=optics,
        sensor_preset=preset,
        sensor_overrides=s,
        isp=isp_cfg,
        lighting=doc.get("lighting", "sky_plus_active"),
        workers=int(doc.get("workers", 1)),
    )


def lighting_variant(scene: Scene, mode: str) -> Scene:
    """Keep only the lights matching the requested lighting condition.

    sky_plus_active keeps everything; sky_only removes active lights
    (area-light quads leave the scene with their light).
    """
    if mode == "sky_plus_active":
        return scene
    if mode != "sky_only":
        raise PipelineError(f"unknown lighting mode {mode!r}")
    kept = [l for l in scene.lights if l.role == "sky"]
    if not kept:
        raise PipelineError("sky_only requested but the scene has no sky-role light")
    return Scene(
        camera=scene.camera,
        medium=scene.medium,
        materials=scene.materials,
        primitives=scene.primitives,
        lights=kept,
        name=scene.name,
        material_names=dict(scene.material_names),
    )


def tier_label(tier: FogTier) -> str:
    if tier.name != "custom":
        return tier.name
    return ("s%g" % tier.sigma_s).replace(".", "p")


@dataclass
class Manifest:
    path: Path
    entries: list  # (filename, sha256)
    failures: list  # (label, message)

    @property
    def ok(self) -> bool:
        return not self.failures


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _atomic(path: Path, writer):
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)
    return path


def _config_snapshot(config: JobConfig, sensor: SensorSpec) -> str:
    return dump_toml(
        {
            "scene": str(config.scene_path),
            "seed": config.seed,
            "outputs": list(config.outputs),
            "tiers": [t.sigma_s for t in config.tiers],
            "lighting": config.lighting,
            "render": {
                "samples_per_pixel": config.render.samples_per_pixel,
                "max_bounces": config.render.max_bounces,
                "rr_start_bounce": config.render.rr_start_bounce,
                "tile_size": config.render.tile_size,
                "jitter": config.render.jitter,
            },
            "optics": {
                "f_number": config.optics.f_number,
                "magnification": config.optics.magnification,
                "psf_sigma_px": config.optics.psf_sigma_px,
            },
            "sensor": sensor.snapshot(),
            "isp": {
                "wb_gains": (config.isp.wb_gains if isinstance(config.isp.wb_gains, str)
                             else list(config.isp.wb_gains)),
                "ccm": [list(row) for row in config.isp.ccm],
                "gamma": config.isp.gamma,
            },
        }
    )


def _process_variant(label: str, image: RadianceImage, config: JobConfig,
                     sensor: SensorSpec, optics: OpticsSpec, prefix: str,
                     out_dir: Path):
    """Camera chain for one fog variant; returns (files, linear_rgb)."""
    files = []
    linear_rgb = None
    if "radiance" in config.outputs:
        p = out_dir / f"{prefix}_{label}_radiance.img"
        _atomic(p, lambda t: write_float_image(
            t, image.data, VISIBLE.wavelengths_nm, "radiance"))
        files.append(p)
    need_raw = "raw" in config.outputs
    need_rgb = "rgb" in config.outputs or "asm_rgb" in config.outputs
    if need_raw or need_rgb:
        irr = optics_irradiance(image, optics)
        raw = expose(irr, sensor, seed=config.seed)
        if need_raw:
            p = out_dir / f"{prefix}_{label}_raw.pgm"
            _atomic(p, lambda t: write_pgm16(t, raw.dn))
            sidecar = p.with_suffix(p.suffix + ".meta")
            _atomic(sidecar, lambda t: t.write_text(
                dump_toml(raw.metadata), encoding="utf-8"))
            files.append(p)
            files.append(sidecar)
        if need_rgb:
            linear_rgb = isp_mod.process_linear(raw, config.isp)
            if "rgb" in config.outputs:
                encoded = isp_mod.quantize8(
                    isp_mod.gamma_encode(linear_rgb, config.isp.gamma))
                p = out_dir / f"{prefix}_{label}_rgb.ppm"
                _atomic(p, lambda t: write_ppm8(t, encoded))
                files.append(p)
    return files, linear_rgb


def run(config: JobConfig) -> Manifest:
    """Execute the full job; returns the written manifest."""
    scene = parse_scene(config.scene_path)
    scene = lighting_variant(scene, config.lighting)
    w, h = scene.camera.resolution
    sensor = sensor_from_preset(config.sensor_preset, w, h,
                                **config.sensor_overrides)
    optics = replace(config.optics,
                     vertical_fov_deg=scene.camera.vertical_fov_deg)
    out_dir = config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    prefix = f"{scene.name}_{config.lighting}"

    foggy, clear_img, depth = render_variants(
        scene, list(config.tiers), config.render
    )

    files: list[Path] = []
    failures: list[tuple[str, str]] = []

    if "depth" in config.outputs:
        p = out_dir / f"{prefix}_depth.img"
        _atomic(p, lambda t: write_float_image(t, depth.depth, None, "depth"))
        files.append(p)

    clear_files, clear_linear_rgb = _process_variant(
        "clear", clear_img, config, sensor, optics, prefix, out_dir)
    files.extend(clear_files)

    if "asm_rgb" in config.outputs and clear_linear_rgb is None:
        failures.append(("asm", "asm_rgb requires the camera chain on the clear pass"))

    airlight = None
    if "asm_rgb" in config.outputs and clear_linear_rgb is not None:
        airlight = asm_mod.estimate_airlight(clear_linear_rgb)

    def do_tier(tier_and_img):
        tier, img = tier_and_img
        label = tier_label(tier)
        produced, _ = _process_variant(label, img, config, sensor, optics,
                                       prefix, out_dir)
        if airlight is not None:
            params = asm_mod.AsmParams(tier.sigma_s, airlight)
            foggy_lin = asm_mod.synthesize_asm(clear_linear_rgb, depth.depth, params)
            encoded = isp_mod.quantize8(
                isp_mod.gamma_encode(foggy_lin, config.isp.gamma))
            p = out_dir / f"{prefix}_{label}_asm_rgb.ppm"
            _atomic(p, lambda t: write_ppm8(t, encoded))
            produced.append(p)
        return label, produced

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            futures = {pool.submit(do_tier, fi): fi[0] for fi in foggy}
            for fut, tier in futures.items():
                try:
                    _, produced = fut.result()
                    files.extend(produced)
                except Exception as e:  # noqa: BLE001 - per-tier isolation
                    failures.append((tier_label(tier), str(e)))
    else:
        for fi in foggy:
            try:
                _, produced = do_tier(fi)
                files.extend(produced)
            except Exception as e:  # noqa: BLE001 - per-tier isolation
                failures.append((tier_label(fi[0]), str(e)))

    entries = sorted((p.name, _sha256(p)) for p in files)
    manifest_path = out_dir / f"{prefix}_manifest.txt"
    lines = [
        "fogsim-manifest 1",
        f"scene {scene.name}",
        f"seed {config.seed}",
        "",
        "[outputs]",
    ]
    lines += [f"{name} {digest}" for name, digest in entries]
    lines += ["", "[failures]"]
    lines += [f"{label}: {msg}" for label, msg in failures]
    lines += ["", "[config]", _config_snapshot(config, sensor)]
    _atomic(manifest_path, lambda t: t.write_text("\n".join(lines), encoding="utf-8"))
    return Manifest(manifest_path, entries, failures)
