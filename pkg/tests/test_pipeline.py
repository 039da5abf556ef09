import hashlib

import numpy as np
import pytest

from fogsim import cli
from fogsim.imgio import read_float_image, read_ppm8, read_raw_pgm
from fogsim.pipeline import (
    JobConfig,
    PipelineError,
    lighting_variant,
    load_job_config,
    run,
    tier_label,
)
from fogsim.medium import FogTier
from fogsim.scene import AreaLight, EnvironmentLight, PointLight, parse_scene

TINY_SCENE = """
[camera]
position = [0.0, 0.0, 0.0]
look_at = [0.0, 0.0, 1.0]
up = [0.0, 1.0, 0.0]
vertical_fov = 30.0
resolution = [16, 16]

[medium]
sigma_s = 0.01
sigma_a = 0.0
g = 0.87
extent_center = [0.0, 0.0, 25.0]
extent_radius = 60.0

[materials.wall]
kind = "lambertian"
albedo = "flat 0.6"

[materials.dark]
kind = "lambertian"
albedo = "flat 0.05"

[[primitives]]
shape = "quad"
material = "wall"
name = "backwall"
origin = [-30.0, -30.0, 40.0]
edge_u = [60.0, 0.0, 0.0]
edge_v = [0.0, 60.0, 0.0]

[[primitives]]
shape = "quad"
material = "dark"
origin = [-30.0, -8.0, 39.5]
edge_u = [20.0, 0.0, 0.0]
edge_v = [0.0, 16.0, 0.0]

[[lights]]
kind = "environment"
radiance = "flat 0.5"
role = "sky"

[[lights]]
kind = "point"
position = [5.0, 5.0, 20.0]
intensity = "flat 300.0"
role = "active"

[[lights]]
kind = "area"
origin = [-12.0, 6.0, 10.0]
edge_u = [6.0, 0.0, 0.0]
edge_v = [0.0, 3.0, 0.0]
radiance = "flat 8.0"
role = "active"
"""

CONFIG = """
scene = "tiny.scene"
seed = 77
output_dir = "out"
outputs = ["radiance", "depth", "raw", "rgb", "asm_rgb"]
tiers = [0.005, "dense"]
lighting = "sky_plus_active"
workers = 1

[render]
samples_per_pixel = 24
max_bounces = 8
tile_size = 16

[optics]
f_number = 2.0

[sensor]
preset = "smartphone"
exposure_time = 0.004

[isp]
gamma = 0.4545454545454545
"""


@pytest.fixture
def workspace(tmp_path):
    (tmp_path / "tiny.scene").write_text(TINY_SCENE, encoding="utf-8")
    (tmp_path / "job.toml").write_text(CONFIG, encoding="utf-8")
    return tmp_path


class TestConfig:
    def test_load_and_validate(self, workspace):
        cfg = load_job_config(workspace / "job.toml")
        assert cfg.seed == 77
        assert [t.sigma_s for t in cfg.tiers] == [0.005, 0.02]
        assert cfg.tiers[1].name == "dense"
        assert cfg.render.samples_per_pixel == 24
        assert cfg.sensor_overrides == {"exposure_time": 0.004}

    def test_unknown_key_rejected(self, workspace):
        (workspace / "bad.toml").write_text(CONFIG + "\nturbo = true\n")
        with pytest.raises(PipelineError, match="turbo"):
            load_job_config(workspace / "bad.toml")

    def test_unknown_output_rejected(self, workspace):
        bad = CONFIG.replace('"rgb"', '"jpeg"')
        (workspace / "bad.toml").write_text(bad)
        with pytest.raises(PipelineError, match="jpeg"):
            load_job_config(workspace / "bad.toml")

    def test_empty_outputs_rejected(self, workspace):
        bad = CONFIG.replace(
            'outputs = ["radiance", "depth", "raw", "rgb", "asm_rgb"]',
            "outputs = []")
        (workspace / "bad.toml").write_text(bad)
        with pytest.raises(PipelineError):
            load_job_config(workspace / "bad.toml")

    def test_tier_labels(self):
        assert tier_label(FogTier.from_name("heavy")) == "heavy"
        assert tier_label(FogTier.from_sigma(0.003)) == "s0p003"


class TestLightingVariant:
    def test_sky_only_filters(self, workspace):
        scene = parse_scene(workspace / "tiny.scene")
        sky = lighting_variant(scene, "sky_only")
        assert len(sky.lights) == 1
        assert isinstance(sky.lights[0], EnvironmentLight)

    def test_sky_plus_active_keeps_all(self, workspace):
        scene = parse_scene(workspace / "tiny.scene")
        assert len(lighting_variant(scene, "sky_plus_active").lights) == 3

    def test_sky_only_without_sky_light_errors(self, workspace):
        scene = parse_scene(workspace / "tiny.scene")
        import dataclasses

        no_sky = dataclasses.replace(
            scene, lights=[l for l in scene.lights if l.role != "sky"])
        with pytest.raises(PipelineError, match="sky"):
            lighting_variant(no_sky, "sky_only")

    def test_active_brightens_near_lamp(self, workspace):
        from fogsim.render import RenderSettings, render

        scene = parse_scene(workspace / "tiny.scene")
        settings = RenderSettings(samples_per_pixel=48, seed=5)
        sky, _ = render(lighting_variant(scene, "sky_only"), settings)
        both, _ = render(lighting_variant(scene, "sky_plus_active"), settings)
        assert both.data.mean() > sky.data.mean()


class TestRun:
    def test_full_outputs_and_manifest(self, workspace):
        cfg = load_job_config(workspace / "job.toml")
        manifest = run(cfg)
        assert manifest.ok
        out = workspace / "out"
        names = {p.name for p in out.iterdir()}
        prefix = "tiny_sky_plus_active"
        expected = {
            f"{prefix}_depth.img",
            f"{prefix}_manifest.txt",
        }
        for label in ("clear", "heavy", "dense"):
            expected |= {
                f"{prefix}_{label}_radiance.img",
                f"{prefix}_{label}_raw.pgm",
                f"{prefix}_{label}_raw.pgm.meta",
                f"{prefix}_{label}_rgb.ppm",
            }
        expected |= {f"{prefix}_heavy_asm_rgb.ppm", f"{prefix}_dense_asm_rgb.ppm"}
        assert expected == names
        # manifest hashes match file contents
        for name, digest in manifest.entries:
            blob = (out / name).read_bytes()
            assert hashlib.sha256(blob).hexdigest() == digest
        # depth has the sky sentinel nowhere (closed back wall)
        depth, _ = read_float_image(out / f"{prefix}_depth.img")
        assert np.all(np.isfinite(depth))
        raw, meta = read_raw_pgm(out / f"{prefix}_clear_raw.pgm")
        assert meta["sensor"]["exposure_time"] == 0.004

    def test_deterministic_across_runs_and_workers(self, workspace):
        cfg = load_job_config(workspace / "job.toml")
        m1 = run(cfg)
        h1 = (workspace / "out" / m1.path.name).read_bytes()
        entries1 = list(m1.entries)
        import dataclasses

        cfg2 = dataclasses.replace(cfg, output_dir=workspace / "out2", workers=2)
        m2 = run(cfg2)
        h2 = (workspace / "out2" / m2.path.name).read_bytes()
        assert entries1 == list(m2.entries)
        assert h1 == h2

    def test_tier_independence(self, workspace):
        import dataclasses

        cfg = load_job_config(workspace / "job.toml")
        run(cfg)
        one = dataclasses.replace(
            cfg, tiers=(cfg.tiers[0],), output_dir=workspace / "out_one")
        run(one)
        name = "tiny_sky_plus_active_heavy_rgb.ppm"
        a = (workspace / "out" / name).read_bytes()
        b = (workspace / "out_one" / name).read_bytes()
        assert a == b

    def test_output_filtering(self, workspace):
        import dataclasses

        cfg = load_job_config(workspace / "job.toml")
        raw_only = dataclasses.replace(cfg, outputs=("raw",),
                                       output_dir=workspace / "rawout")
        manifest = run(raw_only)
        assert manifest.ok
        names = {p.name for p in (workspace / "rawout").iterdir()}
        assert all(n.endswith((".pgm", ".pgm.meta", "manifest.txt")) for n in names)
        assert not any(n.endswith(".ppm") for n in names)


class TestCli:
    def test_chamber_calculators(self, capsys):
        assert cli.main(["chamber", "mor-from-sigma", "--value", "0.005"]) == 0
        assert capsys.readouterr().out.strip() == "599.2"
        assert cli.main(["chamber", "sigma-from-power", "--p0", "2.0", "--pu", "1.0",
                         "--path-length", "1.0"]) == 0
        assert capsys.readouterr().out.strip() == "0.693147"

    def test_render_requires_seed(self, workspace, capsys):
        with pytest.raises(SystemExit):
            cli.main(["render", "--scene", str(workspace / "tiny.scene"),
                      "--out-prefix", str(workspace / "r")])

    def test_render_and_expose_and_isp_chain(self, workspace, capsys):
        rc = cli.main(["render", "--scene", str(workspace / "tiny.scene"),
                       "--out-prefix", str(workspace / "r"), "--seed", "3",
                       "--spp", "8"])
        assert rc == 0
        rc = cli.main(["expose", "--radiance", str(workspace / "r_radiance.img"),
                       "--out", str(workspace / "r.pgm"), "--seed", "3",
                       "--exposure-time", "0.004", "--vertical-fov", "30"])
        assert rc == 0
        rc = cli.main(["isp", "--raw", str(workspace / "r.pgm"),
                       "--out", str(workspace / "r.ppm"), "--gray-world"])
        assert rc == 0
        img = read_ppm8(workspace / "r.ppm")
        assert img.shape == (16, 16, 3)

    def test_asm_fog_cli(self, workspace):
        cli.main(["render", "--scene", str(workspace / "tiny.scene"),
                  "--out-prefix", str(workspace / "r"), "--seed", "3", "--spp", "8"])
        rc = cli.main(["asm-fog", "--clear", str(workspace / "r_radiance.img"),
                       "--depth", str(workspace / "r_depth.img"),
                       "--beta", "0.02", "--airlight", "0.5", "0.5", "0.5",
                       "--out", str(workspace / "foggy.img")])
        assert rc != 0  # 31-band radiance is not an RGB clear image
        # proper use: 3-channel linear image
        from fogsim.imgio import write_float_image

        rng = np.random.default_rng(0)
        write_float_image(workspace / "clear.img", rng.random((16, 16, 3)),
                          None, "rgb_linear")
        rc = cli.main(["asm-fog", "--clear", str(workspace / "clear.img"),
                       "--depth", str(workspace / "r_depth.img"),
                       "--beta", "0.02", "--airlight", "0.5", "0.5", "0.5",
                       "--out", str(workspace / "foggy.img")])
        assert rc == 0
        foggy, _ = read_float_image(workspace / "foggy.img")
        assert foggy.shape == (16, 16, 3)

    def test_dataset_cli(self, workspace):
        rc = cli.main(["dataset", "--config", str(workspace / "job.toml")])
        assert rc == 0
        assert (workspace / "out" / "tiny_sky_plus_active_manifest.txt").exists()

    def test_analyze_trend_csv(self, workspace, capsys, tmp_path):
        from fogsim.imgio import write_ppm8

        rng = np.random.default_rng(1)
        paths = []
        for i, scale in enumerate((0.2, 0.5, 0.8)):
            img = (np.full((16, 16, 3), scale) * 255).astype(np.uint8)
            p = workspace / f"t{i}.ppm"
            write_ppm8(p, img)
            paths.append(str(p))
        rc = cli.main(["analyze", "trend",
                       "--image", paths[0], "--image", paths[1], "--image", paths[2],
                       "--sigmas", "0.005", "0.01", "0.02",
                       "--patch", "2", "2", "8", "8"])
        assert rc == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "patch_id,sigma_s,mean_R,mean_G,mean_B"
        assert len(out.strip().splitlines()) == 4
