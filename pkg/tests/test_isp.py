import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fogsim.camera import RawImage
from fogsim.isp import (
    IspConfig,
    IspError,
    cfa_masks,
    demosaic_bilinear,
    gamma_decode,
    gamma_encode,
    gray_world_gains,
    process,
    process_linear,
    quantize8,
)

CFA = ("R", "G", "G", "B")


def make_raw(dn, black_level=64, bit_depth=10, cfa=CFA):
    meta = {"sensor": {"black_level": black_level, "bit_depth": bit_depth,
                       "cfa": "".join(cfa)}}
    return RawImage(dn=np.asarray(dn, dtype=np.uint16), cfa=cfa, metadata=meta)


def mosaic_from_rgb(rgb, cfa=CFA):
    h, w = rgb.shape[:2]
    m = np.zeros((h, w))
    for c, mask in enumerate(cfa_masks(cfa, h, w)):
        m[mask] = rgb[:, :, c][mask]
    return m


class TestConfig:
    def test_row_sum_validation(self):
        with pytest.raises(IspError):
            IspConfig(ccm=np.array([[0.9, 0.0, 0.0], [0, 1, 0], [0, 0, 1]]))

    def test_gain_validation(self):
        with pytest.raises(IspError):
            IspConfig(wb_gains=(1.0, -1.0, 1.0))
        with pytest.raises(IspError):
            IspConfig(wb_gains="auto")
        IspConfig(wb_gains="gray-world")

    def test_gamma_validation(self):
        with pytest.raises(IspError):
            IspConfig(gamma=0.0)
        with pytest.raises(IspError):
            IspConfig(gamma=1.5)


class TestDemosaic:
    def test_constant_mosaic(self):
        out = demosaic_bilinear(np.full((6, 6), 0.4), CFA)
        assert np.allclose(out, 0.4, atol=1e-12)

    def test_hand_computed_4x4(self):
        rgb = np.zeros((4, 4, 3))
        rgb[:, :, 0] = 1.0
        rgb[:, :, 1] = 0.5
        rgb[:, :, 2] = 0.0
        m = mosaic_from_rgb(rgb)
        out = demosaic_bilinear(m, CFA)
        # interior R site (2,2): G estimate from NSEW greens
        assert out[2, 2, 1] == pytest.approx(0.5)
        # interior B site (1,1): R from 4 diagonals, G from NSEW
        assert out[1, 1, 0] == pytest.approx(1.0)
        assert out[1, 1, 1] == pytest.approx(0.5)
        # known sites pass through
        assert out[2, 2, 0] == 1.0
        assert out[1, 1, 2] == 0.0

    def test_exact_on_linear_ramp(self):
        h, w = 16, 16
        ramp = np.linspace(0.1, 0.9, w)[None, :].repeat(h, axis=0)
        rgb = np.stack([ramp] * 3, axis=2)
        out = demosaic_bilinear(mosaic_from_rgb(rgb), CFA)
        err = np.abs(out - rgb)[1:-1, 1:-1]
        assert err.max() < 1e-6

    def test_mosaic_roundtrip_psnr(self):
        h, w = 64, 64
        ys, xs = np.mgrid[0:h, 0:w] / h
        rgb = np.stack([0.2 + 0.6 * xs, 0.3 + 0.4 * ys,
                        0.5 + 0.3 * np.sin(2 * np.pi * xs / 4) * 0.0 + 0.2 * xs * ys],
                       axis=2)
        out = demosaic_bilinear(mosaic_from_rgb(rgb), CFA)
        err = (out - rgb)[2:-2, 2:-2]
        mse = float((err ** 2).mean())
        psnr = 10 * math.log10(1.0 / mse) if mse > 0 else math.inf
        assert psnr > 40.0

    def test_too_small(self):
        with pytest.raises(IspError):
            demosaic_bilinear(np.ones((1, 4)), CFA)

    def test_other_patterns(self):
        for cfa in (("B", "G", "G", "R"), ("G", "R", "B", "G")):
            out = demosaic_bilinear(np.full((6, 6), 0.25), cfa)
            assert np.allclose(out, 0.25, atol=1e-12)


class TestGrayWorld:
    def test_neutral_flat_field(self):
        dn = np.full((8, 8), 500, dtype=np.uint16)
        gains = gray_world_gains(make_raw(dn, black_level=0))
        assert np.allclose(gains, 1.0, atol=1e-3)

    def test_half_level_red(self):
        rgb = np.full((8, 8, 3), 0.5)
        rgb[:, :, 0] = 0.25
        dn = (mosaic_from_rgb(rgb) * 1000).astype(np.uint16)
        gains = gray_world_gains(make_raw(dn, black_level=0))
        assert gains[0] == pytest.approx(2.0, abs=1e-3)
        assert gains[1] == 1.0

    def test_zero_channel_errors(self):
        rgb = np.full((8, 8, 3), 0.5)
        rgb[:, :, 0] = 0.0
        dn = (mosaic_from_rgb(rgb) * 1000).astype(np.uint16)
        with pytest.raises(IspError):
            gray_world_gains(make_raw(dn, black_level=0))


class TestProcess:
    def test_black_raw_maps_to_zero(self):
        raw = make_raw(np.full((8, 8), 64))
        out = process(raw, IspConfig())
        assert np.all(out.data == 0)
        assert out.colorspace == "gamma"

    def test_identity_chain_flat_gray(self):
        black, bits = 64, 10
        dn_val = 575  # (575-64)/(1023-64) = 0.5328...
        raw = make_raw(np.full((8, 8), dn_val))
        out = process(raw, IspConfig(gamma=1.0))
        expect = (dn_val - black) / (2 ** bits - 1 - black)
        assert np.all(out.data == round(expect * 255))

    def test_missing_metadata(self):
        raw = RawImage(dn=np.full((4, 4), 100, dtype=np.uint16), cfa=CFA,
                       metadata={})
        with pytest.raises(IspError):
            process(raw, IspConfig())

    def test_neutral_preserved_by_row_sum_one_ccm(self):
        ccm = np.array([[1.2, -0.1, -0.1], [-0.05, 1.1, -0.05], [0.0, -0.2, 1.2]])
        raw = make_raw(np.full((8, 8), 400))
        lin = process_linear(raw, IspConfig(ccm=ccm))
        assert np.allclose(lin[:, :, 0], lin[:, :, 1], atol=1e-6)
        assert np.allclose(lin[:, :, 1], lin[:, :, 2], atol=1e-6)

    def test_full_chain_deterministic(self):
        rng = np.random.default_rng(0)
        dn = rng.integers(64, 1023, size=(16, 16)).astype(np.uint16)
        raw = make_raw(dn)
        cfg = IspConfig(wb_gains=(1.9, 1.0, 1.4),
                        ccm=np.array([[1.1, -0.05, -0.05], [0, 1, 0], [-0.1, -0.1, 1.2]]))
        a = process(raw, cfg).data
        b = process(raw, cfg).data
        assert np.array_equal(a, b)
        assert a.tobytes() == b.tobytes()

    def test_monotone_with_nonnegative_ccm(self):
        rng = np.random.default_rng(1)
        dn = rng.integers(100, 900, size=(8, 8)).astype(np.uint16)
        raw_lo = make_raw(dn)
        bumped = dn.copy()
        bumped[3, 3] += 50
        raw_hi = make_raw(bumped)
        cfg = IspConfig(wb_gains=(1.5, 1.0, 1.2))
        lo = process(raw_lo, cfg).data.astype(int)
        hi = process(raw_hi, cfg).data.astype(int)
        assert np.all(hi >= lo)


class TestGamma:
    @given(st.floats(0.0, 1.0))
    def test_round_trip(self, v):
        g = 1.0 / 2.2
        arr = np.array([v])
        rec = gamma_decode(gamma_encode(arr, g), g)
        assert abs(rec[0] - v) <= 1.0 / 255.0

    def test_quantize_rounds_half_away_from_zero(self):
        assert quantize8(np.array([0.5 / 255.0]))[0] == 1
        assert quantize8(np.array([1.5 / 255.0]))[0] == 2
        assert quantize8(np.array([0.49 / 255.0]))[0] == 0
        assert quantize8(np.array([1.0]))[0] == 255
