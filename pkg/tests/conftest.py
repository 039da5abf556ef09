import math
from pathlib import Path

import numpy as np
import pytest

from fogsim.medium import Medium
from fogsim.render import RenderSettings, render
from fogsim.scene import parse_scene

REPO = Path(__file__).resolve().parent.parent
CHAMBER_SCENE = REPO / "scenes" / "chamber.scene"

#: density series shared by the trend tests: clear + the three dataset
#: tiers + one extra low density (>= 4 fog densities for the trend suite)
CHAMBER_SIGMAS = (0.0, 0.0025, 0.005, 0.01, 0.02)


@pytest.fixture(scope="session")
def chamber_scene():
    return parse_scene(CHAMBER_SCENE)


@pytest.fixture(scope="session")
def chamber_series(chamber_scene):
    """Chamber renders at 256 spp across CHAMBER_SIGMAS: {sigma: RadianceImage}."""
    settings = RenderSettings(samples_per_pixel=256, seed=1234)
    out = {}
    for sigma in CHAMBER_SIGMAS:
        img, depth = render(chamber_scene, settings,
                            medium_override=Medium(sigma, 0.0, 0.87))
        out[sigma] = img
    return out
