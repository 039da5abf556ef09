"""Scene description: geometry, materials, lights, camera, and the parser.

Scene files are TOML (UTF-8) with top-level sections `camera`, `medium`,
`materials`, `primitives`, `lights`. Numeric fields are SI (meters, W/sr,
W·sr^-1·m^-2·nm^-1). Spectra are written either as the string
"flat <value>" or as an explicit 31-value list on the build grid.
Unknown keys are rejected. The full grammar is documented in
docs/scene_schema.md.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

from .medium import Medium
from .spectral import N_BANDS, Spectrum

#: Minimum accepted hit distance; avoids self-intersection and pins goldens.
RAY_EPSILON = 1e-4

#: Distance sentinel for environment light samples.
ENV_DISTANCE = math.inf


class SceneParseError(ValueError):
    """Scene file is syntactically or structurally invalid."""


class SceneValidationError(ValueError):
    """Scene file parsed but violates an invariant; message names the field."""


# --- shapes -----------------------------------------------------------------

@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float


@dataclass(frozen=True)
class Quad:
    """Parallelogram origin + edge_u * a + edge_v * b, a,b in [0,1]."""

    origin: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray

    @property
    def normal(self) -> np.ndarray:
        n = np.cross(self.edge_u, self.edge_v)
        return n / np.linalg.norm(n)

    @property
    def area(self) -> float:
        return float(np.linalg.norm(np.cross(self.edge_u, self.edge_v)))


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (n, 3)
    indices: np.ndarray  # (m, 3) int


Shape = Union[Sphere, Quad, TriangleMesh]


@dataclass(frozen=True)
class Primitive:
    shape: Shape
    material_id: int
    name: Optional[str] = None


# --- materials and lights ----------------------------------------------------

@dataclass(frozen=True)
class Lambertian:
    albedo: Spectrum  # per-band reflectance in [0, 1]


@dataclass(frozen=True)
class Emissive:
    radiance: Spectrum  # W·sr^-1·m^-2·nm^-1


Material = Union[Lambertian, Emissive]


@dataclass(frozen=True)
class PointLight:
    position: np.ndarray
    intensity: Spectrum  # W/sr per band
    role: str = "active"


@dataclass(frozen=True)
class AreaLight:
    """An emissive quad owned by the light (not part of the primitive list).

    The quad radiates from both faces, occludes shadow rays, and is seen by
    path rays like any emissive surface.
    """

    quad: Quad
    radiance: Spectrum
    role: str = "active"


@dataclass(frozen=True)
class EnvironmentLight:
    radiance: Optional[Spectrum] = None  # constant
    environment_map: Optional[np.ndarray] = None  # (h, w, N_BANDS) lat-long
    role: str = "sky"


Light = Union[PointLight, AreaLight, EnvironmentLight]


@dataclass(frozen=True)
class CameraPose:
    position: np.ndarray
    look_at: np.ndarray
    up: np.ndarray
    vertical_fov_deg: float
    resolution: tuple[int, int]  # (width, height)

    def __post_init__(self):
        if np.allclose(self.position, self.look_at):
            raise SceneValidationError("camera.look_at must differ from position")
        if not 0.0 < self.vertical_fov_deg < 180.0:
            raise SceneValidationError("camera.vertical_fov must be in (0, 180)")
        w, h = self.resolution
        if w < 1 or h < 1:
            raise SceneValidationError("camera.resolution must be >= 1x1")

    def basis(self):
        fwd = np.asarray(self.look_at, float) - np.asarray(self.position, float)
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(self.up, float))
        nr = np.linalg.norm(right)
        if nr < 1e-12:
            raise SceneValidationError("camera.up is parallel to the view direction")
        right /= nr
        up = np.cross(right, fwd)
        return right, up, fwd


@dataclass(frozen=True)
class MediumExtent:
    """Spherical fog region; radius may be inf for an unbounded medium.

    Environment light only reaches the camera through fog if the medium is
    bounded (transmittance over an infinite fog path is zero), so sky-lit
    foggy scenes should set an extent covering the geometry.
    """

    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    radius: float = math.inf

    def __post_init__(self):
        if self.radius <= 0:
            raise SceneValidationError("medium extent_radius must be > 0")


@dataclass
class Scene:
    camera: CameraPose
    medium: Medium
    materials: list[Material]
    primitives: list[Primitive]
    lights: list[Light]
    name: str = "scene"
    material_names: dict[str, int] = field(default_factory=dict)
    medium_extent: MediumExtent = field(default_factory=MediumExtent)


# --- intersection (reference implementation) ---------------------------------

@dataclass(frozen=True)
class Hit:
    t: float
    point: np.ndarray
    normal: np.ndarray  # unit, faces the ray origin's side
    material_id: int
    primitive_index: int


def _hit_sphere(sph: Sphere, o, d):
    oc = o - sph.center
    b = np.dot(oc, d)
    c = np.dot(oc, oc) - sph.radius * sph.radius
    disc = b * b - c
    if disc <= 0:
        return None
    s = math.sqrt(disc)
    for t in (-b - s, -b + s):
        if t > RAY_EPSILON:
            p = o + t * d
            n = (p - sph.center) / sph.radius
            return t, n
    return None


def _hit_quad(q: Quad, o, d):
    n = np.cross(q.edge_u, q.edge_v)
    denom = np.dot(d, n)
    if abs(denom) < 1e-12:
        return None
    t = np.dot(q.origin - o, n) / denom
    if t <= RAY_EPSILON:
        return None
    rel = o + t * d - q.origin
    uu = np.dot(q.edge_u, q.edge_u)
    uv = np.dot(q.edge_u, q.edge_v)
    vv = np.dot(q.edge_v, q.edge_v)
    det = uu * vv - uv * uv
    ru = np.dot(rel, q.edge_u)
    rv = np.dot(rel, q.edge_v)
    a = (vv * ru - uv * rv) / det
    b = (uu * rv - uv * ru) / det
    if not (0.0 <= a <= 1.0 and 0.0 <= b <= 1.0):
        return None
    return t, n / np.linalg.norm(n)


def _hit_triangle(v0, v1, v2, o, d):
    e1 = v1 - v0
    e2 = v2 - v0
    pv = np.cross(d, e2)
    det = np.dot(e1, pv)
    if abs(det) < 1e-12:
        return None
    inv = 1.0 / det
    tv = o - v0
    u = np.dot(tv, pv) * inv
    if u < 0.0 or u > 1.0:
        return None
    qv = np.cross(tv, e1)
    v = np.dot(d, qv) * inv
    if v < 0.0 or u + v > 1.0:
        return None
    t = np.dot(e2, qv) * inv
    if t <= RAY_EPSILON:
        return None
    n = np.cross(e1, e2)
    return t, n / np.linalg.norm(n)


def intersect(scene: Scene, origin, direction) -> Optional[Hit]:
    """Nearest intersection with t > RAY_EPSILON, or None on a miss.

    The returned normal faces the side of the ray origin.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    best = None
    for idx, prim in enumerate(scene.primitives):
        sh = prim.shape
        if isinstance(sh, Sphere):
            r = _hit_sphere(sh, o, d)
            if r is not None and (best is None or r[0] < best[0]):
                best = (r[0], r[1], prim.material_id, idx)
        elif isinstance(sh, Quad):
            r = _hit_quad(sh, o, d)
            if r is not None and (best is None or r[0] < best[0]):
                best = (r[0], r[1], prim.material_id, idx)
        else:
            for tri in sh.indices:
                v0, v1, v2 = sh.vertices[tri[0]], sh.vertices[tri[1]], sh.vertices[tri[2]]
                r = _hit_triangle(v0, v1, v2, o, d)
                if r is not None and (best is None or r[0] < best[0]):
                    best = (r[0], r[1], prim.material_id, idx)
    if best is None:
        return None
    t, n, mat, idx = best
    if np.dot(n, d) > 0:
        n = -n
    return Hit(t=float(t), point=o + t * d, normal=n, material_id=mat, primitive_index=idx)


# --- light sampling -----------------------------------------------------------

@dataclass(frozen=True)
class LightSample:
    direction: np.ndarray  # unit, from the shading point toward the light
    distance: float  # meters; ENV_DISTANCE for environment lights
    radiance_over_pdf: Spectrum


def environment_radiance(light: EnvironmentLight, direction) -> Spectrum:
    """Radiance arriving from `direction` (unit, world space, y-up maps)."""
    if light.environment_map is None:
        return light.radiance
    m = light.environment_map
    h, w = m.shape[0], m.shape[1]
    d = np.asarray(direction, float)
    theta = math.acos(max(-1.0, min(1.0, d[1])))  # 0 at +y
    phi = math.atan2(d[2], d[0])  # [-pi, pi]
    row = min(h - 1, int(theta / math.pi * h))
    col = min(w - 1, int((phi + math.pi) / (2.0 * math.pi) * w))
    return Spectrum(m[row, col])


def sample_light(light: Light, shading_point, u1: float, u2: float) -> LightSample:
    """One light sample for next-event estimation.

    Point lights are deterministic with radiance_over_pdf = I / r^2. Area
    lights are sampled uniformly over the quad with the area pdf converted
    to solid angle. Environment lights use a uniform sphere direction and
    the ENV_DISTANCE sentinel.
    """
    p = np.asarray(shading_point, dtype=np.float64)
    if isinstance(light, PointLight):
        v = light.position - p
        r = float(np.linalg.norm(v))
        return LightSample(v / r, r, light.intensity.scale(1.0 / (r * r)))
    if isinstance(light, AreaLight):
        q = light.quad
        x = q.origin + u1 * q.edge_u + u2 * q.edge_v
        v = x - p
        r = float(np.linalg.norm(v))
        d = v / r
        cos_l = abs(float(np.dot(q.normal, d)))
        if cos_l < 1e-12:
            return LightSample(d, r, light.radiance.scale(0.0))
        # pdf_area = 1/A; pdf_omega = r^2 / (A cos_l)
        return LightSample(d, r, light.radiance.scale(q.area * cos_l / (r * r)))
    # environment: uniform sphere, pdf = 1/(4 pi)
    z = 1.0 - 2.0 * u1
    s = math.sqrt(max(0.0, 1.0 - z * z))
    phi = 2.0 * math.pi * u2
    d = np.array([s * math.cos(phi), z, s * math.sin(phi)])
    rad = environment_radiance(light, d)
    return LightSample(d, ENV_DISTANCE, rad.scale(4.0 * math.pi))


# --- parser -------------------------------------------------------------------

_TOP_KEYS = {"camera", "medium", "materials", "primitives", "lights"}


def _reject_unknown(table: dict, allowed: set, where: str):
    for k in table:
        if k not in allowed:
            raise SceneValidationError(f"{where}: unknown key {k!r}")


def _vec3(table: dict, key: str, where: str) -> np.ndarray:
    try:
        v = table[key]
    except KeyError:
        raise SceneValidationError(f"{where}: missing {key!r}") from None
    if not (isinstance(v, list) and len(v) == 3 and all(isinstance(x, (int, float)) for x in v)):
        raise SceneValidationError(f"{where}.{key}: expected 3 numbers")
    return np.array(v, dtype=np.float64)


def _spectrum(value, where: str) -> Spectrum:
    if isinstance(value, str):
        parts = value.split()
        if len(parts) == 2 and parts[0] == "flat":
            try:
                return Spectrum.flat(float(parts[1]))
            except ValueError:
                pass
        raise SceneValidationError(f"{where}: expected 'flat <value>' or {N_BANDS}-value list")
    if isinstance(value, list):
        if len(value) != N_BANDS:
            raise SceneValidationError(f"{where}: spectrum list must have {N_BANDS} values")
        return Spectrum(np.array(value, dtype=np.float64))
    raise SceneValidationError(f"{where}: expected 'flat <value>' or {N_BANDS}-value list")


def _parse_camera(t: dict) -> CameraPose:
    _reject_unknown(t, {"position", "look_at", "up", "vertical_fov", "resolution"}, "camera")
    for req in ("position", "look_at", "up", "vertical_fov", "resolution"):
        if req not in t:
            raise SceneValidationError(f"camera: missing {req!r}")
    res = t["resolution"]
    if not (isinstance(res, list) and len(res) == 2 and all(isinstance(x, int) for x in res)):
        raise SceneValidationError("camera.resolution: expected [width, height] integers")
    return CameraPose(
        position=_vec3(t, "position", "camera"),
        look_at=_vec3(t, "look_at", "camera"),
        up=_vec3(t, "up", "camera"),
        vertical_fov_deg=float(t["vertical_fov"]),
        resolution=(res[0], res[1]),
    )


def _parse_medium(t: dict):
    _reject_unknown(t, {"sigma_s", "sigma_a", "g", "extent_center",
                        "extent_radius"}, "medium")
    medium = Medium(
        sigma_s=float(t.get("sigma_s", 0.0)),
        sigma_a=float(t.get("sigma_a", 0.0)),
        g=float(t.get("g", 0.87)),
    )
    extent = MediumExtent()
    if "extent_radius" in t:
        center = (_vec3(t, "extent_center", "medium")
                  if "extent_center" in t else np.zeros(3))
        extent = MediumExtent(center, float(t["extent_radius"]))
    elif "extent_center" in t:
        raise SceneValidationError("medium.extent_center requires extent_radius")
    return medium, extent


def _parse_material(name: str, t: dict) -> Material:
    where = f"materials.{name}"
    if "kind" not in t:
        raise SceneValidationError(f"{where}: missing 'kind'")
    kind = t["kind"]
    if kind == "lambertian":
        _reject_unknown(t, {"kind", "albedo"}, where)
        alb = _spectrum(t.get("albedo", "flat 0.5"), f"{where}.albedo")
        if np.any(alb.values > 1.0):
            raise SceneValidationError(f"{where}.albedo: reflectance must be in [0, 1]")
        return Lambertian(alb)
    if kind == "emissive":
        _reject_unknown(t, {"kind", "radiance"}, where)
        if "radiance" not in t:
            raise SceneValidationError(f"{where}: missing 'radiance'")
        return Emissive(_spectrum(t["radiance"], f"{where}.radiance"))
    raise SceneValidationError(f"{where}.kind: unknown material kind {kind!r}")


def _parse_primitive(i: int, t: dict, mat_names: dict) -> Primitive:
    where = f"primitives[{i}]"
    if "material" not in t:
        raise SceneValidationError(f"{where}: missing 'material'")
    mat = t["material"]
    if mat not in mat_names:
        raise SceneValidationError(f"{where}.material: undefined material {mat!r}")
    name = t.get("name")
    shape = t.get("shape")
    if shape == "sphere":
        _reject_unknown(t, {"shape", "material", "name", "center", "radius"}, where)
        radius = t.get("radius")
        if not isinstance(radius, (int, float)) or radius <= 0:
            raise SceneValidationError(f"{where}.radius: must be > 0")
        return Primitive(Sphere(_vec3(t, "center", where), float(radius)), mat_names[mat], name)
    if shape == "quad":
        _reject_unknown(t, {"shape", "material", "name", "origin", "edge_u", "edge_v"}, where)
        eu = _vec3(t, "edge_u", where)
        ev = _vec3(t, "edge_v", where)
        if np.linalg.norm(np.cross(eu, ev)) < 1e-12:
            raise SceneValidationError(f"{where}: edge_u and edge_v must not be parallel")
        return Primitive(Quad(_vec3(t, "origin", where), eu, ev), mat_names[mat], name)
    if shape == "mesh":
        _reject_unknown(t, {"shape", "material", "name", "vertices", "indices"}, where)
        verts = np.array(t.get("vertices", []), dtype=np.float64)
        idx = np.array(t.get("indices", []), dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3 or verts.shape[0] < 3:
            raise SceneValidationError(f"{where}.vertices: expected list of [x,y,z]")
        if idx.ndim != 2 or idx.shape[1] != 3 or idx.shape[0] < 1:
            raise SceneValidationError(f"{where}.indices: expected list of 3 vertex indices")
        if idx.min() < 0 or idx.max() >= verts.shape[0]:
            raise SceneValidationError(f"{where}.indices: vertex index out of range")
        return Primitive(TriangleMesh(verts, idx), mat_names[mat], name)
    raise SceneValidationError(f"{where}.shape: expected sphere|quad|mesh, got {shape!r}")


def _parse_light(i: int, t: dict, base: Path) -> Light:
    where = f"lights[{i}]"
    kind = t.get("kind")
    if kind == "point":
        _reject_unknown(t, {"kind", "position", "intensity", "role"}, where)
        if "intensity" not in t:
            raise SceneValidationError(f"{where}: missing 'intensity'")
        return PointLight(
            position=_vec3(t, "position", where),
            intensity=_spectrum(t["intensity"], f"{where}.intensity"),
            role=_role(t, where, default="active"),
        )
    if kind == "area":
        _reject_unknown(t, {"kind", "origin", "edge_u", "edge_v", "radiance", "role"},
                        where)
        if "radiance" not in t:
            raise SceneValidationError(f"{where}: missing 'radiance'")
        eu = _vec3(t, "edge_u", where)
        ev = _vec3(t, "edge_v", where)
        if np.linalg.norm(np.cross(eu, ev)) < 1e-12:
            raise SceneValidationError(f"{where}: edge_u and edge_v must not be parallel")
        quad = Quad(_vec3(t, "origin", where), eu, ev)
        return AreaLight(quad, _spectrum(t["radiance"], f"{where}.radiance"),
                         _role(t, where, "active"))
    if kind == "environment":
        _reject_unknown(t, {"kind", "radiance", "map", "role"}, where)
        if ("radiance" in t) == ("map" in t):
            raise SceneValidationError(f"{where}: give exactly one of 'radiance' or 'map'")
        if "radiance" in t:
            return EnvironmentLight(
                radiance=_spectrum(t["radiance"], f"{where}.radiance"),
                role=_role(t, where, "sky"),
            )
        from .imgio import read_float_image

        data, _ = read_float_image(base / t["map"])
        if data.ndim != 3 or data.shape[2] != N_BANDS or data.shape[0] < 1 or data.shape[1] < 1:
            raise SceneValidationError(f"{where}.map: expected a {N_BANDS}-band image >= 1x1")
        return EnvironmentLight(environment_map=data, role=_role(t, where, "sky"))
    raise SceneValidationError(f"{where}.kind: expected point|area|environment, got {kind!r}")


def _role(t: dict, where: str, default: str) -> str:
    role = t.get("role", default)
    if role not in ("sky", "active"):
        raise SceneValidationError(f"{where}.role: expected 'sky' or 'active'")
    return role


def parse_scene(path) -> Scene:
    """Parse and fully validate a scene file; raises on any violation."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except FileNotFoundError:
        raise SceneParseError(f"scene file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise SceneParseError(f"{path}: {e}") from None

    _reject_unknown(doc, _TOP_KEYS, str(path.name))
    if "camera" not in doc:
        raise SceneValidationError("scene: missing [camera] section")
    camera = _parse_camera(doc["camera"])
    medium, extent = _parse_medium(doc.get("medium", {}))

    materials: list[Material] = []
    mat_names: dict[str, int] = {}
    for name, tbl in doc.get("materials", {}).items():
        if not isinstance(tbl, dict):
            raise SceneValidationError(f"materials.{name}: expected a table")
        mat_names[name] = len(materials)
        materials.append(_parse_material(name, tbl))

    primitives = [
        _parse_primitive(i, t, mat_names) for i, t in enumerate(doc.get("primitives", []))
    ]
    seen = set()
    for p in primitives:
        if p.name is not None:
            if p.name in seen:
                raise SceneValidationError(f"primitives: duplicate name {p.name!r}")
            seen.add(p.name)

    lights = [
        _parse_light(i, t, path.parent) for i, t in enumerate(doc.get("lights", []))
    ]
    return Scene(
        camera=camera,
        medium=medium,
        materials=materials,
        primitives=primitives,
        lights=lights,
        name=path.stem,
        material_names=mat_names,
        medium_extent=extent,
    )
