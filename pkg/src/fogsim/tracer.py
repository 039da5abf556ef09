"""Numba path-tracing core.

The estimator (one path per camera sample):

* free-flight distance sampled against sigma_t; a medium collision scatters
  with weight sigma_s/sigma_t (implicit absorption);
* next-event estimation to point lights at every medium and surface vertex,
  with transmittance-weighted shadow rays; area and environment lights
  contribute through phase/BSDF sampling hits only;
* `max_bounces` is a path-segment budget in which the NEE shadow connection
  counts as the terminal segment: a vertex with index b may connect to a
  light or spawn a continuation segment only while b + 1 <= max_bounces.
  Emission picked up on arrival at a vertex is always within budget.
* Russian roulette from vertex index rr_start_bounce on, survival
  probability clamp(max-band throughput, 0.05, 0.95).

Per-pixel radiance is the sample mean, accumulated in sample order; every
random draw comes from a (seed, x, y, sample) keyed stream, so results are
bit-identical for any tile decomposition or thread count.
"""

from __future__ import annotations

import math
from collections import namedtuple

import numpy as np
from numba import njit, prange

from . import scene as sc
from .rng import SALT_PATH, next_f64, stream_init
from .spectral import N_BANDS

EPS = 1e-4
INF = math.inf

# |g| below this uses uniform-sphere direction sampling (mirrors medium.G_EPS)
_G_EPS = 1e-3

FlatScene = namedtuple(
    "FlatScene",
    [
        "q_o", "q_eu", "q_ev", "q_n", "q_gi", "q_mat",
        "s_c", "s_r", "s_mat",
        "t_v0", "t_v1", "t_v2", "t_mat",
        "mat_kind", "mat_spec",
        "pl_pos", "pl_int",
        "env_kind", "env_const", "env_map",
        "sigma_s", "sigma_a", "g",
        "med_center", "med_radius",
        "cam_pos", "cam_right", "cam_up", "cam_fwd",
        "tan_half_vfov", "width", "height",
    ],
)

MAT_LAMBERTIAN = 0
MAT_EMISSIVE = 1


class RenderConfigError(ValueError):
    pass


def flatten_scene(scene: sc.Scene, medium_override=None) -> FlatScene:
    """Pack a parsed scene into the contiguous arrays the kernel consumes."""
    quads, spheres, tris = [], [], []
    for prim in scene.primitives:
        sh = prim.shape
        if isinstance(sh, sc.Quad):
            quads.append((sh, prim.material_id))
        elif isinstance(sh, sc.Sphere):
            spheres.append((sh, prim.material_id))
        else:
            for tri in sh.indices:
                tris.append(
                    (sh.vertices[tri[0]], sh.vertices[tri[1]], sh.vertices[tri[2]],
                     prim.material_id)
                )

    # area-light quads join the geometry as synthetic emissive materials
    materials = list(scene.materials)
    for light in scene.lights:
        if isinstance(light, sc.AreaLight):
            quads.append((light.quad, len(materials)))
            materials.append(sc.Emissive(light.radiance))

    nq = len(quads)
    q_o = np.zeros((nq, 3)); q_eu = np.zeros((nq, 3)); q_ev = np.zeros((nq, 3))
    q_n = np.zeros((nq, 3)); q_gi = np.zeros((nq, 3))
    q_mat = np.zeros(nq, dtype=np.int64)
    for i, (q, mat) in enumerate(quads):
        q_o[i] = q.origin; q_eu[i] = q.edge_u; q_ev[i] = q.edge_v
        q_n[i] = q.normal
        uu = float(np.dot(q.edge_u, q.edge_u))
        uv = float(np.dot(q.edge_u, q.edge_v))
        vv = float(np.dot(q.edge_v, q.edge_v))
        det = uu * vv - uv * uv
        q_gi[i] = (vv / det, -uv / det, uu / det)
        q_mat[i] = mat

    ns = len(spheres)
    s_c = np.zeros((ns, 3)); s_r = np.zeros(ns)
    s_mat = np.zeros(ns, dtype=np.int64)
    for i, (s, mat) in enumerate(spheres):
        s_c[i] = s.center; s_r[i] = s.radius; s_mat[i] = mat

    nt = len(tris)
    t_v0 = np.zeros((nt, 3)); t_v1 = np.zeros((nt, 3)); t_v2 = np.zeros((nt, 3))
    t_mat = np.zeros(nt, dtype=np.int64)
    for i, (v0, v1, v2, mat) in enumerate(tris):
        t_v0[i] = v0; t_v1[i] = v1; t_v2[i] = v2; t_mat[i] = mat

    nm = len(materials)
    mat_kind = np.zeros(nm, dtype=np.int64)
    mat_spec = np.zeros((nm, N_BANDS))
    for i, m in enumerate(materials):
        if isinstance(m, sc.Lambertian):
            mat_kind[i] = MAT_LAMBERTIAN
            mat_spec[i] = m.albedo.values
        else:
            mat_kind[i] = MAT_EMISSIVE
            mat_spec[i] = m.radiance.values

    pls = [l for l in scene.lights if isinstance(l, sc.PointLight)]
    pl_pos = np.zeros((len(pls), 3))
    pl_int = np.zeros((len(pls), N_BANDS))
    for i, l in enumerate(pls):
        pl_pos[i] = l.position
        pl_int[i] = l.intensity.values

    envs = [l for l in scene.lights if isinstance(l, sc.EnvironmentLight)]
    if len(envs) > 1:
        raise RenderConfigError("at most one environment light per scene")
    env_kind = 0
    env_const = np.zeros(N_BANDS)
    env_map = np.zeros((1, 1, N_BANDS))
    if envs:
        e = envs[0]
        if e.environment_map is not None:
            env_kind = 2
            env_map = np.ascontiguousarray(e.environment_map, dtype=np.float64)
        else:
            env_kind = 1
            env_const = e.radiance.values.copy()

    medium = medium_override if medium_override is not None else scene.medium
    extent = scene.medium_extent
    right, up, fwd = scene.camera.basis()
    w, h = scene.camera.resolution
    return FlatScene(
        q_o=q_o, q_eu=q_eu, q_ev=q_ev, q_n=q_n, q_gi=q_gi, q_mat=q_mat,
        s_c=s_c, s_r=s_r, s_mat=s_mat,
        t_v0=t_v0, t_v1=t_v1, t_v2=t_v2, t_mat=t_mat,
        mat_kind=mat_kind, mat_spec=mat_spec,
        pl_pos=pl_pos, pl_int=pl_int,
        env_kind=env_kind, env_const=env_const, env_map=env_map,
        sigma_s=float(medium.sigma_s), sigma_a=float(medium.sigma_a),
        g=float(medium.g),
        med_center=np.asarray(extent.center, dtype=np.float64),
        med_radius=float(extent.radius),
        cam_pos=np.asarray(scene.camera.position, dtype=np.float64),
        cam_right=right, cam_up=up, cam_fwd=fwd,
        tan_half_vfov=math.tan(math.radians(scene.camera.vertical_fov_deg) / 2.0),
        width=w, height=h,
    )


@njit(cache=True, inline="always")
def _nearest_hit(fs, ox, oy, oz, dx, dy, dz):
    best_t = INF
    best_kind = -1
    best_i = -1
    for i in range(fs.q_o.shape[0]):
        nx = fs.q_n[i, 0]; ny = fs.q_n[i, 1]; nz = fs.q_n[i, 2]
        denom = dx * nx + dy * ny + dz * nz
        if abs(denom) < 1e-12:
            continue
        t = ((fs.q_o[i, 0] - ox) * nx + (fs.q_o[i, 1] - oy) * ny
             + (fs.q_o[i, 2] - oz) * nz) / denom
        if t <= EPS or t >= best_t:
            continue
        rx = ox + t * dx - fs.q_o[i, 0]
        ry = oy + t * dy - fs.q_o[i, 1]
        rz = oz + t * dz - fs.q_o[i, 2]
        ru = rx * fs.q_eu[i, 0] + ry * fs.q_eu[i, 1] + rz * fs.q_eu[i, 2]
        rv = rx * fs.q_ev[i, 0] + ry * fs.q_ev[i, 1] + rz * fs.q_ev[i, 2]
        a = fs.q_gi[i, 0] * ru + fs.q_gi[i, 1] * rv
        b = fs.q_gi[i, 1] * ru + fs.q_gi[i, 2] * rv
        if 0.0 <= a <= 1.0 and 0.0 <= b <= 1.0:
            best_t = t
            best_kind = 0
            best_i = i
    for i in range(fs.s_c.shape[0]):
        ocx = ox - fs.s_c[i, 0]; ocy = oy - fs.s_c[i, 1]; ocz = oz - fs.s_c[i, 2]
        bq = ocx * dx + ocy * dy + ocz * dz
        cq = ocx * ocx + ocy * ocy + ocz * ocz - fs.s_r[i] * fs.s_r[i]
        disc = bq * bq - cq
        if disc <= 0.0:
            continue
        sq = math.sqrt(disc)
        t = -bq - sq
        if t <= EPS:
            t = -bq + sq
        if EPS < t < best_t:
            best_t = t
            best_kind = 1
            best_i = i
    for i in range(fs.t_v0.shape[0]):
        e1x = fs.t_v1[i, 0] - fs.t_v0[i, 0]
        e1y = fs.t_v1[i, 1] - fs.t_v0[i, 1]
        e1z = fs.t_v1[i, 2] - fs.t_v0[i, 2]
        e2x = fs.t_v2[i, 0] - fs.t_v0[i, 0]
        e2y = fs.t_v2[i, 1] - fs.t_v0[i, 1]
        e2z = fs.t_v2[i, 2] - fs.t_v0[i, 2]
        pvx = dy * e2z - dz * e2y
        pvy = dz * e2x - dx * e2z
        pvz = dx * e2y - dy * e2x
        det = e1x * pvx + e1y * pvy + e1z * pvz
        if abs(det) < 1e-12:
            continue
        inv = 1.0 / det
        tvx = ox - fs.t_v0[i, 0]; tvy = oy - fs.t_v0[i, 1]; tvz = oz - fs.t_v0[i, 2]
        u = (tvx * pvx + tvy * pvy + tvz * pvz) * inv
        if u < 0.0 or u > 1.0:
            continue
        qvx = tvy * e1z - tvz * e1y
        qvy = tvz * e1x - tvx * e1z
        qvz = tvx * e1y - tvy * e1x
        v = (dx * qvx + dy * qvy + dz * qvz) * inv
        if v < 0.0 or u + v > 1.0:
            continue
        t = (e2x * qvx + e2y * qvy + e2z * qvz) * inv
        if EPS < t < best_t:
            best_t = t
            best_kind = 2
            best_i = i

    if best_kind < 0:
        return INF, 0.0, 0.0, 1.0, -1
    if best_kind == 0:
        nx = fs.q_n[best_i, 0]; ny = fs.q_n[best_i, 1]; nz = fs.q_n[best_i, 2]
        mat = fs.q_mat[best_i]
    elif best_kind == 1:
        px = ox + best_t * dx - fs.s_c[best_i, 0]
        py = oy + best_t * dy - fs.s_c[best_i, 1]
        pz = oz + best_t * dz - fs.s_c[best_i, 2]
        inv_r = 1.0 / fs.s_r[best_i]
        nx = px * inv_r; ny = py * inv_r; nz = pz * inv_r
        mat = fs.s_mat[best_i]
    else:
        e1x = fs.t_v1[best_i, 0] - fs.t_v0[best_i, 0]
        e1y = fs.t_v1[best_i, 1] - fs.t_v0[best_i, 1]
        e1z = fs.t_v1[best_i, 2] - fs.t_v0[best_i, 2]
        e2x = fs.t_v2[best_i, 0] - fs.t_v0[best_i, 0]
        e2y = fs.t_v2[best_i, 1] - fs.t_v0[best_i, 1]
        e2z = fs.t_v2[best_i, 2] - fs.t_v0[best_i, 2]
        nx = e1y * e2z - e1z * e2y
        ny = e1z * e2x - e1x * e2z
        nz = e1x * e2y - e1y * e2x
        inv_n = 1.0 / math.sqrt(nx * nx + ny * ny + nz * nz)
        nx *= inv_n; ny *= inv_n; nz *= inv_n
        mat = fs.t_mat[best_i]
    if nx * dx + ny * dy + nz * dz > 0.0:
        nx = -nx; ny = -ny; nz = -nz
    return best_t, nx, ny, nz, mat


@njit(cache=True, inline="always")
def _occluded(fs, ox, oy, oz, dx, dy, dz, max_t):
    t, _, _, _, mat = _nearest_hit(fs, ox, oy, oz, dx, dy, dz)
    return t < max_t - EPS


@njit(cache=True, inline="always")
def _fog_interval(fs, ox, oy, oz, dx, dy, dz):
    """Parametric [enter, exit) of the fog region along the ray, >= 0."""
    if math.isinf(fs.med_radius):
        return 0.0, INF
    ocx = ox - fs.med_center[0]
    ocy = oy - fs.med_center[1]
    ocz = oz - fs.med_center[2]
    b = ocx * dx + ocy * dy + ocz * dz
    c = ocx * ocx + ocy * ocy + ocz * ocz - fs.med_radius * fs.med_radius
    disc = b * b - c
    if disc <= 0.0:
        return 0.0, 0.0
    s = math.sqrt(disc)
    t0 = -b - s
    t1 = -b + s
    if t1 <= 0.0:
        return 0.0, 0.0
    if t0 < 0.0:
        t0 = 0.0
    return t0, t1


@njit(cache=True, inline="always")
def _fog_path_length(fs, ox, oy, oz, dx, dy, dz, r):
    """Length of [0, r] covered by fog along the ray (for shadow rays)."""
    m0, m1 = _fog_interval(fs, ox, oy, oz, dx, dy, dz)
    hi = min(m1, r)
    return hi - m0 if hi > m0 else 0.0


@njit(cache=True, inline="always")
def _hg_phase_scalar(cos_theta, g):
    denom = 1.0 + g * g - 2.0 * g * cos_theta
    return (1.0 - g * g) / (4.0 * math.pi * denom * math.sqrt(denom))


@njit(cache=True, inline="always")
def _frame(wx, wy, wz):
    # tangent frame around unit w; helper axis least aligned with w
    if abs(wy) < 0.9:
        t1x = -wz; t1y = 0.0; t1z = wx  # cross(w, [0,1,0])
    else:
        t1x = 0.0; t1y = wz; t1z = -wy  # cross(w, [1,0,0])
    inv = 1.0 / math.sqrt(t1x * t1x + t1y * t1y + t1z * t1z)
    t1x *= inv; t1y *= inv; t1z *= inv
    t2x = wy * t1z - wz * t1y
    t2y = wz * t1x - wx * t1z
    t2z = wx * t1y - wy * t1x
    return t1x, t1y, t1z, t2x, t2y, t2z


@njit(cache=True, inline="always")
def _sample_hg_dir(dx, dy, dz, g, u1, u2):
    if abs(g) < _G_EPS:
        cos_t = 1.0 - 2.0 * u1
    else:
        s = (1.0 - g * g) / (1.0 - g + 2.0 * g * u1)
        cos_t = (1.0 + g * g - s * s) / (2.0 * g)
    if cos_t > 1.0:
        cos_t = 1.0
    elif cos_t < -1.0:
        cos_t = -1.0
    sin_t = math.sqrt(1.0 - cos_t * cos_t)
    phi = 2.0 * math.pi * u2
    t1x, t1y, t1z, t2x, t2y, t2z = _frame(dx, dy, dz)
    cp = math.cos(phi); sp = math.sin(phi)
    nx = cos_t * dx + sin_t * (cp * t1x + sp * t2x)
    ny = cos_t * dy + sin_t * (cp * t1y + sp * t2y)
    nz = cos_t * dz + sin_t * (cp * t1z + sp * t2z)
    inv = 1.0 / math.sqrt(nx * nx + ny * ny + nz * nz)
    return nx * inv, ny * inv, nz * inv


@njit(cache=True, inline="always")
def _cosine_hemisphere(nx, ny, nz, u1, u2):
    cos_t = math.sqrt(u1)
    sin_t = math.sqrt(1.0 - u1)
    phi = 2.0 * math.pi * u2
    t1x, t1y, t1z, t2x, t2y, t2z = _frame(nx, ny, nz)
    cp = math.cos(phi); sp = math.sin(phi)
    dx = cos_t * nx + sin_t * (cp * t1x + sp * t2x)
    dy = cos_t * ny + sin_t * (cp * t1y + sp * t2y)
    dz = cos_t * nz + sin_t * (cp * t1z + sp * t2z)
    inv = 1.0 / math.sqrt(dx * dx + dy * dy + dz * dz)
    return dx * inv, dy * inv, dz * inv


@njit(cache=True, inline="always")
def _env_radiance(fs, dx, dy, dz, band):
    if fs.env_kind == 1:
        return fs.env_const[band]
    theta = math.acos(min(1.0, max(-1.0, dy)))
    phi = math.atan2(dz, dx)
    h = fs.env_map.shape[0]
    w = fs.env_map.shape[1]
    row = int(theta / math.pi * h)
    if row > h - 1:
        row = h - 1
    col = int((phi + math.pi) / (2.0 * math.pi) * w)
    if col > w - 1:
        col = w - 1
    return fs.env_map[row, col, band]


@njit(cache=True, parallel=True)
def _trace_tile(fs, y0, y1, x0, x1, spp, max_bounces, rr_start, seed, jitter,
                out_rad, out_dsum, out_dcnt):
    sigma_t = fs.sigma_s + fs.sigma_a
    aspect = fs.width / fs.height
    for row in prange(y1 - y0):
        y = y0 + row
        throughput = np.empty(N_BANDS)
        radiance = np.empty(N_BANDS)
        for x in range(x0, x1):
            for b in range(N_BANDS):
                out_rad[y, x, b] = 0.0
            dsum = 0.0
            dcnt = 0
            for s in range(spp):
                state = stream_init(seed, x, y, s, SALT_PATH)
                if jitter:
                    state, jx = next_f64(state)
                    state, jy = next_f64(state)
                else:
                    jx = 0.5
                    jy = 0.5
                ndc_x = 2.0 * (x + jx) / fs.width - 1.0
                ndc_y = 1.0 - 2.0 * (y + jy) / fs.height
                u = ndc_x * fs.tan_half_vfov * aspect
                v = ndc_y * fs.tan_half_vfov
                dx = fs.cam_fwd[0] + u * fs.cam_right[0] + v * fs.cam_up[0]
                dy = fs.cam_fwd[1] + u * fs.cam_right[1] + v * fs.cam_up[1]
                dz = fs.cam_fwd[2] + u * fs.cam_right[2] + v * fs.cam_up[2]
                inv = 1.0 / math.sqrt(dx * dx + dy * dy + dz * dz)
                dx *= inv; dy *= inv; dz *= inv
                ox = fs.cam_pos[0]; oy = fs.cam_pos[1]; oz = fs.cam_pos[2]

                for b in range(N_BANDS):
                    throughput[b] = 1.0
                    radiance[b] = 0.0
                bounce = 0
                primary = True
                while True:
                    t_surf, nx, ny, nz, mat = _nearest_hit(fs, ox, oy, oz, dx, dy, dz)
                    has_surf = t_surf < INF
                    if primary:
                        if has_surf:
                            dsum += t_surf
                            dcnt += 1
                        primary = False
                    t_med = INF
                    if sigma_t > 0.0:
                        m0, m1 = _fog_interval(fs, ox, oy, oz, dx, dy, dz)
                        if m1 > t_surf:
                            m1 = t_surf
                        if m1 > m0:
                            state, um = next_f64(state)
                            tc = m0 - math.log1p(-um) / sigma_t
                            if tc < m1:
                                t_med = tc

                    if t_med < t_surf:
                        # medium scattering vertex
                        bounce += 1
                        ox += t_med * dx; oy += t_med * dy; oz += t_med * dz
                        if fs.sigma_s <= 0.0:
                            break  # collision absorbed
                        w_alb = fs.sigma_s / sigma_t
                        for b in range(N_BANDS):
                            throughput[b] *= w_alb
                        if bounce + 1 > max_bounces:
                            break
                        for li in range(fs.pl_pos.shape[0]):
                            lvx = fs.pl_pos[li, 0] - ox
                            lvy = fs.pl_pos[li, 1] - oy
                            lvz = fs.pl_pos[li, 2] - oz
                            r = math.sqrt(lvx * lvx + lvy * lvy + lvz * lvz)
                            if r < EPS:
                                continue
                            ldx = lvx / r; ldy = lvy / r; ldz = lvz / r
                            if not _occluded(fs, ox, oy, oz, ldx, ldy, ldz, r):
                                cos_defl = dx * ldx + dy * ldy + dz * ldz
                                ph = _hg_phase_scalar(cos_defl, fs.g)
                                tau = sigma_t * _fog_path_length(
                                    fs, ox, oy, oz, ldx, ldy, ldz, r)
                                wl = ph * math.exp(-tau) / (r * r)
                                for b in range(N_BANDS):
                                    radiance[b] += throughput[b] * fs.pl_int[li, b] * wl
                        state, u1 = next_f64(state)
                        state, u2 = next_f64(state)
                        dx, dy, dz = _sample_hg_dir(dx, dy, dz, fs.g, u1, u2)
                    else:
                        if not has_surf:
                            if fs.env_kind > 0:
                                for b in range(N_BANDS):
                                    radiance[b] += throughput[b] * _env_radiance(fs, dx, dy, dz, b)
                            break
                        ox += t_surf * dx; oy += t_surf * dy; oz += t_surf * dz
                        if fs.mat_kind[mat] == MAT_EMISSIVE:
                            for b in range(N_BANDS):
                                radiance[b] += throughput[b] * fs.mat_spec[mat, b]
                            break
                        # lambertian surface vertex
                        bounce += 1
                        if bounce + 1 > max_bounces:
                            break
                        for li in range(fs.pl_pos.shape[0]):
                            lvx = fs.pl_pos[li, 0] - ox
                            lvy = fs.pl_pos[li, 1] - oy
                            lvz = fs.pl_pos[li, 2] - oz
                            r = math.sqrt(lvx * lvx + lvy * lvy + lvz * lvz)
                            if r < EPS:
                                continue
                            ldx = lvx / r; ldy = lvy / r; ldz = lvz / r
                            cos_l = nx * ldx + ny * ldy + nz * ldz
                            if cos_l <= 0.0:
                                continue
                            if not _occluded(fs, ox, oy, oz, ldx, ldy, ldz, r):
                                tau = sigma_t * _fog_path_length(
                                    fs, ox, oy, oz, ldx, ldy, ldz, r)
                                wl = cos_l / math.pi * math.exp(-tau) / (r * r)
                                for b in range(N_BANDS):
                                    radiance[b] += (throughput[b] * fs.mat_spec[mat, b]
                                                    * fs.pl_int[li, b] * wl)
                        state, u1 = next_f64(state)
                        state, u2 = next_f64(state)
                        dx, dy, dz = _cosine_hemisphere(nx, ny, nz, u1, u2)
                        for b in range(N_BANDS):
                            throughput[b] *= fs.mat_spec[mat, b]

                    tmax = throughput[0]
                    for b in range(1, N_BANDS):
                        if throughput[b] > tmax:
                            tmax = throughput[b]
                    if tmax <= 0.0:
                        break
                    if bounce >= rr_start:
                        p = tmax
                        if p > 0.95:
                            p = 0.95
                        elif p < 0.05:
                            p = 0.05
                        state, ur = next_f64(state)
                        if ur >= p:
                            break
                        inv_p = 1.0 / p
                        for b in range(N_BANDS):
                            throughput[b] *= inv_p

                for b in range(N_BANDS):
                    out_rad[y, x, b] += radiance[b]
            for b in range(N_BANDS):
                out_rad[y, x, b] /= spp
            out_dsum[y, x] = dsum
            out_dcnt[y, x] = dcnt


def trace(flat: FlatScene, spp: int, max_bounces: int, rr_start: int,
          seed: int, tile_size: int, jitter: bool = True):
    """Run the kernel over the frame in tiles.

    Returns (radiance (h, w, bands), depth_sum (h, w), depth_count (h, w)).
    Results are invariant to tile_size and thread count.
    """
    w, h = flat.width, flat.height
    out_rad = np.zeros((h, w, N_BANDS))
    out_dsum = np.zeros((h, w))
    out_dcnt = np.zeros((h, w), dtype=np.int64)
    for y0 in range(0, h, tile_size):
        y1 = min(h, y0 + tile_size)
        for x0 in range(0, w, tile_size):
            x1 = min(w, x0 + tile_size)
            _trace_tile(flat, y0, y1, x0, x1, spp, max_bounces, rr_start,
                        seed, jitter, out_rad, out_dsum, out_dcnt)
    return out_rad, out_dsum, out_dcnt
