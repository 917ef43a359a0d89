"""Procedural ray-cast scenes with exact dense ground truth.

Each sample is an indoor-like arrangement: a back wall (class 0) at
z = d_max, a floor plane (class 1) at y = -1, and 1-4 primitives (spheres,
class 2; axis-aligned boxes, class 3) resting in front of a pinhole camera
at the origin looking along +z with a 60 degree vertical field of view.

One ray per pixel gives, analytically: the semantic class of the nearest
hit, its z-depth (the z coordinate of the hit point, not the ray length,
clamped to [d_min, d_max]), and the camera-frame surface normal oriented so
n . ray < 0.  The image is Lambertian shading over a per-class albedo with
fixed light direction plus Gaussian pixel noise.

Everything is a pure function of (seed, index, config), so any sample can
be regenerated alone, in any order, bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import ContractError
from .rng import SplitMix64, mix_seed_index

N_CLASSES = 4
CLASS_NAMES = ("back_wall", "floor", "sphere", "box")

# shading constants: albedo per class, ambient + diffuse split
ALBEDO = np.array(
    [
        [0.30, 0.42, 0.88],
        [0.32, 0.80, 0.38],
        [0.88, 0.30, 0.30],
        [0.90, 0.82, 0.30],
    ]
)
AMBIENT = 0.25
DIFFUSE = 0.75

_EPS_T = 1e-6


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class SceneConfig:
    size: int = 64
    num_prims_min: int = 1
    num_prims_max: int = 4
    d_min: float = 0.5
    d_max: float = 10.0
    light: Tuple[float, float, float] = tuple(_unit((0.35, 0.75, -0.55)))
    noise_std: float = 0.01

    def validate(self) -> None:
        if not (0 < self.d_min < self.d_max):
            raise ContractError(f"depth range [{self.d_min}, {self.d_max}] invalid")
        if self.size < 16:
            raise ContractError(f"image size {self.size} below minimum 16")
        if not (1 <= self.num_prims_min <= self.num_prims_max):
            raise ContractError("primitive count range invalid")
        norm = math.sqrt(sum(c * c for c in self.light))
        if abs(norm - 1.0) > 1e-6:
            raise ContractError(f"light direction norm {norm} not unit")


@dataclass
class Sample:
    image: np.ndarray   # (H, W, 3) float32 in [0, 1]
    labels: np.ndarray  # (H, W) uint8
    depth: np.ndarray   # (H, W) float32 in [d_min, d_max]
    normal: np.ndarray  # (H, W, 3) float32, unit rows, n.z <= 0 hemisphere


@dataclass
class Sphere:
    center: np.ndarray
    radius: float


@dataclass
class Box:
    bmin: np.ndarray
    bmax: np.ndarray


@dataclass
class Scene:
    spheres: List[Sphere] = field(default_factory=list)
    boxes: List[Box] = field(default_factory=list)


# ---- primitive intersections (scalar reference forms) -----------------------


def ray_sphere(origin, direction, center, radius) -> Optional[Tuple[float, np.ndarray]]:
    """Smallest t > 1e-6 with |o + t d - c| = r, and the outward normal
    (hit - c)/r there.  None on a miss.  A ray starting inside returns the
    exit hit, whose normal points along the ray."""
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    c = np.asarray(center, dtype=np.float64)
    oc = o - c
    b = 2.0 * float(d @ oc)
    c0 = float(oc @ oc) - radius * radius
    disc = b * b - 4.0 * c0
    if disc < 0:
        return None
    sq = math.sqrt(disc)
    for t in ((-b - sq) / 2.0, (-b + sq) / 2.0):
        if t > _EPS_T:
            hit = o + t * d
            return t, (hit - c) / radius
    return None


def ray_box(origin, direction, box_min, box_max) -> Optional[Tuple[float, np.ndarray]]:
    """Slab-method nearest hit with t > 1e-6; normal is the face normal of
    the slab that bounds entry.  Equal entry times are broken in x, y, z
    order.  A ray starting inside returns the exit face."""
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    bmin = np.asarray(box_min, dtype=np.float64)
    bmax = np.asarray(box_max, dtype=np.float64)
    t_near, t_far = -math.inf, math.inf
    ax_near, ax_far = -1, -1
    for a in range(3):
        if abs(d[a]) < 1e-12:
            if o[a] < bmin[a] or o[a] > bmax[a]:
                return None
            continue
        t1 = (bmin[a] - o[a]) / d[a]
        t2 = (bmax[a] - o[a]) / d[a]
        lo, hi = (t1, t2) if t1 <= t2 else (t2, t1)
        if lo > t_near:  # strict: the earliest axis keeps ties
            t_near, ax_near = lo, a
        if hi < t_far:
            t_far, ax_far = hi, a
    if t_near > t_far or t_far <= _EPS_T:
        return None
    if t_near > _EPS_T:
        n = np.zeros(3)
        n[ax_near] = -math.copysign(1.0, d[ax_near])
        return t_near, n
    n = np.zeros(3)
    n[ax_far] = math.copysign(1.0, d[ax_far])
    return t_far, n


# ---- camera and vectorized casting -------------------------------------------


def camera_rays(h: int, w: int) -> np.ndarray:
    """(h, w, 3) unit ray directions for pixel centers.  Camera at the
    origin, +z forward, +y up; the vertical FOV spans exactly 60 degrees
    between the top and bottom pixel edges."""
    f = (h / 2.0) / math.tan(math.radians(30.0))
    xs = (np.arange(w, dtype=np.float64) + 0.5) - w / 2.0
    ys = -((np.arange(h, dtype=np.float64) + 0.5) - h / 2.0)
    dirs = np.empty((h, w, 3), dtype=np.float64)
    dirs[:, :, 0] = xs[None, :]
    dirs[:, :, 1] = ys[:, None]
    dirs[:, :, 2] = f
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    return dirs


def _cast_sphere(dirs: np.ndarray, sph: Sphere) -> Tuple[np.ndarray, np.ndarray]:
    c, r = sph.center, sph.radius
    b = 2.0 * (dirs @ (-c))
    c0 = float(c @ c) - r * r
    disc = b * b - 4.0 * c0
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t0 = (-b - sq) / 2.0
    t1 = (-b + sq) / 2.0
    t = np.where(t0 > _EPS_T, t0, np.where(t1 > _EPS_T, t1, np.inf))
    t = np.where(ok, t, np.inf)
    tn = np.where(np.isfinite(t), t, 1.0)
    n = (tn[..., None] * dirs - c) / r
    return t, n


def _cast_box(dirs: np.ndarray, box: Box) -> Tuple[np.ndarray, np.ndarray]:
    d = np.where(np.abs(dirs) < 1e-12, 1e-12, dirs)
    t1 = box.bmin / d  # origin is 0
    t2 = box.bmax / d
    lo = np.minimum(t1, t2)
    hi = np.maximum(t1, t2)
    t_near = lo.max(axis=-1)
    t_far = hi.min(axis=-1)
    axis = lo.argmax(axis=-1)  # first max keeps the x,y,z tie order
    hit = (t_near <= t_far) & (t_near > _EPS_T)
    t = np.where(hit, t_near, np.inf)
    n = np.zeros_like(dirs)
    sgn = -np.sign(np.take_along_axis(d, axis[..., None], axis=-1))[..., 0]
    np.put_along_axis(n, axis[..., None], sgn[..., None], axis=-1)
    return t, n


def cast_scene(cfg: SceneConfig, scene: Scene, h: int, w: int):
    """Analytic ground truth for every pixel: labels, depth, normal."""
    dirs = camera_rays(h, w)
    ts = [cfg.d_max / dirs[:, :, 2]]  # back wall z = d_max, always hit
    normals = [np.broadcast_to(np.array([0.0, 0.0, -1.0]), dirs.shape)]
    classes = [0]
    dy = dirs[:, :, 1]
    with np.errstate(divide="ignore"):
        t_floor = np.where(dy < 0, -1.0 / dy, np.inf)
    ts.append(t_floor)
    normals.append(np.broadcast_to(np.array([0.0, 1.0, 0.0]), dirs.shape))
    classes.append(1)
    for sph in scene.spheres:
        t, n = _cast_sphere(dirs, sph)
        ts.append(t)
        normals.append(n)
        classes.append(2)
    for box in scene.boxes:
        t, n = _cast_box(dirs, box)
        ts.append(t)
        normals.append(n)
        classes.append(3)
    tstack = np.stack(ts)
    winner = tstack.argmin(axis=0)
    t_win = np.take_along_axis(tstack, winner[None], axis=0)[0]
    nstack = np.stack(normals)
    normal = np.take_along_axis(nstack, winner[None, :, :, None], axis=0)[0]
    # orient toward the camera (exit hits of spheres face away)
    facing = (normal * dirs).sum(axis=-1)
    normal = np.where(facing[..., None] > 0, -normal, normal)
    labels = np.asarray(classes, dtype=np.uint8)[winner]
    depth = np.clip(t_win * dirs[:, :, 2], cfg.d_min, cfg.d_max)
    return labels, depth, normal


# ---- procedural sampling -------------------------------------------------------


def sample_scene(gen: SplitMix64, cfg: SceneConfig) -> Scene:
    """Draw primitive poses from the generator in a fixed order."""
    span = cfg.num_prims_max - cfg.num_prims_min + 1
    count = cfg.num_prims_min + gen.next_below(span)
    scene = Scene()
    for _ in range(count):
        kind = gen.next_below(2)
        if kind == 0:
            r = 0.4 + 0.5 * gen.next_float()
            x = -2.5 + 5.0 * gen.next_float()
            y = -1.0 + r + 1.2 * gen.next_float()
            z = 3.0 + 5.0 * gen.next_float()
            scene.spheres.append(Sphere(np.array([x, y, z]), r))
        else:
            hx = 0.3 + 0.5 * gen.next_float()
            hy = 0.3 + 0.5 * gen.next_float()
            hz = 0.3 + 0.5 * gen.next_float()
            x = -2.5 + 5.0 * gen.next_float()
            z = 3.0 + 5.0 * gen.next_float()
            c = np.array([x, -1.0 + hy, z])
            half = np.array([hx, hy, hz])
            scene.boxes.append(Box(c - half, c + half))
    return scene


def shade(labels: np.ndarray, normal: np.ndarray, cfg: SceneConfig) -> np.ndarray:
    """Lambertian image: albedo[class] * (ambient + diffuse * max(0, n.L))."""
    light = np.asarray(cfg.light, dtype=np.float64)
    lam = AMBIENT + DIFFUSE * np.maximum(0.0, normal @ light)
    return ALBEDO[labels] * lam[..., None]


def generate_sample(seed: int, index: int, cfg: SceneConfig) -> Sample:
    """Pure function of (seed, index, cfg)."""
    cfg.validate()
    gen = SplitMix64(mix_seed_index(seed, index))
    h = w = cfg.size
    scene = sample_scene(gen, cfg)
    labels, depth, normal = cast_scene(cfg, scene, h, w)
    image = shade(labels, normal, cfg)
    noise = gen.normals(h * w * 3).reshape(h, w, 3) * cfg.noise_std
    image = np.clip(image + noise, 0.0, 1.0)
    return Sample(
        image=image.astype(np.float32),
        labels=labels,
        depth=depth.astype(np.float32),
        normal=normal.astype(np.float32),
    )


def generate_split(seed: int, count: int, cfg: SceneConfig) -> List[Sample]:
    if count < 1:
        raise ContractError(f"split size {count} must be >= 1")
    return [generate_sample(seed, i, cfg) for i in range(count)]
