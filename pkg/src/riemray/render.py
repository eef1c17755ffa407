"""Riemannian shading: march geodesic polylines from a g-orthonormal camera and color the first hit.

Every chord of a marched polyline is intersected exactly with the scene
primitives (closed form per primitive), so the only discretization error left
is the integrator's. Rays are marched a tile of rows at a time with numpy; the
tiling does not depend on the worker count, which keeps output byte-identical
however many threads are used.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .geodesics import IntegratorConfig, flow_step
from .linalg import dot3, gram_schmidt_frame
from .metrics import MetricField, metric_tensor

MAGENTA = (255, 0, 255)
DEFAULT_FOG = 0.05
DEFAULT_TILE_ROWS = 32


def _vec3(v, name: str) -> tuple[float, float, float]:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be 3 finite numbers")
    return tuple(float(x) for x in arr)


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "lo", _vec3(self.lo, "box min"))
        object.__setattr__(self, "hi", _vec3(self.hi, "box max"))
        if any(l >= h for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"box min {self.lo} must be below max {self.hi} on every axis")

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        inside = (p >= self.lo) & (p <= self.hi)
        return inside[..., 0] & inside[..., 1] & inside[..., 2]

    def contains_box(self, other: "Box") -> bool:
        return all(a <= b for a, b in zip(self.lo, other.lo)) and all(a >= b for a, b in zip(self.hi, other.hi))

    def clip(self, a: np.ndarray, d: np.ndarray, t0: np.ndarray, t1: np.ndarray):
        """Narrow the chord parameter interval ``[t0, t1]`` of ``a + t d`` to this box."""
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            ta = (lo - a) / d
            tb = (hi - a) / d
        moving = d != 0
        inside = (a >= lo) & (a <= hi)
        enter = np.where(moving, np.minimum(ta, tb), np.where(inside, -np.inf, np.inf))
        leave = np.where(moving, np.maximum(ta, tb), np.where(inside, np.inf, -np.inf))
        t0 = np.maximum(np.maximum(t0, enter[:, 0]), np.maximum(enter[:, 1], enter[:, 2]))
        t1 = np.minimum(np.minimum(t1, leave[:, 0]), np.minimum(leave[:, 1], leave[:, 2]))
        return t0, t1


# --------------------------------------------------------------------------
# primitives
#
# ``intersect(a, d, t0, t1)`` returns the chord parameter of the first entry
# into the primitive within ``[t0, t1]`` (inf when there is none) and the
# refined hit points. ``residual(points)`` evaluates the implicit surface.


@dataclass(frozen=True)
class GridPlanes:
    """Three families of axis-aligned slabs ``|p_axis - k * spacing| <= half_width`` inside ``bounds``.

    A hit is an entry through a slab face; starting inside a slab does not
    count as a hit with that slab.
    """

    spacing: float
    half_width: float
    bounds: Box

    def __post_init__(self):
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "half_width", float(self.half_width))
        if not (self.half_width > 0 and self.spacing > 2 * self.half_width):
            raise ValueError("grid needs half_width > 0 and spacing > 2 * half_width")

    def intersect(self, a, d, t0, t1):
        t0, t1 = self.bounds.clip(a, d, t0, t1)
        live = t0 <= t1
        sp, hw = self.spacing, self.half_width
        c0 = a + np.where(live, t0, 0.0)[:, None] * d
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            # first entry face strictly past a and not before the clipped start
            k_up = np.maximum(np.floor((a + hw) / sp) + 1.0, np.ceil((c0 + hw) / sp))
            k_dn = np.minimum(np.ceil((a - hw) / sp) - 1.0, np.floor((c0 - hw) / sp))
            face = np.where(d > 0, k_up * sp - hw, k_dn * sp + hw)
            s = np.maximum((face - a) / d, 0.0)
        s = np.where(live[:, None] & (d != 0) & (s <= t1[:, None]), s, np.inf)
        # ties go to the lower axis
        axis = np.where(s[:, 1] < s[:, 0], 1, 0)
        best = np.minimum(s[:, 0], s[:, 1])
        axis = np.where(s[:, 2] < best, 2, axis)
        best = np.minimum(best, s[:, 2])
        found = np.isfinite(best)
        points = a + np.where(found, best, 0.0)[:, None] * d
        points[found, axis[found]] = face[found, axis[found]]
        return best, points

    def residual(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        sp, hw = self.spacing, self.half_width
        dist = []
        for off in (-hw, hw):
            q = (p - off) / sp
            dist.append(np.abs(q - np.round(q)) * sp)
        return np.min(np.minimum(dist[0], dist[1]), axis=-1)


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _vec3(self.center, "sphere center"))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError("sphere radius must be > 0")

    @property
    def box(self) -> Box:
        c, r = np.asarray(self.center), self.radius
        return Box(c - r, c + r)

    def intersect(self, a, d, t0, t1):
        oc = a - np.asarray(self.center)
        qa = dot3(d, d)
        qb = dot3(oc, d)
        qc = dot3(oc, oc) - self.radius**2
        disc = qb * qb - qa * qc
        ok = (qc > 0) & (qb < 0) & (disc >= 0) & (qa > 0)
        with np.errstate(invalid="ignore", divide="ignore"):
            # entry root without cancellation: s1 = c / (-b + sqrt(disc))
            s = qc / (-qb + np.sqrt(np.where(ok, disc, 0.0)))
            q = oc + s[:, None] * d
            # one Newton step along the chord
            s = s - (dot3(q, q) - self.radius**2) / (2.0 * dot3(q, d))
        s = np.where(ok & (s >= t0) & (s <= t1), s, np.inf)
        points = a + np.where(np.isfinite(s), s, 0.0)[:, None] * d
        return s, points

    def residual(self, points) -> np.ndarray:
        q = np.asarray(points, dtype=float) - np.asarray(self.center)
        return dot3(q, q) - self.radius**2


@dataclass(frozen=True)
class HalfSpace:
    """Solid ``{p : n . p <= offset}`` with ``n`` normalized internally."""

    normal: tuple[float, float, float]
    offset: float

    def __post_init__(self):
        object.__setattr__(self, "normal", _vec3(self.normal, "half-space normal"))
        object.__setattr__(self, "offset", float(self.offset))
        if np.linalg.norm(self.normal) == 0:
            raise ValueError("half-space normal must be nonzero")

    def _unit(self):
        n = np.asarray(self.normal)
        scale = np.linalg.norm(n)
        return n / scale, self.offset / scale

    def intersect(self, a, d, t0, t1):
        n, off = self._unit()
        fa = a @ n - off
        nd = d @ n
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            s = -fa / nd
        s = np.where((fa > 0) & (nd < 0) & (s >= t0) & (s <= t1), s, np.inf)
        points = a + np.where(np.isfinite(s), s, 0.0)[:, None] * d
        return s, points

    def residual(self, points) -> np.ndarray:
        n, off = self._unit()
        return np.asarray(points, dtype=float) @ n - off


Primitive = Union[GridPlanes, Sphere, HalfSpace]


@dataclass(frozen=True)
class Scene:
    primitives: tuple[Primitive, ...]
    bounds: Box
    fog: float = DEFAULT_FOG

    def __post_init__(self):
        object.__setattr__(self, "primitives", tuple(self.primitives))
        object.__setattr__(self, "fog", float(self.fog))
        if not (math.isfinite(self.fog) and self.fog >= 0):
            raise ValueError("fog density must be >= 0")
        for i, prim in enumerate(self.primitives):
            inner = prim.bounds if isinstance(prim, GridPlanes) else prim.box if isinstance(prim, Sphere) else None
            if inner is not None and not self.bounds.contains_box(inner):
                raise ValueError(f"primitive {i} extends outside the scene bounds")

    def intersect_chords(self, a, b):
        """First primitive entry on each chord ``a[n] -> b[n]``, restricted to the scene bounds.

        Returns ``(s, primitive_id, points)``: chord parameter in ``[0, 1]``
        (inf on a miss), primitive index (-1 on a miss) and hit points.
        """
        a = np.asarray(a, dtype=float).reshape(-1, 3)
        b = np.asarray(b, dtype=float).reshape(-1, 3)
        d = b - a
        n = len(a)
        t0, t1 = self.bounds.clip(a, d, np.zeros(n), np.ones(n))
        best = np.full(n, np.inf)
        prim_id = np.full(n, -1)
        points = np.zeros((n, 3))
        if n == 0:
            return best, prim_id, points
        for k, prim in enumerate(self.primitives):
            s, pts = prim.intersect(a, d, t0, t1)
            better = s < best
            best = np.where(better, s, best)
            prim_id = np.where(better, k, prim_id)
            points = np.where(better[:, None], pts, points)
        return best, prim_id, points


@dataclass(frozen=True)
class Hit:
    point: np.ndarray
    t: float
    primitive: int


def intersect_segment(scene: Scene, a, b) -> Hit | None:
    """Nearest-to-``a`` primitive entry on the chord ``[a, b]``; ``t`` is the chord fraction."""
    s, prim, pts = scene.intersect_chords(np.asarray(a)[None], np.asarray(b)[None])
    if not np.isfinite(s[0]):
        return None
    return Hit(point=pts[0], t=float(s[0]), primitive=int(prim[0]))


# --------------------------------------------------------------------------
# shading


def shade_points(points, arc_length, fog: float) -> np.ndarray:
    """Fractional hit coordinates as RGB, dimmed by ``exp(-fog * arc_length)``, rounded half up."""
    points = np.asarray(points, dtype=float)
    frac = points - np.floor(points)
    atten = np.exp(-fog * np.asarray(arc_length, dtype=float))
    return np.floor(255.0 * frac * atten[..., None] + 0.5).astype(np.uint8)


def shade(hit: Hit | None, fog: float) -> tuple[int, int, int]:
    if fog < 0:
        raise ValueError("fog density must be >= 0")
    if hit is None:
        return (0, 0, 0)
    rgb = shade_points(np.asarray(hit.point)[None], np.array([hit.t]), fog)[0]
    return tuple(int(c) for c in rgb)


# --------------------------------------------------------------------------
# camera and image


@dataclass(frozen=True)
class Camera:
    position: np.ndarray
    look: np.ndarray
    up: np.ndarray
    fov: float
    frame: np.ndarray  # rows: forward, up, right -- orthonormal in g(position)

    def directions(self, width: int, height: int) -> np.ndarray:
        """Unit g-length chart velocities through each pixel center, shape ``(height, width, 3)``."""
        tan_half = math.tan(0.5 * self.fov)
        aspect = width / height
        u = (2.0 * (np.arange(width) + 0.5) / width - 1.0) * tan_half * aspect
        v = (1.0 - 2.0 * (np.arange(height) + 0.5) / height) * tan_half
        uu, vv = np.meshgrid(u, v)
        norm = np.sqrt(1.0 + uu * uu + vv * vv)
        coef = np.stack([1.0 / norm, vv / norm, uu / norm], axis=-1)
        return coef @ self.frame


def build_camera(metric: MetricField, position, look, up, fov: float) -> Camera:
    position = np.asarray(position, dtype=float)
    look = np.asarray(look, dtype=float)
    up = np.asarray(up, dtype=float)
    if not 0 < fov < math.pi:
        raise ValueError("field of view must lie in (0, pi)")
    g = metric_tensor(metric, position)
    frame = gram_schmidt_frame(g, [look, up, np.cross(look, up)])
    return Camera(position, look, up, float(fov), frame)


@dataclass
class Image:
    width: int
    height: int
    pixels: np.ndarray = field(repr=False)  # (height, width, 3) uint8

    def __post_init__(self):
        self.pixels = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError(f"pixel buffer shape {self.pixels.shape} does not match {self.width}x{self.height}")

    @property
    def buffer(self) -> bytes:
        return self.pixels.tobytes()

    def to_ppm(self) -> bytes:
        return b"P6\n%d %d\n255\n" % (self.width, self.height) + self.buffer

    def save(self, path, fmt: str = "ppm") -> None:
        if fmt == "ppm":
            with open(path, "wb") as fh:
                fh.write(self.to_ppm())
        elif fmt == "png":
            from PIL import Image as PILImage

            PILImage.fromarray(self.pixels, "RGB").save(path, format="PNG")
        else:
            raise ValueError(f"unknown image format {fmt!r}")


def read_ppm(path) -> Image:
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P6" or parts[3] != b"255":
        raise ValueError(f"{path}: not an 8-bit binary PPM")
    width, height = int(parts[1]), int(parts[2])
    pixels = np.frombuffer(parts[4][: 3 * width * height], dtype=np.uint8).reshape(height, width, 3)
    return Image(width, height, pixels)


# --------------------------------------------------------------------------
# render loop


@dataclass
class RenderResult:
    image: Image
    rays: int
    total_steps: int
    errors: int

    @property
    def mean_steps(self) -> float:
        return self.total_steps / self.rays if self.rays else 0.0


def _finite_rows(v: np.ndarray) -> np.ndarray:
    fin = np.isfinite(v)
    return fin[:, 0] & fin[:, 1] & fin[:, 2]


def march_rays(metric: MetricField, scene: Scene, origin, dirs, cfg: IntegratorConfig):
    """March a batch of rays; returns ``(colors uint8 (N, 3), steps (N,), failed (N,))``."""
    dirs = np.ascontiguousarray(dirs, dtype=float).reshape(-1, 3)
    n = len(dirs)
    colors = np.zeros((n, 3), dtype=np.uint8)
    steps = np.zeros(n, dtype=np.int64)
    failed = np.zeros(n, dtype=bool)
    idx = np.arange(n)
    x = np.tile(np.asarray(origin, dtype=float), (n, 1))
    y = dirs.copy()
    h = cfg.h
    for i in range(cfg.max_steps):
        if idx.size == 0:
            break
        xn, yn, ok = flow_step(metric, x, y, h, cfg.scheme)
        ok &= _finite_rows(xn) & _finite_rows(yn)
        s, _, pts = scene.intersect_chords(x, np.where(ok[:, None], xn, x))
        hit = ok & np.isfinite(s)
        steps[idx] = i + 1
        if np.any(hit):
            colors[idx[hit]] = shade_points(pts[hit], (i + s[hit]) * h, scene.fog)
        bad = ~ok
        if np.any(bad):
            colors[idx[bad]] = MAGENTA
            failed[idx[bad]] = True
        keep = ok & ~hit & scene.bounds.contains(xn)
        idx = idx[keep]
        x = np.ascontiguousarray(xn[keep])
        y = np.ascontiguousarray(yn[keep])
    return colors, steps, failed


def render(
    metric: MetricField,
    scene: Scene,
    cam: Camera,
    cfg: IntegratorConfig,
    width: int,
    height: int,
    *,
    workers: int = 1,
    tile_rows: int = DEFAULT_TILE_ROWS,
) -> RenderResult:
    """Render ``width x height`` pixels; per-pixel metric failures are painted magenta and counted."""
    if width < 1 or height < 1:
        raise ValueError("image size must be positive")
    dirs = cam.directions(width, height)
    tiles = [(r, min(r + tile_rows, height)) for r in range(0, height, tile_rows)]

    def run(tile):
        r0, r1 = tile
        return march_rays(metric, scene, cam.position, dirs[r0:r1], cfg)

    if workers <= 1:
        results = [run(t) for t in tiles]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, tiles))

    pixels = np.concatenate([c for c, _, _ in results]).reshape(height, width, 3)
    total_steps = int(sum(int(s.sum()) for _, s, _ in results))
    errors = int(sum(int(f.sum()) for _, _, f in results))
    return RenderResult(Image(width, height, pixels), width * height, total_steps, errors)
