"""Run configuration: a TOML document with ``metric``, ``scene``, ``camera``, ``integrator`` and ``output`` tables.

Expression trees are nested tables tagged with ``kind``::

    [metric]
    kind = "graph"
    field = { kind = "sum", terms = [
        { kind = "gaussian", a = 1.0, center = [0, 0, 0], sigma = [1, 1, 1] },
    ] }

Every key is validated before anything is computed and unknown keys are
rejected. :func:`serialize_config` writes the fully defaulted document back,
and ``parse_config(serialize_config(cfg)) == cfg`` holds for every valid config.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import tomli
import tomli_w

from . import fields as F
from .geodesics import IntegratorConfig, Scheme
from .metrics import Diffeo, Euclidean, Graph, MetricField
from .render import DEFAULT_FOG, Box, GridPlanes, HalfSpace, Scene, Sphere

_MISSING = object()


class ConfigError(Exception):
    pass


class ParseError(ConfigError):
    """The document is not valid TOML; the message carries line and column."""


class ValidationError(ConfigError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


def default_scene() -> Scene:
    return Scene(
        primitives=(GridPlanes(0.5, 0.03, Box((-1.0,) * 3, (1.0,) * 3)),),
        bounds=Box((-3.0,) * 3, (3.0,) * 3),
        fog=DEFAULT_FOG,
    )


@dataclass(frozen=True)
class CameraSpec:
    position: tuple[float, float, float] = (0.117, 0.153, 2.5)
    look: tuple[float, float, float] = (0.0, 0.0, -1.0)
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)
    fov_deg: float = 60.0

    @property
    def fov(self) -> float:
        return math.radians(self.fov_deg)


@dataclass(frozen=True)
class OutputSpec:
    path: str = "render.ppm"
    width: int = 512
    height: int = 512
    format: str = "ppm"


@dataclass(frozen=True)
class RunConfig:
    metric: MetricField = field(default_factory=Euclidean)
    scene: Scene = field(default_factory=default_scene)
    camera: CameraSpec = field(default_factory=CameraSpec)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    output: OutputSpec = field(default_factory=OutputSpec)


# --------------------------------------------------------------------------
# validation helpers


class _Table:
    def __init__(self, data, path: str):
        if not isinstance(data, dict):
            raise ValidationError(path, "expected a table")
        self.data = data
        self.path = path
        self.used: set[str] = set()

    def sub(self, key) -> str:
        if isinstance(key, int):
            return f"{self.path}[{key}]"
        return f"{self.path}.{key}" if self.path else key

    def raw(self, key: str, default=_MISSING):
        self.used.add(key)
        if key not in self.data:
            if default is _MISSING:
                raise ValidationError(self.sub(key), "required key is missing")
            return default
        return self.data[key]

    def number(self, key: str, default=_MISSING, *, positive=False, nonnegative=False) -> float:
        value = self.raw(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(self.sub(key), f"expected a number, got {value!r}")
        value = float(value)
        if not math.isfinite(value):
            raise ValidationError(self.sub(key), "must be finite")
        if positive and not value > 0:
            raise ValidationError(self.sub(key), f"must be > 0, got {value}")
        if nonnegative and value < 0:
            raise ValidationError(self.sub(key), f"must be >= 0, got {value}")
        return value

    def integer(self, key: str, default=_MISSING, *, minimum=None) -> int:
        value = self.raw(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(self.sub(key), f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            raise ValidationError(self.sub(key), f"must be >= {minimum}, got {value}")
        return value

    def string(self, key: str, default=_MISSING, choices=None) -> str:
        value = self.raw(key, default)
        if not isinstance(value, str):
            raise ValidationError(self.sub(key), f"expected a string, got {value!r}")
        if choices is not None and value not in choices:
            raise ValidationError(self.sub(key), f"must be one of {sorted(choices)}, got {value!r}")
        return value

    def vec3(self, key: str, default=_MISSING, *, positive=False) -> tuple[float, float, float]:
        value = self.raw(key, default)
        path = self.sub(key)
        if not isinstance(value, (list, tuple)) or len(value) != 3:
            raise ValidationError(path, f"expected an array of 3 numbers, got {value!r}")
        out = []
        for x in value:
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                raise ValidationError(path, f"expected finite numbers, got {value!r}")
            out.append(float(x))
        if positive and min(out) <= 0:
            raise ValidationError(path, f"all components must be > 0, got {out}")
        return tuple(out)

    def table(self, key: str, default=_MISSING) -> "_Table":
        value = self.raw(key, default)
        return _Table(value, self.sub(key))

    def tables(self, key: str, default=_MISSING) -> list["_Table"]:
        value = self.raw(key, default)
        path = self.sub(key)
        if not isinstance(value, list):
            raise ValidationError(path, "expected an array of tables")
        return [_Table(item, f"{path}[{i}]") for i, item in enumerate(value)]

    def done(self) -> None:
        unknown = sorted(set(self.data) - self.used)
        if unknown:
            raise ValidationError(self.sub(unknown[0]), "unknown key")


def _built(path: str, factory, *args):
    try:
        return factory(*args)
    except ValueError as exc:
        raise ValidationError(path, str(exc)) from None


# --------------------------------------------------------------------------
# expression trees


def _gaussian(t: _Table) -> F.Gaussian:
    return F.Gaussian(
        amplitude=t.number("a"),
        center=t.vec3("center", (0.0, 0.0, 0.0)),
        sigma=t.vec3("sigma", positive=True),
    )


def _field(t: _Table) -> F.ScalarFieldExpr:
    kind = t.string("kind", choices={"gaussian", "polynomial", "sum"})
    if kind == "gaussian":
        out = _gaussian(t)
    elif kind == "polynomial":
        terms = []
        raw = t.raw("terms")
        path = t.sub("terms")
        if not isinstance(raw, list):
            raise ValidationError(path, "expected an array of [coef, i, j, k] monomials")
        for i, mono in enumerate(raw):
            ok = (
                isinstance(mono, list)
                and len(mono) == 4
                and isinstance(mono[0], (int, float))
                and not isinstance(mono[0], bool)
                and all(isinstance(e, int) and not isinstance(e, bool) for e in mono[1:])
            )
            if not ok:
                raise ValidationError(f"{path}[{i}]", f"expected [coef, i, j, k] with integer exponents, got {mono!r}")
            terms.append((float(mono[0]), tuple(mono[1:])))
        out = _built(path, F.Polynomial, tuple(terms))
    else:
        out = F.Sum(tuple(_field(sub) for sub in t.tables("terms")))
    t.done()
    return out


def _diffeo(t: _Table) -> F.DiffeoExpr:
    kind = t.string("kind", choices={"identity", "affine", "twist", "bump", "compose"})
    if kind == "identity":
        out = F.Identity()
    elif kind == "twist":
        out = F.Twist()
    elif kind == "affine":
        rows = t.raw("matrix")
        path = t.sub("matrix")
        if not isinstance(rows, list) or len(rows) != 3:
            raise ValidationError(path, "expected a 3x3 array")
        matrix = tuple(_Table({"row": row}, path).vec3("row") for row in rows)
        out = F.Affine(matrix, t.vec3("offset", (0.0, 0.0, 0.0)))
    elif kind == "bump":
        out = F.LocalBump(_gaussian(t), t.vec3("direction"))
    else:
        maps = t.tables("maps")
        if not maps:
            raise ValidationError(t.sub("maps"), "compose needs at least one map")
        out = F.Compose(tuple(_diffeo(sub) for sub in maps))
    t.done()
    return out


def _metric(t: _Table) -> MetricField:
    kind = t.string("kind", "euclidean", choices={"euclidean", "graph", "diffeo"})
    if kind == "euclidean":
        out = Euclidean()
    elif kind == "graph":
        out = Graph(_field(t.table("field")))
    else:
        out = Diffeo(_diffeo(t.table("map")))
    t.done()
    return out


def _box(t: _Table) -> Box:
    lo, hi = t.vec3("min"), t.vec3("max")
    t.done()
    return _built(t.path, Box, lo, hi)


def _scene(t: _Table) -> Scene:
    defaults = default_scene()
    if "bounds" in t.data:
        bounds = _box(t.table("bounds"))
    else:
        bounds = defaults.bounds
    fog = t.number("fog", DEFAULT_FOG, nonnegative=True)
    if "primitives" in t.data:
        prims = []
        for sub in t.tables("primitives"):
            kind = sub.string("kind", choices={"grid", "sphere", "halfspace"})
            if kind == "grid":
                grid_bounds = _box(sub.table("bounds")) if "bounds" in sub.data else bounds
                prim = _built(sub.path, GridPlanes, sub.number("spacing", positive=True),
                              sub.number("half_width", positive=True), grid_bounds)
            elif kind == "sphere":
                prim = _built(sub.path, Sphere, sub.vec3("center"), sub.number("radius", positive=True))
            else:
                prim = _built(sub.path, HalfSpace, sub.vec3("normal"), sub.number("offset"))
            sub.done()
            prims.append(prim)
    else:
        prims = list(defaults.primitives)
    t.done()
    return _built(t.path, Scene, tuple(prims), bounds, fog)


def _camera(t: _Table) -> CameraSpec:
    d = CameraSpec()
    cam = CameraSpec(
        position=t.vec3("position", d.position),
        look=t.vec3("look", d.look),
        up=t.vec3("up", d.up),
        fov_deg=t.number("fov_deg", d.fov_deg, positive=True),
    )
    if not cam.fov_deg < 180:
        raise ValidationError(t.sub("fov_deg"), "must be < 180")
    cross = np.cross(cam.look, cam.up)
    if not np.dot(cross, cross) > 1e-12 * np.dot(cam.look, cam.look) * np.dot(cam.up, cam.up):
        raise ValidationError(t.sub("up"), "must not be parallel to camera.look")
    t.done()
    return cam


def _integrator(t: _Table) -> IntegratorConfig:
    d = IntegratorConfig()
    cfg = IntegratorConfig(
        h=t.number("h", d.h, positive=True),
        max_steps=t.integer("max_steps", d.max_steps, minimum=1),
        scheme=Scheme(t.string("scheme", d.scheme.value, choices={s.value for s in Scheme})),
    )
    t.done()
    return cfg


def _output(t: _Table) -> OutputSpec:
    d = OutputSpec()
    out = OutputSpec(
        path=t.string("path", d.path),
        width=t.integer("width", d.width, minimum=1),
        height=t.integer("height", d.height, minimum=1),
        format=t.string("format", d.format, choices={"ppm", "png"}),
    )
    t.done()
    return out


def config_from_dict(doc: dict) -> RunConfig:
    root = _Table(doc, "")
    cfg = RunConfig(
        metric=_metric(root.table("metric", {})),
        scene=_scene(root.table("scene", {})),
        camera=_camera(root.table("camera", {})),
        integrator=_integrator(root.table("integrator", {})),
        output=_output(root.table("output", {})),
    )
    root.done()
    if not cfg.scene.bounds.contains(cfg.camera.position):
        raise ValidationError("camera.position", "camera must lie inside scene.bounds")
    return cfg


def parse_config(text: str) -> RunConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"invalid TOML: {exc}") from None
    return config_from_dict(doc)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_config(text)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from None


# --------------------------------------------------------------------------
# serialization


def _gaussian_dict(g: F.Gaussian) -> dict:
    return {"a": g.amplitude, "center": list(g.center), "sigma": list(g.sigma)}


def field_to_dict(f: F.ScalarFieldExpr) -> dict:
    if isinstance(f, F.Gaussian):
        return {"kind": "gaussian", **_gaussian_dict(f)}
    if isinstance(f, F.Polynomial):
        return {"kind": "polynomial", "terms": [[c, *powers] for c, powers in f.terms]}
    if isinstance(f, F.Sum):
        return {"kind": "sum", "terms": [field_to_dict(t) for t in f.terms]}
    raise TypeError(f"cannot serialize field {f!r}")


def diffeo_to_dict(phi: F.DiffeoExpr) -> dict:
    if isinstance(phi, F.Identity):
        return {"kind": "identity"}
    if isinstance(phi, F.Twist):
        return {"kind": "twist"}
    if isinstance(phi, F.Affine):
        return {"kind": "affine", "matrix": [list(r) for r in phi.matrix], "offset": list(phi.offset)}
    if isinstance(phi, F.LocalBump):
        return {"kind": "bump", **_gaussian_dict(phi.bump), "direction": list(phi.direction)}
    if isinstance(phi, F.Compose):
        return {"kind": "compose", "maps": [diffeo_to_dict(m) for m in phi.maps]}
    raise TypeError(f"cannot serialize map {phi!r}")


def metric_to_dict(m: MetricField) -> dict:
    if isinstance(m, Euclidean):
        return {"kind": "euclidean"}
    if isinstance(m, Graph):
        return {"kind": "graph", "field": field_to_dict(m.field)}
    if isinstance(m, Diffeo):
        return {"kind": "diffeo", "map": diffeo_to_dict(m.map)}
    raise TypeError(f"cannot serialize metric {m!r}")


def _box_dict(b: Box) -> dict:
    return {"min": list(b.lo), "max": list(b.hi)}


def _primitive_dict(p) -> dict:
    if isinstance(p, GridPlanes):
        return {"kind": "grid", "spacing": p.spacing, "half_width": p.half_width, "bounds": _box_dict(p.bounds)}
    if isinstance(p, Sphere):
        return {"kind": "sphere", "center": list(p.center), "radius": p.radius}
    if isinstance(p, HalfSpace):
        return {"kind": "halfspace", "normal": list(p.normal), "offset": p.offset}
    raise TypeError(f"cannot serialize primitive {p!r}")


def config_to_dict(cfg: RunConfig) -> dict:
    return {
        "metric": metric_to_dict(cfg.metric),
        "scene": {
            "fog": cfg.scene.fog,
            "bounds": _box_dict(cfg.scene.bounds),
            "primitives": [_primitive_dict(p) for p in cfg.scene.primitives],
        },
        "camera": {
            "position": list(cfg.camera.position),
            "look": list(cfg.camera.look),
            "up": list(cfg.camera.up),
            "fov_deg": cfg.camera.fov_deg,
        },
        "integrator": {
            "h": cfg.integrator.h,
            "max_steps": cfg.integrator.max_steps,
            "scheme": cfg.integrator.scheme.value,
        },
        "output": {
            "path": cfg.output.path,
            "width": cfg.output.width,
            "height": cfg.output.height,
            "format": cfg.output.format,
        },
    }


def serialize_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))
