"""Geodesic flow integration: explicit Euler marching, an RK4 reference, the exponential map.

The flow is the first-order system ``x' = y``, ``y'_k = -sum_ij gamma[k, i, j] y_i y_j``
in chart coordinates. Both steppers are vectorized over leading batch axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .linalg import SingularMatrix, quad_form
from .metrics import Euclidean, MetricField, christoffel, christoffel_masked, metric_tensor


class Scheme(str, Enum):
    EULER = "euler"
    RK4 = "rk4"


class GeodesicError(ArithmeticError):
    def __init__(self, step: int, message: str):
        super().__init__(f"metric evaluation failed at step {step}: {message}")
        self.step = step


@dataclass(frozen=True)
class IntegratorConfig:
    h: float = 1e-2
    max_steps: int = 2000
    scheme: Scheme = Scheme.EULER

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (math.isfinite(self.h) and self.h > 0):
            raise ValueError(f"h must be a positive finite number, got {self.h}")
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ValueError(f"max_steps must be a positive integer, got {self.max_steps}")
        object.__setattr__(self, "max_steps", int(self.max_steps))


@dataclass(frozen=True)
class GeodesicState:
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))


def _contract(gamma: np.ndarray, y: np.ndarray) -> np.ndarray:
    return -np.einsum("...kij,...ij->...k", gamma, y[..., :, None] * y[..., None, :])


def geodesic_accel(metric: MetricField, state: GeodesicState) -> np.ndarray:
    return _contract(christoffel(metric, state.position), state.velocity)


def accel_masked(metric: MetricField, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(metric, Euclidean):
        return np.zeros(np.shape(y)), np.ones(np.shape(y)[:-1], dtype=bool)
    gamma, ok = christoffel_masked(metric, x)
    a = _contract(gamma, y)
    fin = np.isfinite(a)
    return a, ok & fin[..., 0] & fin[..., 1] & fin[..., 2]


def flow_step(metric: MetricField, x, y, h: float, scheme: Scheme = Scheme.EULER):
    """Advance ``(x, y)`` by one step; returns ``(x_new, y_new, ok)`` and never raises.

    ``ok`` flags the entries whose metric could be evaluated at every stage.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if scheme is Scheme.EULER:
        a, ok = accel_masked(metric, x, y)
        return x + h * y, y + h * a, ok
    if scheme is Scheme.RK4:
        k1a, ok1 = accel_masked(metric, x, y)
        k1x = y
        k2x = y + 0.5 * h * k1a
        k2a, ok2 = accel_masked(metric, x + 0.5 * h * k1x, k2x)
        k3x = y + 0.5 * h * k2a
        k3a, ok3 = accel_masked(metric, x + 0.5 * h * k2x, k3x)
        k4x = y + h * k3a
        k4a, ok4 = accel_masked(metric, x + h * k3x, k4x)
        x_new = x + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        y_new = y + (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        return x_new, y_new, ok1 & ok2 & ok3 & ok4
    raise ValueError(f"unknown scheme {scheme!r}")


def _step(metric: MetricField, state: GeodesicState, h: float, scheme: Scheme) -> GeodesicState:
    if not h > 0:
        raise ValueError(f"step must be positive, got {h}")
    x, y, ok = flow_step(metric, state.position, state.velocity, h, scheme)
    if not np.all(ok):
        raise SingularMatrix("metric not evaluable at the current state")
    return GeodesicState(x, y)


def euler_step(metric: MetricField, state: GeodesicState, h: float) -> GeodesicState:
    """Explicit Euler: position and velocity both advance using the incoming state."""
    return _step(metric, state, h, Scheme.EULER)


def rk4_step(metric: MetricField, state: GeodesicState, h: float) -> GeodesicState:
    return _step(metric, state, h, Scheme.RK4)


@dataclass(frozen=True)
class Polyline:
    """Marched geodesic. Row ``i`` holds the state at parameter ``t[i] = i * h``."""

    t: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    failed_at: int | None = None
    exited: bool = False

    def __len__(self) -> int:
        return len(self.t)

    def state(self, i: int) -> GeodesicState:
        return GeodesicState(self.positions[i], self.velocities[i])


def trace_geodesic(metric: MetricField, start: GeodesicState, cfg: IntegratorConfig, bounds=None) -> Polyline:
    """March a single geodesic for ``cfg.max_steps`` steps.

    Stops early when the metric cannot be evaluated (``failed_at`` holds the
    index of the step that failed) or, if ``bounds`` is given, as soon as a
    position falls outside ``bounds.contains``; the outside point is kept so
    the final chord crosses the boundary.
    """
    x = np.asarray(start.position, dtype=float).reshape(3)
    y = np.asarray(start.velocity, dtype=float).reshape(3)
    positions = np.empty((cfg.max_steps + 1, 3))
    velocities = np.empty((cfg.max_steps + 1, 3))
    positions[0], velocities[0] = x, y
    n = 0
    failed_at = None
    exited = False
    for i in range(cfg.max_steps):
        x_new, y_new, ok = flow_step(metric, x, y, cfg.h, cfg.scheme)
        if not ok:
            failed_at = i
            break
        x, y = x_new, y_new
        n = i + 1
        positions[n], velocities[n] = x, y
        if bounds is not None and not bounds.contains(x):
            exited = True
            break
    n_states = n + 1
    return Polyline(
        t=np.arange(n_states) * cfg.h,
        positions=positions[:n_states].copy(),
        velocities=velocities[:n_states].copy(),
        failed_at=failed_at,
        exited=exited,
    )


def integrate(metric: MetricField, x0, y0, h: float, n_steps: int, scheme: Scheme = Scheme.EULER):
    """Batched fixed-step integration; returns positions and velocities of shape ``(n_steps + 1, ..., 3)``.

    Raises :class:`GeodesicError` naming the first step where any trajectory failed.
    """
    scheme = Scheme(scheme)
    x = np.asarray(x0, dtype=float)
    y = np.broadcast_to(np.asarray(y0, dtype=float), x.shape).copy()
    xs = np.empty((n_steps + 1,) + x.shape)
    ys = np.empty_like(xs)
    xs[0], ys[0] = x, y
    for i in range(n_steps):
        x, y, ok = flow_step(metric, x, y, h, scheme)
        if not np.all(ok):
            raise GeodesicError(i, "singular metric")
        xs[i + 1], ys[i + 1] = x, y
    return xs, ys


def g_norm(metric: MetricField, p, v) -> np.ndarray:
    g = metric_tensor(metric, p)
    return np.sqrt(quad_form(g, np.asarray(v, dtype=float)))


def exponential_map(metric: MetricField, p, v, cfg: IntegratorConfig) -> np.ndarray:
    """Endpoint of the unit-speed geodesic from ``p`` towards ``v`` after parameter ``|v|_g``.

    The final step is shortened so the endpoint lands exactly on ``|v|_g``.
    ``cfg.max_steps`` is not applied; the step count follows from ``|v|_g / h``.
    """
    p = np.asarray(p, dtype=float).reshape(3)
    v = np.asarray(v, dtype=float).reshape(3)
    length = float(g_norm(metric, p, v))
    if length == 0.0:
        return p.copy()
    x, y = p, v / length
    n_full = int(math.floor(length / cfg.h))
    steps = [cfg.h] * n_full
    rest = length - n_full * cfg.h
    if rest > 1e-15 * max(1.0, length):
        steps.append(rest)
    for i, h in enumerate(steps):
        x, y, ok = flow_step(metric, x, y, h, cfg.scheme)
        if not ok:
            raise GeodesicError(i, "singular metric")
    return x
