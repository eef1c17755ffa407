"""Seeded numerical self-checks.

Each ``measure_*`` function returns raw numbers; the ``suite_*`` functions
compare them with fixed thresholds. ``riemray verify`` runs every suite and
the acceptance tests reuse the measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import fields as F
from .geodesics import Scheme, integrate
from .linalg import det3, dot3, quad_form
from .metrics import Diffeo, Euclidean, Graph, MetricField, christoffel, christoffel_fd, metric_tensor

ORACLE_TOL = 1e-5
ASYMMETRY_TOL = 1e-6
DET_TOL = 1e-10
GRAD_TOL = 1e-5
HESS_TOL = 1e-4
FD_STEP = 1e-4
RATIO_RANGE = (0.4, 0.6)
ORDER_RANGE = (1.7, 2.3)
RK4_PULLBACK_TOL = 1e-8
RK4_ENERGY_TOL = 1e-8
STEP_SIZES = (1e-2, 5e-3, 2.5e-3)


# --------------------------------------------------------------------------
# standard test families

QUADRIC = F.Polynomial(((1.0, (2, 0, 0)), (1.0, (0, 2, 0)), (-1.0, (0, 0, 2))))
GAUSS_A = F.Gaussian(1.0, (0.3, -0.2, 0.1), (0.8, 1.0, 0.6))
GAUSS_B = F.Gaussian(-0.7, (-0.5, 0.4, -0.3), (0.6, 0.7, 0.9))
BUMP_A = F.LocalBump(F.Gaussian(0.5, (0.2, 0.1, -0.1), (0.7, 0.8, 0.6)), (0.6, 0.8, 0.0))
BUMP_B = F.LocalBump(F.Gaussian(-0.4, (-0.3, 0.2, 0.4), (0.9, 0.6, 0.8)), (0.0, 0.6, -0.8))
BUMP_C = F.LocalBump(F.Gaussian(0.3, (0.1, -0.4, 0.2), (0.8, 0.9, 0.7)), (0.0, 0.0, 1.0))


def graph_families() -> dict[str, Graph]:
    return {
        "graph(quadric)": Graph(QUADRIC),
        "graph(gaussian)": Graph(GAUSS_A),
        "graph(sum of 2 gaussians)": Graph(F.Sum((GAUSS_A, GAUSS_B))),
    }


def diffeo_families() -> dict[str, Diffeo]:
    return {
        "diffeo(twist)": Diffeo(F.Twist()),
        "diffeo(bump)": Diffeo(BUMP_A),
        "diffeo(compose 2 bumps)": Diffeo(F.Compose((BUMP_A, BUMP_B))),
    }


def metric_families() -> dict[str, MetricField]:
    return {**graph_families(), **diffeo_families()}


def field_families() -> dict[str, F.ScalarFieldExpr]:
    return {
        "gaussian": GAUSS_A,
        "polynomial": F.Polynomial(((0.5, (1, 1, 1)), (-0.2, (0, 3, 1)), (0.3, (2, 0, 0)), (1.0, (0, 0, 1)))),
        "sum": F.Sum((GAUSS_A, GAUSS_B, QUADRIC)),
    }


def diffeo_map_families() -> dict[str, F.DiffeoExpr]:
    return {
        "identity": F.Identity(),
        "affine": F.Affine(((1.0, 0.2, 0.0), (0.1, 0.9, 0.3), (0.0, -0.2, 1.1)), (0.5, -0.1, 0.2)),
        "twist": F.Twist(),
        "bump": BUMP_A,
        "compose(bump, bump)": F.Compose((BUMP_A, BUMP_B)),
        "compose(bump, bump, bump)": F.Compose((BUMP_A, BUMP_B, BUMP_C)),
        "compose(bump, twist, bump)": F.Compose((BUMP_A, F.Twist(), BUMP_C)),
    }


def sample_points(seed: int, n: int = 100, radius: float = 2.0) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-radius, radius, size=(n, 3))


def sample_starts(metric: MetricField, seed: int, n: int = 8, radius: float = 1.0):
    """Random starting points with directions of unit g-length."""
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-radius, radius, size=(n, 3))
    d = rng.normal(size=(n, 3))
    g = metric_tensor(metric, x0)
    y0 = d / np.sqrt(quad_form(g, d))[:, None]
    return x0, y0


# --------------------------------------------------------------------------
# measurements


def measure_christoffel_oracle(metric: MetricField, points) -> tuple[float, float]:
    """Max componentwise ``|analytic - finite difference|`` and the oracle's raw asymmetry."""
    fd, asym = christoffel_fd(metric, points, FD_STEP, return_asymmetry=True)
    return float(np.max(np.abs(christoffel(metric, points) - fd))), asym


def measure_graph_determinant(field: F.ScalarFieldExpr, points) -> float:
    grad = F.eval_scalar(field, points).gradient
    det = det3(metric_tensor(Graph(field), points))
    return float(np.max(np.abs(det - (1.0 + dot3(grad, grad)))))


def measure_diffeo_determinant(phi: F.DiffeoExpr, points) -> float:
    """Max relative ``|det g - (det J)^2| / (det J)^2``."""
    dj = det3(F.eval_diffeo(phi, points).jacobian)
    det = det3(metric_tensor(Diffeo(phi), points))
    return float(np.max(np.abs(det - dj * dj) / (dj * dj)))


def _fd_first(fn: Callable, p: np.ndarray, h: float) -> np.ndarray:
    """``out[..., *shape, k] = d fn / d p_k`` by central differences."""
    cols = []
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        cols.append((fn(p + e) - fn(p - e)) / (2 * h))
    return np.stack(cols, axis=-1)


def _fd_second(fn: Callable, p: np.ndarray, h: float) -> np.ndarray:
    """``out[..., *shape, i, j]`` from second central differences of ``fn`` alone."""
    rows = []
    for i in range(3):
        ei = np.zeros(3)
        ei[i] = h
        row = []
        for j in range(3):
            ej = np.zeros(3)
            ej[j] = h
            row.append(
                (fn(p + ei + ej) - fn(p + ei - ej) - fn(p - ei + ej) + fn(p - ei - ej)) / (4 * h * h)
            )
        rows.append(np.stack(row, axis=-1))
    return np.stack(rows, axis=-2)


def measure_field_derivatives(field: F.ScalarFieldExpr, points) -> tuple[float, float]:
    value = lambda q: F.eval_scalar(field, q).value
    s = F.eval_scalar(field, points)
    grad_err = np.max(np.abs(s.gradient - _fd_first(value, points, FD_STEP)))
    hess_err = np.max(np.abs(s.hessian - _fd_second(value, points, FD_STEP)))
    return float(grad_err), float(hess_err)


def measure_diffeo_derivatives(phi: F.DiffeoExpr, points) -> tuple[float, float]:
    image = lambda q: F.eval_diffeo(phi, q).image
    s = F.eval_diffeo(phi, points)
    # image is (..., 3) so the FD stacks come out as [.., s, k] and [.., s, i, j]
    jac_err = np.max(np.abs(s.jacobian - _fd_first(image, points, FD_STEP)))
    hess_err = np.max(np.abs(s.second_deriv - _fd_second(image, points, FD_STEP)))
    return float(jac_err), float(hess_err)


def measure_pullback_deviation(metric: Diffeo, x0, y0, h: float, scheme: Scheme, length: float = 1.0) -> float:
    """Max distance between the traced images ``phi(x_i)`` and the straight ray ``phi(x0) + t J(x0) y0``."""
    n = int(round(length / h))
    xs, _ = integrate(metric, x0, y0, h, n, scheme)
    s0 = F.eval_diffeo(metric.map, x0)
    d = np.einsum("...ij,...j->...i", s0.jacobian, y0)
    t = (np.arange(n + 1) * h).reshape((n + 1,) + (1,) * np.ndim(x0))
    target = s0.image + t * d
    images = F.eval_diffeo(metric.map, xs).image
    return float(np.max(np.linalg.norm(images - target, axis=-1)))


def measure_energy_drift(metric: MetricField, x0, y0, h: float, scheme: Scheme, length: float = 1.0) -> float:
    """Max relative drift of ``g(y, y)`` along the trajectory."""
    n = int(round(length / h))
    xs, ys = integrate(metric, x0, y0, h, n, scheme)
    energy = quad_form(metric_tensor(metric, xs), ys)
    return float(np.max(np.abs(energy - energy[0]) / energy[0]))


def measure_euler_errors(metric: MetricField, x0, y0, steps=STEP_SIZES, length: float = 1.0) -> list[float]:
    """Euler endpoint errors against one RK4 reference at ``steps[0] / 64``."""
    h_ref = steps[0] / 64
    ref, _ = integrate(metric, x0, y0, h_ref, int(round(length / h_ref)), Scheme.RK4)
    errs = []
    for h in steps:
        xs, _ = integrate(metric, x0, y0, h, int(round(length / h)), Scheme.EULER)
        errs.append(float(np.max(np.linalg.norm(xs[-1] - ref[-1], axis=-1))))
    return errs


def ratios(errors) -> list[float]:
    return [b / a if a > 0 else math.nan for a, b in zip(errors, errors[1:])]


# --------------------------------------------------------------------------
# suites


@dataclass(frozen=True)
class CheckResult:
    suite: str
    case: str
    passed: bool
    detail: str


def _within(values, lo: float, hi: float) -> bool:
    return all(lo <= v <= hi for v in values)


def _fmt(values) -> str:
    return "[" + ", ".join(f"{v:.3f}" for v in values) + "]"


def suite_christoffel_oracle(seed: int) -> list[CheckResult]:
    pts = sample_points(seed)
    out = []
    for name, metric in metric_families().items():
        err, asym = measure_christoffel_oracle(metric, pts)
        ok = err < ORACLE_TOL and asym < ASYMMETRY_TOL
        out.append(CheckResult("christoffel-oracle", name, ok, f"max err {err:.2e}, asym {asym:.2e}"))
    return out


def suite_determinants(seed: int) -> list[CheckResult]:
    pts = sample_points(seed)
    out = []
    for name, metric in graph_families().items():
        err = measure_graph_determinant(metric.field, pts)
        out.append(CheckResult("graph-determinant", name, err < DET_TOL, f"max err {err:.2e}"))
    for name, metric in diffeo_families().items():
        err = measure_diffeo_determinant(metric.map, pts)
        out.append(CheckResult("diffeo-determinant", name, err < DET_TOL, f"max rel err {err:.2e}"))
    return out


def suite_derivatives(seed: int) -> list[CheckResult]:
    pts = sample_points(seed)
    out = []
    for name, f in field_families().items():
        g, hs = measure_field_derivatives(f, pts)
        out.append(CheckResult("derivatives", f"field {name}", g < GRAD_TOL and hs < HESS_TOL,
                               f"grad {g:.2e}, hess {hs:.2e}"))
    for name, phi in diffeo_map_families().items():
        g, hs = measure_diffeo_derivatives(phi, pts)
        out.append(CheckResult("derivatives", f"map {name}", g < GRAD_TOL and hs < HESS_TOL,
                               f"jac {g:.2e}, hess {hs:.2e}"))
    return out


def suite_pullback(seed: int) -> list[CheckResult]:
    out = []
    for name, metric in diffeo_families().items():
        x0, y0 = sample_starts(metric, seed)
        errs = [measure_pullback_deviation(metric, x0, y0, h, Scheme.EULER) for h in STEP_SIZES]
        rk4 = measure_pullback_deviation(metric, x0, y0, STEP_SIZES[0], Scheme.RK4)
        rs = ratios(errs)
        ok = _within(rs, *RATIO_RANGE) and rk4 < RK4_PULLBACK_TOL
        out.append(CheckResult("pullback-straightness", name, ok, f"euler ratios {_fmt(rs)}, rk4 {rk4:.2e}"))
    return out


def suite_energy(seed: int) -> list[CheckResult]:
    families = {"euclidean": Euclidean(), "graph(quadric)": Graph(QUADRIC), "diffeo(twist)": Diffeo(F.Twist())}
    out = []
    for name, metric in families.items():
        x0, y0 = sample_starts(metric, seed)
        rk4 = measure_energy_drift(metric, x0, y0, 1e-3, Scheme.RK4)
        ok = rk4 < RK4_ENERGY_TOL
        detail = f"rk4 drift {rk4:.2e}"
        if not isinstance(metric, Euclidean):
            rs = ratios([measure_energy_drift(metric, x0, y0, h, Scheme.EULER) for h in STEP_SIZES])
            ok = ok and _within(rs, *RATIO_RANGE)
            detail += f", euler ratios {_fmt(rs)}"
        out.append(CheckResult("energy", name, ok, detail))
    return out


def suite_euler_order(seed: int) -> list[CheckResult]:
    families = {"graph(quadric)": Graph(QUADRIC), "diffeo(twist)": Diffeo(F.Twist())}
    out = []
    for name, metric in families.items():
        x0, y0 = sample_starts(metric, seed)
        # error ratio err(h) / err(h/2), expected near 2 for a first-order method
        rs = [1.0 / r for r in ratios(measure_euler_errors(metric, x0, y0))]
        out.append(CheckResult("euler-order", name, _within(rs, *ORDER_RANGE), f"halving ratios {_fmt(rs)}"))
    return out


SUITES = (
    suite_christoffel_oracle,
    suite_determinants,
    suite_derivatives,
    suite_pullback,
    suite_energy,
    suite_euler_order,
)


def run_all(seed: int = 42) -> list[CheckResult]:
    results = []
    for suite in SUITES:
        results.extend(suite(seed))
    return results


def format_table(results: list[CheckResult]) -> str:
    w_suite = max(len(r.suite) for r in results)
    w_case = max(len(r.case) for r in results)
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{status}  {r.suite:<{w_suite}}  {r.case:<{w_case}}  {r.detail}")
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} checks passed")
    return "\n".join(lines)
