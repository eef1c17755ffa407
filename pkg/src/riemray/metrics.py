"""Metric tensors and Christoffel symbols for the three metric families.

``Euclidean`` is the flat metric, ``Graph(f)`` pulls back the metric of the
hypersurface ``x4 = f(x1, x2, x3)`` in R^4 and ``Diffeo(phi)`` pulls back the
Euclidean metric through a diffeomorphism. Each family has a closed-form
Christoffel formula; :func:`christoffel_fd` is an independent finite-difference
route through the metric coefficients used to check them.

Christoffel symbols are stored ``gamma[..., m, i, j]`` (upper index first).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import fields
from .fields import DiffeoExpr, ScalarFieldExpr
from .linalg import SingularJacobian, SingularMatrix, det3, dot3, inv3, nonsingular, sym_inverse


@dataclass(frozen=True)
class Euclidean:
    pass


@dataclass(frozen=True)
class Graph:
    field: ScalarFieldExpr


@dataclass(frozen=True)
class Diffeo:
    map: DiffeoExpr


MetricField = Union[Euclidean, Graph, Diffeo]


@dataclass(frozen=True)
class MetricSample:
    g: np.ndarray
    g_inv: np.ndarray
    christoffel: np.ndarray


def _points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != (3,):
        raise ValueError(f"points must have a trailing axis of length 3, got shape {p.shape}")
    return p


# --------------------------------------------------------------------------
# graph of a function


def _graph_metric_from(grad: np.ndarray) -> np.ndarray:
    return np.eye(3) + grad[..., :, None] * grad[..., None, :]


def _graph_inverse_from(grad: np.ndarray) -> np.ndarray:
    denom = 1.0 + dot3(grad, grad)
    return np.eye(3) - grad[..., :, None] * grad[..., None, :] / denom[..., None, None]


def _graph_christoffel_from(s: fields.ScalarSample) -> np.ndarray:
    denom = 1.0 + dot3(s.gradient, s.gradient)
    return (s.gradient / denom[..., None])[..., :, None, None] * s.hessian[..., None, :, :]


def graph_metric(f: ScalarFieldExpr, p) -> np.ndarray:
    """``g = I + grad f grad f^T``, so ``det g = 1 + |grad f|^2``."""
    return _graph_metric_from(f.sample(_points(p)).gradient)


def graph_metric_inverse(f: ScalarFieldExpr, p) -> np.ndarray:
    """Rank-one closed form ``I - grad f grad f^T / (1 + |grad f|^2)``."""
    return _graph_inverse_from(f.sample(_points(p)).gradient)


def graph_christoffel(f: ScalarFieldExpr, p) -> np.ndarray:
    """``gamma[m, i, j] = f_m f_ij / (1 + |grad f|^2)``."""
    return _graph_christoffel_from(f.sample(_points(p)))


# --------------------------------------------------------------------------
# diffeomorphism pullback


def _diffeo_metric_from(jac: np.ndarray) -> np.ndarray:
    return np.einsum("...ki,...kj->...ij", jac, jac)


def _diffeo_christoffel_from(s: fields.DiffeoSample, *, check: bool) -> np.ndarray:
    jinv = inv3(s.jacobian, check=check)
    hess = s.second_deriv
    return np.matmul(jinv, hess.reshape(hess.shape[:-3] + (3, 9))).reshape(hess.shape)


def diffeo_metric(phi: DiffeoExpr, p) -> np.ndarray:
    """``g = J^T J``. Raises :class:`SingularJacobian` where ``J`` is not invertible."""
    s = fields.eval_diffeo(phi, _points(p))
    return _diffeo_metric_from(s.jacobian)


def diffeo_christoffel(phi: DiffeoExpr, p) -> np.ndarray:
    """``gamma[m, i, j] = sum_s H[s, i, j] (J^-1)[m, s]``."""
    s = fields.eval_diffeo(phi, _points(p))
    return _diffeo_christoffel_from(s, check=True)


# --------------------------------------------------------------------------
# dispatch


def metric_tensor(metric: MetricField, p) -> np.ndarray:
    p = _points(p)
    if isinstance(metric, Euclidean):
        return np.broadcast_to(np.eye(3), p.shape[:-1] + (3, 3)).copy()
    if isinstance(metric, Graph):
        return graph_metric(metric.field, p)
    if isinstance(metric, Diffeo):
        return diffeo_metric(metric.map, p)
    raise TypeError(f"unknown metric {metric!r}")


def christoffel(metric: MetricField, p) -> np.ndarray:
    p = _points(p)
    if isinstance(metric, Euclidean):
        return np.zeros(p.shape[:-1] + (3, 3, 3))
    if isinstance(metric, Graph):
        return graph_christoffel(metric.field, p)
    if isinstance(metric, Diffeo):
        return diffeo_christoffel(metric.map, p)
    raise TypeError(f"unknown metric {metric!r}")


def christoffel_masked(metric: MetricField, p) -> tuple[np.ndarray, np.ndarray]:
    """Christoffel symbols plus a mask of points where they could be evaluated.

    Never raises on numerical failure; failed entries are zeroed so the
    surrounding batch stays finite.
    """
    p = _points(p)
    batch = p.shape[:-1]
    if isinstance(metric, Euclidean):
        return np.zeros(batch + (3, 3, 3)), np.ones(batch, dtype=bool)
    with np.errstate(all="ignore"):
        if isinstance(metric, Graph):
            gamma = _graph_christoffel_from(metric.field.sample(p))
            ok = np.ones(batch, dtype=bool)
        elif isinstance(metric, Diffeo):
            s = metric.map.sample(p)
            gamma = _diffeo_christoffel_from(s, check=False)
            ok = nonsingular(det3(s.jacobian))
        else:
            raise TypeError(f"unknown metric {metric!r}")
    if not np.all(ok):
        gamma = np.where(ok[..., None, None, None], gamma, 0.0)
    return gamma, ok


def sample_metric(metric: MetricField, p) -> MetricSample:
    p = _points(p)
    batch = p.shape[:-1]
    if isinstance(metric, Euclidean):
        eye = np.broadcast_to(np.eye(3), batch + (3, 3)).copy()
        return MetricSample(eye, eye.copy(), np.zeros(batch + (3, 3, 3)))
    if isinstance(metric, Graph):
        s = metric.field.sample(p)
        return MetricSample(
            _graph_metric_from(s.gradient),
            _graph_inverse_from(s.gradient),
            _graph_christoffel_from(s),
        )
    if isinstance(metric, Diffeo):
        s = fields.eval_diffeo(metric.map, p)
        g = _diffeo_metric_from(s.jacobian)
        return MetricSample(g, sym_inverse(g), _diffeo_christoffel_from(s, check=True))
    raise TypeError(f"unknown metric {metric!r}")


# --------------------------------------------------------------------------
# finite-difference oracle


def christoffel_fd(
    metric: MetricField,
    p,
    h_fd: float = 1e-4,
    *,
    return_asymmetry: bool = False,
):
    """Christoffel symbols from central differences of the metric coefficients.

    ``gamma[m, i, j] = 1/2 sum_k g^{mk} (d_i g_jk + d_j g_ik - d_k g_ij)``.

    Only :func:`metric_tensor` is consulted, never a closed-form Christoffel
    formula. With ``return_asymmetry`` the max ``|gamma[m,i,j] - gamma[m,j,i]|``
    before symmetrization is returned as well.
    """
    p = _points(p)
    g0 = metric_tensor(metric, p)
    g_inv = sym_inverse(g0)
    # dg[..., k, i, j] = d g_ij / d p_k
    dg = np.empty(p.shape[:-1] + (3, 3, 3))
    for k in range(3):
        step = np.zeros(3)
        step[k] = h_fd
        try:
            gp = metric_tensor(metric, p + step)
            gm = metric_tensor(metric, p - step)
        except SingularJacobian as exc:
            raise SingularMatrix(f"stencil metric singular: {exc}") from exc
        for g_st in (gp, gm):
            if not np.all(nonsingular(det3(g_st))):
                raise SingularMatrix("stencil metric singular")
        dg[..., k, :, :] = (gp - gm) / (2.0 * h_fd)
    # lower[..., k, i, j] = 1/2 (d_i g_jk + d_j g_ik - d_k g_ij)
    lower = 0.5 * (
        np.einsum("...ijk->...kij", dg)
        + np.einsum("...jik->...kij", dg)
        - dg
    )
    gamma = np.einsum("...mk,...kij->...mij", g_inv, lower)
    asym = float(np.max(np.abs(gamma - np.swapaxes(gamma, -1, -2)), initial=0.0))
    gamma = 0.5 * (gamma + np.swapaxes(gamma, -1, -2))
    if return_asymmetry:
        return gamma, asym
    return gamma
