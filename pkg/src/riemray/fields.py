"""Scalar fields and diffeomorphisms of R^3 with exact first and second derivatives.

Fields and maps are small immutable expression trees. Sampling a node at a
batch of points ``p`` of shape ``(..., 3)`` returns every derivative needed
downstream in one pass:

* :class:`ScalarSample` -- value ``(...)``, gradient ``(..., 3)``, Hessian ``(..., 3, 3)``
* :class:`DiffeoSample` -- image ``(..., 3)``, Jacobian ``J[..., s, i] = d x_s / d p_i``
  and second derivatives ``H[..., s, i, j] = d^2 x_s / d p_i d p_j``

Compositions are evaluated by folding :func:`compose_diffeo_sample` from the
innermost map outwards, so only per-map Jacobians and Hessians are ever formed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Union

import numpy as np

from .linalg import SINGULAR_TOL, SingularJacobian, det3, dot3, nonsingular, symmetrize

MAX_POLY_DEGREE = 4


def _as_points(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != (3,):
        raise ValueError(f"points must have a trailing axis of length 3, got shape {p.shape}")
    return p


def _vec3(v, name: str) -> tuple[float, float, float]:
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have 3 components")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return tuple(float(x) for x in arr)


@dataclass(frozen=True)
class ScalarSample:
    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray


@dataclass(frozen=True)
class DiffeoSample:
    image: np.ndarray
    jacobian: np.ndarray
    second_deriv: np.ndarray


# --------------------------------------------------------------------------
# scalar fields


@dataclass(frozen=True)
class Gaussian:
    """``a * exp(-sum_k (p_k - c_k)^2 / (2 sigma_k^2))``."""

    amplitude: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    sigma: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "center", _vec3(self.center, "center"))
        object.__setattr__(self, "sigma", _vec3(self.sigma, "sigma"))
        if not np.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")
        if min(self.sigma) <= 0:
            raise ValueError(f"sigma components must be > 0, got {self.sigma}")

    def sample(self, p) -> ScalarSample:
        p = _as_points(p)
        inv_var = 1.0 / np.square(self.sigma)
        d = p - np.asarray(self.center)
        w = d * inv_var  # d_k / sigma_k^2
        value = self.amplitude * np.exp(-0.5 * dot3(d, w))
        gradient = -value[..., None] * w
        hessian = value[..., None, None] * (w[..., :, None] * w[..., None, :] - np.diag(inv_var))
        return ScalarSample(value, gradient, hessian)


@dataclass(frozen=True)
class Polynomial:
    """Trivariate polynomial given as ``(coefficient, (i, j, k))`` monomials ``c x^i y^j z^k``."""

    terms: tuple[tuple[float, tuple[int, int, int]], ...]

    def __post_init__(self):
        clean = []
        for coef, powers in self.terms:
            powers = tuple(int(e) for e in powers)
            if len(powers) != 3 or min(powers) < 0:
                raise ValueError(f"monomial exponents must be 3 nonnegative ints, got {powers}")
            if sum(powers) > MAX_POLY_DEGREE:
                raise ValueError(f"monomial degree {sum(powers)} exceeds {MAX_POLY_DEGREE}")
            clean.append((float(coef), powers))
        object.__setattr__(self, "terms", tuple(clean))

    @cached_property
    def _derivative_terms(self):
        """Monomials of the value, each gradient entry and each upper Hessian entry, zeros dropped."""

        def diff(terms, axis):
            out = []
            for coef, powers in terms:
                if powers[axis] > 0:
                    lowered = list(powers)
                    lowered[axis] -= 1
                    out.append((coef * powers[axis], tuple(lowered)))
            return out

        grad = [diff(self.terms, i) for i in range(3)]
        hess = {(i, j): diff(grad[i], j) for i in range(3) for j in range(i, 3)}
        return list(self.terms), grad, hess

    def sample(self, p) -> ScalarSample:
        p = _as_points(p)
        batch = p.shape[:-1]
        # pw[axis][n] = p_axis ** n
        pw = [[np.ones(batch)] for _ in range(3)]
        for axis in range(3):
            for _ in range(MAX_POLY_DEGREE):
                pw[axis].append(pw[axis][-1] * p[..., axis])

        def evaluate(terms):
            acc = np.zeros(batch)
            for coef, (i, j, k) in terms:
                acc = acc + coef * pw[0][i] * pw[1][j] * pw[2][k]
            return acc

        value_terms, grad_terms, hess_terms = self._derivative_terms
        value = evaluate(value_terms)
        gradient = np.stack([evaluate(t) for t in grad_terms], axis=-1)
        hessian = np.empty(batch + (3, 3))
        for (i, j), terms in hess_terms.items():
            hessian[..., i, j] = hessian[..., j, i] = evaluate(terms)
        return ScalarSample(value, gradient, hessian)


@dataclass(frozen=True)
class Sum:
    terms: tuple["ScalarFieldExpr", ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def sample(self, p) -> ScalarSample:
        p = _as_points(p)
        value = np.zeros(p.shape[:-1])
        gradient = np.zeros(p.shape)
        hessian = np.zeros(p.shape + (3,))
        for term in self.terms:
            s = term.sample(p)
            value = value + s.value
            gradient = gradient + s.gradient
            hessian = hessian + s.hessian
        return ScalarSample(value, gradient, hessian)


ScalarFieldExpr = Union[Gaussian, Polynomial, Sum]


def eval_scalar(f: ScalarFieldExpr, p) -> ScalarSample:
    return f.sample(p)


# --------------------------------------------------------------------------
# diffeomorphisms


def _identity_sample(p: np.ndarray) -> DiffeoSample:
    batch = p.shape[:-1]
    return DiffeoSample(
        p.copy(),
        np.broadcast_to(np.eye(3), batch + (3, 3)).copy(),
        np.zeros(batch + (3, 3, 3)),
    )


@dataclass(frozen=True)
class Identity:
    def sample(self, p) -> DiffeoSample:
        return _identity_sample(_as_points(p))


@dataclass(frozen=True)
class Affine:
    """``p -> A p + b``."""

    matrix: tuple[tuple[float, float, float], ...]
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise ValueError("affine matrix must be a finite 3x3 array")
        object.__setattr__(self, "matrix", tuple(tuple(float(x) for x in row) for row in m))
        object.__setattr__(self, "offset", _vec3(self.offset, "offset"))

    def sample(self, p) -> DiffeoSample:
        p = _as_points(p)
        a = np.asarray(self.matrix)
        image = np.einsum("si,...i->...s", a, p) + np.asarray(self.offset)
        batch = p.shape[:-1]
        return DiffeoSample(image, np.broadcast_to(a, batch + (3, 3)).copy(), np.zeros(batch + (3, 3, 3)))


@dataclass(frozen=True)
class Twist:
    """Rotate each horizontal slice by its height: ``(x cos z - y sin z, x sin z + y cos z, z)``."""

    def sample(self, p) -> DiffeoSample:
        p = _as_points(p)
        x, y, z = p[..., 0], p[..., 1], p[..., 2]
        c, s = np.cos(z), np.sin(z)
        u = x * c - y * s  # first image coordinate
        w = x * s + y * c  # second image coordinate
        image = np.stack([u, w, z], axis=-1)

        batch = p.shape[:-1]
        jac = np.zeros(batch + (3, 3))
        jac[..., 0, 0] = c
        jac[..., 0, 1] = -s
        jac[..., 0, 2] = -w
        jac[..., 1, 0] = s
        jac[..., 1, 1] = c
        jac[..., 1, 2] = u
        jac[..., 2, 2] = 1.0

        hess = np.zeros(batch + (3, 3, 3))
        hess[..., 0, 0, 2] = hess[..., 0, 2, 0] = -s
        hess[..., 0, 1, 2] = hess[..., 0, 2, 1] = -c
        hess[..., 0, 2, 2] = -u
        hess[..., 1, 0, 2] = hess[..., 1, 2, 0] = c
        hess[..., 1, 1, 2] = hess[..., 1, 2, 1] = -s
        hess[..., 1, 2, 2] = -w
        return DiffeoSample(image, jac, hess)


@dataclass(frozen=True)
class LocalBump:
    """Push the neighbourhood of the bump's center along ``direction``: ``p + f(p) v``."""

    bump: Gaussian
    direction: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "direction", _vec3(self.direction, "direction"))

    def sample(self, p) -> DiffeoSample:
        p = _as_points(p)
        f = self.bump.sample(p)
        v = np.asarray(self.direction)
        image = p + f.value[..., None] * v
        jac = np.eye(3) + v[:, None] * f.gradient[..., None, :]
        hess = v[:, None, None] * f.hessian[..., None, :, :]
        return DiffeoSample(image, jac, hess)


@dataclass(frozen=True)
class Compose:
    """``maps[0] o maps[1] o ... o maps[-1]``; the last map is applied first."""

    maps: tuple["DiffeoExpr", ...]

    def __post_init__(self):
        object.__setattr__(self, "maps", tuple(self.maps))
        if not self.maps:
            raise ValueError("compose needs at least one map")

    def sample(self, p) -> DiffeoSample:
        p = _as_points(p)
        acc = self.maps[-1].sample(p)
        for outer in reversed(self.maps[:-1]):
            acc = compose_diffeo_sample(outer.sample(acc.image), acc, check=False)
        return acc


DiffeoExpr = Union[Identity, Affine, Twist, LocalBump, Compose]


def compose_diffeo_sample(outer: DiffeoSample, inner: DiffeoSample, *, check: bool = True) -> DiffeoSample:
    """Chain rule for ``outer o inner``; ``outer`` must be sampled at ``inner.image``.

    ``J = J_o J_i`` and, per output coordinate ``s``,
    ``H[s] = J_i^T H_o[s] J_i + sum_t J_o[s, t] H_i[t]``.
    """
    jo, ji = outer.jacobian, inner.jacobian
    jac = np.einsum("...st,...ti->...si", jo, ji)
    curv = np.einsum("...ai,...sab,...bj->...sij", ji, outer.second_deriv, ji)
    bend = np.einsum("...st,...tij->...sij", jo, inner.second_deriv)
    second = symmetrize(curv + bend)
    if check:
        _check_jacobian(jac)
    return DiffeoSample(outer.image, jac, second)


def _check_jacobian(jac: np.ndarray) -> None:
    if not np.all(nonsingular(det3(jac))):
        raise SingularJacobian(f"|det J| <= {SINGULAR_TOL:g}")


def eval_diffeo(phi: DiffeoExpr, p, *, check: bool = True) -> DiffeoSample:
    """Sample ``phi`` at ``p``.

    Raises
    ------
    SingularJacobian
        If ``|det J| <= 1e-14`` at any of the points and ``check`` is set.
    """
    sample = phi.sample(p)
    if check:
        _check_jacobian(sample.jacobian)
    return sample
