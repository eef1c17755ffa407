"""Closed-form 3x3 linear algebra on stacks of small matrices.

Every function accepts arrays with arbitrary leading batch axes: a vector is
``(..., 3)``, a matrix ``(..., 3, 3)`` and a rank-3 tensor symmetric in its
last two slots ``(..., 3, 3, 3)`` indexed ``T[..., m, i, j]``.
"""

from __future__ import annotations

import numpy as np

SINGULAR_TOL = 1e-14
DEGENERATE_TOL = 1e-12


class SingularMatrix(ArithmeticError):
    """Raised when a determinant falls below :data:`SINGULAR_TOL`."""


class SingularJacobian(SingularMatrix):
    """Raised when a diffeomorphism's Jacobian is not invertible at a point."""


class DegenerateBasis(ArithmeticError):
    """Raised when Gram-Schmidt meets a (numerically) dependent vector."""


def dot3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dot product over the trailing length-3 axis (cheaper than a numpy reduction)."""
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def det3(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return (
        m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
        - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
        + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])
    )


def nonsingular(det: np.ndarray) -> np.ndarray:
    """Boolean mask of determinants safely away from zero (NaN counts as singular)."""
    return np.abs(det) > SINGULAR_TOL


def _divide_by_det(adj: np.ndarray, det: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return adj / det[..., None, None]


def inv3(m: np.ndarray, *, check: bool = True) -> np.ndarray:
    """Inverse of a general 3x3 matrix via the adjugate.

    With ``check=False`` singular entries come back as inf/NaN instead of
    raising; callers are expected to mask them.
    """
    m = np.asarray(m, dtype=float)
    det = det3(m)
    if check and not np.all(nonsingular(det)):
        raise SingularMatrix(f"|det| <= {SINGULAR_TOL:g}")
    adj = np.empty_like(m)
    adj[..., 0, 0] = m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1]
    adj[..., 0, 1] = m[..., 0, 2] * m[..., 2, 1] - m[..., 0, 1] * m[..., 2, 2]
    adj[..., 0, 2] = m[..., 0, 1] * m[..., 1, 2] - m[..., 0, 2] * m[..., 1, 1]
    adj[..., 1, 0] = m[..., 1, 2] * m[..., 2, 0] - m[..., 1, 0] * m[..., 2, 2]
    adj[..., 1, 1] = m[..., 0, 0] * m[..., 2, 2] - m[..., 0, 2] * m[..., 2, 0]
    adj[..., 1, 2] = m[..., 0, 2] * m[..., 1, 0] - m[..., 0, 0] * m[..., 1, 2]
    adj[..., 2, 0] = m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0]
    adj[..., 2, 1] = m[..., 0, 1] * m[..., 2, 0] - m[..., 0, 0] * m[..., 2, 1]
    adj[..., 2, 2] = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    return _divide_by_det(adj, det)


def sym_inverse(m: np.ndarray, *, check: bool = True) -> np.ndarray:
    """Inverse of a symmetric 3x3 matrix.

    Only the upper triangle of ``m`` is read and the six cofactors are
    mirrored, so the result is exactly symmetric.

    Raises
    ------
    SingularMatrix
        If ``|det(m)| <= 1e-14`` anywhere in the batch and ``check`` is set.
    """
    m = np.asarray(m, dtype=float)
    a, b, c = m[..., 0, 0], m[..., 0, 1], m[..., 0, 2]
    d, e, f = m[..., 1, 1], m[..., 1, 2], m[..., 2, 2]
    c00 = d * f - e * e
    c01 = c * e - b * f
    c02 = b * e - c * d
    c11 = a * f - c * c
    c12 = b * c - a * e
    c22 = a * d - b * b
    det = a * c00 + b * c01 + c * c02
    if check and not np.all(nonsingular(det)):
        raise SingularMatrix(f"|det| <= {SINGULAR_TOL:g}")
    adj = np.empty_like(m)
    adj[..., 0, 0] = c00
    adj[..., 1, 1] = c11
    adj[..., 2, 2] = c22
    adj[..., 0, 1] = adj[..., 1, 0] = c01
    adj[..., 0, 2] = adj[..., 2, 0] = c02
    adj[..., 1, 2] = adj[..., 2, 1] = c12
    return _divide_by_det(adj, det)


def symmetrize(m: np.ndarray) -> np.ndarray:
    """Average a matrix (or the last two axes of a tensor) with its transpose."""
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def is_positive_definite(m: np.ndarray) -> np.ndarray:
    """Leading-principal-minors test, batched."""
    m = np.asarray(m, dtype=float)
    minor1 = m[..., 0, 0]
    minor2 = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    return (minor1 > 0) & (minor2 > 0) & (det3(m) > 0)


def inner(g: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``<u, v>_g = sum_ij u_i g_ij v_j``."""
    return np.einsum("...i,...ij,...j->...", u, g, v)


def quad_form(g: np.ndarray, v: np.ndarray) -> np.ndarray:
    return inner(g, v, v)


def gram_schmidt_frame(g: np.ndarray, seed_basis) -> np.ndarray:
    """Orthonormalize ``seed_basis`` (rows) with respect to the inner product ``g``.

    Returns a ``(3, 3)`` array whose rows ``e_k`` satisfy ``<e_i, e_j>_g = delta_ij``.
    The first row keeps the direction of the first seed vector.
    """
    g = np.asarray(g, dtype=float)
    seeds = np.asarray(seed_basis, dtype=float)
    frame = np.zeros((3, 3))
    for k in range(3):
        v = seeds[k].copy()
        # two passes of modified Gram-Schmidt keep the residual near eps
        for _ in range(2):
            for j in range(k):
                v = v - inner(g, frame[j], v) * frame[j]
        norm = np.sqrt(max(quad_form(g, v), 0.0))
        if not norm >= DEGENERATE_TOL:
            raise DegenerateBasis(f"seed vector {k} is dependent on earlier ones (norm {norm:.3g})")
        frame[k] = v / norm
    return frame


def orthonormality_residual(g: np.ndarray, frame: np.ndarray) -> float:
    gram = np.einsum("ai,ij,bj->ab", frame, g, frame)
    return float(np.max(np.abs(gram - np.eye(3))))
