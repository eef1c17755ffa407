import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from riemray.fields import (
    Affine,
    Compose,
    Gaussian,
    Identity,
    LocalBump,
    Polynomial,
    Sum,
    Twist,
    compose_diffeo_sample,
    eval_diffeo,
    eval_scalar,
)
from riemray.linalg import SingularJacobian, det3

H = 1e-4
points = arrays(np.float64, (3,), elements=st.floats(-2.0, 2.0, allow_nan=False))
BUMP_A = LocalBump(Gaussian(0.5, (0.2, 0.1, -0.1), (0.7, 0.8, 0.6)), (0.6, 0.8, 0.0))
BUMP_B = LocalBump(Gaussian(-0.4, (-0.3, 0.2, 0.4), (0.9, 0.6, 0.8)), (0.0, 0.6, -0.8))
BUMP_C = LocalBump(Gaussian(0.3, (0.1, -0.4, 0.2), (0.8, 0.9, 0.7)), (0.0, 0.0, 1.0))


def fd_gradient(fn, p):
    return np.array([(fn(p + H * e) - fn(p - H * e)) / (2 * H) for e in np.eye(3)]).T


def fd_hessian(fn, p):
    out = np.empty(np.shape(fn(p)) + (3, 3))
    for i, ei in enumerate(np.eye(3)):
        for j, ej in enumerate(np.eye(3)):
            out[..., i, j] = (
                fn(p + H * (ei + ej)) - fn(p + H * (ei - ej)) - fn(p - H * (ei - ej)) + fn(p - H * (ei + ej))
            ) / (4 * H * H)
    return out


def value_of(f):
    return lambda q: eval_scalar(f, q).value


def image_of(phi):
    return lambda q: eval_diffeo(phi, q).image


# ---- scalar fields


def test_gaussian_at_center():
    s = eval_scalar(Gaussian(2.0, (0, 0, 0), (1, 1, 1)), (0.0, 0.0, 0.0))
    assert s.value == 2.0
    np.testing.assert_array_equal(s.gradient, 0.0)


def test_sum_of_identical_gaussians_at_center():
    g = Gaussian(1.5, (0.3, -0.2, 0.1), (0.5, 0.7, 0.9))
    s = eval_scalar(Sum((g, g)), (0.3, -0.2, 0.1))
    assert s.value == 3.0
    np.testing.assert_array_equal(s.gradient, 0.0)


def test_unit_gaussian_off_center_matches_finite_differences():
    f = Gaussian(1.0, (0, 0, 0), (1, 1, 1))
    p = np.array([1.0, 0.0, 0.0])
    s = eval_scalar(f, p)
    assert s.value == pytest.approx(math.exp(-0.5), rel=1e-15)
    np.testing.assert_allclose(s.gradient, fd_gradient(value_of(f), p), atol=1e-6)
    np.testing.assert_allclose(s.hessian, fd_hessian(value_of(f), p), atol=1e-6)


def test_gaussian_rejects_nonpositive_sigma():
    with pytest.raises(ValueError):
        Gaussian(1.0, (0, 0, 0), (0.0, 1.0, 1.0))


def test_polynomial_quadric_derivatives():
    f = Polynomial(((1.0, (2, 0, 0)), (1.0, (0, 2, 0)), (-1.0, (0, 0, 2))))
    s = eval_scalar(f, (1.0, 0.0, 0.0))
    assert s.value == 1.0
    np.testing.assert_array_equal(s.gradient, [2.0, 0.0, 0.0])
    np.testing.assert_array_equal(s.hessian, np.diag([2.0, 2.0, -2.0]))


def test_polynomial_degree_cap():
    Polynomial(((1.0, (2, 1, 1)),))
    with pytest.raises(ValueError):
        Polynomial(((1.0, (3, 1, 1)),))


@st.composite
def polynomials(draw):
    n = draw(st.integers(1, 5))
    terms = []
    for _ in range(n):
        powers = draw(st.tuples(*[st.integers(0, 4)] * 3).filter(lambda t: sum(t) <= 4))
        terms.append((draw(st.floats(-2, 2, allow_nan=False)), powers))
    return Polynomial(tuple(terms))


@given(polynomials(), points)
def test_polynomial_derivative_consistency(f, p):
    s = eval_scalar(f, p)
    np.testing.assert_allclose(s.gradient, fd_gradient(value_of(f), p), atol=1e-5)
    np.testing.assert_allclose(s.hessian, fd_hessian(value_of(f), p), atol=1e-4)


@st.composite
def gaussians(draw):
    a = draw(st.floats(-2, 2, allow_nan=False))
    c = draw(st.tuples(*[st.floats(-1, 1)] * 3))
    sigma = draw(st.tuples(*[st.floats(0.4, 2.0)] * 3))
    return Gaussian(a, c, sigma)


@given(st.lists(gaussians(), min_size=1, max_size=4), points)
def test_sum_is_linear(parts, p):
    total = eval_scalar(Sum(tuple(parts)), p)
    each = [eval_scalar(g, p) for g in parts]
    assert total.value == pytest.approx(sum(s.value for s in each), abs=1e-12)
    np.testing.assert_allclose(total.gradient, sum(s.gradient for s in each), atol=1e-12)
    np.testing.assert_allclose(total.hessian, sum(s.hessian for s in each), atol=1e-12)


@given(gaussians(), points)
def test_gaussian_derivative_consistency(f, p):
    s = eval_scalar(f, p)
    np.testing.assert_allclose(s.gradient, fd_gradient(value_of(f), p), atol=1e-5)
    np.testing.assert_allclose(s.hessian, fd_hessian(value_of(f), p), atol=1e-4)


def test_batched_evaluation_matches_pointwise(rng):
    f = Sum((Gaussian(1.0, (0.1, 0, 0), (1, 2, 1)), Polynomial(((1.0, (1, 1, 0)),))))
    pts = rng.uniform(-2, 2, (4, 5, 3))
    batch = eval_scalar(f, pts)
    for idx in np.ndindex(4, 5):
        single = eval_scalar(f, pts[idx])
        assert batch.value[idx] == pytest.approx(single.value, abs=1e-15)
        np.testing.assert_allclose(batch.hessian[idx], single.hessian, atol=1e-15)


# ---- diffeomorphisms


def test_identity_sample():
    p = np.array([0.3, -1.2, 2.0])
    s = eval_diffeo(Identity(), p)
    np.testing.assert_array_equal(s.image, p)
    np.testing.assert_array_equal(s.jacobian, np.eye(3))
    np.testing.assert_array_equal(s.second_deriv, 0.0)


def test_far_bump_is_identity():
    bump = LocalBump(Gaussian(1.0, (0, 0, 0), (0.1, 0.1, 0.1)), (1.0, 0.0, 0.0))
    p = np.array([1.5, 0.0, 0.0])
    s = eval_diffeo(bump, p)
    np.testing.assert_allclose(s.image, p, atol=1e-12)
    np.testing.assert_allclose(s.jacobian, np.eye(3), atol=1e-12)


def test_bump_jacobian_is_rank_one_update():
    p = np.array([0.3, 0.1, -0.2])
    v = np.array(BUMP_A.direction)
    grad = eval_scalar(BUMP_A.bump, p).gradient
    np.testing.assert_allclose(eval_diffeo(BUMP_A, p).jacobian, np.eye(3) + np.outer(v, grad), atol=1e-15)


def test_twist_at_unit_x():
    p = np.array([1.0, 0.0, 0.0])
    s = eval_diffeo(Twist(), p)
    np.testing.assert_allclose(s.image, [1.0, 0.0, 0.0], atol=1e-15)
    expected = np.array([[1.0, 0, 0], [0, 1, 1], [0, 0, 1]])
    np.testing.assert_allclose(s.jacobian, expected, atol=1e-15)
    np.testing.assert_allclose(fd_gradient(image_of(Twist()), p), expected, atol=1e-6)


@given(points)
def test_twist_preserves_volume(p):
    assert det3(eval_diffeo(Twist(), p).jacobian) == pytest.approx(1.0, abs=1e-12)


def test_compose_with_outer_identity_is_inner():
    p = np.array([0.3, 0.1, -0.2])
    inner = eval_diffeo(BUMP_A, p)
    out = compose_diffeo_sample(eval_diffeo(Identity(), inner.image), inner)
    np.testing.assert_array_equal(out.image, inner.image)
    np.testing.assert_array_equal(out.jacobian, inner.jacobian)
    np.testing.assert_array_equal(out.second_deriv, inner.second_deriv)


def test_affine_compose_has_zero_hessian():
    a = Affine(((1.0, 2.0, 0.0), (0.0, 1.0, 0.5), (0.3, 0.0, 1.0)), (1.0, 0.0, -1.0))
    b = Affine(((2.0, 0.0, 0.0), (0.1, 1.0, 0.0), (0.0, 0.0, 3.0)), (0.0, 0.5, 0.0))
    s = eval_diffeo(Compose((a, b)), (0.2, 0.4, -0.6))
    np.testing.assert_array_equal(s.second_deriv, 0.0)
    np.testing.assert_allclose(s.jacobian, np.array(a.matrix) @ np.array(b.matrix), atol=1e-15)


def test_two_bump_compose_matches_finite_differences():
    phi = Compose((BUMP_A, BUMP_B))
    p = np.array([0.3, 0.1, -0.2])
    s = eval_diffeo(phi, p)
    np.testing.assert_allclose(s.image, image_of(BUMP_A)(image_of(BUMP_B)(p)), atol=1e-15)
    np.testing.assert_allclose(s.jacobian, fd_gradient(image_of(phi), p), atol=1e-5)
    np.testing.assert_allclose(s.second_deriv, fd_hessian(image_of(phi), p), atol=1e-5)


@given(points)
def test_three_bump_fold_matches_direct_composition(p):
    phi = Compose((BUMP_A, BUMP_B, BUMP_C))

    def direct(q):
        return image_of(BUMP_A)(image_of(BUMP_B)(image_of(BUMP_C)(q)))

    s = eval_diffeo(phi, p)
    np.testing.assert_allclose(s.image, direct(p), atol=1e-14)
    np.testing.assert_allclose(s.jacobian, fd_gradient(direct, p), atol=1e-5)
    np.testing.assert_allclose(s.second_deriv, fd_hessian(direct, p), atol=1e-5)


@given(points)
def test_second_derivatives_symmetric(p):
    h = eval_diffeo(Compose((BUMP_A, Twist(), BUMP_C)), p).second_deriv
    np.testing.assert_allclose(h, np.swapaxes(h, -1, -2), atol=1e-15)


def test_singular_jacobian_raises():
    with pytest.raises(SingularJacobian):
        eval_diffeo(Affine(((1, 0, 0), (0, 1, 0), (0, 0, 0)), (0, 0, 0)), (0.0, 0.0, 0.0))
    # a bump strong enough to fold space over itself
    fold = LocalBump(Gaussian(-1.0, (0, 0, 0), (0.5, 1.0, 1.0)), (1.0, 0.0, 0.0))
    det = det3(eval_diffeo(fold, np.array([[x, 0.0, 0.0] for x in np.linspace(-1, 1, 201)]), check=False).jacobian)
    assert det.min() < 0 < det.max()
