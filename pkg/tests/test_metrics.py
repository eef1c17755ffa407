import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from riemray.fields import Affine, Compose, Gaussian, Identity, LocalBump, Polynomial, Sum, Twist, eval_diffeo
from riemray.linalg import SingularMatrix, det3, is_positive_definite, sym_inverse
from riemray.metrics import (
    Diffeo,
    Euclidean,
    Graph,
    christoffel,
    christoffel_fd,
    christoffel_masked,
    diffeo_christoffel,
    diffeo_metric,
    graph_christoffel,
    graph_metric,
    graph_metric_inverse,
    metric_tensor,
    sample_metric,
)
from riemray.verify import metric_families

QUADRIC = Polynomial(((1.0, (2, 0, 0)), (1.0, (0, 2, 0)), (-1.0, (0, 0, 2))))
BUMP = LocalBump(Gaussian(0.5, (0.2, 0.1, -0.1), (0.7, 0.8, 0.6)), (1.0, 0.0, 0.0))
P1 = np.array([1.0, 0.0, 0.0])
points = arrays(np.float64, (3,), elements=st.floats(-2.0, 2.0, allow_nan=False))
family = st.sampled_from(sorted(metric_families().items()))


def test_graph_metric_is_identity_where_gradient_vanishes():
    f = Gaussian(1.3, (0.2, 0.1, 0.0), (1, 1, 1))
    np.testing.assert_array_equal(graph_metric(f, (0.2, 0.1, 0.0)), np.eye(3))
    np.testing.assert_array_equal(graph_metric_inverse(f, (0.2, 0.1, 0.0)), np.eye(3))


def test_quadric_graph_metric_at_unit_x():
    g = graph_metric(QUADRIC, P1)
    np.testing.assert_array_equal(g, np.diag([5.0, 1.0, 1.0]))
    assert det3(g) == pytest.approx(5.0)
    np.testing.assert_allclose(graph_metric_inverse(QUADRIC, P1), np.diag([0.2, 1.0, 1.0]), atol=1e-15)


def test_quadric_graph_christoffel_at_unit_x():
    gamma = graph_christoffel(QUADRIC, P1)
    np.testing.assert_allclose(gamma[0], np.diag([0.8, 0.8, -0.8]), atol=1e-15)
    np.testing.assert_array_equal(gamma[1:], 0.0)
    np.testing.assert_allclose(christoffel_fd(Graph(QUADRIC), P1), gamma, atol=1e-5)


def test_flat_point_of_field_has_zero_christoffel():
    f = Polynomial(((1.0, (1, 1, 1)),))  # gradient and hessian both vanish at the origin
    np.testing.assert_array_equal(graph_christoffel(f, (0.0, 0.0, 0.0)), 0.0)


@given(points)
def test_graph_inverse_matches_generic_inverse(p):
    f = Sum((Gaussian(1.0, (0.3, -0.2, 0.1), (0.8, 1.0, 0.6)), QUADRIC))
    g = graph_metric(f, p)
    inv = graph_metric_inverse(f, p)
    np.testing.assert_allclose(inv, sym_inverse(g), atol=1e-10)
    np.testing.assert_allclose(g @ inv, np.eye(3), atol=1e-10)


def test_diffeo_metric_examples():
    np.testing.assert_array_equal(diffeo_metric(Identity(), P1), np.eye(3))
    np.testing.assert_allclose(diffeo_metric(Twist(), P1), [[1, 0, 0], [0, 1, 1], [0, 1, 2]], atol=1e-15)
    scale = Affine(((2, 0, 0), (0, 2, 0), (0, 0, 2)), (0, 0, 0))
    np.testing.assert_array_equal(diffeo_metric(scale, (0.5, -1.0, 3.0)), 4.0 * np.eye(3))
    np.testing.assert_array_equal(diffeo_christoffel(scale, (0.5, -1.0, 3.0)), 0.0)
    np.testing.assert_array_equal(diffeo_christoffel(Identity(), P1), 0.0)


def test_twist_christoffel_matches_oracle():
    np.testing.assert_allclose(diffeo_christoffel(Twist(), P1), christoffel_fd(Diffeo(Twist()), P1), atol=1e-5)


def test_bump_then_twist_christoffel_matches_oracle():
    phi = Compose((BUMP, Twist()))
    p = (0.5, 0.2, 0.1)
    np.testing.assert_allclose(diffeo_christoffel(phi, p), christoffel_fd(Diffeo(phi), p), atol=1e-5)


def test_euclidean_oracle_is_zero():
    assert np.abs(christoffel_fd(Euclidean(), (0.3, 2.0, -1.0))).max() < 1e-12


@given(family, points)
def test_oracle_equivalence(named, p):
    _, metric = named
    fd, asym = christoffel_fd(metric, p, return_asymmetry=True)
    np.testing.assert_allclose(christoffel(metric, p), fd, atol=1e-5)
    assert asym < 1e-6


@given(family, points)
def test_sampled_metric_is_consistent(named, p):
    _, metric = named
    s = sample_metric(metric, p)
    assert is_positive_definite(s.g)
    np.testing.assert_allclose(s.g @ s.g_inv, np.eye(3), atol=1e-10)
    np.testing.assert_array_equal(s.christoffel, christoffel(metric, p))
    np.testing.assert_array_equal(s.christoffel, np.swapaxes(s.christoffel, -1, -2))


@given(points)
def test_diffeo_determinant_is_squared_jacobian_determinant(p):
    phi = Compose((BUMP, Twist()))
    dj = det3(eval_diffeo(phi, p).jacobian)
    assert det3(diffeo_metric(phi, p)) == pytest.approx(dj * dj, rel=1e-10)


def test_sample_metric_euclidean():
    s = sample_metric(Euclidean(), (1.0, 2.0, 3.0))
    np.testing.assert_array_equal(s.g, np.eye(3))
    np.testing.assert_array_equal(s.g_inv, np.eye(3))
    np.testing.assert_array_equal(s.christoffel, 0.0)


def test_masked_christoffel_flags_singular_points():
    flat = Diffeo(Affine(((1, 0, 0), (0, 1, 0), (0, 0, 0)), (0, 0, 0)))
    pts = np.zeros((4, 3))
    gamma, ok = christoffel_masked(flat, pts)
    assert not ok.any()
    assert np.isfinite(gamma).all()
    with pytest.raises(SingularMatrix):
        christoffel(flat, pts)
    with pytest.raises(SingularMatrix):
        christoffel_fd(flat, pts[0])


def test_metric_rejects_bad_point_shape():
    with pytest.raises(ValueError):
        metric_tensor(Euclidean(), (1.0, 2.0))
