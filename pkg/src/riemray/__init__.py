"""Geodesic ray tracing through Riemannian metrics on R^3."""

from .config import ParseError, RunConfig, ValidationError, load_config, parse_config, serialize_config
from .fields import Affine, Compose, Gaussian, Identity, LocalBump, Polynomial, Sum, Twist, eval_diffeo, eval_scalar
from .geodesics import GeodesicState, IntegratorConfig, Scheme, exponential_map, integrate, trace_geodesic
from .linalg import DegenerateBasis, SingularJacobian, SingularMatrix
from .metrics import Diffeo, Euclidean, Graph, christoffel, christoffel_fd, metric_tensor
from .render import Box, GridPlanes, HalfSpace, Scene, Sphere, build_camera, render

__version__ = "0.1.0"

__all__ = [
    "Affine", "Box", "Compose", "DegenerateBasis", "Diffeo", "Euclidean", "Gaussian", "GeodesicState",
    "Graph", "GridPlanes", "HalfSpace", "Identity", "IntegratorConfig", "LocalBump", "ParseError",
    "Polynomial", "RunConfig", "Scene", "Scheme", "SingularJacobian", "SingularMatrix", "Sphere", "Sum",
    "Twist", "ValidationError", "build_camera", "christoffel", "christoffel_fd", "eval_diffeo",
    "eval_scalar", "exponential_map", "integrate", "load_config", "metric_tensor", "parse_config",
    "render", "serialize_config", "trace_geodesic",
]
