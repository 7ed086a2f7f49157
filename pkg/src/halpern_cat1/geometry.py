"""Geodesic geometry of the two model CAT(1) spaces.

Points of the unit sphere S^d are unit vectors of R^(d+1); points of a segment
[lo, hi] are length-1 arrays. ``combine(space, t, x, y)`` is the point ``z`` on
the geodesic from ``x`` to ``y`` with ``dist(x, z) = (1 - t) * dist(x, y)``, so
``t = 1`` gives ``x`` and ``t = 0`` gives ``y``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from halpern_cat1._backend import SEGMENT_CODE, SPHERE_CODE, kernels
from halpern_cat1.errors import AntipodalError, GeometryError

SPHERE = "sphere"
SEGMENT = "segment"

UNIT_NORM_TOL = 1e-12
ANTIPODAL_MARGIN = 1e-9
MAX_SPHERE_DIM = 10


@dataclass(frozen=True)
class ModelSpace:
    """Descriptor of the ambient model space.

    For the sphere, ``diameter_bound`` (if set) declares that the working space
    is the closed cap of radius ``diameter_bound / 2`` about ``region_center``,
    which is what condition (a) of the convergence theorem refers to.
    """

    kind: str
    dim: int = 2
    lo: float = -1.0
    hi: float = 1.0
    diameter_bound: float | None = None
    region_center: tuple | None = None

    def __post_init__(self):
        if self.kind == SPHERE:
            if not 1 <= self.dim <= MAX_SPHERE_DIM:
                raise GeometryError(f"sphere dimension must lie in [1, {MAX_SPHERE_DIM}]")
            if self.diameter_bound is not None:
                if self.region_center is None:
                    raise GeometryError("a diameter bound on the sphere needs a region_center")
                if len(self.region_center) != self.dim + 1:
                    raise GeometryError("region_center has the wrong dimension")
                c = np.asarray(self.region_center, dtype=float)
                if abs(np.linalg.norm(c) - 1.0) > UNIT_NORM_TOL:
                    raise GeometryError("region_center must be a unit vector")
        elif self.kind == SEGMENT:
            if not self.lo < self.hi:
                raise GeometryError("segment needs lo < hi")
        else:
            raise GeometryError(f"unknown space kind {self.kind!r}")
        if self.diameter_bound is not None and not 0 < self.diameter_bound < math.pi / 2:
            raise GeometryError("diameter_bound must lie in (0, pi/2)")

    @property
    def ambient_dim(self) -> int:
        return self.dim + 1 if self.kind == SPHERE else 1

    @property
    def geom_code(self) -> int:
        return SPHERE_CODE if self.kind == SPHERE else SEGMENT_CODE

    @property
    def region_radius(self) -> float | None:
        if self.kind == SPHERE and self.diameter_bound is not None:
            return self.diameter_bound / 2
        return None

    def center_point(self) -> np.ndarray | None:
        return None if self.region_center is None else np.asarray(self.region_center, dtype=float)


def unit_sphere(dim=2, diameter_bound=None, center=None) -> ModelSpace:
    if center is not None:
        center = tuple(float(v) for v in center)
    return ModelSpace(SPHERE, dim=dim, diameter_bound=diameter_bound, region_center=center)


def segment(lo, hi) -> ModelSpace:
    lo, hi = float(lo), float(hi)
    bound = hi - lo if hi - lo < math.pi / 2 else None
    return ModelSpace(SEGMENT, dim=1, lo=lo, hi=hi, diameter_bound=bound)


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise GeometryError("cannot normalize the zero vector")
    return v / n


def as_point(space: ModelSpace, coords, normalize_input=False) -> np.ndarray:
    """Validate ``coords`` as a point of ``space`` and return a float array copy."""
    x = np.array(coords, dtype=float).reshape(-1)
    if x.shape[0] != space.ambient_dim:
        raise GeometryError(
            f"point has {x.shape[0]} coordinates, space needs {space.ambient_dim}")
    if not np.all(np.isfinite(x)):
        raise GeometryError("point has non-finite coordinates")
    if space.kind == SPHERE:
        if normalize_input:
            x = normalize(x)
        elif abs(np.linalg.norm(x) - 1.0) > UNIT_NORM_TOL:
            raise GeometryError("sphere points must be unit vectors")
    elif not space.lo <= x[0] <= space.hi:
        raise GeometryError(f"{x[0]} lies outside [{space.lo}, {space.hi}]")
    return x


def in_region(space: ModelSpace, x, tol=1e-10) -> bool:
    """Whether ``x`` lies in the configured working region (the whole model if none)."""
    if space.kind == SEGMENT:
        return space.lo - tol <= float(x[0]) <= space.hi + tol
    if space.region_radius is None:
        return True
    return dist(space, space.center_point(), x) <= space.region_radius + tol


def _check_dims(space, *pts):
    m = space.ambient_dim
    for p in pts:
        if np.shape(p) != (m,):
            raise GeometryError(f"expected a point with {m} coordinates, got shape {np.shape(p)}")


def dist(space: ModelSpace, x, y) -> float:
    """Geodesic distance in radians.

    On the sphere this is the angle between the unit vectors, evaluated as
    ``2 atan2(|x - y|, |x + y|)``, which stays accurate near 0 and near pi.
    """
    _check_dims(space, x, y)
    return kernels.dist(space.geom_code, x, y)


def combine(space: ModelSpace, t, x, y) -> np.ndarray:
    """The point ``t x (+) (1 - t) y`` on the geodesic from ``x`` to ``y``."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise GeometryError(f"interpolation weight {t} outside [0, 1]")
    _check_dims(space, x, y)
    return kernels.combine(space.geom_code, t, x, y)


def dist_many(space: ModelSpace, X, y) -> np.ndarray:
    """Vectorized ``dist`` from each row of ``X`` to ``y``."""
    X = np.asarray(X, dtype=float)
    if space.kind == SEGMENT:
        return np.abs(X[:, 0] - np.asarray(y, dtype=float)[0])
    a = np.linalg.norm(X - y, axis=1)
    b = np.linalg.norm(X + y, axis=1)
    return 2.0 * np.arctan2(a, b)


def perimeter(space, x, y, z) -> float:
    return dist(space, x, y) + dist(space, y, z) + dist(space, z, x)


def _triangle_terms(space, t, x, y, z):
    if perimeter(space, x, y, z) >= 2 * math.pi:
        raise GeometryError("triangle perimeter must be < 2*pi")
    v = combine(space, t, x, y)
    return v, dist(space, x, y), dist(space, v, z), dist(space, x, z), dist(space, y, z)


def comparison_residual(space: ModelSpace, t, x, y, z, combine_fn=None) -> float:
    """LHS - RHS of the CAT(1) comparison inequality for ``v = t x (+) (1-t) y``:

        cos d(v,z) sin d(x,y) >= cos d(x,z) sin(t d(x,y)) + cos d(y,z) sin((1-t) d(x,y))

    Zero up to round-off on the model sphere.
    """
    if combine_fn is None:
        v, dxy, dvz, dxz, dyz = _triangle_terms(space, t, x, y, z)
    else:
        if perimeter(space, x, y, z) >= 2 * math.pi:
            raise GeometryError("triangle perimeter must be < 2*pi")
        v = combine_fn(space, t, x, y)
        dxy, dvz, dxz, dyz = dist(space, x, y), dist(space, v, z), dist(space, x, z), dist(space, y, z)
    return (math.cos(dvz) * math.sin(dxy)
            - (math.cos(dxz) * math.sin(t * dxy) + math.cos(dyz) * math.sin((1 - t) * dxy)))


def convexity_residual(space: ModelSpace, t, x, y, z) -> float:
    """``cos d(v,z) - [t cos d(x,z) + (1-t) cos d(y,z)]`` with ``v = t x (+) (1-t) y``.

    Nonnegative whenever ``d(x,z)`` and ``d(y,z)`` are at most pi/2. Without
    that restriction it can be negative on the sphere (take ``z`` near the
    antipode of the midpoint of a short segment).
    """
    _, _, dvz, dxz, dyz = _triangle_terms(space, t, x, y, z)
    return math.cos(dvz) - (t * math.cos(dxz) + (1 - t) * math.cos(dyz))


def sin_inequality_gap(delta, alpha) -> float:
    """``sin(delta) - sin(alpha delta) - sin((1-alpha) delta)`` without cancellation.

    Uses sin A + sin B - sin(A + B) = 4 sin(A/2) sin(B/2) sin((A+B)/2).
    """
    return -4.0 * math.sin(delta / 2) * math.sin(alpha * delta / 2) * math.sin((1 - alpha) * delta / 2)


def sin_inequality_holds(delta, alpha, tol=0.0) -> bool:
    """Whether ``sin d >= sin(a d) + sin((1-a) d) - tol`` for ``d`` in [0, pi/2], ``a`` in (0, 1).

    With the default ``tol = 0`` this is true only at ``delta = 0`` (or when
    the gap underflows, i.e. ``delta`` below about 1e-100).
    """
    if not 0.0 <= delta <= math.pi / 2:
        raise GeometryError("delta must lie in [0, pi/2]")
    if not 0.0 < alpha < 1.0:
        raise GeometryError("alpha must lie in (0, 1)")
    return sin_inequality_gap(delta, alpha) >= -tol


def random_points(space: ModelSpace, n, rng) -> np.ndarray:
    """``n`` uniform points of the working region (rows of the returned array).

    Sphere: normalized Gaussians, rejected outside the configured cap if any.
    """
    if space.kind == SEGMENT:
        return rng.uniform(space.lo, space.hi, size=(n, 1))
    m = space.ambient_dim
    if space.region_radius is None:
        g = rng.standard_normal((n, m))
        return g / np.linalg.norm(g, axis=1, keepdims=True)
    c = space.center_point()
    out = np.empty((0, m))
    while out.shape[0] < n:
        g = rng.standard_normal((max(4 * n, 64), m))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        out = np.vstack([out, g[dist_many(space, g, c) <= space.region_radius]])
    return out[:n]


def random_cap_points(center, radius, n, rng) -> np.ndarray:
    """Uniform points of the spherical cap ``{y : d(y, center) <= radius}`` by rejection."""
    center = np.asarray(center, dtype=float)
    m = center.shape[0]
    out = np.empty((0, m))
    while out.shape[0] < n:
        g = rng.standard_normal((max(8 * n, 64), m))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        d = 2.0 * np.arctan2(np.linalg.norm(g - center, axis=1), np.linalg.norm(g + center, axis=1))
        out = np.vstack([out, g[d <= radius]])
    return out[:n]


@lru_cache(maxsize=16)
def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    pts.setflags(write=False)
    return pts


@lru_cache(maxsize=16)
def _quasi_uniform_sphere(dim: int, n: int) -> np.ndarray:
    g = np.random.default_rng(12345).standard_normal((n, dim + 1))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    g.setflags(write=False)
    return g


def sphere_grid(dim: int, n: int) -> np.ndarray:
    """Deterministic near-uniform point set on S^dim: Fibonacci lattice on S^2,
    a fixed-seed Gaussian sample otherwise."""
    if dim == 2:
        return _fibonacci_sphere(int(n))
    if dim == 1:
        a = 2 * math.pi * (np.arange(n) + 0.5) / n
        return np.column_stack([np.cos(a), np.sin(a)])
    return _quasi_uniform_sphere(dim, int(n))


def tangent_basis(x) -> np.ndarray:
    """Orthonormal basis (rows) of the tangent space of the sphere at unit vector ``x``."""
    m = x.shape[0]
    # Householder reflection taking e_k to x; its other columns span x-perp.
    k = int(np.argmax(np.abs(x)))
    e = np.zeros(m)
    e[k] = 1.0
    v = x - e if x[k] < 0 else x + e
    H = np.eye(m) - 2.0 * np.outer(v, v) / (v @ v)
    cols = [j for j in range(m) if j != k]
    return H[:, cols].T


def exp_map(x, v, step):
    """Move from ``x`` along unit tangent directions ``v`` (rows) by ``step`` radians."""
    return math.cos(step) * x + math.sin(step) * v
