"""Convex sets and functions on the model spaces, metric projections, resolvents.

The resolvents

    R_f x = argmin_y  f(y) + tan d(y,x) sin d(y,x)      (``resolvent_tansin``)
    R_f x = argmin_y  f(y) - log cos d(y,x)             (``resolvent_logcos``)

and projections onto intersections of caps are computed by ``minimize``: a
deterministic coarse grid followed by a derivative-free geodesic pattern search
with step halving. Objectives are vectorized: they take an ``(k, m)`` array of
points and return ``k`` values, ``+inf`` off the domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from halpern_cat1 import geometry as geo
from halpern_cat1._backend import CAP, kernels
from halpern_cat1.errors import GeometryError, SolverError

MEMBERSHIP_TOL = 1e-10
_STRICT_TOL = 1e-12
_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


# -- convex sets --------------------------------------------------------------

@dataclass(frozen=True)
class Cap:
    """Closed spherical cap ``{y : d(y, center) <= radius}``, radius < pi/2."""

    center: tuple
    radius: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if abs(np.linalg.norm(c) - 1.0) > geo.UNIT_NORM_TOL:
            raise GeometryError("cap center must be a unit vector")
        if not 0.0 <= self.radius < math.pi / 2:
            raise GeometryError("cap radius must lie in [0, pi/2)")

    @classmethod
    def make(cls, center, radius):
        return cls(tuple(float(v) for v in geo.normalize(center)), float(radius))

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    def contains(self, x, tol=MEMBERSHIP_TOL) -> bool:
        return kernels.dist(0, self.c, x) <= self.radius + tol

    def members(self, X, tol=MEMBERSHIP_TOL) -> np.ndarray:
        c = self.c
        d = 2.0 * np.arctan2(np.linalg.norm(X - c, axis=1), np.linalg.norm(X + c, axis=1))
        return d <= self.radius + tol

    def boundary_grid(self, n=720) -> np.ndarray:
        """``n`` points on the boundary circle (S^2 only)."""
        B = geo.tangent_basis(self.c)
        a = 2 * math.pi * np.arange(n) / n
        dirs = np.outer(np.cos(a), B[0]) + np.outer(np.sin(a), B[1])
        return math.cos(self.radius) * self.c + math.sin(self.radius) * dirs


@dataclass(frozen=True)
class Intersection:
    """Intersection of caps; nonemptiness is certified by a witness point."""

    caps: tuple
    witness: tuple

    def __post_init__(self):
        if not self.caps:
            raise GeometryError("intersection needs at least one cap")
        w = np.asarray(self.witness, dtype=float)
        for cap in self.caps:
            if not cap.contains(w):
                raise GeometryError("witness point is not in every cap; intersection not certified nonempty")

    def contains(self, x, tol=MEMBERSHIP_TOL) -> bool:
        return all(cap.contains(x, tol) for cap in self.caps)

    def members(self, X, tol=MEMBERSHIP_TOL) -> np.ndarray:
        mask = np.ones(len(X), dtype=bool)
        for cap in self.caps:
            mask &= cap.members(X, tol)
        return mask


@dataclass(frozen=True)
class SegmentInterval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise GeometryError("interval needs lo <= hi")

    def contains(self, x, tol=MEMBERSHIP_TOL) -> bool:
        return self.lo - tol <= float(x[0]) <= self.hi + tol

    def members(self, X, tol=MEMBERSHIP_TOL) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return (X[:, 0] >= self.lo - tol) & (X[:, 0] <= self.hi + tol)


def _caps_of(s) -> tuple:
    if isinstance(s, Cap):
        return (s,)
    if isinstance(s, Intersection):
        return s.caps
    return ()


# -- convex functions ---------------------------------------------------------

@dataclass(frozen=True)
class ConvexFunctionHandle:
    """A proper convex function with values in (-inf, +inf].

    ``constraints`` lists sets whose intersection is the effective domain; the
    solver uses them to pull trial points back onto the domain. ``known_argmin``
    is a tuple of points or a set handle when the minimizers are known.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    label: str
    known_argmin: object = None
    constraints: tuple = ()

    def __call__(self, x) -> float:
        return float(self.evaluator(np.asarray(x, dtype=float)[None, :])[0])

    def values(self, X) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(X, dtype=float)), dtype=float)


def check_proper(space, f: ConvexFunctionHandle, resolution=400) -> None:
    probes = [_probe_grid(space, resolution)]
    for s in f.constraints:
        probes.append(np.atleast_2d(_set_anchor(s)))
    if isinstance(f.known_argmin, tuple):
        probes.extend(np.atleast_2d(p) for p in f.known_argmin)
    if not np.any(np.isfinite(f.values(np.vstack(probes)))):
        raise GeometryError(f"function {f.label!r} is +inf on every probe point (not proper)")


def convex_function(space, evaluator, label, known_argmin=None, constraints=()):
    f = ConvexFunctionHandle(evaluator, label, known_argmin, tuple(constraints))
    check_proper(space, f)
    return f


def indicator_of(s) -> ConvexFunctionHandle:
    """0 on the set, +inf off it (the +inf never enters arithmetic)."""

    def ev(X):
        return np.where(s.members(X), 0.0, math.inf)

    return ConvexFunctionHandle(ev, f"indicator({type(s).__name__})", known_argmin=s, constraints=(s,))


def distance_to_point(space, c) -> ConvexFunctionHandle:
    c = geo.as_point(space, c)

    def ev(X):
        return geo.dist_many(space, X, c)

    return convex_function(space, ev, "distance", known_argmin=(c,))


def zero_function(space) -> ConvexFunctionHandle:
    return convex_function(space, lambda X: np.zeros(len(X)), "zero")


def weighted_sum(space, terms) -> ConvexFunctionHandle:
    """``sum_k w_k f_k`` for nonnegative weights; ``terms`` is a list of (w, f)."""
    terms = [(float(w), f) for w, f in terms]
    if any(w < 0 for w, _ in terms):
        raise GeometryError("weights must be nonnegative")

    def ev(X):
        total = np.zeros(len(X))
        for w, f in terms:
            v = f.values(X)
            # 0 * inf must stay inf only when w > 0
            total = total + (np.where(np.isinf(v), math.inf, w * v) if w > 0 else 0.0)
        return total

    constraints = tuple(s for _, f in terms for s in f.constraints)
    return convex_function(space, ev, "sum(" + ", ".join(f.label for _, f in terms) + ")",
                           known_argmin=_combined_argmin(space, [f for w, f in terms if w > 0]),
                           constraints=constraints)


def _combined_argmin(space, fs):
    # A point minimizing every positively weighted term minimizes the sum.
    pts = [f.known_argmin for f in fs if isinstance(f.known_argmin, tuple)]
    if not pts:
        return None
    common = []
    for p in pts[0]:
        ok = True
        for f in fs:
            a = f.known_argmin
            if a is None:
                ok = False
            elif isinstance(a, tuple):
                ok = ok and any(geo.dist(space, p, q) <= 1e-12 for q in a)
            else:
                ok = ok and a.contains(p)
        if ok:
            common.append(p)
    return tuple(common) or None


# -- projections --------------------------------------------------------------

def project_cap(space, cap: Cap, x) -> np.ndarray:
    """Nearest point of ``cap`` to ``x``: ``x`` itself if inside, otherwise the
    point of the geodesic from the center to ``x`` at distance ``radius``."""
    geo._check_dims(space, x)
    return kernels.apply_mapping(space.geom_code, CAP, cap.c, cap.radius, 0.0, x)


def project_caps_batch(cap: Cap, Y) -> np.ndarray:
    """Vectorized ``project_cap`` over the rows of ``Y``."""
    c = cap.c
    theta = 2.0 * np.arctan2(np.linalg.norm(Y - c, axis=1), np.linalg.norm(Y + c, axis=1))
    out = Y.copy()
    mask = theta > cap.radius
    if np.any(mask):
        th = theta[mask]
        s = np.sin(th)
        z = (np.sin(th - cap.radius) / s)[:, None] * c + (math.sin(cap.radius) / s)[:, None] * Y[mask]
        out[mask] = z / np.linalg.norm(z, axis=1, keepdims=True)
    return out


@dataclass
class SolverSettings:
    coarse_grid_resolution: int = 400
    refine_tolerance: float = 1e-8
    max_refine_iters: int = 4000

    def __post_init__(self):
        if self.coarse_grid_resolution <= 0 or self.refine_tolerance <= 0 or self.max_refine_iters <= 0:
            raise GeometryError("solver settings must all be positive")


@dataclass
class SolveResult:
    point: np.ndarray
    value: float
    grid_value: float
    evaluations: int
    iterations: int
    final_step: float = field(default=math.nan)


def project_convex(space, s, x, settings: SolverSettings | None = None) -> np.ndarray:
    """Metric projection of ``x`` onto a convex set handle."""
    settings = settings or SolverSettings()
    if isinstance(s, Cap):
        return project_cap(space, s, x)
    if isinstance(s, SegmentInterval):
        lo, hi = max(s.lo, space.lo), min(s.hi, space.hi)
        return np.array([min(max(float(x[0]), lo), hi)])
    if isinstance(s, Intersection):
        if s.contains(x, _STRICT_TOL):
            return np.array(x, dtype=float)
        x = np.asarray(x, dtype=float)
        res = minimize(space, lambda Y: geo.dist_many(space, Y, x), s.caps, settings,
                       starts=[np.asarray(s.witness, dtype=float)])
        return res.point
    raise GeometryError(f"unsupported set handle {type(s).__name__}")


# -- the argmin solver --------------------------------------------------------

def _probe_grid(space, n) -> np.ndarray:
    if space.kind == geo.SEGMENT:
        return np.linspace(space.lo, space.hi, n)[:, None]
    return np.asarray(geo.sphere_grid(space.dim, n))


def _set_anchor(s) -> np.ndarray:
    if isinstance(s, Cap):
        return s.c
    if isinstance(s, Intersection):
        return np.asarray(s.witness, dtype=float)
    return np.array([0.5 * (s.lo + s.hi)])


def _restore(space, Y, constraints, sweeps=3) -> np.ndarray:
    """Pull trial points back onto the constraint sets (cyclic projections)."""
    if space.kind == geo.SEGMENT:
        Y = np.clip(Y, space.lo, space.hi)
        for s in constraints:
            if isinstance(s, SegmentInterval):
                Y = np.clip(Y, s.lo, s.hi)
        return Y
    caps = [c for s in constraints for c in _caps_of(s)]
    for _ in range(sweeps if len(caps) > 1 else 1):
        for cap in caps:
            Y = project_caps_batch(cap, Y)
    return Y


def _feasible(space, Y, constraints) -> np.ndarray:
    mask = np.ones(len(Y), dtype=bool)
    for s in constraints:
        mask &= s.members(Y, _STRICT_TOL)
    return mask


def _directions(space, y, level, rng_cache={}):
    """Unit tangent directions at ``y`` for the pattern search, rotated per level."""
    if space.kind == geo.SEGMENT:
        return np.array([[1.0], [-1.0]])
    B = geo.tangent_basis(y)
    d = B.shape[0]
    if d == 1:
        return np.vstack([B, -B])
    if d == 2:
        a = level * _GOLDEN_ANGLE + 2 * math.pi * np.arange(8) / 8
        return np.outer(np.cos(a), B[0]) + np.outer(np.sin(a), B[1])
    rng = np.random.default_rng(level)
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    D = Q @ B
    return np.vstack([D, -D])


def minimize(space, objective, constraints=(), settings: SolverSettings | None = None,
             starts=(), window=None) -> SolveResult:
    """Minimize a vectorized objective over the space subject to ``constraints``.

    Phase 1 evaluates the objective on a deterministic grid (Fibonacci lattice
    on S^2, uniform on segments) plus ``starts``; ``window = (center, radius)``
    restricts the grid. Phase 2 runs a geodesic pattern search from the best
    point: trial steps along rotating tangent directions, pulled back onto the
    constraints, step halved on failure until below ``refine_tolerance``.
    Raises ``SolverError`` if nothing feasible and finite is found.
    """
    settings = settings or SolverSettings()
    constraints = tuple(constraints)
    if space.kind == geo.SPHERE and space.region_radius is not None:
        constraints = constraints + (Cap(space.region_center, space.region_radius),)
    grid = _probe_grid(space, settings.coarse_grid_resolution)
    if window is not None and space.kind == geo.SPHERE:
        grid = grid[geo.dist_many(space, grid, window[0]) < window[1]]
    starts = [np.asarray(s, dtype=float) for s in starts]
    starts = np.array(starts).reshape(-1, space.ambient_dim) if starts else np.empty((0, space.ambient_dim))

    def evaluate(Y):
        v = np.full(len(Y), math.inf)
        mask = _feasible(space, Y, constraints)
        if np.any(mask):
            v[mask] = objective(Y[mask])
        v[np.isnan(v)] = math.inf
        return v

    gvals = evaluate(grid) if len(grid) else np.empty(0)
    svals = evaluate(starts) if len(starts) else np.empty(0)
    evals = len(grid) + len(starts)
    allv = np.concatenate([svals, gvals])
    if not np.any(np.isfinite(allv)):
        raise SolverError("no feasible point with a finite objective value on the coarse grid")
    j = int(np.argmin(allv))
    y = np.vstack([starts, grid])[j].copy()
    fy = float(allv[j])
    grid_value = float(np.min(gvals)) if len(gvals) else math.inf

    if space.kind == geo.SEGMENT:
        step = (space.hi - space.lo) / max(settings.coarse_grid_resolution - 1, 1)
    else:
        step = min(0.25, math.sqrt(4 * math.pi / settings.coarse_grid_resolution))
    level = 0
    it = 0
    while step >= settings.refine_tolerance and it < settings.max_refine_iters:
        it += 1
        D = _directions(space, y, level)
        if space.kind == geo.SEGMENT:
            Y = y + step * D
        else:
            Y = geo.exp_map(y, D, step)
        Y = _restore(space, Y, constraints)
        v = evaluate(Y)
        evals += len(Y)
        k = int(np.argmin(v))
        if v[k] < fy:
            y, fy = Y[k].copy(), float(v[k])
        else:
            step *= 0.5
            level += 1
    if space.kind == geo.SPHERE:
        y = y / np.linalg.norm(y)
    return SolveResult(y, fy, grid_value, evals, it, step)


# -- resolvents ---------------------------------------------------------------

def _tansin(d):
    with np.errstate(over="ignore", invalid="ignore"):
        return np.where(d < math.pi / 2, np.tan(d) * np.sin(d), math.inf)


def _logcos(d):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(d < math.pi / 2, -np.log(np.cos(d)), math.inf)


PENALTIES = {"tansin": _tansin, "logcos": _logcos}


def _anchors(f: ConvexFunctionHandle):
    pts = [_set_anchor(s) for s in f.constraints]
    if isinstance(f.known_argmin, tuple):
        pts.extend(np.asarray(p, dtype=float) for p in f.known_argmin)
    return pts


def solve_resolvent(space, f: ConvexFunctionHandle, x, settings=None, penalty="tansin") -> SolveResult:
    """Full solver output for ``argmin_y f(y) + penalty(d(y, x))``."""
    if penalty not in PENALTIES:
        raise GeometryError(f"unknown penalty {penalty!r}")
    x = np.asarray(x, dtype=float)
    pen = PENALTIES[penalty]

    def objective(Y):
        fv = f.values(Y)
        return np.where(np.isinf(fv), math.inf, fv + pen(geo.dist_many(space, Y, x)))

    window = (x, math.pi / 2) if space.kind == geo.SPHERE else None
    starts = [x] + [a for a in _anchors(f) if space.kind == geo.SEGMENT or geo.dist(space, a, x) < math.pi / 2]
    return minimize(space, objective, f.constraints, settings, starts=starts, window=window)


def resolvent_tansin(space, f: ConvexFunctionHandle, x, settings=None) -> np.ndarray:
    """``argmin_y f(y) + tan d(y,x) sin d(y,x)``."""
    return solve_resolvent(space, f, x, settings, "tansin").point


def resolvent_logcos(space, f: ConvexFunctionHandle, x, settings=None) -> np.ndarray:
    """``argmin_y f(y) - log cos d(y,x)``."""
    return solve_resolvent(space, f, x, settings, "logcos").point


# -- nearest point of an intersection, with a certified gap ----------------------

@dataclass
class OracleResult:
    point: np.ndarray
    distance: float
    grid_resolution: int
    certified_gap: float
    lower_bound: float
    grid_value: float
    method: str


def _pair_distance(u, a: Cap, b: Cap) -> float:
    """Exact ``d(u, A n B)`` for two caps on S^2 (candidates: u, the single-cap
    projections, and the crossing points of the two boundary circles)."""
    cands = [u, _proj_cap_np(a, u), _proj_cap_np(b, u)]
    ca, cb = a.c, b.c
    g = float(ca @ cb)
    n = np.cross(ca, cb)
    nn = np.linalg.norm(n)
    if nn > 1e-15:
        n /= nn
        cra, crb = math.cos(a.radius), math.cos(b.radius)
        alpha = (cra - g * crb) / (1 - g * g)
        beta = (crb - g * cra) / (1 - g * g)
        base = alpha * ca + beta * cb
        s2 = 1.0 - float(base @ base)
        if s2 >= 0:
            s = math.sqrt(s2)
            cands += [base + s * n, base - s * n]
    best = math.inf
    for p in cands:
        p = p / np.linalg.norm(p)
        if a.contains(p, 1e-12) and b.contains(p, 1e-12):
            best = min(best, kernels.dist(0, u, p))
    if best == math.inf:
        raise GeometryError("two caps have empty intersection")
    return best


def _proj_cap_np(cap, u):
    return project_caps_batch(cap, u[None, :])[0]


def _tighten(p, caps):
    # round-off can leave the refined point a hair outside a cap
    for _ in range(3):
        bad = [c for c in caps if kernels.dist(0, c.c, p) > c.radius]
        if not bad:
            break
        for c in bad:
            p = kernels.apply_mapping(0, CAP, c.c, max(c.radius - 1e-13, 0.0), 0.0, p)
    return p


def nearest_point_oracle(space, sets, u, settings: SolverSettings | None = None) -> OracleResult:
    """Grid + refinement estimate of the nearest point to ``u`` in the intersection
    of ``sets`` (caps, cap intersections, or segment intervals).

    ``certified_gap`` is the refined distance minus a lower bound on the true
    minimum distance. The bound is the largest exact distance from ``u`` to a
    single cap or (on S^2) to a pair of caps; on S^2 the optimum is determined
    by at most two active caps, so the bound is tight and the gap measures the
    solver's suboptimality.
    """
    settings = settings or SolverSettings()
    u = np.asarray(u, dtype=float)
    if space.kind == geo.SEGMENT:
        lo, hi = space.lo, space.hi
        for s in sets:
            lo, hi = max(lo, s.lo), min(hi, s.hi)
        if lo > hi:
            raise GeometryError("declared fixed sets have empty intersection")
        p = np.array([min(max(u[0], lo), hi)])
        d = abs(p[0] - u[0])
        return OracleResult(p, d, settings.coarse_grid_resolution, 0.0, d, d, "interval clamp")
    caps = [c for s in sets for c in _caps_of(s)]
    if not caps:
        return OracleResult(u.copy(), 0.0, settings.coarse_grid_resolution, 0.0, 0.0, 0.0, "whole space")
    witnesses = [np.asarray(s.witness, dtype=float) for s in sets if isinstance(s, Intersection)]
    if len(caps) == 1:
        witnesses.append(caps[0].c)
    if not witnesses:
        raise GeometryError("intersection of fixed sets has no witness point")
    region = ()
    if space.region_radius is not None:
        region = (Cap(space.region_center, space.region_radius),)
    allcaps = tuple(caps) + region
    if all(c.contains(u, 0.0) for c in allcaps):
        return OracleResult(u.copy(), 0.0, settings.coarse_grid_resolution, 0.0, 0.0, 0.0, "u feasible")
    res = minimize(space, lambda Y: geo.dist_many(space, Y, u), tuple(caps), settings, starts=witnesses)
    p = _tighten(res.point, allcaps)
    d = kernels.dist(0, u, p)
    lb = max(max(0.0, kernels.dist(0, u, c.c) - c.radius) for c in allcaps)
    if space.dim == 2:
        for i in range(len(allcaps)):
            for j in range(i + 1, len(allcaps)):
                lb = max(lb, _pair_distance(u, allcaps[i], allcaps[j]))
    return OracleResult(p, d, settings.coarse_grid_resolution, max(d - lb, 0.0), lb, res.grid_value,
                        "grid+pattern search")
