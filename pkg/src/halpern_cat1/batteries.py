"""Randomized property batteries for the sphere model."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from halpern_cat1 import geometry as geo

COMPARISON_TOL = 1e-9
CONVEXITY_TOL = 1e-12
DISTANCE_LAW_TOL = 1e-10
SWEEP_ALPHAS = tuple(round(0.1 * k, 1) for k in range(1, 10))
SWEEP_POINTS = 10_000
CORRUPTION = 1e-3


def sample_triples(n, rng, max_pairwise=None):
    """``n`` uniform (t, x, y, z) on S^2 with perimeter < 2 pi.

    With ``max_pairwise`` every pairwise distance is also kept below it
    (rejection sampling).
    """
    sp = geo.unit_sphere(2)
    T, X, Y, Z = [], [], [], []
    have = 0
    while have < n:
        k = max(2 * (n - have), 64)
        t = rng.uniform(0.0, 1.0, k)
        P = [geo.random_points(sp, k, rng) for _ in range(3)]
        dxy, dyz, dzx = (_rowdist(P[i], P[j]) for i, j in ((0, 1), (1, 2), (2, 0)))
        ok = (dxy + dyz + dzx < 2 * math.pi) & (dxy < math.pi - 1e-6)
        if max_pairwise is not None:
            ok &= (dxy < max_pairwise) & (dyz < max_pairwise) & (dzx < max_pairwise)
        T.append(t[ok]); X.append(P[0][ok]); Y.append(P[1][ok]); Z.append(P[2][ok])
        have += int(ok.sum())
    cat = lambda L: np.concatenate(L)[:n]  # noqa: E731
    return cat(T), cat(X), cat(Y), cat(Z)


def _rowdist(A, B):
    return 2.0 * np.arctan2(np.linalg.norm(A - B, axis=1), np.linalg.norm(A + B, axis=1))


def corrupted_combine(space, t, x, y):
    """``combine`` pushed off the geodesic by ``CORRUPTION`` radians (self-test only)."""
    v = geo.combine(space, t, x, y)
    basis = geo.tangent_basis(v)
    return geo.exp_map(v, basis[0], CORRUPTION)


@dataclass
class BatteryReport:
    count: int
    seed: int
    checks: dict = field(default_factory=dict)
    informational: dict = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c["ok"] for c in self.checks.values())

    def as_dict(self):
        return {"count": self.count, "seed": self.seed, "passed": self.passed,
                "checks": self.checks, "informational": self.informational,
                "elapsed_s": round(self.elapsed, 4)}


def comparison_battery(count, rng, combine_fn=None):
    sp = geo.unit_sphere(2)
    t, X, Y, Z = sample_triples(count, rng)
    worst = 0.0
    for k in range(count):
        r = geo.comparison_residual(sp, t[k], X[k], Y[k], Z[k], combine_fn=combine_fn)
        worst = max(worst, abs(r))
    return {"worst_abs_residual": float(worst), "tolerance": COMPARISON_TOL, "ok": bool(worst <= COMPARISON_TOL)}


def convexity_battery(count, rng, max_pairwise=None):
    """Minimum ``convexity_residual`` over sampled triples.

    ``max_pairwise = pi/2`` restricts to triangles inside the standing
    hypothesis of the convergence theory; ``None`` samples every admissible
    triangle (perimeter < 2 pi), where the inequality does not hold in general.
    """
    sp = geo.unit_sphere(2)
    t, X, Y, Z = sample_triples(count, rng, max_pairwise)
    worst = math.inf
    arg = None
    for k in range(count):
        r = geo.convexity_residual(sp, t[k], X[k], Y[k], Z[k])
        if r < worst:
            worst, arg = r, k
    if count == 0:
        worst = 0.0
    out = {"min_residual": float(worst), "tolerance": -CONVEXITY_TOL, "ok": bool(worst >= -CONVEXITY_TOL)}
    if arg is not None and worst < -CONVEXITY_TOL:
        out["witness"] = {"t": float(t[arg]), "x": X[arg].tolist(), "y": Y[arg].tolist(), "z": Z[arg].tolist()}
    return out


def distance_law_battery(count, rng, combine_fn=None):
    sp = geo.unit_sphere(2)
    t, X, Y, _ = sample_triples(count, rng)
    comb = combine_fn or geo.combine
    worst = 0.0
    for k in range(count):
        v = comb(sp, t[k], X[k], Y[k])
        dxy = geo.dist(sp, X[k], Y[k])
        worst = max(worst, abs(geo.dist(sp, X[k], v) - (1 - t[k]) * dxy),
                    abs(geo.dist(sp, Y[k], v) - t[k] * dxy))
    return {"worst_abs_error": float(worst), "tolerance": DISTANCE_LAW_TOL, "ok": bool(worst <= DISTANCE_LAW_TOL)}


def sin_inequality_sweep(points=SWEEP_POINTS, alphas=SWEEP_ALPHAS):
    """Evaluate the predicate on ``points`` values of delta in (1e-4, pi/2] per alpha."""
    deltas = np.linspace(1e-4, math.pi / 2, points + 1)[1:]
    true_hits = 0
    first = None
    for a in alphas:
        for d in deltas:
            if geo.sin_inequality_holds(float(d), a):
                true_hits += 1
                if first is None:
                    first = (float(d), a)
    return {"evaluations": len(deltas) * len(alphas), "true_count": true_hits,
            "first_true": first, "ok": true_hits == 0}


def run_geometry_battery(count=10_000, seed=0, corrupt=False) -> BatteryReport:
    """All sphere batteries at ``count`` samples each.

    Gated checks: comparison residual (all admissible triangles), convexity
    residual (pairwise distances < pi/2), interpolation distance law, and the
    sin-inequality sweep. The convexity minimum over all admissible triangles
    is reported as information only. ``corrupt`` swaps in a perturbed
    ``combine`` so the battery must fail.
    """
    t0 = time.perf_counter()
    rep = BatteryReport(count, seed)
    if count > 0:
        rng = np.random.default_rng(seed)
        comb = corrupted_combine if corrupt else None
        rep.checks["comparison"] = comparison_battery(count, rng, comb)
        rep.checks["distance_law"] = distance_law_battery(count, rng, comb)
        rep.checks["convexity_hypothesis_domain"] = convexity_battery(count, rng, math.pi / 2)
        rep.checks["sin_inequality_sweep"] = sin_inequality_sweep()
        rep.informational["convexity_all_admissible"] = convexity_battery(count, rng)
    rep.elapsed = time.perf_counter() - t0
    return rep
