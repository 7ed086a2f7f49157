import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halpern_cat1 import geometry as geo
from halpern_cat1 import prox
from halpern_cat1.errors import GeometryError, SolverError

S2 = geo.unit_sphere(2)
E1, E2, E3 = np.eye(3)


def pt(th, ph):
    return np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])


def bisect(g, lo, hi, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if g(lo) * g(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


CAP = prox.Cap.make(E3, 0.4)


def test_cap_validation():
    with pytest.raises(GeometryError):
        prox.Cap((1.0, 1.0, 0.0), 0.3)
    with pytest.raises(GeometryError):
        prox.Cap.make(E3, math.pi / 2)


def test_project_cap_inside_and_outside():
    x = pt(0.2, 1.0)
    assert np.array_equal(prox.project_cap(S2, CAP, x), x)
    y = pt(1.1, 0.7)
    p = prox.project_cap(S2, CAP, y)
    assert geo.dist(S2, E3, p) == pytest.approx(0.4, abs=1e-12)
    assert geo.dist(S2, y, p) == pytest.approx(1.1 - 0.4, abs=1e-12)
    np.testing.assert_allclose(p, pt(0.4, 0.7), atol=1e-12)


def test_project_caps_batch_matches_scalar():
    Y = geo.random_points(S2, 200, np.random.default_rng(1))
    Y = Y[geo.dist_many(S2, Y, -E3) > 1e-3]
    B = prox.project_caps_batch(CAP, Y)
    for y, b in zip(Y, B):
        np.testing.assert_allclose(b, prox.project_cap(S2, CAP, y), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(-math.pi, math.pi))
def test_projection_is_nearest_on_boundary_samples(th, ph):
    x = pt(th, ph)
    p = prox.project_cap(S2, CAP, x)
    if CAP.contains(x, 0.0):
        assert geo.dist(S2, x, p) == 0.0
    else:
        assert geo.dist(S2, x, p) <= geo.dist_many(S2, CAP.boundary_grid(2000), x).min() + 1e-12


def test_intersection_needs_valid_witness():
    a, b = prox.Cap.make(pt(0.3, 0.0), 0.4), prox.Cap.make(pt(0.3, math.pi), 0.4)
    prox.Intersection((a, b), tuple(E3))
    with pytest.raises(GeometryError):
        prox.Intersection((a, b), tuple(pt(0.6, 0.0)))


def test_indicator_and_distance_values():
    f = prox.indicator_of(CAP)
    assert f(E3) == 0.0
    assert f(E1) == math.inf
    g = prox.distance_to_point(S2, E3)
    assert g(E1) == pytest.approx(math.pi / 2)
    assert np.array_equal(g.known_argmin[0], E3)


def test_weighted_sum_known_argmin():
    c = pt(0.1, 0.2)
    f = prox.weighted_sum(S2, [(1.0, prox.indicator_of(CAP)), (2.0, prox.distance_to_point(S2, c))])
    assert len(f.known_argmin) == 1
    np.testing.assert_array_equal(f.known_argmin[0], c)
    assert f(c) == pytest.approx(0.0)
    assert f(E1) == math.inf


def test_improper_function_rejected():
    with pytest.raises(GeometryError):
        prox.convex_function(S2, lambda X: np.full(len(X), math.inf), "nowhere")


def test_minimize_infeasible_raises():
    a, b = prox.Cap.make(E3, 0.2), prox.Cap.make(-E3, 0.2)
    with pytest.raises(SolverError):
        prox.minimize(S2, lambda Y: np.zeros(len(Y)), (a, b))


# -- resolvents ----------------------------------------------------------------

@pytest.mark.parametrize("penalty", ["tansin", "logcos"])
def test_resolvent_of_indicator_is_projection(penalty):
    rng = np.random.default_rng(5)
    f = prox.indicator_of(CAP)
    for x in geo.random_cap_points(E3, 1.4, 10, rng):
        r = prox.solve_resolvent(S2, f, x, penalty=penalty).point
        assert geo.dist(S2, r, prox.project_cap(S2, CAP, x)) <= 1e-6


def test_resolvent_distance_tansin_matches_stationarity():
    # minimizer lies on [x, c]; with s = d(y, x) it solves sin s (1 + sec^2 s) = 1
    c = E3
    x = pt(0.9, 0.4)
    s_star = bisect(lambda s: math.sin(s) * (1 + 1 / math.cos(s) ** 2) - 1, 0.0, 0.9)
    expect = geo.combine(S2, 1 - s_star / 0.9, x, c)
    got = prox.resolvent_tansin(S2, prox.distance_to_point(S2, c), x)
    assert geo.dist(S2, got, expect) <= 1e-6


def test_resolvent_distance_logcos_moves_quarter_pi():
    # d/ds [-log cos s] = tan s = 1 at s = pi/4
    c = E3
    x = pt(1.2, -0.5)
    expect = geo.combine(S2, 1 - (math.pi / 4) / 1.2, x, c)
    got = prox.resolvent_logcos(S2, prox.distance_to_point(S2, c), x)
    assert geo.dist(S2, got, expect) <= 1e-6


def test_resolvent_distance_close_point_lands_on_center():
    c = E3
    x = pt(0.1, 0.0)
    got = prox.resolvent_logcos(S2, prox.distance_to_point(S2, c), x)
    assert geo.dist(S2, got, c) <= 1e-6


def test_resolvent_fixed_points_are_minimizers():
    f = prox.indicator_of(CAP)
    z = pt(0.2, 2.0)
    for pen in ("tansin", "logcos"):
        assert geo.dist(S2, prox.solve_resolvent(S2, f, z, penalty=pen).point, z) <= 1e-8


def test_resolvent_on_segment_clamps():
    seg = geo.segment(-0.7, 0.7)
    f = prox.indicator_of(prox.SegmentInterval(-0.1, 0.2))
    for x, want in ((0.5, 0.2), (-0.6, -0.1), (0.05, 0.05)):
        r = prox.resolvent_tansin(seg, f, np.array([x]))
        assert abs(r[0] - want) <= 1e-6


def test_resolvent_respects_region():
    sp = geo.unit_sphere(2, diameter_bound=1.0, center=E3)
    c = pt(0.4, 0.0)
    x = pt(0.45, math.pi)
    r = prox.resolvent_tansin(sp, prox.distance_to_point(sp, c), x)
    assert geo.dist(sp, E3, r) <= 0.5 + 1e-10


# -- nearest point oracle ----------------------------------------------------------

def test_oracle_single_cap_matches_projection():
    u = pt(1.0, 0.3)
    res = prox.nearest_point_oracle(S2, [CAP], u)
    assert geo.dist(S2, res.point, prox.project_cap(S2, CAP, u)) <= 1e-6
    assert res.certified_gap <= 1e-9


def test_oracle_u_inside_returns_u():
    u = pt(0.1, 0.3)
    res = prox.nearest_point_oracle(S2, [CAP], u)
    assert np.array_equal(res.point, u)
    assert res.distance == 0.0


def test_oracle_nested_caps_use_smaller():
    small = prox.Cap.make(pt(0.1, 0.0), 0.2)
    big = prox.Cap.make(E3, 0.5)
    assert all(big.contains(b) for b in small.boundary_grid(100))
    u = pt(1.0, 2.0)
    res = prox.nearest_point_oracle(S2, [prox.Intersection((big, small), tuple(small.c))], u)
    assert geo.dist(S2, res.point, prox.project_cap(S2, small, u)) <= 1e-6
    assert big.contains(res.point) and small.contains(res.point, 0.0)


def test_oracle_three_caps_certified():
    caps = tuple(prox.Cap.make(pt(0.3, a), 0.5) for a in (0, 2 * math.pi / 3, 4 * math.pi / 3))
    F = prox.Intersection(caps, tuple(E3))
    u = pt(0.65, 0.9)
    res = prox.nearest_point_oracle(S2, [F], u)
    assert res.certified_gap <= 1e-5
    assert all(c.contains(res.point, 0.0) for c in caps)
    # no sampled point of F is closer to u
    P = geo.random_cap_points(E3, 0.6, 20000, np.random.default_rng(0))
    P = P[F.members(P, 0.0)]
    assert geo.dist_many(S2, P, u).min() >= res.distance - 1e-9


def test_oracle_segment_interval():
    seg = geo.segment(-0.7, 0.7)
    res = prox.nearest_point_oracle(seg, [prox.SegmentInterval(-0.2, 0.1), prox.SegmentInterval(0.0, 0.5)],
                                    np.array([0.6]))
    assert res.point[0] == pytest.approx(0.1)
