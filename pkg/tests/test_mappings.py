import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from halpern_cat1 import geometry as geo
from halpern_cat1 import mappings as mp
from halpern_cat1 import prox
from halpern_cat1._backend import kernels
from halpern_cat1.errors import GeometryError

S2 = geo.unit_sphere(2)
E1, E2, E3 = np.eye(3)


def pt(th, ph):
    return np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])


CAPS = tuple(prox.Cap.make(pt(0.3, a), 0.5) for a in (0, 2 * math.pi / 3, 4 * math.pi / 3))
PROJ = [mp.cap_projection(S2, c) for c in CAPS]
F = prox.Intersection(CAPS, tuple(E3))


def counting(T):
    calls = []

    def ev(x):
        calls.append(1)
        return T(x)

    return mp.MappingHandle(ev, T.label, T.fixed_set, T.quasinonexpansive), calls


def test_combine_with_identity_weights():
    T = PROJ[0]
    x = pt(1.2, 0.4)
    assert np.array_equal(mp.convex_combine_with_identity(S2, 0.0, T)(x), x)
    np.testing.assert_array_equal(mp.convex_combine_with_identity(S2, 1.0, T)(x), T(x))
    S = mp.convex_combine_with_identity(S2, 0.5, T)
    sx = S(x)
    np.testing.assert_allclose(sx, geo.combine(S2, 0.5, T(x), x), atol=1e-15)
    assert geo.dist(S2, x, sx) == pytest.approx(geo.dist(S2, x, T(x)) / 2, abs=1e-12)
    with pytest.raises(GeometryError):
        mp.convex_combine_with_identity(S2, 1.2, T)


def test_combine_with_identity_flags():
    S = mp.convex_combine_with_identity(S2, 0.3, PROJ[0])
    assert S.quasinonexpansive and S.delta_demiclosed
    R = mp.resolvent_mapping(S2, prox.indicator_of(CAPS[0]))
    assert not mp.convex_combine_with_identity(S2, 0.3, R).delta_demiclosed


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 0.75), st.floats(-math.pi, math.pi))
def test_combination_stays_quasinonexpansive(alpha, th, ph):
    # x within 0.75 of e3 keeps every d(x, p) below pi/2
    S = mp.convex_combine_with_identity(S2, alpha, PROJ[1])
    x = pt(th, ph)
    for p in CAPS[1].boundary_grid(16):
        assert geo.dist(S2, S(x), p) <= geo.dist(S2, x, p) + 1e-12


def test_combination_can_move_away_from_far_fixed_points():
    # beyond pi/2 the geodesic toward T x bends away from a nearly antipodal p
    S = mp.convex_combine_with_identity(S2, 0.125, PROJ[1])
    x = pt(2.5, -1.0)
    worst = max(geo.dist(S2, S(x), p) - geo.dist(S2, x, p) for p in CAPS[1].boundary_grid(16))
    assert worst > 1e-3


def test_w_mapping_of_identities_is_identity():
    Ws = mp.build_w_mapping(S2, [mp.identity(S2)] * 3, [0.3, 0.5, 0.7])
    for x in geo.random_points(S2, 20, np.random.default_rng(0)):
        np.testing.assert_array_equal(Ws(x), x)


def test_w_mapping_matches_hand_recursion():
    T = PROJ[0]
    W = mp.build_w_mapping(S2, [T, T], [0.5, 0.5])
    x = pt(1.3, 0.2)
    u1 = geo.combine(S2, 0.5, T(x), x)
    u2 = geo.combine(S2, 0.5, T(u1), x)
    np.testing.assert_array_equal(W(x), u2)


def test_w_mapping_calls_each_map_once():
    wrapped = [counting(T) for T in PROJ]
    W = mp.build_w_mapping(S2, [w for w, _ in wrapped], [0.5, 0.4, 0.6])
    W(pt(1.0, 1.0))
    assert [len(c) for _, c in wrapped] == [1, 1, 1]


def test_w_mapping_errors():
    with pytest.raises(GeometryError):
        mp.build_w_mapping(S2, [], [])
    with pytest.raises(GeometryError):
        mp.build_w_mapping(S2, PROJ, [0.5, 0.5])
    with pytest.raises(GeometryError):
        mp.build_w_mapping(S2, PROJ[:1], [1.5])


def test_common_fixed_points_are_fixed_by_w():
    W = mp.build_w_mapping(S2, PROJ, [0.5, 0.4, 0.6])
    P = geo.random_cap_points(E3, 0.5, 4000, np.random.default_rng(2))
    P = P[F.members(P, 0.0)][:100]
    assert len(P) == 100
    assert max(geo.dist(S2, W(z), z) for z in P) <= 1e-12


def test_points_outside_intersection_move():
    W = mp.build_w_mapping(S2, PROJ, [0.5, 0.5, 0.5])
    P = geo.random_cap_points(E3, 1.2, 500, np.random.default_rng(4))
    P = P[~F.members(P, 1e-6)]
    assert min(geo.dist(S2, W(z), z) for z in P) > 0.0


def test_kernel_w_eval_matches_python_recursion():
    kinds, centers, scal = mp.pack_kernel_family(PROJ)
    alphas = np.array([0.5, 0.4, 0.6])
    W = mp.build_w_mapping(S2, PROJ, alphas)
    for x in geo.random_cap_points(E3, 1.3, 50, np.random.default_rng(6)):
        np.testing.assert_allclose(kernels.w_eval(0, kinds, centers, scal, alphas, x), W(x), atol=1e-15)


def test_w_schedule_validation():
    with pytest.raises(GeometryError, match=r"a must lie in \(0, 1/2\)"):
        mp.WSchedule.constant_alphas([0.5], 0.6)
    with pytest.raises(GeometryError):
        mp.WSchedule.constant_alphas([0.7], 0.4)
    with pytest.raises(GeometryError):
        mp.WSchedule(3, 0.4, constant=(0.5, 0.5))
    ws = mp.WSchedule(2, 0.25, rule=lambda n, i: 0.5 if n % 2 else 0.3)
    np.testing.assert_array_equal(ws.row(1), [0.5, 0.5])
    np.testing.assert_array_equal(ws.row(2), [0.3, 0.3])
    assert ws.table(4).shape == (4, 2)
    bad = mp.WSchedule(1, 0.25, rule=lambda n, i: 0.9)
    with pytest.raises(GeometryError):
        bad.alpha(1, 1)


def test_constant_schedule_table_is_single_row():
    assert mp.WSchedule.constant_alphas([0.5, 0.5], 0.4).table(1000).shape == (1, 2)


def test_geodesic_contraction():
    p = pt(0.4, 0.3)
    T = mp.geodesic_contraction(S2, p, 0.25)
    x = pt(1.0, -1.0)
    assert geo.dist(S2, T(x), p) == pytest.approx(0.75 * geo.dist(S2, x, p), abs=1e-12)
    assert geo.dist(S2, T(p), p) <= 1e-15


def test_segment_negation():
    seg = geo.segment(-0.7, 0.7)
    T = mp.segment_negation(seg)
    assert T(np.array([0.5]))[0] == -0.5
    assert T(np.array([0.0]))[0] == 0.0
    with pytest.raises(GeometryError):
        mp.segment_negation(geo.segment(-0.5, 0.7))


def test_declared_finite_fixed_sets_are_fixed():
    seg = geo.segment(-0.7, 0.7)
    for sp, T in ((seg, mp.segment_negation(seg)), (S2, mp.geodesic_contraction(S2, E3, 0.5))):
        for p in T.fixed_set:
            assert geo.dist(sp, T(p), p) <= 1e-10


def test_sampled_check_passes_and_falsifies():
    rep = mp.sampled_quasinonexpansive_check(S2, PROJ[0], list(CAPS[0].boundary_grid(8)), 200, seed=1)
    assert rep.passed and rep.samples == 200 and rep.seed == 1
    rot = mp.MappingHandle(lambda x: np.array([-x[1], x[0], x[2]]), "rotate", quasinonexpansive=True)
    rep = mp.sampled_quasinonexpansive_check(S2, rot, [E1], 200, seed=1)
    assert not rep.passed and rep.max_violation > 0.1


def test_residuals():
    x = pt(1.0, 0.0)
    r = mp.residuals(S2, PROJ, x)
    assert len(r) == 3
    assert r[0] == pytest.approx(geo.dist(S2, x, PROJ[0](x)))
