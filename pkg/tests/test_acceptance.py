"""Acceptance suite: every criterion at its stated tolerance and time budget.

Each test records a PASS/FAIL line (printed in the terminal summary) before
asserting, so a failing criterion is still reported with its numbers.
"""
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from halpern_cat1 import batteries
from halpern_cat1 import geometry as geo
from halpern_cat1 import mappings as mp
from halpern_cat1 import prox
from halpern_cat1.cli import main
from halpern_cat1.config import compute_oracle, parse_config
from halpern_cat1.engine import run
from halpern_cat1.negation_example import negation_report

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
S2 = geo.unit_sphere(2)
E3 = np.array([0.0, 0.0, 1.0])
SAMPLES = 10_000


def pt(th, ph):
    return np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])


CAPS = tuple(prox.Cap.make(pt(0.3, a), 0.5) for a in (0, 2 * math.pi / 3, 4 * math.pi / 3))
PROJ = [mp.cap_projection(S2, c) for c in CAPS]
F = prox.Intersection(CAPS, tuple(E3))


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def three_caps_run(tmp_path_factory):
    """The desk run: oracle via the CLI, then the run itself, timed separately."""
    d = tmp_path_factory.mktemp("three_caps")
    cfg = str(CONFIGS / "three_caps.json")
    code, _ = timed(main, ["oracle", cfg, "--out-dir", str(d / "oracle")])
    assert code == 0
    oracle = json.loads((d / "oracle" / "oracle.json").read_text())
    code, elapsed = timed(main, ["run", cfg, "--out-dir", str(d / "run")])
    summary = json.loads((d / "run" / "summary.json").read_text())
    return {"dir": d, "cfg": cfg, "exit": code, "elapsed": elapsed, "oracle": oracle, "summary": summary}


# The full-domain convexity inequality fails on the sphere: sampled triangles with
# perimeter < 2 pi but a side >= pi/2 give residuals near -0.85. Reported, not hidden.
@pytest.mark.xfail(strict=True, reason="convexity inequality is false on admissible triangles with a side >= pi/2")
def test_criterion_01_geometry_battery(acceptance):
    def both():
        rng = np.random.default_rng(0)
        return batteries.comparison_battery(SAMPLES, rng), batteries.convexity_battery(SAMPLES, rng)

    (comp, conv), elapsed = timed(both)
    ok = comp["worst_abs_residual"] <= 1e-9 and conv["min_residual"] >= -1e-12 and elapsed < 1.0
    acceptance.record(1, "geometry battery", ok,
                      f"|comparison| max {comp['worst_abs_residual']:.2e}, convexity min "
                      f"{conv['min_residual']:.3e}, {elapsed:.2f}s")
    assert comp["worst_abs_residual"] <= 1e-9
    assert elapsed < 1.0
    assert conv["min_residual"] >= -1e-12, conv.get("witness")


def test_criterion_01_convexity_on_short_sides():
    # informational companion: the inequality holds once every side is < pi/2
    conv = batteries.convexity_battery(SAMPLES, np.random.default_rng(1), math.pi / 2)
    assert conv["min_residual"] >= -1e-12


def test_criterion_02_sin_inequality_sweep(acceptance):
    rep, elapsed = timed(batteries.sin_inequality_sweep, SAMPLES)
    ok = rep["true_count"] == 0 and rep["evaluations"] == 9 * SAMPLES and elapsed < 1.0
    acceptance.record(2, "sin-inequality sweep", ok,
                      f"{rep['true_count']} true of {rep['evaluations']}, {elapsed:.2f}s")
    assert ok


def test_criterion_03_w_mapping_fixed_points(acceptance):
    def check():
        W = mp.build_w_mapping(S2, PROJ, [0.5, 0.5, 0.5])
        rng = np.random.default_rng(3)
        P = geo.random_cap_points(E3, 0.5, 5000, rng)
        P = P[F.members(P, 0.0)][:100]
        fixed = max(geo.dist(S2, W(z), z) for z in P)
        worst = 0.0
        for x in geo.random_cap_points(E3, 1.2, 10, rng):
            for _ in range(100_000):
                y = W(x)
                if geo.dist(S2, y, x) == 0.0:
                    break
                x = y
            worst = max(worst, max(mp.residuals(S2, PROJ, x)))
        return len(P), fixed, worst

    (count, fixed, worst), elapsed = timed(check)
    ok = count == 100 and fixed <= 1e-11 and worst <= 1e-6 and elapsed < 5.0
    acceptance.record(3, "W fixes the common fixed points", ok,
                      f"max d(Wz,z) {fixed:.1e}, Picard residual {worst:.1e}, {elapsed:.2f}s")
    assert ok


def test_criterion_04_three_caps_run(acceptance, three_caps_run):
    r = three_caps_run
    s, orc = r["summary"], r["oracle"]
    u = np.array(parse_config((CONFIGS / "three_caps.json").read_bytes()).problem.u)
    x1 = np.array(parse_config((CONFIGS / "three_caps.json").read_bytes()).problem.x1)
    inside = geo.dist(S2, u, E3) <= 0.7 and geo.dist(S2, x1, E3) <= 0.7
    same_target = s["oracle"]["point"] == orc["point"]
    ok = (r["exit"] == 0 and inside and same_target and orc["certified_gap"] <= 1e-5
          and s["final_d_oracle"] <= 5e-3 and s["iterations"] <= 200_000 and s["conditions"]["c"]
          and r["elapsed"] < 10.0)
    acceptance.record(4, "three-cap Halpern run", ok,
                      f"gap {orc['certified_gap']:.1e}, d(x_N,P_F u) {s['final_d_oracle']:.3e} "
                      f"at N={s['iterations']}, {r['elapsed']:.2f}s")
    assert ok


def test_criterion_05_invariants(acceptance, three_caps_run):
    inv = three_caps_run["summary"]["invariants"]
    ok = inv["lyapunov_ok"] and inv["fejer_ok"] and inv["bounded_ok"] and inv["min_lyapunov_slack"] >= -1e-10
    acceptance.record(5, "Lyapunov, Fejer and boundedness invariants", ok,
                      f"min slack {inv['min_lyapunov_slack']:.2e}, fejer margin {inv['min_fejer_margin']:.2e}")
    assert ok


def _a_condition_config():
    raw = json.loads((CONFIGS / "three_caps.json").read_text())
    raw["space"] = {"kind": "sphere", "dim": 2, "diameter_bound": 1.4, "center": [0, 0, 1]}
    raw["beta"] = {"kind": "power", "q": 1.0}
    return parse_config(json.dumps(raw))


def test_criterion_06_gamma_lower_bounds(acceptance, three_caps_run):
    inv_c = three_caps_run["summary"]["invariants"]
    cfg = _a_condition_config()
    cfg.problem.oracle_target = compute_oracle(cfg).point
    res = run(cfg.problem)
    inv_a = res.trace.invariant_report()
    ok_c = inv_c["undefined_gamma_rows"] == 0 and inv_c["min_gamma_margin_c"] >= -1e-12
    ok_a = (res.conditions.a and res.converged and inv_a["undefined_gamma_rows"] == 0
            and inv_a["min_gamma_margin_a"] >= -1e-12)
    acceptance.record(6, "gamma lower bounds", ok_c and ok_a,
                      f"beta^2 pi^2/16 margin {inv_c['min_gamma_margin_c']:.2e}, "
                      f"beta cos M margin {inv_a['min_gamma_margin_a']:.2e} (M={inv_a['max_d_u_w']:.3f})")
    assert ok_c and ok_a


def test_criterion_07_resolvent_of_indicator(acceptance):
    cap = prox.Cap.make(E3, 0.4)
    f = prox.indicator_of(cap)

    def worst_error():
        worst = 0.0
        for x in geo.random_cap_points(E3, 1.4, 100, np.random.default_rng(7)):
            p = prox.project_cap(S2, cap, x)
            for solve in (prox.resolvent_tansin, prox.resolvent_logcos):
                worst = max(worst, geo.dist(S2, solve(S2, f, x), p))
        return worst

    worst, elapsed = timed(worst_error)
    ok = worst <= 1e-4 and elapsed < 30.0
    acceptance.record(7, "resolvent of an indicator is the projection", ok,
                      f"max distance {worst:.1e}, {elapsed:.2f}s")
    assert ok


def test_criterion_08_resolvent_run(acceptance, tmp_path):
    cfg = str(CONFIGS / "resolvents.json")
    code, elapsed = timed(main, ["run", cfg, "--out-dir", str(tmp_path)])
    s = json.loads((tmp_path / "summary.json").read_text())
    c = parse_config((CONFIGS / "resolvents.json").read_bytes()).problem.mappings[1].fixed_set[0]
    analytic = np.array(s["oracle"]["point"]).tolist() == np.asarray(c).tolist()
    d = geo.dist(S2, np.array(s["final_point"]), c)
    ok = code == 0 and analytic and d <= 5e-3 and s["iterations"] <= 200_000 and elapsed < 60.0
    acceptance.record(8, "resolvent Halpern run", ok,
                      f"d(x_N,c) {d:.3e} at N={s['iterations']}, {elapsed:.2f}s")
    assert ok


def test_criterion_09_negation_example(acceptance):
    rep, elapsed = timed(negation_report)
    q, w = rep["quasinonexpansive"], rep["strong_witness"]
    ok = (q["grid_points"] == SAMPLES and q["violations"] == 0 and all(r == 1.0 for r in w["cosine_ratios"])
          and all(r == 1.0 for r in w["residuals"]) and elapsed < 1.0)
    acceptance.record(9, "negation map report", ok,
                      f"{q['violations']} violations on {q['grid_points']} points, {elapsed:.2f}s")
    assert ok


def test_criterion_10_determinism(acceptance, three_caps_run):
    r = three_caps_run
    again = r["dir"] / "again"
    assert main(["run", r["cfg"], "--out-dir", str(again)]) == 0
    ok = (r["dir"] / "run" / "trace.csv").read_bytes() == (again / "trace.csv").read_bytes()
    acceptance.record(10, "byte-identical trace on repeat", ok)
    assert ok
