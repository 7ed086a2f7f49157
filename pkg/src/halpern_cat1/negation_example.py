"""``T x = -x`` on [-0.7, 0.7]: quasinonexpansive but not strongly quasinonexpansive."""
from __future__ import annotations

import math
import time

import numpy as np

from halpern_cat1 import geometry as geo
from halpern_cat1 import mappings as mp
from halpern_cat1.engine import BetaSchedule, HalpernProblem, run

HALF_WIDTH = 0.7
GRID_POINTS = 10_000
WITNESS_VALUE = 0.5
WITNESS_LENGTH = 20


def negation_report(grid_points=GRID_POINTS, witness_length=WITNESS_LENGTH) -> dict:
    """Both facts about the negation map, plus a short Halpern run.

    Quasinonexpansiveness: ``|T x - 0| <= |x - 0|`` on a uniform grid (F(T) = {0}).
    Witness: along the constant sequence ``x_n = 0.5`` the cosine ratio
    ``cos d(x_n, 0) / cos d(T x_n, 0)`` is identically 1 while the residual
    ``d(T x_n, x_n)`` stays at 1, so the ratio reaching its extremal value does
    not force ``T x_n - x_n -> 0``.
    """
    t0 = time.perf_counter()
    sp = geo.segment(-HALF_WIDTH, HALF_WIDTH)
    T = mp.segment_negation(sp)
    zero = np.array([0.0])
    grid = np.linspace(-HALF_WIDTH, HALF_WIDTH, grid_points).reshape(-1, 1)
    qne = mp.sampled_quasinonexpansive_check(sp, T, [zero], len(grid), points=grid, tol=0.0)
    violations = sum(1 for x in grid if geo.dist(sp, T(x), zero) > geo.dist(sp, x, zero))
    fixed_residual = geo.dist(sp, T(zero), zero)

    x = np.array([WITNESS_VALUE])
    ratios, res = [], []
    for _ in range(witness_length):
        ratios.append(math.cos(geo.dist(sp, x, zero)) / math.cos(geo.dist(sp, T(x), zero)))
        res.append(geo.dist(sp, T(x), x))
    ratio_ok = all(r == 1.0 for r in ratios)
    res_ok = all(abs(r - 2 * WITNESS_VALUE) <= 1e-15 for r in res)

    prob = HalpernProblem(sp, [T], mp.WSchedule.constant_alphas([0.5], 0.4), BetaSchedule.power_law(1.0),
                          [WITNESS_VALUE], [WITNESS_VALUE], zero, 100_000, 1e-4)
    hr = run(prob)
    return {
        "space": [-HALF_WIDTH, HALF_WIDTH],
        "quasinonexpansive": {
            "grid_points": int(grid_points),
            "violations": int(violations),
            "max_excess": qne.max_violation,
            "fixed_point_residual": fixed_residual,
            "holds": violations == 0 and fixed_residual == 0.0,
        },
        "strong_witness": {
            "sequence": f"x_n = {WITNESS_VALUE}",
            "cosine_ratios": ratios,
            "residuals": res,
            "ratio_identically_one": ratio_ok,
            "residual_identically_one": res_ok,
            "not_strongly_quasinonexpansive": ratio_ok and res_ok,
        },
        "halpern_run": {
            "beta": "(n+1)^-1",
            "u": WITNESS_VALUE,
            "status": hr.status,
            "iterations": hr.steps,
            "final_point": float(hr.final_point[0]),
        },
        "passed": violations == 0 and ratio_ok and res_ok,
        "elapsed_s": round(time.perf_counter() - t0, 4),
    }


def format_report(rep) -> str:
    q, w, h = rep["quasinonexpansive"], rep["strong_witness"], rep["halpern_run"]
    lines = [
        "Negation map T x = -x on [-0.7, 0.7], F(T) = {0}",
        "",
        f"quasinonexpansive on a {q['grid_points']}-point grid: {'yes' if q['holds'] else 'NO'}"
        f" (violations {q['violations']}, max excess {q['max_excess']:.3g})",
        f"constant sequence {w['sequence']}:",
        f"  cosine ratio  min {min(w['cosine_ratios']):.17g}  max {max(w['cosine_ratios']):.17g}",
        f"  residual      min {min(w['residuals']):.17g}  max {max(w['residuals']):.17g}",
        f"  ratio -> 1 while residual stays 1: not strongly quasinonexpansive"
        f" {'(shown)' if w['not_strongly_quasinonexpansive'] else '(NOT shown)'}",
        f"Halpern run, beta_n = {h['beta']}, u = {h['u']}: {h['status']} after {h['iterations']} steps,"
        f" x_N = {h['final_point']:.3g}",
        "",
        f"result: {'PASS' if rep['passed'] else 'FAIL'}",
    ]
    return "\n".join(lines)
