"""Compiled vs pure-Python kernels on the three-cap Halpern loop and the primitives.

    python3 benchmarks/bench_kernels.py [--steps 50000] [--repeat 3]
"""
import argparse
import math
import time

import numpy as np

from halpern_cat1._backend import CAP, compiled_kernels, python_kernels


def _pt(th, ph):
    return np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])


def three_caps():
    centers = np.array([_pt(0.3, a) for a in (0, 2 * math.pi / 3, 4 * math.pi / 3)])
    kinds = np.full(3, CAP, dtype=np.intc)
    scal = np.array([[0.5, 0.0]] * 3)
    alphas = np.array([[0.5, 0.5, 0.5]])
    return kinds, centers, scal, alphas


def best_of(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench(mod, steps, repeat):
    kinds, centers, scal, alphas = three_caps()
    u, x1 = _pt(0.65, 0.9), _pt(0.6, 3.5)
    x, y = _pt(0.2, 0.1), _pt(1.1, 2.0)
    n_prim = 20_000

    def loop():
        out = mod.run_fused(0, u, x1, kinds, centers, scal, alphas, 0, 0.5, None, steps, 1e-300, None, 1)
        assert out[1] == steps

    def prims():
        for _ in range(n_prim):
            mod.dist(0, x, y)
            mod.combine(0, 0.3, x, y)

    return {"halpern_loop_s": best_of(loop, repeat), "primitives_s": best_of(prims, repeat)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=50_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rows = {"python": bench(python_kernels, args.steps, args.repeat)}
    comp = compiled_kernels()
    if comp is None:
        print("compiled extension not built; python fallback only")
    else:
        rows["compiled"] = bench(comp, args.steps, args.repeat)

    print(f"{'backend':<10}{'loop (' + str(args.steps) + ' steps)':>24}{'us/step':>10}{'dist+combine x2e4':>20}")
    for name, r in rows.items():
        print(f"{name:<10}{r['halpern_loop_s']:>23.4f}s{1e6 * r['halpern_loop_s'] / args.steps:>10.2f}"
              f"{r['primitives_s']:>19.4f}s")
    if "compiled" in rows:
        sp = rows["python"]["halpern_loop_s"] / rows["compiled"]["halpern_loop_s"]
        print(f"loop speedup compiled/python: {sp:.1f}x")


if __name__ == "__main__":
    main()
