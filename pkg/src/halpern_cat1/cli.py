"""Command-line front end.

    halpern-cat1 run <config.json> [--out-dir D] [--stride k]
    halpern-cat1 oracle <config.json> [--resolution r] [--out-dir D]
    halpern-cat1 check-geometry [--count N] [--seed S] [--self-test-corrupt]
    halpern-cat1 negation-example [--out-dir D]

Exit codes: 0 success / converged, 2 max_iters reached without convergence,
1 any error. The default output directory is ``$HALPERN_CAT1_OUT`` or ``./out``.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile

import numpy as np

from halpern_cat1 import __version__
from halpern_cat1._backend import BACKEND
from halpern_cat1.batteries import run_geometry_battery
from halpern_cat1.config import compute_oracle, load_config, oracle_record
from halpern_cat1.engine import kasahara_diagnostic, run
from halpern_cat1.errors import ConfigError, GeometryError, NonFiniteStateError, SolverError
from halpern_cat1.negation_example import format_report, negation_report
from halpern_cat1.prox import SolverSettings

OUT_ENV = "HALPERN_CAT1_OUT"
EXIT_OK, EXIT_ERROR, EXIT_MAX_ITERS = 0, 1, 2
_HANDLED = (ConfigError, GeometryError, NonFiniteStateError, SolverError, OSError)

log = logging.getLogger("halpern_cat1")


def default_out_dir():
    return os.environ.get(OUT_ENV) or "out"


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_json(path, obj):
    """Atomic write (temporary file + rename)."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(_clean(obj), fh, indent=2, sort_keys=False, allow_nan=False)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _one_line(exc):
    return f"{type(exc).__name__}: {' '.join(str(exc).split())}"


def _base_summary(cfg=None):
    return {
        "tool": "halpern-cat1",
        "version": __version__,
        "backend": BACKEND,
        "config_hash": None if cfg is None else cfg.config_hash,
        "seed": None if cfg is None else cfg.seed,
        "error": None,
    }


def cmd_run(args) -> int:
    out_dir = args.out_dir or default_out_dir()
    summary_name = "summary.json"
    cfg = None
    try:
        cfg = load_config(args.config)
        summary_name = cfg.outputs["summary"]
        os.makedirs(out_dir, exist_ok=True)
        prob = cfg.problem
        oracle = None
        if cfg.oracle_spec is not None:
            oracle = compute_oracle(cfg)
            prob.oracle_target = oracle.point
            write_json(os.path.join(out_dir, cfg.outputs["oracle"]), oracle_record(oracle))
        stride = args.stride or cfg.stride
        try:
            result = run(prob, stride=stride)
        except (NonFiniteStateError, GeometryError) as exc:
            tr = getattr(exc, "trace", None)
            if tr is not None:
                tr.write_csv(os.path.join(out_dir, cfg.outputs["trace"]))
            raise
        result.trace.write_csv(os.path.join(out_dir, cfg.outputs["trace"]))
        summary = _base_summary(cfg)
        summary.update(result.summary())
        summary["kasahara"] = kasahara_diagnostic(result).as_dict()
        summary["oracle"] = None if oracle is None else oracle_record(oracle)
        summary["trace_file"] = cfg.outputs["trace"]
        write_json(os.path.join(out_dir, summary_name), summary)
    except _HANDLED as exc:
        summary = _base_summary(cfg)
        summary.update(status="error", error=_one_line(exc))
        print(f"error: {_one_line(exc)}", file=sys.stderr)
        try:
            write_json(os.path.join(out_dir, summary_name), summary)
        except OSError:
            pass
        return EXIT_ERROR
    print(f"{result.status}: {result.steps} steps"
          + ("" if summary["final_d_oracle"] is None else f", d(x_N, oracle) = {summary['final_d_oracle']:.3e}")
          + f" -> {out_dir}")
    return EXIT_OK if result.converged else EXIT_MAX_ITERS


def cmd_oracle(args) -> int:
    out_dir = args.out_dir or default_out_dir()
    try:
        cfg = load_config(args.config)
        if args.resolution is not None:
            if args.resolution < 1:
                raise ConfigError("--resolution", "must be a positive integer")
            spec = dict(cfg.oracle_spec or {"witness": None, "point": None})
            base = (cfg.oracle_spec or {}).get("settings")
            spec["settings"] = SolverSettings(args.resolution, base.refine_tolerance if base else 1e-10,
                                              base.max_refine_iters if base else 4000)
            cfg.oracle_spec = spec
        rec = oracle_record(compute_oracle(cfg))
        write_json(os.path.join(out_dir, cfg.outputs["oracle"]), rec)
    except _HANDLED as exc:
        print(f"error: {_one_line(exc)}", file=sys.stderr)
        print(json.dumps({"error": _one_line(exc)}))
        return EXIT_ERROR
    print(json.dumps(_clean(rec), indent=2))
    return EXIT_OK


def cmd_check_geometry(args) -> int:
    if args.count < 0:
        print("error: --count must be nonnegative", file=sys.stderr)
        return EXIT_ERROR
    rep = run_geometry_battery(args.count, args.seed, corrupt=args.self_test_corrupt)
    print(json.dumps(_clean(rep.as_dict()), indent=2))
    return EXIT_OK if rep.passed else EXIT_ERROR


def cmd_negation_example(args) -> int:
    rep = negation_report()
    print(format_report(rep))
    if args.out_dir:
        write_json(os.path.join(args.out_dir, "negation_example.json"), rep)
    return EXIT_OK if rep["passed"] else EXIT_ERROR


def build_parser():
    p = argparse.ArgumentParser(prog="halpern-cat1",
                                description="Halpern iteration with W-mappings on CAT(1) model spaces.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND} kernels)")
    p.add_argument("-v", "--verbose", action="store_true", help="more logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("run", help="run a configured Halpern experiment")
    s.add_argument("config")
    s.add_argument("--out-dir", help=f"output directory (default ${OUT_ENV} or ./out)")
    s.add_argument("--stride", type=int, help="record every k-th step (overrides the config)")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("oracle", help="nearest common fixed point to u")
    s.add_argument("config")
    s.add_argument("--resolution", type=int, help="coarse grid size")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("check-geometry", help="randomized sphere geometry batteries")
    s.add_argument("--count", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--self-test-corrupt", action="store_true",
                   help="perturb combine by 1e-3 rad; the battery must then fail")
    s.set_defaults(func=cmd_check_geometry)

    s = sub.add_parser("negation-example", help="negation map on [-0.7, 0.7] report")
    s.add_argument("--out-dir", help="also write negation_example.json here")
    s.set_defaults(func=cmd_negation_example)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run" and args.stride is not None and args.stride < 1:
        print("error: --stride must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
