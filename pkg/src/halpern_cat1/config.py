"""JSON experiment configs -> HalpernProblem.

Schema (version 1); unknown keys are rejected at every level::

    {
      "version": 1,
      "space": {"kind": "sphere", "dim": 2, "diameter_bound": 1.4, "center": [0, 0, 1]}
             | {"kind": "segment", "lo": -0.7, "hi": 0.7},
      "mappings": [
        {"kind": "cap_projection", "center": [...], "radius": 0.5},
        {"kind": "interval_projection", "lo": -0.1, "hi": 0.2},
        {"kind": "resolvent", "function": FUNCTION, "penalty": "tansin" | "logcos"},
        {"kind": "geodesic_contraction", "p": [...], "lambda": 0.3},
        {"kind": "segment_negation"},
        {"kind": "identity"}
      ],
      "alpha": {"kind": "constant", "a": 0.4, "values": [0.5, 0.5]}
             | {"kind": "alternating", "a": 0.4, "odd": [...], "even": [...]},
      "beta": {"kind": "power", "q": 0.5} | {"kind": "list", "values": [...]},
      "u": POINT, "x1": POINT,
      "max_iters": 200000, "stop_tolerance": 0.005, "stride": 1,
      "oracle": {"witness": POINT, "point": POINT, "grid_resolution": 400, "refine_tolerance": 1e-10},
      "solver": {"grid_resolution": 400, "refine_tolerance": 1e-8, "max_refine_iters": 4000},
      "seed": 0,
      "outputs": {"trace": "trace.csv", "summary": "summary.json", "oracle": "oracle.json"}
    }

    FUNCTION = {"kind": "indicator", "caps": [{"center": [...], "radius": r}, ...], "witness": POINT}
             | {"kind": "indicator", "lo": a, "hi": b}
             | {"kind": "distance", "point": POINT}
             | {"kind": "weighted_sum", "terms": [{"weight": w, "function": FUNCTION}, ...]}
             | {"kind": "zero"}
    POINT    = [coords...]  (normalized on load for the sphere)
             | {"random_in_cap": {"center": [...], "radius": r}}  (drawn from ``seed``)

Angles and radii are in radians.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from halpern_cat1 import geometry as geo
from halpern_cat1 import mappings as mp
from halpern_cat1 import prox
from halpern_cat1.engine import BetaSchedule, HalpernProblem
from halpern_cat1.errors import ConfigError, GeometryError

SCHEMA_VERSION = 1
DEFAULT_OUTPUTS = {"trace": "trace.csv", "summary": "summary.json", "oracle": "oracle.json"}


class _Node:
    """A JSON object being consumed; remembers its path for diagnostics."""

    def __init__(self, data, path):
        if not isinstance(data, dict):
            raise ConfigError(path or "<root>", "expected an object")
        self.data = data
        self.path = path
        self.used = set()

    def sub(self, key):
        return f"{self.path}.{key}" if self.path else key

    def has(self, key):
        return key in self.data

    def raw(self, key, default=...):
        self.used.add(key)
        if key not in self.data:
            if default is not ...:
                return default
            raise ConfigError(self.sub(key), "required field missing")
        return self.data[key]

    def num(self, key, default=...):
        v = self.raw(key, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(self.sub(key), "expected a number")
        return float(v)

    def int(self, key, default=...):
        v = self.raw(key, default)
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(self.sub(key), "expected an integer")
        return v

    def str(self, key, default=...):
        v = self.raw(key, default)
        if not isinstance(v, str):
            raise ConfigError(self.sub(key), "expected a string")
        return v

    def vec(self, key, default=...):
        v = self.raw(key, default)
        return _vector(v, self.sub(key))

    def node(self, key, default=...):
        v = self.raw(key, default)
        return None if v is None else _Node(v, self.sub(key))

    def items(self, key):
        v = self.raw(key)
        if not isinstance(v, list):
            raise ConfigError(self.sub(key), "expected a list")
        return [(f"{self.sub(key)}[{i}]", item) for i, item in enumerate(v)]

    def done(self):
        extra = sorted(set(self.data) - self.used)
        if extra:
            raise ConfigError(self.sub(extra[0]), "unknown field")


def _vector(v, path):
    if not isinstance(v, list) or not v or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in v):
        raise ConfigError(path, "expected a nonempty list of numbers")
    return np.array(v, dtype=float)


@dataclass
class ExperimentConfig:
    problem: HalpernProblem
    oracle_spec: dict | None
    solver: prox.SolverSettings
    seed: int
    stride: int
    outputs: dict
    config_hash: str
    source: str = ""
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def space(self):
        return self.problem.space


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(blob, source=str(path))


def parse_config(blob, source="<string>") -> ExperimentConfig:
    if isinstance(blob, str):
        blob = blob.encode()
    try:
        data = json.loads(blob.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ConfigError("<json>", f"not UTF-8: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    digest = hashlib.sha256(blob).hexdigest()
    try:
        return _build(data, digest, source)
    except GeometryError as exc:
        path = getattr(exc, "config_path", "<config>")
        raise ConfigError(path, str(exc)) from exc


def _wrap(path):
    """Context manager tagging geometry errors raised while building ``path``."""

    class _Ctx:
        def __enter__(self):
            return self

        def __exit__(self, et, ev, tb):
            if et is not None and issubclass(et, GeometryError) and not issubclass(et, ConfigError):
                raise ConfigError(path, str(ev)) from ev
            return False

    return _Ctx()


def _build(data, digest, source):
    root = _Node(data, "")
    version = root.raw("version")
    if version != SCHEMA_VERSION:
        raise ConfigError("version", f"unsupported schema version {version!r} (expected {SCHEMA_VERSION})")
    seed = root.int("seed", 0)
    rng = np.random.default_rng(seed)
    space = _space(root.node("space"))
    solver = _solver(root.node("solver", None))
    maps = []
    for path, item in root.items("mappings"):
        maps.append(_mapping(space, _Node(item, path), solver, rng))
    if not maps:
        raise ConfigError("mappings", "at least one mapping is required")
    w = _alpha(root.node("alpha"), len(maps))
    beta = _beta(root.node("beta"))
    u = _point(space, root.raw("u"), "u", rng)
    x1 = _point(space, root.raw("x1"), "x1", rng)
    max_iters = root.int("max_iters", 10_000)
    stop_tol = root.num("stop_tolerance", 1e-6)
    stride = root.int("stride", 1)
    if stride < 1:
        raise ConfigError("stride", "must be >= 1")
    oracle_spec = None
    on = root.node("oracle", None)
    if on is not None:
        oracle_spec = _oracle(space, on, rng)
    outputs = dict(DEFAULT_OUTPUTS)
    on = root.node("outputs", None)
    if on is not None:
        for key in DEFAULT_OUTPUTS:
            outputs[key] = on.str(key, outputs[key])
        on.done()
    root.done()
    with _wrap("<problem>"):
        problem = HalpernProblem(space, maps, w, beta, u, x1, None, max_iters, stop_tol)
    return ExperimentConfig(problem, oracle_spec, solver, seed, stride, outputs, digest, source, data)


def _space(n: _Node):
    kind = n.str("kind")
    with _wrap(n.path):
        if kind == "sphere":
            dim = n.int("dim", 2)
            db = n.num("diameter_bound", None) if n.has("diameter_bound") else None
            center = n.vec("center", None) if n.has("center") else None
            n.done()
            return geo.unit_sphere(dim, db, None if center is None else geo.normalize(center))
        if kind == "segment":
            lo, hi = n.num("lo"), n.num("hi")
            n.done()
            return geo.segment(lo, hi)
    raise ConfigError(n.sub("kind"), f"unknown space kind {kind!r}")


def _solver(n):
    if n is None:
        return prox.SolverSettings()
    d = prox.SolverSettings()
    with _wrap(n.path):
        s = prox.SolverSettings(n.int("grid_resolution", d.coarse_grid_resolution),
                                n.num("refine_tolerance", d.refine_tolerance),
                                n.int("max_refine_iters", d.max_refine_iters))
    n.done()
    return s


def _point(space, v, path, rng):
    with _wrap(path):
        if isinstance(v, dict):
            n = _Node(v, path)
            cn = n.node("random_in_cap")
            c = geo.normalize(cn.vec("center"))
            r = cn.num("radius")
            cn.done()
            n.done()
            if space.kind != geo.SPHERE:
                raise ConfigError(path, "random_in_cap needs the sphere model")
            return geo.random_cap_points(c, r, 1, rng)[0]
        x = _vector(v, path)
        if space.kind == geo.SPHERE:
            if x.shape[0] != space.ambient_dim:
                raise ConfigError(path, f"expected {space.ambient_dim} coordinates, got {x.shape[0]}")
            x = geo.normalize(x)
        return geo.as_point(space, x)


def _cap(n: _Node, space):
    with _wrap(n.path):
        c = n.vec("center")
        if c.shape[0] != space.ambient_dim:
            raise ConfigError(n.sub("center"), f"expected {space.ambient_dim} coordinates")
        cap = prox.Cap.make(c, n.num("radius"))
    n.done()
    return cap


def _function(space, n: _Node, rng):
    kind = n.str("kind")
    with _wrap(n.path):
        if kind == "indicator":
            if n.has("caps"):
                caps = tuple(_cap(_Node(item, p), space) for p, item in n.items("caps"))
                if len(caps) == 1 and not n.has("witness"):
                    s = caps[0]
                else:
                    s = prox.Intersection(caps, tuple(_point(space, n.raw("witness"), n.sub("witness"), rng)))
            else:
                s = prox.SegmentInterval(n.num("lo"), n.num("hi"))
            n.done()
            return prox.indicator_of(s)
        if kind == "distance":
            p = _point(space, n.raw("point"), n.sub("point"), rng)
            n.done()
            return prox.distance_to_point(space, p)
        if kind == "weighted_sum":
            terms = []
            for p, item in n.items("terms"):
                tn = _Node(item, p)
                terms.append((tn.num("weight"), _function(space, tn.node("function"), rng)))
                tn.done()
            n.done()
            return prox.weighted_sum(space, terms)
        if kind == "zero":
            n.done()
            return prox.zero_function(space)
    raise ConfigError(n.sub("kind"), f"unknown function kind {kind!r}")


def _mapping(space, n: _Node, solver, rng):
    kind = n.str("kind")
    with _wrap(n.path):
        if kind == "cap_projection":
            T = mp.cap_projection(space, _cap(n, space))
        elif kind == "interval_projection":
            T = mp.interval_projection(space, prox.SegmentInterval(n.num("lo"), n.num("hi")))
        elif kind == "resolvent":
            f = _function(space, n.node("function"), rng)
            T = mp.resolvent_mapping(space, f, n.str("penalty", "tansin"), solver)
        elif kind == "geodesic_contraction":
            T = mp.geodesic_contraction(space, _point(space, n.raw("p"), n.sub("p"), rng), n.num("lambda"))
        elif kind == "segment_negation":
            T = mp.segment_negation(space)
        elif kind == "identity":
            T = mp.identity(space)
        else:
            raise ConfigError(n.sub("kind"), f"unknown mapping kind {kind!r}")
    n.done()
    return T


def _alpha(n: _Node, r):
    kind = n.str("kind")
    a = n.num("a")
    with _wrap(n.sub("a")):
        if not 0.0 < a < 0.5:
            raise ConfigError(n.sub("a"), "a must lie in (0, 1/2)")
    if kind == "constant":
        vals = n.vec("values")
        _alpha_row(vals, a, r, n.sub("values"))
        n.done()
        return mp.WSchedule.constant_alphas(vals.tolist(), a)
    if kind == "alternating":
        odd, even = n.vec("odd"), n.vec("even")
        _alpha_row(odd, a, r, n.sub("odd"))
        _alpha_row(even, a, r, n.sub("even"))
        n.done()
        odd_t, even_t = tuple(odd.tolist()), tuple(even.tolist())
        return mp.WSchedule(r, a, rule=lambda k, i: (odd_t if k % 2 else even_t)[i - 1])
    raise ConfigError(n.sub("kind"), f"unknown alpha kind {kind!r}")


def _alpha_row(vals, a, r, path):
    if vals.shape[0] != r:
        raise ConfigError(path, f"expected {r} values (one per mapping), got {vals.shape[0]}")
    for v in vals:
        if not a <= v <= 1.0 - a:
            raise ConfigError(path, f"alpha {v} outside [a, 1-a] = [{a}, {1 - a}]")


def _beta(n: _Node):
    kind = n.str("kind")
    with _wrap(n.path):
        if kind == "power":
            b = BetaSchedule.power_law(n.num("q"))
        elif kind == "list":
            b = BetaSchedule.explicit(n.vec("values").tolist())
        else:
            raise ConfigError(n.sub("kind"), f"unknown beta kind {kind!r}")
    n.done()
    return b


def _oracle(space, n: _Node, rng):
    d = prox.SolverSettings()
    spec = {
        "witness": _point(space, n.raw("witness"), n.sub("witness"), rng) if n.has("witness") else None,
        "point": _point(space, n.raw("point"), n.sub("point"), rng) if n.has("point") else None,
    }
    with _wrap(n.path):
        spec["settings"] = prox.SolverSettings(n.int("grid_resolution", d.coarse_grid_resolution),
                                               n.num("refine_tolerance", 1e-10),
                                               n.int("max_refine_iters", d.max_refine_iters))
    n.done()
    return spec


def fixed_sets(problem: HalpernProblem):
    """Declared fixed sets of the mappings, skipping whole-space ones.

    Raises ``ConfigError`` when some mapping has no declared fixed set.
    """
    out = []
    for i, T in enumerate(problem.mappings):
        fs = T.fixed_set
        if fs is None:
            raise ConfigError(f"mappings[{i}]", f"{T.label} has no declared fixed set; oracle unavailable")
        if isinstance(fs, str) and fs == "all":
            continue
        out.append(fs)
    return out


def compute_oracle(cfg: ExperimentConfig) -> prox.OracleResult:
    """Nearest point to ``u`` in the common fixed set of the configured mappings."""
    sp, u = cfg.space, cfg.problem.u
    spec = cfg.oracle_spec or {"witness": None, "point": None, "settings": prox.SolverSettings(refine_tolerance=1e-10)}
    settings = spec["settings"]
    if spec["point"] is not None:
        p = spec["point"]
        d = geo.dist(sp, u, p)
        return prox.OracleResult(p, d, settings.coarse_grid_resolution, 0.0, d, d, "given")
    sets = fixed_sets(cfg.problem)
    finite = [s for s in sets if isinstance(s, tuple)]
    handles = [s for s in sets if not isinstance(s, tuple)]
    if finite:
        cands = [np.asarray(p) for p in finite[0]]
        cands = [p for p in cands
                 if all(any(geo.dist(sp, p, q) <= 1e-12 for q in other) for other in finite[1:])
                 and all(h.contains(p) for h in handles)]
        if not cands:
            raise ConfigError("oracle", "declared fixed sets have empty intersection")
        ds = [geo.dist(sp, u, p) for p in cands]
        k = int(np.argmin(ds))
        return prox.OracleResult(cands[k], ds[k], settings.coarse_grid_resolution, 0.0, ds[k], ds[k], "finite set")
    if sp.kind == geo.SPHERE:
        caps = tuple(c for h in handles for c in prox._caps_of(h))
        if len(caps) > 1 or any(isinstance(h, prox.Intersection) for h in handles):
            witness = spec["witness"]
            if witness is None:
                ws = [h.witness for h in handles if isinstance(h, prox.Intersection)]
                if len(handles) == 1 and ws:
                    witness = ws[0]
            if witness is None:
                raise ConfigError("oracle.witness", "a witness point of the common fixed set is required")
            with _wrap("oracle.witness"):
                handles = [prox.Intersection(caps, tuple(float(v) for v in witness))]
    with _wrap("oracle"):
        return prox.nearest_point_oracle(sp, handles, u, settings)


def oracle_record(res: prox.OracleResult) -> dict:
    return {
        "point": [float(v) for v in res.point],
        "distance": float(res.distance),
        "grid_resolution": int(res.grid_resolution),
        "certified_gap": float(res.certified_gap),
        "lower_bound": float(res.lower_bound),
        "grid_value": None if not math.isfinite(res.grid_value) else float(res.grid_value),
        "method": res.method,
    }
