"""Halpern iteration with per-step W-mappings and convergence diagnostics.

    x_{n+1} = beta_n u (+) (1 - beta_n) W_n x_n

With a target ``p`` (a common fixed point, normally the nearest one to ``u``)
each step is checked against the one-step estimate

    s_{n+1} <= (1 - gamma_n) s_n + gamma_n t_n,      s_n = 1 - cos d(x_n, p)

where, writing D = d(u, W_n x_n),

    gamma_n = 1 - sin((1 - beta_n) D) / sin D            (beta_n when D = 0)
    t_n     = 1 - cos d(u, p) / (sin D tan(beta_n D / 2) + cos D).
"""
from __future__ import annotations

import csv
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from halpern_cat1 import geometry as geo
from halpern_cat1._backend import BACKEND, kernels
from halpern_cat1.errors import AntipodalError, GeometryError, NonFiniteStateError
from halpern_cat1.mappings import MappingHandle, WSchedule, build_w_mapping, pack_kernel_family

log = logging.getLogger(__name__)

LYAPUNOV_TOL = 1e-10
FEJER_TOL = 1e-12
BOUNDED_TOL = 1e-9
GAMMA_TOL = 1e-12


@dataclass(frozen=True)
class BetaSchedule:
    """Halpern weights ``beta_n``, n = 1, 2, ...

    ``power``: beta_n = (n+1)^(-q), q in (0, 1]; the sum diverges and the sum of
    squares diverges iff q <= 1/2. ``list`` and ``custom`` carry no asymptotic
    guarantee unless declared.
    """

    kind: str
    q: float | None = None
    values: tuple | None = None
    func: Callable[[int], float] | None = None
    declared_sum_diverges: bool = False
    declared_squares_diverge: bool = False

    def __post_init__(self):
        if self.kind == "power":
            if self.q is None or not 0.0 < self.q <= 1.0:
                raise GeometryError("power-law exponent q must lie in (0, 1]")
        elif self.kind == "list":
            if not self.values:
                raise GeometryError("explicit beta list is empty")
            for v in self.values:
                if not 0.0 < v < 1.0:
                    raise GeometryError(f"beta value {v} outside (0, 1)")
        elif self.kind == "custom":
            if self.func is None:
                raise GeometryError("custom beta schedule needs a function")
        else:
            raise GeometryError(f"unknown beta kind {self.kind!r}")

    @classmethod
    def power_law(cls, q):
        return cls("power", q=float(q))

    @classmethod
    def explicit(cls, values):
        return cls("list", values=tuple(float(v) for v in values))

    @classmethod
    def custom(cls, func, sum_diverges=False, sum_of_squares_diverges=False):
        return cls("custom", func=func, declared_sum_diverges=sum_diverges,
                   declared_squares_diverge=sum_of_squares_diverges)

    @property
    def sum_diverges(self) -> bool:
        return True if self.kind == "power" else self.declared_sum_diverges

    @property
    def sum_of_squares_diverges(self) -> bool:
        return self.q <= 0.5 if self.kind == "power" else self.declared_squares_diverge

    @property
    def tends_to_zero(self) -> bool:
        return self.kind == "power"

    def __call__(self, n) -> float:
        if self.kind == "power":
            return (n + 1.0) ** (-self.q)
        if self.kind == "list":
            if n > len(self.values):
                raise GeometryError(f"beta list has no entry for n = {n}")
            return self.values[n - 1]
        v = float(self.func(n))
        if not 0.0 < v < 1.0:
            raise GeometryError(f"beta_{n} = {v} outside (0, 1)")
        return v

    def table(self, n_max) -> np.ndarray:
        return np.array([self(n) for n in range(1, n_max + 1)], dtype=float)


@dataclass
class HalpernProblem:
    space: geo.ModelSpace
    mappings: list
    w_schedule: WSchedule
    beta: BetaSchedule
    u: np.ndarray
    x1: np.ndarray
    oracle_target: np.ndarray | None = None
    max_iters: int = 10_000
    stop_tolerance: float = 1e-6

    def __post_init__(self):
        self.mappings = list(self.mappings)
        if not self.mappings:
            raise GeometryError("at least one mapping is required")
        if self.w_schedule.r != len(self.mappings):
            raise GeometryError(f"W schedule has r = {self.w_schedule.r} but {len(self.mappings)} mappings given")
        self.u = geo.as_point(self.space, self.u)
        self.x1 = geo.as_point(self.space, self.x1)
        for name, pt in (("u", self.u), ("x1", self.x1)):
            if not geo.in_region(self.space, pt):
                raise GeometryError(f"{name} lies outside the configured region")
        if self.oracle_target is not None:
            self.oracle_target = geo.as_point(self.space, self.oracle_target)
        if self.max_iters < 0:
            raise GeometryError("max_iters must be nonnegative")
        if not self.stop_tolerance > 0:
            raise GeometryError("stop_tolerance must be positive")


@dataclass
class ConditionReport:
    a: bool
    b: bool | None
    c: bool
    details: dict = field(default_factory=dict)

    @property
    def any_holds(self) -> bool:
        return bool(self.a or self.b or self.c)

    def as_dict(self):
        return {"a": self.a, "b": self.b, "c": self.c, **self.details}


def check_conditions(problem: HalpernProblem) -> ConditionReport:
    """Which of the theorem's alternative hypotheses (a), (b), (c) hold.

    (a) the configured space has diameter bound < pi/2;
    (b) d(u,p) < pi/4 and d(u,p) + d(x1,p) < pi/2 for the target p (None if no target);
    (c) sum of beta_n^2 diverges (read from the schedule's metadata).
    """
    sp = problem.space
    a = sp.diameter_bound is not None and sp.diameter_bound < math.pi / 2
    details = {"diameter_bound": sp.diameter_bound}
    b = None
    if problem.oracle_target is not None:
        dup = geo.dist(sp, problem.u, problem.oracle_target)
        dxp = geo.dist(sp, problem.x1, problem.oracle_target)
        b = dup < math.pi / 4 and dup + dxp < math.pi / 2
        details.update(d_u_p=dup, d_x1_p=dxp)
    c = problem.beta.sum_of_squares_diverges
    rep = ConditionReport(a, b, c, details)
    if not rep.any_holds:
        log.warning("none of conditions (a), (b), (c) holds; convergence is not guaranteed")
    return rep


def halpern_step(space, u, x, W: MappingHandle, beta_n) -> np.ndarray:
    """``beta_n u (+) (1 - beta_n) W(x)``."""
    if not 0.0 < beta_n < 1.0:
        raise GeometryError("beta_n must lie in (0, 1)")
    return geo.combine(space, beta_n, u, W(x))


def _gamma_t(D, beta, cos_up):
    """Vectorized gamma_n and t_n; NaN where D >= pi/2 (undefined)."""
    D = np.asarray(D, dtype=float)
    beta = np.asarray(beta, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        # 1 - sin((1-b)D)/sin D rewritten without cancellation
        g = 2.0 * np.sin(beta * D / 2) * np.cos((1.0 - beta / 2) * D) / np.sin(D)
        gamma = np.where(D <= 1e-14, beta, g)
        t = 1.0 - cos_up / (np.sin(D) * np.tan(beta * D / 2) + np.cos(D))
    bad = D >= math.pi / 2
    return np.where(bad, np.nan, gamma), np.where(bad, np.nan, t)


def diagnostics_gamma_t(space, u, w_image, beta_n, p):
    """(gamma_n, t_n) for one step; ``w_image`` is ``W_n x_n`` and ``p`` the target."""
    D = geo.dist(space, u, w_image)
    if D >= math.pi / 2:
        raise GeometryError("d(u, W x) >= pi/2: gamma/t diagnostics are undefined")
    g, t = _gamma_t(D, beta_n, math.cos(geo.dist(space, u, p)))
    return float(g), float(t)


def _half_versine(d):
    # 1 - cos d, accurate for small d
    return 2.0 * np.sin(np.asarray(d) / 2) ** 2


@dataclass
class IterationTrace:
    """Recorded rows of a run.

    Row ``k`` holds ``x_n`` for ``n = ns[k]`` and the quantities of the step
    taken from it. ``d_next`` is ``d(x_{n+1}, p)`` so the one-step checks stay
    exact even when only every ``stride``-th step is recorded. The final row is
    the stopping point; its step fields are NaN.
    """

    space: geo.ModelSpace
    u: np.ndarray
    x1: np.ndarray
    oracle: np.ndarray | None
    ns: np.ndarray
    coords: np.ndarray
    betas: np.ndarray
    d_u_w: np.ndarray
    residuals: np.ndarray
    d_next: np.ndarray
    stride: int = 1

    def __len__(self):
        return len(self.ns)

    @property
    def has_oracle(self) -> bool:
        return self.oracle is not None

    @property
    def d_oracle(self) -> np.ndarray:
        if self.oracle is None:
            return np.full(len(self), np.nan)
        return geo.dist_many(self.space, self.coords, self.oracle)

    @property
    def s(self) -> np.ndarray:
        return _half_versine(self.d_oracle)

    @property
    def cos_up(self) -> float:
        return math.cos(geo.dist(self.space, self.u, self.oracle)) if self.has_oracle else math.nan

    def gamma_t(self):
        return _gamma_t(self.d_u_w, self.betas, self.cos_up)

    @property
    def lyapunov_slack(self) -> np.ndarray:
        """``(1 - gamma_n) s_n + gamma_n t_n - s_{n+1}``."""
        if not self.has_oracle:
            return np.full(len(self), np.nan)
        g, t = self.gamma_t()
        return (1.0 - g) * self.s + g * t - _half_versine(self.d_next)

    def field_names(self):
        m = self.coords.shape[1]
        r = self.residuals.shape[1]
        return (["n", "beta"] + [f"x_{k}" for k in range(m)]
                + ["d_oracle", "s", "gamma", "t", "lyap_slack"]
                + [f"res_{i + 1}" for i in range(r)] + ["d_u_w"])

    def rows(self):
        """Ordered records with the fixed trace field names."""
        g, t = self.gamma_t() if self.has_oracle else (np.full(len(self), np.nan),) * 2
        cols = [self.d_oracle, self.s, g, t, self.lyapunov_slack]
        names = self.field_names()
        for k in range(len(self)):
            vals = [int(self.ns[k]), self.betas[k], *self.coords[k], *(c[k] for c in cols),
                    *self.residuals[k], self.d_u_w[k]]
            yield dict(zip(names, vals))

    def write_csv(self, path):
        """RFC 4180 CSV; floats in shortest round-trip form, NaN as an empty field.

        Written to a temporary file and renamed, so readers never see a partial trace.
        """
        names = self.field_names()
        d = os.path.dirname(os.path.abspath(path))
        fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\r\n")
                w.writerow(names)
                for row in self.rows():
                    w.writerow([_fmt(row[k]) for k in names])
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def invariant_report(self) -> dict:
        """Per-step checks of the convergence estimates (needs a target)."""
        if not self.has_oracle:
            return {"available": False}
        sp = self.space
        stepped = ~np.isnan(self.betas)
        slack = self.lyapunov_slack[stepped]
        d_up = geo.dist(sp, self.u, self.oracle)
        d_xp = geo.dist(sp, self.x1, self.oracle)
        cos_bound = np.minimum(math.cos(d_up), np.cos(self.d_oracle[stepped]))
        fejer = np.cos(self.d_next[stepped]) - cos_bound
        g, _ = self.gamma_t()
        g, b = g[stepped], self.betas[stepped]
        M = float(np.nanmax(self.d_u_w)) if np.any(stepped) else 0.0
        gc = g - b * b * math.pi ** 2 / 16
        ga = g - b * math.cos(M)
        sup_d = float(np.nanmax(np.concatenate([self.d_oracle, self.d_next[stepped]])))
        undefined = int(np.sum(np.isnan(g)))
        mn = lambda a: float(np.nanmin(a)) if a.size else math.inf  # noqa: E731
        return {
            "available": True,
            "steps_checked": int(np.sum(stepped)),
            "undefined_gamma_rows": undefined,
            "min_lyapunov_slack": mn(slack),
            "lyapunov_ok": mn(slack) >= -LYAPUNOV_TOL,
            "min_fejer_margin": mn(fejer),
            "fejer_ok": mn(fejer) >= -FEJER_TOL,
            "sup_distance": sup_d,
            "distance_bound": max(d_up, d_xp),
            "bounded_ok": sup_d <= max(d_up, d_xp) + BOUNDED_TOL,
            "max_d_u_w": M,
            "min_gamma_margin_c": mn(gc),
            "gamma_c_ok": mn(gc) >= -GAMMA_TOL,
            "min_gamma_margin_a": mn(ga),
            "gamma_a_ok": mn(ga) >= -GAMMA_TOL,
        }


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else repr(v)


@dataclass
class RunResult:
    trace: IterationTrace
    status: str
    steps: int
    conditions: ConditionReport
    backend: str
    beta: BetaSchedule

    @property
    def final_point(self) -> np.ndarray:
        return self.trace.coords[-1]

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def summary(self) -> dict:
        tr = self.trace
        inv = tr.invariant_report()
        slack = tr.lyapunov_slack
        finite = slack[~np.isnan(slack)]
        return {
            "status": self.status,
            "final_point": [float(v) for v in self.final_point],
            "iterations": int(self.steps),
            "final_d_oracle": None if not tr.has_oracle else float(tr.d_oracle[-1]),
            "conditions": self.conditions.as_dict(),
            "max_lyapunov_violation": None if not tr.has_oracle else
            float(max(0.0, -finite.min())) if finite.size else 0.0,
            "invariants": inv,
            "backend": self.backend,
            "stride": tr.stride,
        }


def _use_kernel(problem) -> bool:
    return all(T.kernel is not None for T in problem.mappings)


def run(problem: HalpernProblem, stride=1, generic=False) -> RunResult:
    """Iterate until the stop rule or ``max_iters``.

    Stop rule: with a target, ``d(x_n, target) < stop_tolerance``; without one,
    both the last displacement and every residual ``d(T_i x_n, x_n)`` are below
    ``stop_tolerance``. Families made only of kernel-capable maps run in the
    fused kernel unless ``generic`` is set.
    """
    cond = check_conditions(problem)
    stride = max(int(stride), 1)
    if _use_kernel(problem) and not generic:
        trace, status, steps = _run_fused(problem, stride)
        backend = BACKEND
    else:
        trace, status, steps = _run_generic(problem, stride)
        backend = "generic"
    return RunResult(trace, status, steps, cond, backend, problem.beta)


def _status_name(code):
    return {0: "converged", 2: "max_iters"}[code]


def _run_fused(problem, stride):
    sp = problem.space
    kinds, centers, scal = pack_kernel_family(problem.mappings)
    alphas = problem.w_schedule.table(problem.max_iters)
    beta = problem.beta
    if beta.kind == "power":
        bkind, bq, btab = 0, beta.q, None
    else:
        bkind, bq = 1, 0.0
        btab = np.array(beta.values) if beta.kind == "list" else beta.table(problem.max_iters)
        if len(btab) < problem.max_iters:
            raise GeometryError(f"beta list has {len(btab)} entries but max_iters = {problem.max_iters}")
    out = kernels.run_fused(sp.geom_code, problem.u, problem.x1, kinds, centers, scal, alphas,
                            bkind, bq, btab, int(problem.max_iters), float(problem.stop_tolerance),
                            problem.oracle_target, int(stride))
    status, steps, msg, ns, coords, betas, duw, res, dnext = out
    trace = IterationTrace(sp, problem.u, problem.x1, problem.oracle_target, ns, coords, betas, duw, res,
                           dnext, stride)
    if status == 1:
        exc = AntipodalError(msg) if "antipodal" in msg else NonFiniteStateError(msg, steps + 1)
        exc.trace = trace
        raise exc
    return trace, _status_name(status), int(steps)


def _run_generic(problem, stride):
    sp = problem.space
    u, p = problem.u, problem.oracle_target
    maps = problem.mappings
    r = len(maps)
    x = problem.x1.copy()
    ns, coords, betas, duw, res, dnext = [], [], [], [], [], []
    n = 1
    disp = math.inf
    status = None

    def make_trace():
        m = sp.ambient_dim
        return IterationTrace(sp, u, problem.x1, p, np.array(ns, dtype=np.int64),
                              np.array(coords).reshape(-1, m), np.array(betas), np.array(duw),
                              np.array(res).reshape(-1, r), np.array(dnext), stride)

    while True:
        cur_res = None
        stop = None
        if p is not None:
            if geo.dist(sp, x, p) < problem.stop_tolerance:
                stop = "converged"
        else:
            cur_res = [geo.dist(sp, T(x), x) for T in maps]
            if n >= 2 and disp < problem.stop_tolerance and max(cur_res) < problem.stop_tolerance:
                stop = "converged"
        if stop is None and n > problem.max_iters:
            stop = "max_iters"
        record = stop is not None or (n - 1) % stride == 0
        if record:
            if cur_res is None:
                cur_res = [geo.dist(sp, T(x), x) for T in maps]
            ns.append(n)
            coords.append(x.copy())
            res.append(cur_res)
            betas.append(math.nan)
            duw.append(math.nan)
            dnext.append(math.nan)
        if stop is not None:
            status = stop
            break
        b = problem.beta(n)
        W = build_w_mapping(sp, maps, problem.w_schedule.row(n))
        w = W(x)
        xn = geo.combine(sp, b, u, w)
        if not np.all(np.isfinite(xn)):
            exc = NonFiniteStateError(f"non-finite coordinates produced at step {n}", n)
            exc.trace = make_trace()
            raise exc
        if record:
            betas[-1] = b
            duw[-1] = geo.dist(sp, u, w)
            if p is not None:
                dnext[-1] = geo.dist(sp, xn, p)
        disp = geo.dist(sp, xn, x)
        x = xn
        n += 1
    return make_trace(), status, n - 1


@dataclass
class KasaharaReport:
    max_residual: float
    per_mapping: list
    rows_used: int
    threshold: float
    claim: bool | None

    def as_dict(self):
        return {"max_residual": self.max_residual, "per_mapping": self.per_mapping,
                "rows_used": self.rows_used, "threshold": self.threshold, "pass": self.claim}


def kasahara_diagnostic(result: RunResult, mappings=None, threshold=1e-2) -> KasaharaReport:
    """``max_i d(T_i x_n, x_n)`` over the final 10% of recorded rows.

    Residuals are recomputed from ``mappings`` when given. A pass/fail claim is
    made only when the beta schedule is guaranteed to vanish and a target was
    tracked; otherwise ``claim`` is None and the numbers are descriptive.
    """
    tr = result.trace
    k = max(1, int(math.ceil(0.1 * len(tr))))
    if mappings is not None:
        R = np.array([[geo.dist(tr.space, T(x), x) for T in mappings] for x in tr.coords[-k:]])
    else:
        R = tr.residuals[-k:]
    per = [float(v) for v in R.max(axis=0)] if R.size else []
    mx = max(per) if per else 0.0
    claim = None
    if result.beta.tends_to_zero and tr.has_oracle:
        claim = mx <= threshold
    return KasaharaReport(mx, per, k, threshold, claim)
