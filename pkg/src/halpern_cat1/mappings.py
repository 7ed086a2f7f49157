"""Self-maps of the model spaces, the combinator ``a T (+) (1-a) I`` and W-mappings.

Property flags on a ``MappingHandle`` are declarations made by the constructor,
not runtime verification; ``sampled_quasinonexpansive_check`` can only falsify
them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from halpern_cat1 import geometry as geo
from halpern_cat1 import prox
from halpern_cat1._backend import CAP, CLAMP, CONTRACTION, IDENTITY, NEGATION, kernels
from halpern_cat1.errors import GeometryError


@dataclass(frozen=True)
class MappingHandle:
    """A self-map ``T`` with its declared fixed set and properties.

    ``fixed_set`` is a convex set handle, a tuple of points, or None when the
    fixed set is undeclared (the identity uses ``"all"``). ``kernel`` holds
    ``(code, center, s0, s1)`` when the map can run inside the fused loop.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    label: str
    fixed_set: object = None
    quasinonexpansive: bool = False
    nonexpansive: bool = False
    delta_demiclosed: bool = False
    kernel: tuple | None = field(default=None, compare=False)

    def __call__(self, x) -> np.ndarray:
        return self.evaluator(x)


def _kernel_map(space, code, center, s0, s1, label, **flags) -> MappingHandle:
    center = np.asarray(center, dtype=float)
    geom = space.geom_code

    def ev(x):
        return kernels.apply_mapping(geom, code, center, s0, s1, x)

    return MappingHandle(ev, label, kernel=(code, center, float(s0), float(s1)), **flags)


def identity(space) -> MappingHandle:
    return _kernel_map(space, IDENTITY, np.zeros(space.ambient_dim), 0.0, 0.0, "identity",
                       fixed_set="all", quasinonexpansive=True, nonexpansive=True, delta_demiclosed=True)


def cap_projection(space, cap: prox.Cap) -> MappingHandle:
    if space.kind != geo.SPHERE:
        raise GeometryError("cap projection needs the sphere model")
    return _kernel_map(space, CAP, cap.c, cap.radius, 0.0, f"P_cap(r={cap.radius:g})",
                       fixed_set=cap, quasinonexpansive=True, nonexpansive=True, delta_demiclosed=True)


def interval_projection(space, interval: prox.SegmentInterval) -> MappingHandle:
    if space.kind != geo.SEGMENT:
        raise GeometryError("interval projection needs the segment model")
    return _kernel_map(space, CLAMP, [0.0], interval.lo, interval.hi, f"P_[{interval.lo:g},{interval.hi:g}]",
                       fixed_set=interval, quasinonexpansive=True, nonexpansive=True, delta_demiclosed=True)


def geodesic_contraction(space, p, lam) -> MappingHandle:
    """``x -> lam p (+) (1 - lam) x``; distances to ``p`` shrink by ``1 - lam``."""
    p = geo.as_point(space, p)
    if not 0.0 <= lam <= 1.0:
        raise GeometryError("contraction weight must lie in [0, 1]")
    fixed = "all" if lam == 0 else (p,)
    return _kernel_map(space, CONTRACTION, p, lam, 0.0, f"contract(lam={lam:g})",
                       fixed_set=fixed, quasinonexpansive=True, nonexpansive=True, delta_demiclosed=True)


def segment_negation(space) -> MappingHandle:
    """``x -> -x`` on a symmetric segment: quasinonexpansive (F = {0}) but not
    strongly quasinonexpansive."""
    if space.kind != geo.SEGMENT or space.lo != -space.hi:
        raise GeometryError("negation needs a symmetric segment [-h, h]")
    return _kernel_map(space, NEGATION, [0.0], 0.0, 0.0, "negation",
                       fixed_set=(np.array([0.0]),), quasinonexpansive=True, nonexpansive=True,
                       delta_demiclosed=True)


def resolvent_mapping(space, f: prox.ConvexFunctionHandle, penalty="tansin",
                      settings: prox.SolverSettings | None = None) -> MappingHandle:
    """The resolvent ``R_f`` as a mapping; its fixed set is ``argmin f``."""
    if penalty not in prox.PENALTIES:
        raise GeometryError(f"unknown penalty {penalty!r}")
    settings = settings or prox.SolverSettings()
    solve = prox.resolvent_tansin if penalty == "tansin" else prox.resolvent_logcos

    def ev(x):
        return solve(space, f, x, settings)

    return MappingHandle(ev, f"R_{penalty}[{f.label}]", fixed_set=f.known_argmin,
                         quasinonexpansive=True, delta_demiclosed=True)


def convex_combine_with_identity(space, alpha, T: MappingHandle) -> MappingHandle:
    """``S = alpha T (+) (1 - alpha) I``, i.e. ``S(x) = combine(alpha, T(x), x)``."""
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise GeometryError("alpha must lie in [0, 1]")

    def ev(x):
        return geo.combine(space, alpha, T(x), x)

    return MappingHandle(
        ev,
        f"{alpha:g}*{T.label}+I",
        fixed_set=T.fixed_set if alpha > 0 else "all",
        quasinonexpansive=T.quasinonexpansive,
        delta_demiclosed=T.nonexpansive and alpha > 0,
    )


def build_w_mapping(space, mappings, alphas) -> MappingHandle:
    """W-mapping generated by ``T_1..T_r`` and ``alpha_1..alpha_r``:

        U_1 = alpha_1 T_1 (+) (1 - alpha_1) I
        U_k = alpha_k T_k U_{k-1} (+) (1 - alpha_k) I,   W = U_r

    Each evaluation of ``W(x)`` calls every ``T_k`` exactly once.
    """
    mappings = list(mappings)
    alphas = [float(a) for a in alphas]
    if not mappings:
        raise GeometryError("W-mapping needs at least one mapping")
    if len(mappings) != len(alphas):
        raise GeometryError(f"{len(mappings)} mappings but {len(alphas)} alphas")
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise GeometryError("each alpha must lie in [0, 1]")

    def ev(x):
        u = x
        for T, a in zip(mappings, alphas):
            u = geo.combine(space, a, T(u), x)
        return u

    return MappingHandle(
        ev,
        "W(" + ", ".join(T.label for T in mappings) + ")",
        fixed_set=tuple(T.fixed_set for T in mappings) if all(0 < a < 1 for a in alphas) else None,
        quasinonexpansive=all(T.quasinonexpansive for T in mappings),
    )


def pack_kernel_family(mappings):
    """Kernel arrays (kinds, centers, scalars) for a family of kernel-capable maps."""
    kinds = np.array([T.kernel[0] for T in mappings], dtype=np.intc)
    centers = np.vstack([np.asarray(T.kernel[1], dtype=float) for T in mappings])
    scal = np.array([[T.kernel[2], T.kernel[3]] for T in mappings], dtype=float)
    return kinds, centers, scal


def residuals(space, mappings, x) -> list:
    """``[d(T_i x, x)]`` for each mapping."""
    return [geo.dist(space, T(x), x) for T in mappings]


@dataclass(frozen=True)
class WSchedule:
    """Per-iteration W coefficients ``alpha_{n,i}`` constrained to ``[a, 1-a]``.

    Either ``constant`` (one value per mapping) or ``rule(n, i)`` with 1-based
    ``n`` and ``i``.
    """

    r: int
    a: float
    constant: tuple | None = None
    rule: Callable[[int, int], float] | None = None

    def __post_init__(self):
        if not 0.0 < self.a < 0.5:
            raise GeometryError("a must lie in (0, 1/2)")
        if (self.constant is None) == (self.rule is None):
            raise GeometryError("give exactly one of constant or rule")
        if self.constant is not None:
            if len(self.constant) != self.r:
                raise GeometryError(f"expected {self.r} alphas, got {len(self.constant)}")
            for v in self.constant:
                self._check(v)

    def _check(self, v):
        if not self.a <= v <= 1.0 - self.a:
            raise GeometryError(f"alpha {v} outside [a, 1-a] = [{self.a}, {1 - self.a}]")
        return float(v)

    @classmethod
    def constant_alphas(cls, alphas, a):
        return cls(len(alphas), float(a), constant=tuple(float(v) for v in alphas))

    def alpha(self, n, i) -> float:
        if self.constant is not None:
            return self.constant[i - 1]
        return self._check(self.rule(n, i))

    def row(self, n) -> np.ndarray:
        return np.array([self.alpha(n, i) for i in range(1, self.r + 1)])

    def table(self, n_max) -> np.ndarray:
        """Alphas for n = 1..n_max as rows; a single row when constant."""
        if self.constant is not None:
            return np.array([self.constant], dtype=float)
        return np.array([self.row(n) for n in range(1, n_max + 1)], dtype=float).reshape(-1, self.r)


@dataclass
class QNECheckReport:
    max_violation: float
    samples: int
    seed: int | None
    tolerance: float
    passed: bool


def sampled_quasinonexpansive_check(space, T: MappingHandle, fixed_points, samples, seed=0,
                                    points=None, tol=1e-10) -> QNECheckReport:
    """Falsification test of ``d(Tx, p) <= d(x, p)`` over sampled ``x`` and given ``p``.

    ``points`` overrides the random draw (e.g. a deterministic grid).
    """
    fixed_points = [np.asarray(p, dtype=float) for p in fixed_points]
    if not fixed_points:
        raise GeometryError("need at least one fixed point")
    if points is None:
        points = geo.random_points(space, samples, np.random.default_rng(seed))
    else:
        seed = None
    worst = -math.inf
    for x in points:
        tx = T(x)
        for p in fixed_points:
            worst = max(worst, geo.dist(space, tx, p) - geo.dist(space, x, p))
    if len(points) == 0:
        worst = 0.0
    return QNECheckReport(float(worst), len(points), seed, tol, worst <= tol)
