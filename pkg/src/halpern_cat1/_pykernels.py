"""Pure-Python kernel, selected when the compiled extension is unavailable.

Same signatures and the same floating-point operation order as ``_kernels.pyx``;
points are handled as lists of floats internally because plain ``math`` calls
beat numpy on 2- to 11-element vectors.
"""
import math

import numpy as np

from halpern_cat1.errors import AntipodalError, GeometryError

BACKEND = "python"

COINCIDENT = 1e-14
ANTIPODAL_MARGIN = 1e-9
_PI = math.pi


def _dist(geom, x, y):
    if geom == 1:
        return abs(x[0] - y[0])
    a = 0.0
    b = 0.0
    for xk, yk in zip(x, y):
        p = xk - yk
        q = xk + yk
        a += p * p
        b += q * q
    return 2.0 * math.atan2(math.sqrt(a), math.sqrt(b))


def _combine(geom, t, x, y):
    """Return the combined point as a list, or None for antipodal inputs."""
    if t == 1.0:
        return list(x)
    if t == 0.0:
        return list(y)
    if geom == 1:
        return [t * x[0] + (1.0 - t) * y[0]]
    theta = _dist(geom, x, y)
    if theta < COINCIDENT:
        return list(x)
    if theta >= _PI - ANTIPODAL_MARGIN:
        return None
    s = math.sin(theta)
    a = math.sin(t * theta) / s
    b = math.sin((1.0 - t) * theta) / s
    out = [a * xk + b * yk for xk, yk in zip(x, y)]
    norm = 0.0
    for v in out:
        norm += v * v
    norm = math.sqrt(norm)
    return [v / norm for v in out]


def _apply(geom, kind, c, s0, s1, x):
    """Return (error_code, point)."""
    if kind == 0:
        return 0, list(x)
    if kind == 1:
        if geom == 1:
            return 0, [min(max(x[0], c[0] - s0), c[0] + s0)]
        theta = _dist(geom, c, x)
        if theta <= s0:
            return 0, list(x)
        if theta >= _PI - ANTIPODAL_MARGIN:
            return 1, None
        z = _combine(geom, 1.0 - s0 / theta, c, x)
        return (1, None) if z is None else (0, z)
    if kind == 2:
        z = _combine(geom, s0, c, x)
        return (1, None) if z is None else (0, z)
    if kind == 3:
        return 0, [-v for v in x]
    if kind == 4:
        return 0, [min(max(x[0], s0), s1)]
    return 2, None


def _w(geom, kinds, centers, scal, alphas, x):
    out = list(x)
    for i, kind in enumerate(kinds):
        err, tmp = _apply(geom, kind, centers[i], scal[i][0], scal[i][1], out)
        if err:
            return err, None
        out = _combine(geom, alphas[i], tmp, x)
        if out is None:
            return 1, None
    return 0, out


def _lst(a):
    return np.asarray(a, dtype=np.float64).tolist()


def dist(geom, x, y):
    return _dist(geom, _lst(x), _lst(y))


def combine(geom, t, x, y):
    z = _combine(geom, float(t), _lst(x), _lst(y))
    if z is None:
        raise AntipodalError("points are antipodal; geodesic not unique")
    return np.array(z)


def apply_mapping(geom, kind, center, s0, s1, x):
    err, z = _apply(geom, int(kind), _lst(center), float(s0), float(s1), _lst(x))
    if err == 1:
        raise AntipodalError("point is antipodal to the mapping center")
    if err:
        raise GeometryError(f"unknown mapping kind {kind}")
    return np.array(z)


def w_eval(geom, kinds, centers, scal, alphas, x):
    err, z = _w(geom, [int(k) for k in kinds], _lst(centers), _lst(scal), _lst(alphas), _lst(x))
    if err == 1:
        raise AntipodalError("antipodal configuration inside W-mapping")
    if err:
        raise GeometryError("unknown mapping kind")
    return np.array(z)


def run_fused(geom, u, x1, kinds, centers, scal, alphas, beta_kind, beta_q,
              beta_table, max_iters, stop_tol, oracle, stride):
    u = _lst(u)
    x = _lst(x1)
    kinds = [int(k) for k in kinds]
    centers = _lst(centers)
    scal = _lst(scal)
    alphas = _lst(alphas)
    btab = None if beta_table is None else _lst(beta_table)
    p = None if oracle is None else _lst(oracle)
    r = len(kinds)
    stride = max(int(stride), 1)
    if beta_kind == 1 and len(btab) < max_iters:
        raise GeometryError("beta table shorter than max_iters")
    if len(alphas) != 1 and len(alphas) < max_iters:
        raise GeometryError("alpha table shorter than max_iters")

    ns, coords, betas, duw, res, dnext = [], [], [], [], [], []
    nan = math.nan
    n = 1
    disp = 1e308
    status = 0
    err = 0
    msg = None
    cur_res = [0.0] * r

    def residuals(x):
        out = []
        for i in range(r):
            e, tx = _apply(geom, kinds[i], centers[i], scal[i][0], scal[i][1], x)
            if e:
                return e, None
            out.append(_dist(geom, tx, x))
        return 0, out

    while True:
        have_res = False
        stop = 0
        if p is not None:
            if _dist(geom, x, p) < stop_tol:
                stop = 1
        else:
            err, cur_res = residuals(x)
            if err:
                status = 1
                break
            have_res = True
            if n >= 2 and disp < stop_tol and max(cur_res, default=0.0) < stop_tol:
                stop = 1
        if stop == 0 and n > max_iters:
            stop = 2
        record = stop != 0 or (n - 1) % stride == 0
        if record:
            if not have_res:
                err, cur_res = residuals(x)
                if err:
                    status = 1
                    break
            ns.append(n)
            coords.append(list(x))
            res.append(list(cur_res))
            betas.append(nan)
            duw.append(nan)
            dnext.append(nan)
        if stop:
            status = 0 if stop == 1 else 2
            break
        beta = (n + 1.0) ** (-beta_q) if beta_kind == 0 else btab[n - 1]
        arow = alphas[0] if len(alphas) == 1 else alphas[n - 1]
        err, w = _w(geom, kinds, centers, scal, arow, x)
        if err:
            status = 1
            break
        D = _dist(geom, u, w)
        xn = _combine(geom, beta, u, w)
        if xn is None:
            err = 1
            status = 1
            break
        if record:
            betas[-1] = beta
            duw[-1] = D
            if p is not None:
                dnext[-1] = _dist(geom, xn, p)
        if not all(math.isfinite(v) for v in xn):
            err = 3
            status = 1
            break
        disp = _dist(geom, xn, x)
        x = xn
        n += 1
    if status == 1:
        if err == 3:
            msg = f"non-finite coordinates produced at step {n}"
        elif err == 1:
            msg = f"antipodal configuration at step {n}"
        else:
            msg = f"unknown mapping kind at step {n}"
    m = len(u)
    return (
        status,
        n - 1,
        msg,
        np.array(ns, dtype=np.int64),
        np.array(coords, dtype=np.float64).reshape(-1, m),
        np.array(betas, dtype=np.float64),
        np.array(duw, dtype=np.float64),
        np.array(res, dtype=np.float64).reshape(-1, r),
        np.array(dnext, dtype=np.float64),
    )
