# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.

Geometry codes: 0 = unit sphere (ambient unit vectors), 1 = segment of R.
Mapping codes: 0 identity, 1 cap projection (center, radius), 2 geodesic
contraction toward a point (point, lambda), 3 negation, 4 interval clamp (lo, hi).

Mirrors ``_pykernels`` operation for operation.
"""
import numpy as np

from libc.math cimport atan2, fabs, isfinite, pow, sin, sqrt, M_PI, NAN
from libc.stdlib cimport free, malloc

from halpern_cat1.errors import AntipodalError, GeometryError, NonFiniteStateError

cdef double COINCIDENT = 1e-14
cdef double ANTIPODAL_MARGIN = 1e-9

BACKEND = "compiled"


cdef inline void _copy(const double* src, double* dst, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t k
    for k in range(m):
        dst[k] = src[k]


cdef double _dist(int geom, const double* x, const double* y, Py_ssize_t m) noexcept nogil:
    cdef double a = 0.0, b = 0.0, p, q
    cdef Py_ssize_t k
    if geom == 1:
        return fabs(x[0] - y[0])
    for k in range(m):
        p = x[k] - y[k]
        q = x[k] + y[k]
        a += p * p
        b += q * q
    return 2.0 * atan2(sqrt(a), sqrt(b))


cdef int _combine(int geom, double t, const double* x, const double* y,
                  double* out, Py_ssize_t m) noexcept nogil:
    # 0 ok, 1 antipodal
    cdef double theta, s, a, b, norm
    cdef Py_ssize_t k
    if t == 1.0:
        _copy(x, out, m)
        return 0
    if t == 0.0:
        _copy(y, out, m)
        return 0
    if geom == 1:
        out[0] = t * x[0] + (1.0 - t) * y[0]
        return 0
    theta = _dist(geom, x, y, m)
    if theta < COINCIDENT:
        _copy(x, out, m)
        return 0
    if theta >= M_PI - ANTIPODAL_MARGIN:
        return 1
    s = sin(theta)
    a = sin(t * theta) / s
    b = sin((1.0 - t) * theta) / s
    norm = 0.0
    for k in range(m):
        out[k] = a * x[k] + b * y[k]
        norm += out[k] * out[k]
    norm = sqrt(norm)
    for k in range(m):
        out[k] = out[k] / norm
    return 0


cdef int _apply(int geom, int kind, const double* c, double s0, double s1,
                const double* x, double* out, Py_ssize_t m) noexcept nogil:
    cdef double theta, v
    cdef Py_ssize_t k
    if kind == 0:
        _copy(x, out, m)
        return 0
    if kind == 1:
        if geom == 1:
            v = x[0]
            if v < c[0] - s0:
                v = c[0] - s0
            elif v > c[0] + s0:
                v = c[0] + s0
            out[0] = v
            return 0
        theta = _dist(geom, c, x, m)
        if theta <= s0:
            _copy(x, out, m)
            return 0
        if theta >= M_PI - ANTIPODAL_MARGIN:
            return 1
        return _combine(geom, 1.0 - s0 / theta, c, x, out, m)
    if kind == 2:
        return _combine(geom, s0, c, x, out, m)
    if kind == 3:
        for k in range(m):
            out[k] = -x[k]
        return 0
    if kind == 4:
        v = x[0]
        if v < s0:
            v = s0
        elif v > s1:
            v = s1
        out[0] = v
        return 0
    return 2


cdef int _w(int geom, Py_ssize_t r, const int* kinds, const double* centers,
            const double* scal, const double* alphas, const double* x,
            double* out, double* tmp, Py_ssize_t m) noexcept nogil:
    # U_0 = x; U_k = alpha_k T_k(U_{k-1}) (+) (1 - alpha_k) x; out = U_r
    cdef Py_ssize_t i
    cdef int err
    _copy(x, out, m)
    for i in range(r):
        err = _apply(geom, kinds[i], centers + i * m, scal[2 * i], scal[2 * i + 1], out, tmp, m)
        if err:
            return err
        err = _combine(geom, alphas[i], tmp, x, out, m)
        if err:
            return err
    return 0


def _as_c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def dist(int geom, x, y):
    cdef double[::1] xv = _as_c(x)
    cdef double[::1] yv = _as_c(y)
    return _dist(geom, &xv[0], &yv[0], xv.shape[0])


def combine(int geom, double t, x, y):
    cdef double[::1] xv = _as_c(x)
    cdef double[::1] yv = _as_c(y)
    out = np.empty(xv.shape[0])
    cdef double[::1] ov = out
    if _combine(geom, t, &xv[0], &yv[0], &ov[0], xv.shape[0]):
        raise AntipodalError("points are antipodal; geodesic not unique")
    return out


def apply_mapping(int geom, int kind, center, double s0, double s1, x):
    cdef double[::1] cv = _as_c(center)
    cdef double[::1] xv = _as_c(x)
    out = np.empty(xv.shape[0])
    cdef double[::1] ov = out
    cdef int err = _apply(geom, kind, &cv[0], s0, s1, &xv[0], &ov[0], xv.shape[0])
    if err == 1:
        raise AntipodalError("point is antipodal to the mapping center")
    if err:
        raise GeometryError(f"unknown mapping kind {kind}")
    return out


def w_eval(int geom, kinds, centers, scal, alphas, x):
    cdef int[::1] kv = np.ascontiguousarray(kinds, dtype=np.intc)
    cdef double[:, ::1] cv = _as_c(centers)
    cdef double[:, ::1] sv = _as_c(scal)
    cdef double[::1] av = _as_c(alphas)
    cdef double[::1] xv = _as_c(x)
    cdef Py_ssize_t m = xv.shape[0]
    out = np.empty(m)
    tmp = np.empty(m)
    cdef double[::1] ov = out
    cdef double[::1] tv = tmp
    cdef int err = _w(geom, kv.shape[0], &kv[0], &cv[0, 0], &sv[0, 0], &av[0],
                      &xv[0], &ov[0], &tv[0], m)
    if err == 1:
        raise AntipodalError("antipodal configuration inside W-mapping")
    if err:
        raise GeometryError("unknown mapping kind")
    return out


def run_fused(int geom, u, x1, kinds, centers, scal, alphas, int beta_kind,
              double beta_q, beta_table, long max_iters, double stop_tol,
              oracle, long stride):
    """Halpern loop for kernel-expressible mapping families.

    Returns (status, steps, message, ns, coords, betas, d_u_w, resid, d_next);
    status 0 = stop rule met, 2 = max_iters reached, 1 = error.
    """
    cdef double[::1] uv = _as_c(u)
    cdef double[::1] x1v = _as_c(x1)
    cdef int[::1] kv = np.ascontiguousarray(kinds, dtype=np.intc)
    cdef double[:, ::1] cv = _as_c(centers)
    cdef double[:, ::1] sv = _as_c(scal)
    cdef double[:, ::1] av = _as_c(alphas)
    cdef double[::1] btv = _as_c(beta_table if beta_table is not None else np.zeros(1))
    cdef bint has_oracle = oracle is not None
    cdef double[::1] pv = _as_c(oracle if has_oracle else np.zeros(uv.shape[0]))
    cdef Py_ssize_t m = uv.shape[0]
    cdef Py_ssize_t r = kv.shape[0]
    cdef Py_ssize_t a_rows = av.shape[0]
    if stride < 1:
        stride = 1
    if beta_kind == 1 and btv.shape[0] < max_iters:
        raise GeometryError("beta table shorter than max_iters")
    if a_rows != 1 and a_rows < max_iters:
        raise GeometryError("alpha table shorter than max_iters")

    cdef Py_ssize_t cap = max_iters // stride + 2
    ns_a = np.zeros(cap, dtype=np.int64)
    coords_a = np.zeros((cap, m))
    betas_a = np.full(cap, np.nan)
    duw_a = np.full(cap, np.nan)
    res_a = np.zeros((cap, r))
    dnext_a = np.full(cap, np.nan)
    cdef long long[::1] ns = ns_a
    cdef double[:, ::1] coords = coords_a
    cdef double[::1] betas = betas_a
    cdef double[::1] duw = duw_a
    cdef double[:, ::1] res = res_a
    cdef double[::1] dnext = dnext_a

    cdef double* x = <double*> malloc(m * sizeof(double))
    cdef double* xn = <double*> malloc(m * sizeof(double))
    cdef double* w = <double*> malloc(m * sizeof(double))
    cdef double* tmp = <double*> malloc(m * sizeof(double))
    cdef double* cur_res = <double*> malloc((r if r > 0 else 1) * sizeof(double))
    cdef long n = 1
    cdef Py_ssize_t row = 0, i, k
    cdef int stop, err = 0, status = 0
    cdef bint have_res, record
    cdef double disp = 1e308, dor, maxres, beta, D
    cdef const double* arow
    msg = None
    try:
        _copy(&x1v[0], x, m)
        with nogil:
            while True:
                have_res = False
                stop = 0
                if has_oracle:
                    dor = _dist(geom, x, &pv[0], m)
                    if dor < stop_tol:
                        stop = 1
                else:
                    maxres = 0.0
                    for i in range(r):
                        err = _apply(geom, kv[i], &cv[i, 0], sv[i, 0], sv[i, 1], x, tmp, m)
                        if err:
                            break
                        cur_res[i] = _dist(geom, tmp, x, m)
                        if cur_res[i] > maxres:
                            maxres = cur_res[i]
                    if err:
                        status = 1
                        break
                    have_res = True
                    if n >= 2 and disp < stop_tol and maxres < stop_tol:
                        stop = 1
                if stop == 0 and n > max_iters:
                    stop = 2
                record = stop != 0 or (n - 1) % stride == 0
                if record:
                    if not have_res:
                        for i in range(r):
                            err = _apply(geom, kv[i], &cv[i, 0], sv[i, 0], sv[i, 1], x, tmp, m)
                            if err:
                                break
                            cur_res[i] = _dist(geom, tmp, x, m)
                        if err:
                            status = 1
                            break
                    ns[row] = n
                    for k in range(m):
                        coords[row, k] = x[k]
                    for i in range(r):
                        res[row, i] = cur_res[i]
                    row += 1
                if stop:
                    status = 0 if stop == 1 else 2
                    break
                if beta_kind == 0:
                    beta = pow(<double>(n + 1), -beta_q)
                else:
                    beta = btv[n - 1]
                arow = &av[0, 0] if a_rows == 1 else &av[n - 1, 0]
                err = _w(geom, r, &kv[0], &cv[0, 0], &sv[0, 0], arow, x, w, tmp, m)
                if err:
                    status = 1
                    break
                D = _dist(geom, &uv[0], w, m)
                err = _combine(geom, beta, &uv[0], w, xn, m)
                if err:
                    status = 1
                    break
                if record:
                    betas[row - 1] = beta
                    duw[row - 1] = D
                    if has_oracle:
                        dnext[row - 1] = _dist(geom, xn, &pv[0], m)
                for k in range(m):
                    if not isfinite(xn[k]):
                        err = 3
                if err:
                    status = 1
                    break
                disp = _dist(geom, xn, x, m)
                _copy(xn, x, m)
                n += 1
        if status == 1:
            if err == 3:
                msg = f"non-finite coordinates produced at step {n}"
            elif err == 1:
                msg = f"antipodal configuration at step {n}"
            else:
                msg = f"unknown mapping kind at step {n}"
    finally:
        free(x)
        free(xn)
        free(w)
        free(tmp)
        free(cur_res)
    return (status, n - 1, msg, ns_a[:row], coords_a[:row], betas_a[:row],
            duw_a[:row], res_a[:row], dnext_a[:row])
