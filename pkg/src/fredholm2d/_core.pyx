# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: Poisson-disk sampling and MLS row assembly.

Keep in lockstep with ``_pycore.py``; the test suite checks that both
produce the same results.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, cos, sin, fabs, M_PI

cnp.import_array()

DEF OP_RECT = 0
DEF OP_DISK = 1
DEF OP_UNION = 2
DEF OP_DIFF = 3
DEF OP_INTERSECT = 4
DEF MAX_STACK = 64
DEF MAX_BASIS = 36
DEF COND_LIMIT = 1e12


cdef inline double _max(double a, double b) nogil:
    return a if a > b else b


cdef inline double _min(double a, double b) nogil:
    return a if a < b else b


cdef double _sdf(double x, double y, const cnp.int64_t[:, :] ops,
                 const double[:, :] params) nogil:
    cdef double stack[MAX_STACK]
    cdef int top = 0
    cdef Py_ssize_t n
    cdef cnp.int64_t code, arg
    cdef double dx, dy, ox, oy, a, b
    for n in range(ops.shape[0]):
        code = ops[n, 0]
        arg = ops[n, 1]
        if code == OP_RECT:
            dx = fabs(x - 0.5 * (params[arg, 0] + params[arg, 2])) - 0.5 * (params[arg, 2] - params[arg, 0])
            dy = fabs(y - 0.5 * (params[arg, 1] + params[arg, 3])) - 0.5 * (params[arg, 3] - params[arg, 1])
            ox = _max(dx, 0.0)
            oy = _max(dy, 0.0)
            stack[top] = sqrt(ox * ox + oy * oy) + _min(_max(dx, dy), 0.0)
            top += 1
        elif code == OP_DISK:
            dx = x - params[arg, 0]
            dy = y - params[arg, 1]
            stack[top] = sqrt(dx * dx + dy * dy) - params[arg, 2]
            top += 1
        else:
            top -= 1
            b = stack[top]
            a = stack[top - 1]
            if code == OP_UNION:
                stack[top - 1] = _min(a, b)
            elif code == OP_DIFF:
                stack[top - 1] = _max(a, -b)
            else:
                stack[top - 1] = _max(a, b)
    return stack[0]


def sdf_point(double x, double y, ops, params):
    cdef cnp.int64_t[:, :] o = np.ascontiguousarray(ops, dtype=np.int64)
    cdef double[:, :] p = np.ascontiguousarray(params, dtype=np.float64)
    return _sdf(x, y, o, p)


cdef class _Sampler:
    cdef double x0, y0, x1, y1, cell, r2, r
    cdef Py_ssize_t nx, ny, npts, nactive, pos, n_u
    cdef cnp.int64_t[:] grid
    cdef double[:] px
    cdef double[:] py
    cdef cnp.int64_t[:] active
    cdef const double[:] u
    cdef const cnp.int64_t[:, :] ops
    cdef const double[:, :] params

    cdef bint fits(self, double x, double y):
        cdef Py_ssize_t i = <Py_ssize_t>((x - self.x0) / self.cell)
        cdef Py_ssize_t j = <Py_ssize_t>((y - self.y0) / self.cell)
        cdef Py_ssize_t ii, jj
        cdef cnp.int64_t g
        cdef double dx, dy
        for jj in range(j - 2 if j - 2 > 0 else 0, j + 3 if j + 3 < self.ny else self.ny):
            for ii in range(i - 2 if i - 2 > 0 else 0, i + 3 if i + 3 < self.nx else self.nx):
                g = self.grid[jj * self.nx + ii]
                if g >= 0:
                    dx = self.px[g] - x
                    dy = self.py[g] - y
                    if dx * dx + dy * dy < self.r2:
                        return False
        return True

    cdef void insert(self, double x, double y):
        cdef Py_ssize_t i = <Py_ssize_t>((x - self.x0) / self.cell)
        cdef Py_ssize_t j = <Py_ssize_t>((y - self.y0) / self.cell)
        self.grid[j * self.nx + i] = self.npts
        self.active[self.nactive] = self.npts
        self.nactive += 1
        self.px[self.npts] = x
        self.py[self.npts] = y
        self.npts += 1

    cdef bint run(self, int k):
        cdef Py_ssize_t a, idx
        cdef int t
        cdef bint ok
        cdef double rad, ang, x, y
        while self.nactive > 0:
            if self.pos + 1 + 2 * k > self.n_u:
                return False
            a = <Py_ssize_t>(self.u[self.pos] * self.nactive)
            self.pos += 1
            if a >= self.nactive:
                a = self.nactive - 1
            idx = self.active[a]
            ok = False
            for t in range(k):
                rad = self.r * (1.0 + self.u[self.pos])
                ang = 2.0 * M_PI * self.u[self.pos + 1]
                self.pos += 2
                x = self.px[idx] + rad * cos(ang)
                y = self.py[idx] + rad * sin(ang)
                if (self.x0 <= x and x <= self.x1 and self.y0 <= y and y <= self.y1
                        and _sdf(x, y, self.ops, self.params) < 0.0 and self.fits(x, y)):
                    self.insert(x, y)
                    ok = True
                    break
            if not ok:
                self.active[a] = self.active[self.nactive - 1]
                self.nactive -= 1
        return True


def poisson_disk(bbox, double r, ops, params, init, u, int k, int k_sweep):
    """Compiled twin of ``_pycore.poisson_disk`` (same contract)."""
    cdef _Sampler s = _Sampler()
    cdef Py_ssize_t c, ci, cj, n, cap
    cdef int t
    cdef double x, y
    cdef const double[:, :] init_v = np.ascontiguousarray(np.asarray(init, dtype=np.float64).reshape(-1, 2))
    s.x0, s.y0, s.x1, s.y1 = [float(v) for v in bbox]
    s.r = r
    s.r2 = r * r
    s.cell = r / sqrt(2.0)
    s.nx = <Py_ssize_t>((s.x1 - s.x0) / s.cell) + 1
    s.ny = <Py_ssize_t>((s.y1 - s.y0) / s.cell) + 1
    cap = s.nx * s.ny + init_v.shape[0] + 1
    s.grid = np.full(s.nx * s.ny, -1, dtype=np.int64)
    s.px = np.zeros(cap)
    s.py = np.zeros(cap)
    s.active = np.zeros(cap, dtype=np.int64)
    s.u = np.ascontiguousarray(u, dtype=np.float64)
    s.n_u = s.u.shape[0]
    s.ops = np.ascontiguousarray(ops, dtype=np.int64)
    s.params = np.ascontiguousarray(params, dtype=np.float64)
    s.npts = 0
    s.nactive = 0
    s.pos = 0
    for n in range(init_v.shape[0]):
        if s.fits(init_v[n, 0], init_v[n, 1]):
            s.insert(init_v[n, 0], init_v[n, 1])
    n_init = s.npts
    if not s.run(k):
        return None
    for c in range(s.nx * s.ny):
        if s.grid[c] >= 0:
            continue
        ci = c % s.nx
        cj = c // s.nx
        for t in range(k_sweep):
            if s.pos + 2 > s.n_u:
                return None
            x = s.x0 + (ci + s.u[s.pos]) * s.cell
            y = s.y0 + (cj + s.u[s.pos + 1]) * s.cell
            s.pos += 2
            if x <= s.x1 and y <= s.y1 and _sdf(x, y, s.ops, s.params) < 0.0 and s.fits(x, y):
                s.insert(x, y)
                if not s.run(k):
                    return None
                break
    pts = np.column_stack([np.asarray(s.px)[:s.npts], np.asarray(s.py)[:s.npts]])
    return pts.reshape(-1, 2), n_init, s.pos


def mls_rows(X, Y, indptr, indices, rho, int degree):
    """Compiled twin of ``_pycore.mls_rows`` (same contract)."""
    cdef const double[:, :] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[:, :] Yv = np.ascontiguousarray(Y, dtype=np.float64)
    cdef const cnp.int64_t[:] ptr = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef const cnp.int64_t[:] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef const double[:] rhov = np.ascontiguousarray(rho, dtype=np.float64)
    cdef Py_ssize_t nY = Yv.shape[0]
    cdef int m = (degree + 1) * (degree + 2) // 2
    if m > MAX_BASIS:
        raise ValueError("MLS degree too large")
    data_arr = np.zeros(idx.shape[0])
    status_arr = np.zeros(nY, dtype=np.int64)
    cdef double[:] data = data_arr
    cdef cnp.int64_t[:] status = status_arr
    cdef int ea[MAX_BASIS]
    cdef int eb[MAX_BASIS]
    cdef double P[MAX_BASIS]
    cdef double G[MAX_BASIS * MAX_BASIS]
    cdef double c[MAX_BASIS]
    cdef double powx[16]
    cdef double powy[16]
    cdef int d, j, a, b, q, count
    cdef Py_ssize_t i, n, lo, hi
    cdef double dx, dy, s, w, acc, dmax, dmin
    cdef bint bad
    q = 0
    for d in range(degree + 1):
        for j in range(d + 1):
            ea[q] = d - j
            eb[q] = j
            q += 1
    with nogil:
        for i in range(nY):
            lo = ptr[i]
            hi = ptr[i + 1]
            for a in range(m * m):
                G[a] = 0.0
            count = 0
            for n in range(lo, hi):
                dx = (Xv[idx[n], 0] - Yv[i, 0]) / rhov[i]
                dy = (Xv[idx[n], 1] - Yv[i, 1]) / rhov[i]
                s = sqrt(dx * dx + dy * dy)
                if s >= 1.0:
                    continue
                count += 1
                w = (1.0 - s) * (1.0 - s) * (1.0 - s) * (1.0 - s) * (4.0 * s + 1.0)
                powx[0] = 1.0
                powy[0] = 1.0
                for d in range(1, degree + 1):
                    powx[d] = powx[d - 1] * dx
                    powy[d] = powy[d - 1] * dy
                for a in range(m):
                    P[a] = powx[ea[a]] * powy[eb[a]]
                for a in range(m):
                    for b in range(a + 1):
                        G[a * m + b] += w * P[a] * P[b]
            if count < m:
                status[i] = 1
                continue
            # in-place Cholesky of the lower triangle
            bad = False
            for a in range(m):
                acc = G[a * m + a]
                for b in range(a):
                    acc -= G[a * m + b] * G[a * m + b]
                if acc <= 0.0:
                    bad = True
                    break
                G[a * m + a] = sqrt(acc)
                for q in range(a + 1, m):
                    acc = G[q * m + a]
                    for b in range(a):
                        acc -= G[q * m + b] * G[a * m + b]
                    G[q * m + a] = acc / G[a * m + a]
            if bad:
                status[i] = 2
                continue
            dmax = G[0]
            dmin = G[0]
            for a in range(1, m):
                dmax = _max(dmax, G[a * m + a])
                dmin = _min(dmin, G[a * m + a])
            if (dmax / dmin) * (dmax / dmin) > COND_LIMIT:
                status[i] = 2
                continue
            # solve L L^T c = e1
            for a in range(m):
                acc = 1.0 if a == 0 else 0.0
                for b in range(a):
                    acc -= G[a * m + b] * c[b]
                c[a] = acc / G[a * m + a]
            for a in range(m - 1, -1, -1):
                acc = c[a]
                for b in range(a + 1, m):
                    acc -= G[b * m + a] * c[b]
                c[a] = acc / G[a * m + a]
            for n in range(lo, hi):
                dx = (Xv[idx[n], 0] - Yv[i, 0]) / rhov[i]
                dy = (Xv[idx[n], 1] - Yv[i, 1]) / rhov[i]
                s = sqrt(dx * dx + dy * dy)
                if s >= 1.0:
                    data[n] = 0.0
                    continue
                w = (1.0 - s) * (1.0 - s) * (1.0 - s) * (1.0 - s) * (4.0 * s + 1.0)
                powx[0] = 1.0
                powy[0] = 1.0
                for d in range(1, degree + 1):
                    powx[d] = powx[d - 1] * dx
                    powy[d] = powy[d - 1] * dy
                acc = 0.0
                for a in range(m):
                    acc += powx[ea[a]] * powy[eb[a]] * c[a]
                data[n] = w * acc
    return data_arr, status_arr
