"""Pure-Python versions of the hot loops.

Mirror of ``_core.pyx``: same algorithms, same consumption of the uniform
random stream, so both backends return identical node sets. Used when the
compiled extension is unavailable or when ``FREDHOLM2D_PURE=1``.
"""
import math

import numpy as np

OP_RECT, OP_DISK, OP_UNION, OP_DIFF, OP_INTERSECT = range(5)
COND_LIMIT = 1e12


def sdf_point(x, y, ops, params):
    stack = []
    for code, arg in ops:
        if code == OP_RECT:
            x0, y0, x1, y1 = params[arg]
            dx = abs(x - 0.5 * (x0 + x1)) - 0.5 * (x1 - x0)
            dy = abs(y - 0.5 * (y0 + y1)) - 0.5 * (y1 - y0)
            ox, oy = max(dx, 0.0), max(dy, 0.0)
            stack.append(math.sqrt(ox * ox + oy * oy) + min(max(dx, dy), 0.0))
        elif code == OP_DISK:
            cx, cy, r = params[arg][:3]
            dx, dy = x - cx, y - cy
            stack.append(math.sqrt(dx * dx + dy * dy) - r)
        else:
            b = stack.pop()
            a = stack.pop()
            if code == OP_UNION:
                stack.append(min(a, b))
            elif code == OP_DIFF:
                stack.append(max(a, -b))
            else:
                stack.append(max(a, b))
    return stack[0]


def poisson_disk(bbox, r, ops, params, init, u, k, k_sweep):
    """Bridson dart throwing followed by an empty-cell sweep.

    Returns ``(points, n_init_kept, consumed)`` or ``None`` when the uniform
    stream ``u`` runs out (the caller retries with a longer stream).
    """
    ops = [(int(a), int(b)) for a, b in ops]
    params = [tuple(float(v) for v in row) for row in params]
    x0, y0, x1, y1 = (float(v) for v in bbox)
    cell = r / math.sqrt(2.0)
    nx = int((x1 - x0) / cell) + 1
    ny = int((y1 - y0) / cell) + 1
    grid = [-1] * (nx * ny)
    px, py, active = [], [], []
    r2 = r * r
    n_u = len(u)
    pos = 0

    def fits(x, y):
        i = int((x - x0) / cell)
        j = int((y - y0) / cell)
        for jj in range(max(j - 2, 0), min(j + 3, ny)):
            for ii in range(max(i - 2, 0), min(i + 3, nx)):
                g = grid[jj * nx + ii]
                if g >= 0:
                    dx = px[g] - x
                    dy = py[g] - y
                    if dx * dx + dy * dy < r2:
                        return False
        return True

    def insert(x, y):
        i = int((x - x0) / cell)
        j = int((y - y0) / cell)
        grid[j * nx + i] = len(px)
        active.append(len(px))
        px.append(x)
        py.append(y)

    for x, y in init:
        x, y = float(x), float(y)
        if fits(x, y):
            insert(x, y)
    n_init = len(px)

    def run():
        nonlocal pos
        while active:
            if pos + 1 + 2 * k > n_u:
                return False
            a = int(u[pos] * len(active))
            pos += 1
            if a >= len(active):
                a = len(active) - 1
            idx = active[a]
            ok = False
            for _ in range(k):
                rad = r * (1.0 + u[pos])
                ang = 2.0 * math.pi * u[pos + 1]
                pos += 2
                x = px[idx] + rad * math.cos(ang)
                y = py[idx] + rad * math.sin(ang)
                if (x0 <= x <= x1 and y0 <= y <= y1
                        and sdf_point(x, y, ops, params) < 0.0 and fits(x, y)):
                    insert(x, y)
                    ok = True
                    break
            if not ok:
                active[a] = active[-1]
                active.pop()
        return True

    if not run():
        return None
    for c in range(nx * ny):
        if grid[c] >= 0:
            continue
        ci = c % nx
        cj = c // nx
        for _ in range(k_sweep):
            if pos + 2 > n_u:
                return None
            x = x0 + (ci + u[pos]) * cell
            y = y0 + (cj + u[pos + 1]) * cell
            pos += 2
            if x <= x1 and y <= y1 and sdf_point(x, y, ops, params) < 0.0 and fits(x, y):
                insert(x, y)
                if not run():
                    return None
                break
    pts = np.column_stack([np.array(px, dtype=float), np.array(py, dtype=float)])
    return pts.reshape(-1, 2), n_init, pos


def exponents(degree):
    return [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]


def mls_rows(X, Y, indptr, indices, rho, degree):
    """Moving least squares shape-function values, one row per Y point.

    Returns ``(data, status)``; status is 0 (ok), 1 (too few weighted
    neighbours) or 2 (Gram matrix ill-conditioned or not positive definite).
    """
    ex = exponents(degree)
    m = len(ex)
    data = np.zeros(len(indices))
    status = np.zeros(len(Y), dtype=np.int64)
    for i in range(len(Y)):
        lo, hi = indptr[i], indptr[i + 1]
        nb = indices[lo:hi]
        d = (X[nb] - Y[i]) / rho[i]
        s = np.sqrt(d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1])
        w = np.where(s < 1.0, (1.0 - s) ** 4 * (4.0 * s + 1.0), 0.0)
        if np.count_nonzero(w > 0.0) < m:
            status[i] = 1
            continue
        P = np.column_stack([d[:, 0] ** a * d[:, 1] ** b for a, b in ex])
        G = (P * w[:, None]).T @ P
        try:
            L = np.linalg.cholesky(G)
        except np.linalg.LinAlgError:
            status[i] = 2
            continue
        diag = np.diag(L)
        if (diag.max() / diag.min()) ** 2 > COND_LIMIT:
            status[i] = 2
            continue
        e1 = np.zeros(m)
        e1[0] = 1.0
        c = np.linalg.solve(L.T, np.linalg.solve(L, e1))
        data[lo:hi] = w * (P @ c)
    return data, status
