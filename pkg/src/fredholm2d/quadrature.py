"""Quadrature rules on planar domains.

Rules are plain ``(nodes, weights)`` pairs. Production rules on scattered
nodes are obtained by moment fitting: on every cell of a background grid
the weights of nearby nodes are chosen so that all monomials up to the
fitted degree are integrated exactly over the cell's intersection with the
domain. Exactness on cells of size ~h gives order ``degree + 1``; the
nonnegative mode keeps ``sum |w| = area``.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.spatial import cKDTree

from .errors import (DegreeTooLarge, InfeasibleNonnegative, RankDeficient,
                     ValidationError, ZeroError)
from .geometry import (Disk, Difference, Rectangle, monomial_exponents,
                       rectangle_moments)
from .nnls import least_distance, nnls
from .nodes import NodeSet

MAX_DEGREE = 20
FIT_RTOL = 1e-11


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes (``(n, 2)`` or ``(n,)`` for 1D rules) and weights."""

    nodes: np.ndarray
    weights: np.ndarray
    nominal_order: int
    domain_tag: str = ""
    node_set: NodeSet = None

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if len(nodes) != len(weights):
            raise ValidationError("weights", "one weight per node required")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return len(self.weights)

    @property
    def h(self):
        return self.node_set.spacing_h if self.node_set is not None else float("nan")


@dataclass(frozen=True, eq=False)
class MomentTable:
    """Integrals of ``((x-cx)/sx)^a ((y-cy)/sy)^b`` over a region.

    With the default ``center=(0, 0)`` and ``scale=(1, 1)`` these are the
    raw monomial moments.
    """

    degree: int
    values: np.ndarray
    center: tuple = (0.0, 0.0)
    scale: tuple = (1.0, 1.0)
    exponents: list = field(default=None)

    def __post_init__(self):
        if self.exponents is None:
            object.__setattr__(self, "exponents", monomial_exponents(self.degree))


def vandermonde(points, exponents, center=(0.0, 0.0), scale=(1.0, 1.0)):
    """Rows are monomials, columns are points."""
    xi = (points[:, 0] - center[0]) / scale[0]
    eta = (points[:, 1] - center[1]) / scale[1]
    return np.array([xi ** a * eta ** b for a, b in exponents])


def bbox_frame(box):
    x0, y0, x1, y1 = box
    return (0.5 * (x0 + x1), 0.5 * (y0 + y1)), (0.5 * (x1 - x0), 0.5 * (y1 - y0))


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def _region_moments(domain, box, exponents, center, scale, refinement):
    """Quadtree: exact rectangle moments on interior cells, Green's theorem
    on the cut cells that remain at the finest level."""
    total = np.zeros(len(exponents))
    stack = [(box, 0)]
    while stack:
        (x0, y0, x1, y1), level = stack.pop()
        c = np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)])
        half_diag = 0.5 * math.hypot(x1 - x0, y1 - y0)
        d = float(domain.sdf(c))
        if d <= -half_diag:
            total += rectangle_moments((x0, y0, x1, y1), exponents, center, scale)
        elif d >= half_diag:
            continue
        elif level >= refinement:
            total += domain.box_moments((x0, y0, x1, y1), exponents, center, scale)
        else:
            xm, ym = c
            stack.extend([((x0, y0, xm, ym), level + 1), ((xm, y0, x1, ym), level + 1),
                          ((x0, ym, xm, y1), level + 1), ((xm, ym, x1, y1), level + 1)])
    return total


def compute_moments(domain, degree, refinement=4, center=(0.0, 0.0), scale=(1.0, 1.0)):
    """Moments of all monomials of total degree <= ``degree`` over the domain.

    Single rectangles and disks use closed forms; CSG domains are
    integrated by a quadtree of depth ``refinement`` whose leaf cells that
    still cut the boundary are integrated exactly through Green's theorem.
    """
    if degree < 0:
        raise ValidationError("degree", "degree must be nonnegative")
    if degree > MAX_DEGREE:
        raise DegreeTooLarge(degree)
    ex = monomial_exponents(degree)
    if domain.is_primitive:
        values = domain.shape.moments(ex, center, scale)
    else:
        values = _region_moments(domain, domain.bounding_box, ex, center, scale, refinement)
    return MomentTable(degree, np.asarray(values, dtype=float), tuple(center), tuple(scale), ex)


# ---------------------------------------------------------------------------
# reference rules
# ---------------------------------------------------------------------------

def _as_bbox(rect):
    if isinstance(rect, Rectangle):
        return rect.bbox
    return tuple(float(v) for v in rect)


def tensor_gauss(rectangle, points_per_axis, domain_tag=""):
    """Tensor Gauss-Legendre rule on an axis-aligned rectangle."""
    if points_per_axis < 1:
        raise ValidationError("points_per_axis", "need at least one point per axis")
    return composite_gauss(rectangle, 1, points_per_axis, domain_tag)


def composite_gauss(rectangle, panels, points_per_axis, domain_tag=""):
    """Tensor Gauss-Legendre on a ``panels x panels`` subdivision."""
    x0, y0, x1, y1 = _as_bbox(rectangle)
    g, gw = np.polynomial.legendre.leggauss(points_per_axis)
    ex = np.linspace(x0, x1, panels + 1)
    ey = np.linspace(y0, y1, panels + 1)
    xs = (0.5 * (ex[1:, None] + ex[:-1, None]) + 0.5 * np.diff(ex)[:, None] * g).ravel()
    wx = (0.5 * np.diff(ex)[:, None] * gw).ravel()
    ys = (0.5 * (ey[1:, None] + ey[:-1, None]) + 0.5 * np.diff(ey)[:, None] * g).ravel()
    wy = (0.5 * np.diff(ey)[:, None] * gw).ravel()
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    W = np.outer(wx, wy)
    return QuadratureRule(np.column_stack([X.ravel(), Y.ravel()]), W.ravel(),
                          2 * points_per_axis, domain_tag)


def polar_gauss(center, r_outer, n_radial, n_angular, r_inner=0.0, domain_tag=""):
    """Gauss-Legendre in radius times the trapezoid rule in angle."""
    g, gw = np.polynomial.legendre.leggauss(n_radial)
    r = r_inner + 0.5 * (r_outer - r_inner) * (g + 1.0)
    wr = 0.5 * (r_outer - r_inner) * gw * r
    th = 2.0 * math.pi * np.arange(n_angular) / n_angular
    R, T = np.meshgrid(r, th, indexing="ij")
    W = np.outer(wr, np.full(n_angular, 2.0 * math.pi / n_angular))
    pts = np.column_stack([center[0] + (R * np.cos(T)).ravel(),
                           center[1] + (R * np.sin(T)).ravel()])
    return QuadratureRule(pts, W.ravel(), 2 * n_radial, domain_tag)


def reference_rule(domain, accuracy="high"):
    """A spectrally accurate rule for smooth integrands on simple domains.

    Rectangles get composite tensor Gauss, disks and concentric annuli a
    polar product rule. Other CSG domains fall back to a dense moment-fitted
    rule of degree 6 with least-norm weights (a few slightly negative
    weights do not matter for a reference, and the nonnegative fit is two
    orders of magnitude slower at this degree).
    """
    n = 24 if accuracy == "high" else 12
    shape = domain.shape
    if isinstance(shape, Rectangle):
        return composite_gauss(shape, 4, n, domain.name)
    if isinstance(shape, Disk):
        return polar_gauss((shape.cx, shape.cy), shape.r, 2 * n, 8 * n, domain_tag=domain.name)
    if (isinstance(shape, Difference) and isinstance(shape.a, Disk) and isinstance(shape.b, Disk)
            and (shape.a.cx, shape.a.cy) == (shape.b.cx, shape.b.cy) and shape.b.r < shape.a.r):
        return polar_gauss((shape.a.cx, shape.a.cy), shape.a.r, 2 * n, 8 * n,
                           r_inner=shape.b.r, domain_tag=domain.name)
    from .nodes import generate_nodes
    nodes = generate_nodes(domain, domain.diameter / 120.0, seed=12345)
    return fitted_rule(domain, nodes, 6, mode="least_norm")


# ---------------------------------------------------------------------------
# moment fitting
# ---------------------------------------------------------------------------

def _solve_weights(V, mu, mode):
    """Weights with ``V @ w = mu``; returns (w, ok)."""
    tol = FIT_RTOL * max(np.linalg.norm(mu), 1e-300)
    w, *_ = np.linalg.lstsq(V, mu, rcond=None)
    ok = np.linalg.norm(V @ w - mu) <= tol
    if mode == "least_norm" or (ok and w.min() >= 0.0):
        return w, ok
    # minimum-norm nonnegative weights: spreads the mass like the least-norm
    # fit instead of the few-node vertex solutions plain NNLS returns
    n = V.shape[1]
    G = np.vstack([V, -V, np.eye(n)])
    hv = np.concatenate([mu, -mu, np.zeros(n)])
    w, feasible = least_distance(G, hv)
    if feasible:
        support = w > 1e-12 * max(w.max(), 1e-300)
        ws = np.zeros(n)
        ws[support] = np.linalg.lstsq(V[:, support], mu, rcond=None)[0]
        if ws.min() >= 0.0 and np.linalg.norm(V @ ws - mu) <= tol:
            return ws, True
    w, _ = nnls(V, mu)
    return w, np.linalg.norm(V @ w - mu) <= tol


def moment_fit_weights(nodes, moments, mode="nonnegative", domain_tag=""):
    """Single global moment fit: weights that reproduce ``moments`` exactly.

    ``least_norm`` returns the minimum-norm solution of the Vandermonde
    system; ``nonnegative`` returns it when it is already nonnegative and
    otherwise solves a nonnegative least squares problem.
    """
    if mode not in ("least_norm", "nonnegative"):
        raise ValidationError("mode", f"unknown fitting mode {mode!r}")
    pts = nodes.points if isinstance(nodes, NodeSet) else np.asarray(nodes, float).reshape(-1, 2)
    n_mono = len(moments.exponents)
    if len(pts) < n_mono:
        raise RankDeficient(f"{len(pts)} nodes cannot fit {n_mono} moments")
    V = vandermonde(pts, moments.exponents, moments.center, moments.scale)
    w, ok = _solve_weights(V, moments.values, mode)
    if not ok:
        if mode == "least_norm":
            raise RankDeficient("moment system not solvable to tolerance")
        raise InfeasibleNonnegative("no nonnegative weights reproduce the moments")
    node_set = nodes if isinstance(nodes, NodeSet) else None
    return QuadratureRule(pts, w, moments.degree + 1, domain_tag, node_set)


def default_cell_factor(degree):
    return max(2.0, math.sqrt(2.0 * (degree + 1) * (degree + 2) / 2))


def _cell_grid(domain, cell_size):
    x0, y0, x1, y1 = domain.bounding_box
    nx = max(1, int(round((x1 - x0) / cell_size)))
    ny = max(1, int(round((y1 - y0) / cell_size)))
    return np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1)


def fitted_rule(domain, nodes, degree, mode="nonnegative", cell_factor=None):
    """Composite moment-fitted rule on scattered nodes (order ``degree + 1``).

    Parameters
    ----------
    domain : Domain
    nodes : NodeSet
    degree : int
        Polynomial degree integrated exactly on every background cell.
    mode : {'nonnegative', 'least_norm'}
    cell_factor : float, optional
        Background cell size in units of the packing distance of ``nodes``.

    Returns
    -------
    QuadratureRule
    """
    if degree < 0 or degree > MAX_DEGREE:
        raise DegreeTooLarge(degree) if degree > MAX_DEGREE else ValidationError("degree")
    if mode not in ("least_norm", "nonnegative"):
        raise ValidationError("mode", f"unknown fitting mode {mode!r}")
    pts = nodes.points
    ex = monomial_exponents(degree)
    n_mono = len(ex)
    spacing = math.sqrt(domain.area / len(pts))
    cf = default_cell_factor(degree) if cell_factor is None else cell_factor
    gx, gy = _cell_grid(domain, cf * spacing)
    nx, ny = len(gx) - 1, len(gy) - 1
    boxes = {}
    areas = {}
    full = (gx[1] - gx[0]) * (gy[1] - gy[0])
    for i in range(nx):
        for j in range(ny):
            box = (gx[i], gy[j], gx[i + 1], gy[j + 1])
            c = np.array([0.5 * (box[0] + box[2]), 0.5 * (box[1] + box[3])])
            half_diag = 0.5 * math.hypot(box[2] - box[0], box[3] - box[1])
            d = float(domain.sdf(c))
            if d >= half_diag:
                continue
            if d <= -half_diag:
                area = full
            else:
                area = float(domain.box_moments(box, [(0, 0)])[0])
            if area > 1e-12 * full:
                boxes[(i, j)] = box
                areas[(i, j)] = area

    ci = np.clip(np.searchsorted(gx, pts[:, 0], side="right") - 1, 0, nx - 1)
    cj = np.clip(np.searchsorted(gy, pts[:, 1], side="right") - 1, 0, ny - 1)
    cell_nodes = {}
    for idx, key in enumerate(zip(ci.tolist(), cj.tolist())):
        cell_nodes.setdefault(key, []).append(idx)

    # a group is a set of cells fitted together; cut cells join neighbours
    # until every group has half a cell of area and enough nodes
    groups = {key: [key] for key in boxes}
    group_of = {key: key for key in boxes}
    min_nodes = math.ceil(1.5 * n_mono)

    def g_area(g):
        return sum(areas[k] for k in groups[g])

    def g_count(g):
        return sum(len(cell_nodes.get(k, ())) for k in groups[g])

    def neighbour_groups(g):
        out = set()
        for i, j in groups[g]:
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    k = (i + di, j + dj)
                    if k in group_of and group_of[k] != g:
                        out.add(group_of[k])
        return out

    def merge_into_neighbour(g):
        nbrs = neighbour_groups(g)
        if not nbrs:
            return None
        best = max(sorted(nbrs), key=g_area)
        for k in groups.pop(g):
            group_of[k] = best
            groups[best].append(k)
        return best

    while True:
        needy = [g for g in sorted(groups)
                 if g_area(g) < 0.5 * full or g_count(g) < min_nodes]
        needy = [g for g in needy if neighbour_groups(g)]
        if not needy:
            break
        merge_into_neighbour(min(needy, key=g_area))

    tree = cKDTree(pts)
    cell = gx[1] - gx[0]

    def fit_group(g):
        members = groups[g]
        gbox = (min(boxes[k][0] for k in members), min(boxes[k][1] for k in members),
                max(boxes[k][2] for k in members), max(boxes[k][3] for k in members))
        center, scale = bbox_frame(gbox)
        mu = np.zeros(n_mono)
        for k in members:
            box = boxes[k]
            if areas[k] == full:
                mu += rectangle_moments(box, ex, center, scale)
            else:
                mu += domain.box_moments(box, ex, center, scale)
        base = sorted(i for k in members for i in cell_nodes.get(k, ()))
        for grow in (0.0, 0.5, 1.0, 2.0):
            if grow == 0.0:
                cand = np.array(base, dtype=int)
            else:
                half = 0.5 * math.hypot(gbox[2] - gbox[0], gbox[3] - gbox[1]) + grow * cell
                cand = np.array(sorted(tree.query_ball_point(center, half)), dtype=int)
            if len(cand) < n_mono:
                continue
            V = vandermonde(pts[cand], ex, center, scale)
            w, ok = _solve_weights(V, mu, mode)
            if ok:
                return cand, w
        return None

    # a group that cannot be fitted is merged with a neighbour and refitted
    fits = {}
    pending = sorted(groups)
    while pending:
        g = pending.pop()
        if g not in groups:
            continue
        result = fit_group(g)
        if result is not None:
            fits[g] = result
            continue
        where = boxes[g][:2]
        merged = merge_into_neighbour(g)
        if merged is None:
            if mode == "least_norm":
                raise RankDeficient(f"cannot fit degree {degree} moments near {where}")
            raise InfeasibleNonnegative(f"no nonnegative degree-{degree} fit near {where}")
        fits.pop(merged, None)
        pending.append(merged)

    weights = np.zeros(len(pts))
    for g in sorted(fits):
        cand, w = fits[g]
        weights[cand] += w
    return QuadratureRule(pts, weights, degree + 1, domain.name, nodes)


# ---------------------------------------------------------------------------
# evaluation and diagnostics
# ---------------------------------------------------------------------------

def apply_rule(rule, f):
    """``sum_i w_i f(y_i)`` (compensated summation).

    ``f`` is a vectorized callable on the node array or an array of values.
    """
    values = f(rule.nodes) if callable(f) else f
    values = np.broadcast_to(np.asarray(values, dtype=float), rule.weights.shape)
    return math.fsum(rule.weights * values)


def stability_l1(rule):
    return math.fsum(np.abs(rule.weights))


def rectangle_rule_1d(N):
    """Right rectangle rule on [0, 1]: nodes i/N, weights 1/N."""
    if N < 1:
        raise ValidationError("N", "N must be at least 1")
    i = np.arange(1, N + 1)
    return QuadratureRule(i / N, np.full(N, 1.0 / N), 1, "interval")


def unstable_rectangle_rule_1d(N):
    """Rectangle rule with every node duplicated at i/N - 1/N^2.

    Weights are 1 + 1/N on the original nodes and -1 on the copies, so the
    rule keeps first order on C^1 functions while sum |w| = 2N + 1 grows.
    """
    if N < 1:
        raise ValidationError("N", "N must be at least 1")
    i = np.arange(1, N + 1)
    nodes = np.concatenate([i / N, i / N - 1.0 / N ** 2])
    weights = np.concatenate([np.full(N, 1.0 + 1.0 / N), np.full(N, -1.0)])
    return QuadratureRule(nodes, weights, 1, "interval")


def eoc_sequence(errors, hs):
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / np.log(hs[:-1] / hs[1:])


def measure_order(rule_family, f, exact, h_list):
    """Observed orders between successive rules of a refinement family."""
    if len(h_list) < 3:
        raise ValidationError("h_list", "at least three levels are needed")
    errors = [abs(apply_rule(rule_family(h), f) - exact) for h in h_list]
    if min(errors) < 1e-14:
        raise ZeroError("integration error vanished; order not measurable")
    return eoc_sequence(errors, h_list)


def save_rule(path, rule):
    """Write ``x y w`` rows (``x w`` for 1D rules)."""
    with open(path, "w") as fh:
        nodes = rule.nodes.reshape(len(rule), -1)
        for row, w in zip(nodes, rule.weights):
            fh.write(" ".join(f"{v:.17g}" for v in row) + f" {w:.17g}\n")


def load_rule(path, nominal_order=1, domain_tag=""):
    data = np.loadtxt(path, ndmin=2)
    nodes = data[:, :-1] if data.shape[1] > 2 else data[:, 0]
    return QuadratureRule(nodes, data[:, -1], nominal_order, domain_tag)
