"""Planar CSG domains built from rectangles and disks.

A :class:`Domain` wraps a shape tree (primitives combined with ``|``, ``-``
and ``&``) and exposes a signed distance, an inside test, the oriented
boundary of the combined region as parametric curves, and exact polynomial
moments of the region (or of its intersection with an axis-aligned box)
via Green's theorem.
"""
from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

from .errors import ValidationError

TWO_PI = 2.0 * math.pi
# relative gap below which two curves are treated as touching at one point
TANGENT_RTOL = 1e-12

# opcodes of the flattened shape program consumed by the sampling kernels
OP_RECT, OP_DISK, OP_UNION, OP_DIFF, OP_INTERSECT = range(5)


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """Straight segment from ``p0`` to ``p1``, parametrized on [0, 1]."""

    p0: tuple
    p1: tuple

    def point(self, t):
        t = np.asarray(t, dtype=float)[..., None]
        return (1.0 - t) * np.asarray(self.p0) + t * np.asarray(self.p1)

    def derivative(self, t):
        d = np.subtract(self.p1, self.p0)
        return np.broadcast_to(d, np.shape(t) + (2,)).astype(float)

    @property
    def length(self):
        return math.dist(self.p0, self.p1)

    def sub(self, t0, t1):
        a, b = self.point([t0, t1])
        return Segment(tuple(a), tuple(b))

    def reversed(self):
        return Segment(self.p1, self.p0)

    def param_of(self, p):
        d = np.subtract(self.p1, self.p0)
        return float(np.dot(np.subtract(p, self.p0), d) / np.dot(d, d))

    def gauss_chunks(self, degree):
        return [(0.0, 1.0, degree // 2 + 2)]


@dataclass(frozen=True)
class Arc:
    """Circular arc ``center + radius*(cos a, sin a)`` for a from a0 to a1.

    ``a1 > a0`` runs counterclockwise, ``a1 < a0`` clockwise.
    """

    center: tuple
    radius: float
    a0: float
    a1: float

    def angle(self, t):
        return self.a0 + np.asarray(t, dtype=float) * (self.a1 - self.a0)

    def point(self, t):
        a = self.angle(t)
        return np.stack([self.center[0] + self.radius * np.cos(a),
                         self.center[1] + self.radius * np.sin(a)], axis=-1)

    def derivative(self, t):
        a = self.angle(t)
        s = self.radius * (self.a1 - self.a0)
        return np.stack([-s * np.sin(a), s * np.cos(a)], axis=-1)

    @property
    def length(self):
        return self.radius * abs(self.a1 - self.a0)

    def sub(self, t0, t1):
        return Arc(self.center, self.radius,
                   float(self.angle(t0)), float(self.angle(t1)))

    def reversed(self):
        return Arc(self.center, self.radius, self.a1, self.a0)

    def param_of(self, p):
        theta = math.atan2(p[1] - self.center[1], p[0] - self.center[0])
        span = self.a1 - self.a0
        if span > 0:
            delta = (theta - self.a0) % TWO_PI
        else:
            delta = (self.a0 - theta) % TWO_PI
        t = delta / abs(span)
        # a point at the start angle may come back as a full turn
        if t > 1.0 and abs(TWO_PI - delta) * self.radius < 1e-12 * max(1.0, self.radius):
            t = 0.0
        return t

    def gauss_chunks(self, degree):
        pieces = max(1, math.ceil(abs(self.a1 - self.a0) / (math.pi / 4)))
        edges = np.linspace(0.0, 1.0, pieces + 1)
        return [(edges[i], edges[i + 1], degree + 8) for i in range(pieces)]


def _line_line(p, d, q, e):
    """Intersections of segments p+t*d and q+s*e as (t, s) pairs."""
    den = d[0] * e[1] - d[1] * e[0]
    scale = math.hypot(*d) * math.hypot(*e)
    w = (q[0] - p[0], q[1] - p[1])
    if abs(den) <= 1e-14 * scale:
        # parallel: report overlap endpoints when collinear
        if abs(w[0] * d[1] - w[1] * d[0]) > 1e-12 * math.hypot(*d) * max(1.0, math.hypot(*w)):
            return []
        dd = d[0] * d[0] + d[1] * d[1]
        ee = e[0] * e[0] + e[1] * e[1]
        out = []
        for s in (0.0, 1.0):
            qs = (q[0] + s * e[0] - p[0], q[1] + s * e[1] - p[1])
            out.append(((qs[0] * d[0] + qs[1] * d[1]) / dd, s))
        for t in (0.0, 1.0):
            pt = (p[0] + t * d[0] - q[0], p[1] + t * d[1] - q[1])
            out.append((t, (pt[0] * e[0] + pt[1] * e[1]) / ee))
        return out
    t = (w[0] * e[1] - w[1] * e[0]) / den
    s = (w[0] * d[1] - w[1] * d[0]) / den
    return [(t, s)]


def _line_circle(p, d, c, r):
    fx, fy = p[0] - c[0], p[1] - c[1]
    a = d[0] * d[0] + d[1] * d[1]
    foot = -(fx * d[0] + fy * d[1]) / a
    # distance of the line from the center; near r the discriminant is all
    # rounding and its square root would invent two points ~1e-8 apart
    dist = abs(fx * d[1] - fy * d[0]) / math.sqrt(a)
    if dist > r * (1.0 + TANGENT_RTOL):
        return []
    if dist >= r * (1.0 - TANGENT_RTOL):
        return [foot]
    half = math.sqrt((r - dist) * (r + dist) / a)
    return [foot - half, foot + half]


def _circle_circle(c0, r0, c1, r1):
    dx, dy = c1[0] - c0[0], c1[1] - c0[1]
    dist = math.hypot(dx, dy)
    if dist == 0.0 or dist > r0 + r1 or dist < abs(r0 - r1):
        return []
    a = (r0 * r0 - r1 * r1 + dist * dist) / (2.0 * dist)
    mx, my = c0[0] + a * dx / dist, c0[1] + a * dy / dist
    if r0 * r0 - a * a <= TANGENT_RTOL * r0 * r0:
        return [(mx, my)]
    h = math.sqrt(r0 * r0 - a * a)
    return [(mx + h * dy / dist, my - h * dx / dist),
            (mx - h * dy / dist, my + h * dx / dist)]


def _on_curve(t, lo=-1e-10, hi=1.0 + 1e-10):
    return lo <= t <= hi


def curve_intersections(c1, c2):
    """Parameters on ``c1`` where it meets ``c2``."""
    out = []
    if isinstance(c1, Segment):
        p, d = c1.p0, (c1.p1[0] - c1.p0[0], c1.p1[1] - c1.p0[1])
        if isinstance(c2, Segment):
            e = (c2.p1[0] - c2.p0[0], c2.p1[1] - c2.p0[1])
            for t, s in _line_line(p, d, c2.p0, e):
                if _on_curve(t) and _on_curve(s):
                    out.append(t)
        else:
            for t in _line_circle(p, d, c2.center, c2.radius):
                if _on_curve(t) and _on_curve(c2.param_of(tuple(c1.point(t)))):
                    out.append(t)
    else:
        if isinstance(c2, Segment):
            d = (c2.p1[0] - c2.p0[0], c2.p1[1] - c2.p0[1])
            pts = [tuple(c2.point(s)) for s in _line_circle(c2.p0, d, c1.center, c1.radius)
                   if _on_curve(s)]
        else:
            pts = _circle_circle(c1.center, c1.radius, c2.center, c2.radius)
            pts = [q for q in pts if _on_curve(c2.param_of(q))]
        for q in pts:
            t = c1.param_of(q)
            if _on_curve(t):
                out.append(t)
    return [min(max(t, 0.0), 1.0) for t in out]


def _split(curve, params):
    ts = sorted(set([0.0, 1.0] + [t for t in params if 0.0 < t < 1.0]))
    pieces = []
    for t0, t1 in zip(ts[:-1], ts[1:]):
        if t1 - t0 > 1e-12:
            pieces.append(curve.sub(t0, t1))
    return pieces


def _left_normal(curve, t):
    d = curve.derivative(t)
    n = np.array([-d[1], d[0]])
    return n / np.linalg.norm(n)


def _classify(pieces, member, delta):
    """Keep pieces that separate ``member`` (left) from its complement."""
    # vote over three interior points: a single midpoint can sit exactly on
    # a tangency that was not resolved as an intersection
    kept = []
    for piece in pieces:
        votes = 0
        for t in (0.3, 0.5, 0.7):
            m = piece.point(t)
            nu = _left_normal(piece, t)
            left = member(m + delta * nu)
            right = member(m - delta * nu)
            votes += (left and not right) - (right and not left)
        if votes >= 2:
            kept.append(piece)
        elif votes <= -2:
            kept.append(piece.reversed())
    return kept


# ---------------------------------------------------------------------------
# primitives and CSG
# ---------------------------------------------------------------------------

class Shape:
    """Base class for CSG nodes. Negative signed distance means inside."""

    def __or__(self, other):
        return Union(self, other)

    def __sub__(self, other):
        return Difference(self, other)

    def __and__(self, other):
        return Intersection(self, other)

    def primitives(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Rectangle(Shape):
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValidationError("rectangle", "rectangle must have positive extent")

    def sdf(self, p):
        p = np.asarray(p, dtype=float)
        cx, cy = 0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)
        hx, hy = 0.5 * (self.x1 - self.x0), 0.5 * (self.y1 - self.y0)
        dx = np.abs(p[..., 0] - cx) - hx
        dy = np.abs(p[..., 1] - cy) - hy
        outside = np.hypot(np.maximum(dx, 0.0), np.maximum(dy, 0.0))
        return outside + np.minimum(np.maximum(dx, dy), 0.0)

    @property
    def bbox(self):
        return (self.x0, self.y0, self.x1, self.y1)

    def curves(self):
        a, b = (self.x0, self.y0), (self.x1, self.y0)
        c, d = (self.x1, self.y1), (self.x0, self.y1)
        return [Segment(a, b), Segment(b, c), Segment(c, d), Segment(d, a)]

    def primitives(self):
        return [self]

    def moments(self, exponents, center=(0.0, 0.0), scale=(1.0, 1.0)):
        return rectangle_moments(self.bbox, exponents, center, scale)


@dataclass(frozen=True)
class Disk(Shape):
    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValidationError("radius", "disk radius must be positive")

    def sdf(self, p):
        p = np.asarray(p, dtype=float)
        return np.hypot(p[..., 0] - self.cx, p[..., 1] - self.cy) - self.r

    @property
    def bbox(self):
        return (self.cx - self.r, self.cy - self.r, self.cx + self.r, self.cy + self.r)

    def curves(self):
        return [Arc((self.cx, self.cy), self.r, 0.0, TWO_PI)]

    def primitives(self):
        return [self]

    def moments(self, exponents, center=(0.0, 0.0), scale=(1.0, 1.0)):
        return disk_moments((self.cx, self.cy), self.r, exponents, center, scale)


@dataclass(frozen=True)
class Union(Shape):
    a: Shape
    b: Shape

    def sdf(self, p):
        return np.minimum(self.a.sdf(p), self.b.sdf(p))

    @property
    def bbox(self):
        a, b = self.a.bbox, self.b.bbox
        return (min(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), max(a[3], b[3]))

    def primitives(self):
        return self.a.primitives() + self.b.primitives()


@dataclass(frozen=True)
class Difference(Shape):
    a: Shape
    b: Shape

    def sdf(self, p):
        return np.maximum(self.a.sdf(p), -self.b.sdf(p))

    @property
    def bbox(self):
        return self.a.bbox

    def primitives(self):
        return self.a.primitives() + self.b.primitives()


@dataclass(frozen=True)
class Intersection(Shape):
    a: Shape
    b: Shape

    def sdf(self, p):
        return np.maximum(self.a.sdf(p), self.b.sdf(p))

    @property
    def bbox(self):
        a, b = self.a.bbox, self.b.bbox
        return (max(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), min(a[3], b[3]))

    def primitives(self):
        return self.a.primitives() + self.b.primitives()


def _compile(shape, ops, params):
    if isinstance(shape, Rectangle):
        ops.append((OP_RECT, len(params)))
        params.append(shape.bbox)
    elif isinstance(shape, Disk):
        ops.append((OP_DISK, len(params)))
        params.append((shape.cx, shape.cy, shape.r, 0.0))
    else:
        _compile(shape.a, ops, params)
        _compile(shape.b, ops, params)
        code = {Union: OP_UNION, Difference: OP_DIFF, Intersection: OP_INTERSECT}
        ops.append((code[type(shape)], -1))


# ---------------------------------------------------------------------------
# moments
# ---------------------------------------------------------------------------

def monomial_exponents(degree):
    """Exponents (a, b) of x^a y^b, by total degree, then decreasing a."""
    return [(d - j, j) for d in range(degree + 1) for j in range(d + 1)]


def rectangle_moments(bbox, exponents, center=(0.0, 0.0), scale=(1.0, 1.0)):
    x0, y0, x1, y1 = bbox
    u0, u1 = (x0 - center[0]) / scale[0], (x1 - center[0]) / scale[0]
    v0, v1 = (y0 - center[1]) / scale[1], (y1 - center[1]) / scale[1]
    jac = scale[0] * scale[1]
    return np.array([jac * (u1 ** (a + 1) - u0 ** (a + 1)) / (a + 1)
                     * (v1 ** (b + 1) - v0 ** (b + 1)) / (b + 1)
                     for a, b in exponents])


def _centered_disk_moment(i, j, r):
    if i % 2 or j % 2:
        return 0.0
    return (2.0 * r ** (i + j + 2) * math.gamma((i + 1) / 2) * math.gamma((j + 1) / 2)
            / ((i + j + 2) * math.gamma((i + j + 2) / 2)))


def disk_moments(c, r, exponents, center=(0.0, 0.0), scale=(1.0, 1.0)):
    # ((cx + u - center)/s)^a expanded binomially in u
    ox, oy = (c[0] - center[0]) / scale[0], (c[1] - center[1]) / scale[1]
    out = []
    for a, b in exponents:
        total = 0.0
        for i in range(a + 1):
            ci = math.comb(a, i) * ox ** (a - i) / scale[0] ** i
            for j in range(b + 1):
                if i % 2 or j % 2:
                    continue
                cj = math.comb(b, j) * oy ** (b - j) / scale[1] ** j
                total += ci * cj * _centered_disk_moment(i, j, r)
        out.append(total)
    return np.array(out)


def green_moments(curves, exponents, center=(0.0, 0.0), scale=(1.0, 1.0)):
    """Moments of the region bounded by positively oriented ``curves``.

    Uses  int x^a y^b dA = contour integral of F dy  with
    F = s_x * xi^(a+1)/(a+1) * eta^b in scaled coordinates, so the area
    element scaling is applied exactly once.
    """
    exponents = list(exponents)
    degree = max(a + b for a, b in exponents) if exponents else 0
    out = np.zeros(len(exponents))
    for curve in curves:
        for t0, t1, n in curve.gauss_chunks(degree + 1):
            g, gw = np.polynomial.legendre.leggauss(n)
            t = t0 + (t1 - t0) * 0.5 * (g + 1.0)
            gw = gw * 0.5 * (t1 - t0)
            pts = curve.point(t)
            dy = curve.derivative(t)[:, 1]
            xi = (pts[:, 0] - center[0]) / scale[0]
            eta = (pts[:, 1] - center[1]) / scale[1]
            for k, (a, b) in enumerate(exponents):
                f = scale[0] * xi ** (a + 1) / (a + 1) * eta ** b
                out[k] += np.dot(gw, f * dy)
    return out


# ---------------------------------------------------------------------------
# domain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    """A bounded planar region described by a CSG shape tree.

    Parameters
    ----------
    shape : Shape
        Rectangles and disks combined by union, difference, intersection.
    name : str
        Identifier used as ``domain_tag`` of rules built on this domain.
    area_hint : float, optional
        Exact area when known; otherwise computed from the boundary.
    """

    shape: Shape
    name: str = "domain"
    area_hint: float = None

    def sdf(self, p):
        return self.shape.sdf(p)

    def inside(self, p, tol=0.0):
        """True where ``p`` lies in the closed region (up to ``tol``)."""
        return self.shape.sdf(p) <= tol

    @cached_property
    def bounding_box(self):
        return tuple(float(v) for v in self.shape.bbox)

    @cached_property
    def diameter(self):
        x0, y0, x1, y1 = self.bounding_box
        return math.hypot(x1 - x0, y1 - y0)

    @cached_property
    def is_primitive(self):
        return isinstance(self.shape, (Rectangle, Disk))

    @cached_property
    def boundary_curves(self):
        """Oriented boundary pieces with the region on their left."""
        if self.is_primitive:
            return list(self.shape.curves())
        prims = self.shape.primitives()
        all_curves = [(i, c) for i, p in enumerate(prims) for c in p.curves()]
        delta = 1e-9 * self.diameter
        member = lambda q: bool(self.shape.sdf(q) < 0.0)
        pieces = []
        for i, c in all_curves:
            params = []
            for j, other in all_curves:
                if j != i:
                    params.extend(curve_intersections(c, other))
            pieces.extend(_split(c, params))
        return _classify(pieces, member, delta)

    @cached_property
    def area(self):
        if self.area_hint is not None:
            return float(self.area_hint)
        return float(green_moments(self.boundary_curves, [(0, 0)])[0])

    def program(self):
        """Flattened postfix form of the shape tree for the sampling kernels."""
        ops, params = [], []
        _compile(self.shape, ops, params)
        return (np.array(ops, dtype=np.int64).reshape(-1, 2),
                np.array(params, dtype=float).reshape(-1, 4))

    def clipped_boundary(self, box):
        """Oriented boundary of ``box`` intersected with the domain."""
        x0, y0, x1, y1 = box
        cell = Rectangle(x0, y0, x1, y1)
        edges = cell.curves()
        tol = 1e-12 * max(self.diameter, 1.0)
        diag = math.hypot(x1 - x0, y1 - y0)
        delta = 1e-9 * diag

        def member(q):
            return bool(cell.sdf(q) < 0.0 and self.shape.sdf(q) < 0.0)

        pieces = []
        for e in edges:
            params = []
            for c in self.boundary_curves:
                params.extend(curve_intersections(e, c))
            pieces.extend(_split(e, params))
        for c in self.boundary_curves:
            if isinstance(c, Segment) and _on_box_line(c, box, tol):
                continue
            params = []
            for e in edges:
                params.extend(curve_intersections(c, e))
            pieces.extend(_split(c, params))
        return _classify(pieces, member, delta)

    def box_moments(self, box, exponents, center=(0.0, 0.0), scale=(1.0, 1.0)):
        """Moments of ``box`` intersected with the domain."""
        return green_moments(self.clipped_boundary(box), exponents, center, scale)


def _on_box_line(seg, box, tol):
    x0, y0, x1, y1 = box
    (ax, ay), (bx, by) = seg.p0, seg.p1
    for xv in (x0, x1):
        if abs(ax - xv) <= tol and abs(bx - xv) <= tol:
            return True
    for yv in (y0, y1):
        if abs(ay - yv) <= tol and abs(by - yv) <= tol:
            return True
    return False


def unit_square():
    return Domain(Rectangle(0.0, 0.0, 1.0, 1.0), name="unit_square", area_hint=1.0)


def unit_disk():
    return Domain(Disk(0.0, 0.0, 1.0), name="unit_disk", area_hint=math.pi)


def annulus(r_inner=0.5, r_outer=1.0):
    return Domain(Disk(0.0, 0.0, r_outer) - Disk(0.0, 0.0, r_inner), name="annulus")


def square_with_hole():
    """Unit square minus a disk of radius 0.2 centered at (0.5, 0.5)."""
    return Domain(Rectangle(0.0, 0.0, 1.0, 1.0) - Disk(0.5, 0.5, 0.2),
                  name="square_with_hole")


def l_shape():
    return Domain(Rectangle(0.0, 0.0, 1.0, 0.5) | Rectangle(0.0, 0.0, 0.5, 1.0),
                  name="l_shape")


NAMED_DOMAINS = {
    "unit_square": unit_square,
    "unit_disk": unit_disk,
    "annulus": annulus,
    "square_with_hole": square_with_hole,
    "l_shape": l_shape,
}


def named_domain(name):
    try:
        return NAMED_DOMAINS[name]()
    except KeyError:
        raise ValidationError("domain", f"unknown domain {name!r}") from None
