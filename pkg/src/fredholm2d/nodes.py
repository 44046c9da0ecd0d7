"""Quasi-uniform scattered node sets on a :class:`~fredholm2d.geometry.Domain`."""
from dataclasses import dataclass
import math

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from . import _backend
from .errors import EmptyDomain, EmptyNodeSet, SpacingTooLarge, ValidationError

SEPARATION_FACTOR = 0.7
DARTS_PER_ACTIVE = 30
DARTS_PER_EMPTY_CELL = 10


@dataclass(frozen=True, eq=False)
class NodeSet:
    """Scattered points with their generation parameters.

    ``boundary_flags[i]`` is True for points placed on the boundary curves.
    """

    points: np.ndarray
    spacing_h: float
    boundary_flags: np.ndarray
    rng_seed: int = 0

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=float).reshape(-1, 2)
        flags = np.asarray(self.boundary_flags, dtype=bool).reshape(-1)
        if len(flags) != len(pts):
            raise ValidationError("boundary_flags", "one flag per point required")
        pts.setflags(write=False)
        flags.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "boundary_flags", flags)

    def __len__(self):
        return len(self.points)

    @classmethod
    def from_points(cls, points, spacing_h=float("nan"), boundary_flags=None, rng_seed=0):
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if boundary_flags is None:
            boundary_flags = np.zeros(len(points), dtype=bool)
        return cls(points, spacing_h, boundary_flags, rng_seed)

    def same_points(self, other):
        return self.points.shape == other.points.shape and np.array_equal(self.points, other.points)


def boundary_samples(domain, h):
    """Equal-arclength samples of every boundary curve at spacing about ``h``."""
    out = []
    for curve in domain.boundary_curves:
        n = max(1, int(math.floor(curve.length / h)))
        out.append(curve.point(np.arange(n + 1) / n))
    if not out:
        return np.zeros((0, 2))
    return np.vstack(out)


def _uniform_budget(domain, r, n_init):
    x0, y0, x1, y1 = domain.bounding_box
    cells = ((x1 - x0) / r * math.sqrt(2.0) + 1) * ((y1 - y0) / r * math.sqrt(2.0) + 1)
    expected_points = cells / 2.0 + n_init
    return int(1.5 * (expected_points * (2 * DARTS_PER_ACTIVE + 2)
                      + cells * 2 * DARTS_PER_EMPTY_CELL)) + 10000


def generate_nodes(domain, h, seed=0, include_boundary=True, backend=None):
    """Poisson-disk nodes with minimum separation ``0.7*h``.

    Boundary nodes (when requested) are placed first by equal-arclength
    sampling and seed the dart throwing; an empty-cell sweep afterwards
    makes the set close to maximal, which bounds the fill distance.

    Parameters
    ----------
    domain : Domain
    h : float
        Target spacing, ``0 < h < domain.diameter``.
    seed : int
        Seed of the uniform stream; output is a pure function of the inputs.
    include_boundary : bool
    backend : module, optional
        ``_core`` or ``_pycore``; defaults to the one selected at import.

    Returns
    -------
    NodeSet
    """
    if not (h > 0 and h < domain.diameter):
        raise ValidationError("h", f"spacing must lie in (0, {domain.diameter}), got {h}")
    core = backend or _backend.core
    r = SEPARATION_FACTOR * h
    init = boundary_samples(domain, h) if include_boundary else np.zeros((0, 2))
    ops, params = domain.program()
    budget = _uniform_budget(domain, r, len(init))
    while True:
        u = np.random.default_rng(seed).random(budget)
        result = core.poisson_disk(domain.bounding_box, r, ops, params, init, u,
                                   DARTS_PER_ACTIVE, DARTS_PER_EMPTY_CELL)
        if result is not None:
            break
        budget *= 2
    pts, n_init, _ = result
    if len(pts) == 0:
        raise EmptyDomain(f"no point of {domain.name} passed the inside test")
    if len(pts) == n_init:
        raise SpacingTooLarge(f"no interior node fits in {domain.name} at h={h}")
    flags = np.zeros(len(pts), dtype=bool)
    flags[:n_init] = True
    return NodeSet(pts, float(h), flags, int(seed))


def interior_samples(domain, n, seed=0):
    """``n`` quasi-random points strictly inside ``domain``.

    Scrambled Halton points in the bounding box, filtered by the inside
    test; deterministic in ``seed``.
    """
    if n <= 0:
        return np.zeros((0, 2))
    x0, y0, x1, y1 = domain.bounding_box
    sampler = qmc.Halton(d=2, scramble=True, seed=seed)
    out = []
    have = 0
    while have < n:
        batch = sampler.random(max(64, 2 * (n - have)))
        pts = np.column_stack([x0 + (x1 - x0) * batch[:, 0], y0 + (y1 - y0) * batch[:, 1]])
        pts = pts[domain.sdf(pts) < 0.0]
        out.append(pts)
        have += len(pts)
    return np.vstack(out)[:n]


def _grid_inside(domain, resolution):
    x0, y0, x1, y1 = domain.bounding_box
    gx, gy = np.meshgrid(np.linspace(x0, x1, resolution), np.linspace(y0, y1, resolution))
    g = np.column_stack([gx.ravel(), gy.ravel()])
    return g[domain.inside(g)]


def fill_distance(nodes, domain, grid_resolution=400):
    """Largest distance from a grid point inside the domain to its nearest node."""
    pts = nodes.points if isinstance(nodes, NodeSet) else np.asarray(nodes, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise EmptyNodeSet("fill distance of an empty node set")
    samples = _grid_inside(domain, grid_resolution)
    dist, _ = cKDTree(pts).query(samples)
    return float(dist.max())


def packing_distance(nodes, domain):
    n = len(nodes)
    if n == 0:
        raise EmptyNodeSet("packing distance of an empty node set")
    return math.sqrt(domain.area / n)


def min_separation(nodes):
    pts = nodes.points if isinstance(nodes, NodeSet) else np.asarray(nodes)
    if len(pts) < 2:
        return math.inf
    dist, _ = cKDTree(pts).query(pts, k=2)
    return float(dist[:, 1].min())


def save_nodes(path, nodes):
    """Write ``x y boundary_flag`` rows with 17 significant digits."""
    with open(path, "w") as fh:
        for (x, y), flag in zip(nodes.points, nodes.boundary_flags):
            fh.write(f"{x:.17g} {y:.17g} {int(flag)}\n")


def load_nodes(path, spacing_h=float("nan"), rng_seed=0):
    data = np.loadtxt(path, ndmin=2)
    if data.size == 0:
        return NodeSet.from_points(np.zeros((0, 2)), spacing_h, np.zeros(0, bool), rng_seed)
    return NodeSet(data[:, :2], spacing_h, data[:, 2].astype(bool), rng_seed)
