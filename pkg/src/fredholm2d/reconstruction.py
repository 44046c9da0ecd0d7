"""Moving least squares reconstruction ``v|Y ~ R v|X``.

Rows of ``R`` are MLS shape functions with a Wendland C2 weight
``(1 - s)^4 (4 s + 1)`` of support radius ``rho = c * h_X * (p + 1)``.
"""
from dataclasses import dataclass
import math

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from . import _backend
from .errors import DimensionMismatch, InsufficientLocalNodes, ValidationError
from .nodes import NodeSet

MAX_MLS_DEGREE = 7
RADIUS_DOUBLINGS = 3


def basis_size(degree):
    return (degree + 1) * (degree + 2) // 2


@dataclass(frozen=True, eq=False)
class ReconstructionOperator:
    """Sparse ``|Y| x |X|`` matrix with its construction parameters.

    ``radii[i]`` is the support radius finally used for row ``i`` (after
    any doubling); coincident rows report 0.
    """

    X: NodeSet
    Y: NodeSet
    matrix: sp.csr_matrix
    degree: int
    radius_factor: float
    radii: np.ndarray

    @property
    def nominal_order(self):
        return self.degree + 1

    @property
    def shape(self):
        return self.matrix.shape

    def row(self, i):
        """``(columns, coefficients)`` of row ``i``."""
        lo, hi = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return self.matrix.indices[lo:hi], self.matrix.data[lo:hi]

    def is_identity(self):
        n, m = self.matrix.shape
        if n != m:
            return False
        return (self.matrix != sp.identity(n, format="csr")).nnz == 0


def _as_nodeset(nodes):
    return nodes if isinstance(nodes, NodeSet) else NodeSet.from_points(nodes)


def build_mls(X, Y, degree=1, radius_factor=1.5, backend=None):
    """Assemble the MLS reconstruction operator from ``X`` to ``Y``.

    Parameters
    ----------
    X, Y : NodeSet
        Solution and target nodes. ``X.spacing_h`` sets the support scale.
    degree : int
        Reproduced polynomial degree ``p``.
    radius_factor : float
        ``c >= 1`` in ``rho = c * h_X * (p + 1)``.

    Returns
    -------
    ReconstructionOperator

    Raises
    ------
    InsufficientLocalNodes
        Some row still has too few neighbours, or an ill-conditioned local
        Gram matrix, after three doublings of its radius.
    """
    X = _as_nodeset(X)
    Y = _as_nodeset(Y)
    if not 0 <= degree <= MAX_MLS_DEGREE:
        raise ValidationError("degree", f"MLS degree must lie in [0, {MAX_MLS_DEGREE}]")
    if not radius_factor >= 1.0:
        raise ValidationError("radius_factor", f"radius_factor must be >= 1, got {radius_factor}")
    m = basis_size(degree)
    if len(X) < m:
        raise InsufficientLocalNodes(f"{len(X)} nodes cannot reproduce degree {degree}")
    h_x = X.spacing_h
    if not (h_x > 0 and math.isfinite(h_x)):
        raise ValidationError("X", "X.spacing_h must be a positive number")
    core = backend or _backend.core
    xp, yp = X.points, Y.points
    allp = np.vstack([xp, yp])
    diameter = float(np.hypot(*(allp.max(axis=0) - allp.min(axis=0))))
    tree = cKDTree(xp)

    # rows at (numerically) coincident nodes are unit vectors
    dist, nearest = tree.query(yp)
    coincident = dist < 1e-12 * max(diameter, 1e-300)
    rows_idx = [None] * len(yp)
    rows_val = [None] * len(yp)
    radii = np.zeros(len(yp))
    for i in np.flatnonzero(coincident):
        rows_idx[i] = np.array([nearest[i]])
        rows_val[i] = np.array([1.0])

    pending = np.flatnonzero(~coincident)
    rho = np.full(len(yp), radius_factor * h_x * (degree + 1))
    for attempt in range(RADIUS_DOUBLINGS + 1):
        if len(pending) == 0:
            break
        nbrs = tree.query_ball_point(yp[pending], rho[pending], return_sorted=True)
        counts = np.fromiter((len(n) for n in nbrs), dtype=np.int64, count=len(nbrs))
        indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        indices = (np.concatenate([np.asarray(n, dtype=np.int64) for n in nbrs])
                   if counts.sum() else np.zeros(0, np.int64))
        data, status = core.mls_rows(xp, np.ascontiguousarray(yp[pending]), indptr, indices,
                                     np.ascontiguousarray(rho[pending]), degree)
        data = np.asarray(data)
        status = np.asarray(status)
        for k, i in enumerate(pending):
            if status[k] == 0:
                lo, hi = indptr[k], indptr[k + 1]
                keep = data[lo:hi] != 0.0
                rows_idx[i] = indices[lo:hi][keep]
                rows_val[i] = data[lo:hi][keep]
                radii[i] = rho[i]
        pending = pending[status != 0]
        rho[pending] *= 2.0
    if len(pending):
        i = pending[0]
        raise InsufficientLocalNodes(
            f"no well-posed degree-{degree} MLS fit at y=({yp[i, 0]:.6g}, {yp[i, 1]:.6g}) "
            f"after {RADIUS_DOUBLINGS} radius doublings ({len(pending)} rows affected)")

    counts = np.array([len(r) for r in rows_idx], dtype=np.int64)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    indices = np.concatenate(rows_idx) if len(rows_idx) else np.zeros(0, np.int64)
    values = np.concatenate(rows_val) if len(rows_val) else np.zeros(0)
    R = sp.csr_matrix((values, indices, indptr), shape=(len(yp), len(xp)))
    radii.setflags(write=False)
    return ReconstructionOperator(X, Y, R, int(degree), float(radius_factor), radii)


def identity_operator(X):
    """The trivial reconstruction for ``Y = X``."""
    X = _as_nodeset(X)
    n = len(X)
    R = sp.identity(n, format="csr")
    return ReconstructionOperator(X, X, R, 0, 1.0, np.zeros(n))


def apply(R, values_at_X):
    """``R v``; raises DimensionMismatch for a vector of the wrong length."""
    v = np.asarray(values_at_X, dtype=float)
    if v.shape != (R.matrix.shape[1],):
        raise DimensionMismatch(f"expected {R.matrix.shape[1]} values, got shape {v.shape}")
    return R.matrix @ v


def inf_norm(R):
    """Maximum absolute row sum."""
    sums = np.asarray(abs(R.matrix).sum(axis=1)).ravel()
    return float(sums.max(initial=0.0))


def reconstruction_error(R, f):
    """``max_i |f(y_i) - (R f|X)_i|`` for a vectorized field ``f``."""
    fx = np.asarray(f(R.X.points), dtype=float)
    fy = np.asarray(f(R.Y.points), dtype=float)
    return float(np.max(np.abs(fy - R.matrix @ fx), initial=0.0))
