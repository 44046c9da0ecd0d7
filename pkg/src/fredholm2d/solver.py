"""Classical and decoupled Nystrom systems, their solution and interpolation.

Classical: ``(lam I - K W) u = f|Y`` with ``K_ij = k(y_i, y_j)``.
Decoupled: ``(lam I - K W R) u = f|X`` with ``K_ij = k(x_i, y_j)`` of size
``|X| x |Y|`` and the reconstruction ``R`` of size ``|Y| x |X|``.
"""
from dataclasses import dataclass, field
import csv
import json
import math
from typing import Callable, Optional
import warnings

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, onenormest
from scipy.spatial import cKDTree

from .errors import (NodeMismatch, NoConvergence, SingularJacobian, SingularMatrix,
                     ValidationError, ZeroLambda)
from .kernels import Kernel
from .quadrature import QuadratureRule
from .reconstruction import ReconstructionOperator

PIVOT_RTOL = 1e-14
EXACT_COND_LIMIT = 2000


def _field(f, points):
    """Evaluate a scalar field given as callable, constant or array."""
    if callable(f):
        return np.asarray(f(points), dtype=float) * np.ones(len(points))
    vals = np.asarray(f, dtype=float)
    if vals.ndim == 0:
        return np.full(len(points), float(vals))
    if vals.shape != (len(points),):
        raise ValidationError("f", f"expected {len(points)} values, got shape {vals.shape}")
    return vals


def _check_lambda(lam):
    if lam == 0 or not math.isfinite(lam):
        raise ZeroLambda()
    return float(lam)


@dataclass(frozen=True, eq=False)
class ClassicalSystem:
    A: np.ndarray
    rhs: np.ndarray
    rule: QuadratureRule
    lam: float
    kernel: Kernel
    f: Callable

    @property
    def nodes(self):
        return self.rule.nodes


@dataclass(frozen=True, eq=False)
class DecoupledSystem:
    A: np.ndarray
    rhs: np.ndarray
    rule: QuadratureRule
    recon: ReconstructionOperator
    lam: float
    kernel: Kernel
    f: Callable

    @property
    def nodes(self):
        return self.recon.X.points


@dataclass(frozen=True, eq=False)
class DiscreteSolution:
    """Nodal solution with everything needed for the Nystrom interpolant.

    ``values`` live on ``nodes`` (the quadrature nodes for the classical
    variant, the solution nodes X for the decoupled one). For nonlinear
    solves ``f`` is None and ``source`` holds the ``(u, x)`` source term.
    """

    values: np.ndarray
    nodes: np.ndarray
    lam: float
    kernel: Kernel
    rule: QuadratureRule
    recon: Optional[ReconstructionOperator]
    f: Optional[Callable]
    cond_inf: float
    variant: str
    residual: float = 0.0
    iterations: int = 0
    source: Optional[Callable] = None
    source_du: Optional[Callable] = None
    history: tuple = field(default=())

    @property
    def size(self):
        return len(self.values)


def _system_matrix(lam, KW):
    A = -KW
    A[np.diag_indices_from(A)] += lam
    return A


def assemble_classical(lam, k, f, rule):
    """``A = lam I - K W`` on the rule nodes, ``rhs = f|Y``."""
    lam = _check_lambda(lam)
    Y = rule.nodes
    KW = k.matrix(Y, Y) * rule.weights[None, :]
    return ClassicalSystem(_system_matrix(lam, KW), _field(f, Y), rule, lam, k, f)


def assemble_decoupled(lam, k, f, rule, recon):
    """``A = lam I - (K W) R`` of size ``|X|``, ``rhs = f|X``.

    ``K W`` is formed by column scaling, then multiplied by the sparse ``R``
    (cost ``O(|X| |Y| nnz_row)``).
    """
    lam = _check_lambda(lam)
    if not (len(recon.Y) == len(rule.nodes) and np.array_equal(recon.Y.points, rule.nodes)):
        raise NodeMismatch("reconstruction target nodes differ from the quadrature nodes")
    X = recon.X.points
    KW = k.matrix(X, rule.nodes) * rule.weights[None, :]
    KWR = np.asarray((recon.matrix.T @ KW.T).T)
    return DecoupledSystem(_system_matrix(lam, KWR), _field(f, X), rule, recon, lam, k, f)


def _factor(A, error=SingularMatrix):
    """LU with partial pivoting; raise when a pivot is tiny relative to ``||A||_inf``."""
    norm = float(np.abs(A).sum(axis=1).max(initial=0.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if len(pivots) == 0 or not (pivots.min() > PIVOT_RTOL * norm):
        smallest = float(pivots.min()) if len(pivots) else 0.0
        raise error(f"pivot {smallest:.3e} below {PIVOT_RTOL:g} * ||A||_inf = {PIVOT_RTOL * norm:.3e}")
    return (lu, piv), norm


def condition_inf(A, factors=None, exact_limit=EXACT_COND_LIMIT):
    """``||A||_inf ||A^-1||_inf``, exact up to ``exact_limit`` rows, else estimated.

    The estimate applies the Hager-Higham 1-norm estimator to ``A^-T``.
    """
    if factors is None:
        factors, norm = _factor(A)
    else:
        norm = float(np.abs(A).sum(axis=1).max(initial=0.0))
    n = A.shape[0]
    if n <= exact_limit:
        inv = sla.lu_solve(factors, np.eye(n))
        return norm * float(np.abs(inv).sum(axis=1).max())
    op = LinearOperator((n, n), dtype=float,
                        matvec=lambda v: sla.lu_solve(factors, v, trans=1),
                        rmatvec=lambda v: sla.lu_solve(factors, v, trans=0))
    return norm * float(onenormest(op))


def _solve_refined(A, factors, b):
    x = sla.lu_solve(factors, b)
    # one step of iterative refinement keeps the nodal residual at rounding level
    r = b - A @ x
    return x + sla.lu_solve(factors, r)


def solve_linear(system, exact_cond_limit=EXACT_COND_LIMIT):
    """Dense LU solve of a classical or decoupled system.

    Raises
    ------
    SingularMatrix
        A pivot fell below ``1e-14 * ||A||_inf``, or ``cond_inf`` exceeds
        ``1e14`` (lambda at or near the discrete spectrum).
    """
    A, b = system.A, system.rhs
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != len(b):
        raise ValidationError("system", f"matrix {A.shape} incompatible with rhs {b.shape}")
    factors, norm = _factor(A)
    u = _solve_refined(A, factors, b)
    cond = condition_inf(A, factors, exact_cond_limit)
    # a rounding-level pivot can survive the pivot test by a small factor;
    # the condition number catches that case on the same scale
    if not cond < 1.0 / PIVOT_RTOL:
        raise SingularMatrix(f"cond_inf {cond:.3e} exceeds {1.0 / PIVOT_RTOL:g}")
    res = float(np.abs(A @ u - b).max(initial=0.0))
    if isinstance(system, DecoupledSystem):
        variant, recon = "decoupled", system.recon
    else:
        variant, recon = "classical", None
    return DiscreteSolution(u, np.asarray(system.nodes), system.lam, system.kernel, system.rule,
                            recon, system.f, cond, variant, res)


def _quadrature_term(sol, points):
    """``sum_j w_j k(x, y_j) (R u)_j`` at each row of ``points``."""
    v = sol.values if sol.recon is None else sol.recon.matrix @ sol.values
    wv = sol.rule.weights * v
    out = np.empty(len(points))
    for lo in range(0, len(points), 512):
        out[lo:lo + 512] = sol.kernel.matrix(points[lo:lo + 512], sol.rule.nodes) @ wv
    return out


def interpolate(sol, x):
    """Nystrom interpolant ``u(x) = (sum_j w_j k(x, y_j) (R u)_j + f(x)) / lam``.

    ``x`` is one point or an ``(n, 2)`` array. For nonlinear solutions the
    pointwise equation ``lam v - source(v, x) = Ku(x)`` is solved by scalar
    Newton started from the nearest nodal value.
    """
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 2)
    q = _quadrature_term(sol, pts)
    if sol.source is None:
        u = (q + _field(sol.f, pts)) / sol.lam
    else:
        u = _pointwise_newton(sol, pts, q)
    return float(u[0]) if single else u


def _pointwise_newton(sol, pts, q, maxit=50):
    _, near = cKDTree(sol.nodes).query(pts)
    v = sol.values[near].copy()
    for _ in range(maxit):
        g = sol.lam * v - _field(sol.source(v, pts), pts) - q
        dg = sol.lam - _field(sol.source_du(v, pts), pts)
        step = g / np.where(dg == 0.0, 1.0, dg)
        v -= step
        if np.all(np.abs(step) <= 1e-15 * (1.0 + np.abs(v))):
            break
    return v


def system_operator(lam, k, rule, recon=None):
    """Dense ``K W R`` (or ``K W`` when ``recon`` is None) and the node array."""
    if recon is None:
        X = rule.nodes
        return k.matrix(X, X) * rule.weights[None, :], X
    if not np.array_equal(recon.Y.points, rule.nodes):
        raise NodeMismatch("reconstruction target nodes differ from the quadrature nodes")
    X = recon.X.points
    KW = k.matrix(X, rule.nodes) * rule.weights[None, :]
    return np.asarray((recon.matrix.T @ KW.T).T), X


def solve_nonlinear(lam, k, source, source_du, rule, recon=None, init=None, tol=1e-12, maxit=50):
    """Damped Newton for ``lam u - K W R u = source(u, X)``.

    Parameters
    ----------
    source, source_du : callable
        ``(u_values, points) -> values`` and its derivative in ``u``.
    init : callable, array or float, optional
        Initial guess; defaults to ``source.initial_guess`` when present
        (the carrying capacity for logistic sources), else zero.
    tol : float
        Stop when ``||F||_inf <= tol * (1 + ||u||_inf)``.

    Raises
    ------
    NoConvergence, SingularJacobian
    """
    lam = _check_lambda(lam)
    if maxit < 1:
        raise ValidationError("maxit", "maxit must be positive")
    M, X = system_operator(lam, k, rule, recon)
    if init is None:
        init = getattr(source, "initial_guess", 0.0)
    u = _field(init, X).copy()

    def residual(v):
        return lam * v - M @ v - _field(source(v, X), X)

    F = residual(u)
    fn = float(np.abs(F).max(initial=0.0))
    history = [fn]
    it = 0
    while fn > tol * (1.0 + float(np.abs(u).max(initial=0.0))):
        if it >= maxit:
            raise NoConvergence(f"Newton residual {fn:.3e} after {maxit} iterations")
        J = -M
        J[np.diag_indices_from(J)] += lam - _field(source_du(u, X), X)
        factors, _ = _factor(J, SingularJacobian)
        delta = -sla.lu_solve(factors, F)
        t = 1.0
        while True:
            trial = u + t * delta
            Ft = residual(trial)
            ft = float(np.abs(Ft).max(initial=0.0))
            if ft <= (1.0 - 1e-4 * t) * fn or t < 2.0 ** -30:
                break
            t *= 0.5
        u, F, fn = trial, Ft, ft
        history.append(fn)
        it += 1
    A = -M
    A[np.diag_indices_from(A)] += lam - _field(source_du(u, X), X)
    try:
        cond = condition_inf(A)
    except SingularMatrix:
        cond = math.inf
    variant = "classical" if recon is None else "decoupled"
    return DiscreteSolution(u, X, lam, k, rule, recon, None, cond, variant, fn, it,
                            source, source_du, tuple(history))


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def summary(sol):
    """JSON-ready dictionary of scalar facts about a solution."""
    return {
        "variant": sol.variant,
        "lambda": sol.lam,
        "kernel": sol.kernel.name,
        "kernel_params": sol.kernel.params,
        "n_solution_nodes": int(sol.size),
        "n_quadrature_nodes": int(len(sol.rule)),
        "cond_inf": sol.cond_inf,
        "residual_inf": sol.residual,
        "iterations": int(sol.iterations),
        "u_inf": float(np.abs(sol.values).max(initial=0.0)),
    }


def write_solution_csv(path, sol, points):
    """``x y u_h`` rows of the interpolant at ``points``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    vals = interpolate(sol, pts)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y", "u_h"])
        for (a, b), v in zip(pts, vals):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(v))])


def write_summary_json(path, sol, extra=None):
    data = summary(sol)
    if extra:
        data.update(extra)
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
