"""Lawson-Hanson active-set nonnegative least squares."""
import numpy as np


def nnls(A, b, maxiter=None, tol=None):
    """Solve ``min ||A x - b||_2`` subject to ``x >= 0``.

    Parameters
    ----------
    A : ndarray, shape (m, n)
    b : ndarray, shape (m,)
    maxiter : int, optional
        Bound on outer iterations (default ``3 * n``).
    tol : float, optional
        Dual feasibility tolerance (default ``10 * eps * ||A||_1 * max(m, n)``).

    Returns
    -------
    x : ndarray, shape (n,)
    rnorm : float
        ``||A x - b||_2`` at the returned point.

    Notes
    -----
    Follows Lawson and Hanson, *Solving Least Squares Problems* (1974),
    ch. 23: grow the passive set by the most violated dual component and,
    whenever the unconstrained subproblem leaves the feasible orthant,
    step back to its boundary and drop the variables that hit zero.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m, n = A.shape
    if maxiter is None:
        maxiter = 3 * n
    if tol is None:
        tol = 10.0 * np.finfo(float).eps * np.abs(A).sum(axis=0).max(initial=0.0) * max(m, n)
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    grad = A.T @ b
    for _ in range(maxiter):
        free = ~passive
        if not free.any() or grad[free].max(initial=-np.inf) <= tol:
            break
        j = np.flatnonzero(free)[np.argmax(grad[free])]
        passive[j] = True
        while True:
            idx = np.flatnonzero(passive)
            s = np.zeros(n)
            s[idx] = np.linalg.lstsq(A[:, idx], b, rcond=None)[0]
            if s[idx].min() > 0.0:
                x = s
                break
            neg = idx[s[idx] <= 0.0]
            alpha = np.min(x[neg] / (x[neg] - s[neg]))
            x = x + alpha * (s - x)
            passive &= x > tol
            x[~passive] = 0.0
            if not passive.any():
                break
        grad = A.T @ (b - A @ x)
    return x, float(np.linalg.norm(A @ x - b))


def least_distance(G, h):
    """Solve ``min ||x||_2`` subject to ``G x >= h``.

    Returns ``(x, feasible)``. Uses the reduction to NNLS from the same
    reference: with ``E = [G^T; h^T]`` and ``f = e_{n+1}``, the NNLS residual
    ``r = E u - f`` gives ``x = -r[:n] / r[n]``; a zero residual means the
    constraints are inconsistent.
    """
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    n = G.shape[1]
    E = np.vstack([G.T, h[None, :]])
    f = np.zeros(n + 1)
    f[-1] = 1.0
    u, _ = nnls(E, f)
    r = E @ u - f
    if not abs(r[-1]) > 1e-14:
        return np.zeros(n), False
    return -r[:n] / r[-1], True
