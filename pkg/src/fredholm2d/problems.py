"""Problem builders: generic, normalized stationary, Dirichlet and Neumann
analogs, manufactured solutions and named presets.

Every builder returns a problem in the form ``lam u - int k(., y) u(y) dy = f``
so that it goes through the unmodified solver.
"""
from dataclasses import dataclass
import math
from typing import Callable, Optional

import numpy as np

from .errors import NonpositiveS, ValidationError
from .geometry import named_domain
from .kernels import Kernel, effective_support_radius, gaussian, make_kernel
from .nodes import interior_samples

S_FLOOR = 1e-10
EXTERIOR_TOL = 1e-12
META_TAGS = ("generic", "static", "dirichlet", "neumann", "manufactured")


class PointCache:
    """Memoize a vectorized field per point.

    Values are keyed by the exact bytes of each point. Not thread safe;
    the solver evaluates fields from a single thread.
    """

    def __init__(self, fn, block=512):
        self.fn = fn
        self.block = block
        self.store = {}

    def __call__(self, points):
        pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, 2))
        keys = [p.tobytes() for p in pts]
        missing = [i for i, key in enumerate(keys) if key not in self.store]
        if missing:
            todo = pts[missing]
            vals = np.concatenate([np.asarray(self.fn(todo[lo:lo + self.block]), dtype=float)
                                   .reshape(-1) for lo in range(0, len(todo), self.block)])
            for i, v in zip(missing, vals):
                self.store[keys[i]] = float(v)
        return np.array([self.store[key] for key in keys])


def _as_field(f):
    """Callable ``(n, 2) -> (n,)`` from a callable or a constant."""
    if callable(f):
        return f
    value = float(f)

    def const(points):
        return np.full(len(np.asarray(points).reshape(-1, 2)), value)

    const.constant = value
    return const


@dataclass(frozen=True, eq=False)
class LogisticSource:
    """``r(x) u (a(x) - u) / s(x)``; ``s`` defaults to one.

    ``initial_guess`` is the carrying capacity ``a``, which selects the
    nonzero branch in Newton's method.
    """

    r: Callable
    a: Callable
    s: Optional[Callable] = None

    def _s(self, x):
        return 1.0 if self.s is None else self.s(x)

    def __call__(self, u, x):
        return self.r(x) * u * (self.a(x) - u) / self._s(x)

    def du(self, u, x):
        return self.r(x) * (self.a(x) - 2.0 * u) / self._s(x)

    def initial_guess(self, x):
        return self.a(x)


@dataclass(frozen=True, eq=False)
class FredholmProblem:
    """``lam u - K u = rhs`` on ``domain``.

    ``rhs`` is a scalar field, or for nonlinear problems a source object
    called as ``rhs(u, x)`` with derivative ``rhs.du``. ``exact`` is set
    when the solution is known in closed form.
    """

    lam: float
    kernel: Kernel
    rhs: Callable
    domain: object
    meta: str = "generic"
    exact: Optional[Callable] = None
    nonlinear: bool = False
    extras: Optional[dict] = None

    def __post_init__(self):
        if self.lam == 0 or not math.isfinite(self.lam):
            raise ValidationError("lambda", "lambda must be finite and nonzero")
        if self.meta not in META_TAGS:
            raise ValidationError("meta", f"unknown provenance tag {self.meta!r}")


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    problem: FredholmProblem
    u_exact: Callable
    reference_rule: object


def _check_positive_s(s, domain, extra_points=None, samples=1000):
    pts = interior_samples(domain, samples, seed=0)
    if extra_points is not None:
        pts = np.vstack([pts, np.asarray(extra_points, float).reshape(-1, 2)])
    vals = np.asarray(s(pts), dtype=float) * np.ones(len(pts))
    lo = float(vals.min(initial=np.inf))
    if not lo > S_FLOOR:
        i = int(np.argmin(vals))
        raise NonpositiveS(f"s = {lo:.3e} at ({pts[i, 0]:.6g}, {pts[i, 1]:.6g})")


def normalize_static(s, J_kernel, f, domain, meta="static", check_points=None):
    """Divide ``s u - int J u = f`` by ``s`` to reach the form ``lam = 1``.

    Parameters
    ----------
    s : callable or float
        Strictly positive coefficient; checked on 1000 quasi-random
        interior samples (and ``check_points`` when given).
    J_kernel : Kernel
    f : callable or float

    Returns
    -------
    FredholmProblem
        ``k(x, y) = J(x, y) / s(x)``, ``rhs = f / s``.
    """
    s_field = _as_field(s)
    f_field = _as_field(f)
    _check_positive_s(s_field, domain, check_points)
    if getattr(s_field, "constant", None) == 1.0:
        return FredholmProblem(1.0, J_kernel, f_field, domain, meta)

    def k_eval(x, y):
        sx = np.asarray(s_field(x.reshape(-1, 2)), float).reshape(x.shape[:-1])
        return J_kernel.eval(x, y) / sx

    def k_matrix(X, Y):
        return J_kernel.matrix(X, Y) / np.asarray(s_field(X), float).reshape(-1, 1)

    def rhs(points):
        return f_field(points) / s_field(points)

    flags = dict(J_kernel.flags)
    flags.update(symmetric=False, translation_invariant=False, radial=False)
    kernel = Kernel(k_eval, flags, None, J_kernel.sigma, J_kernel.name + "/s",
                    dict(J_kernel.params), k_matrix)
    return FredholmProblem(1.0, kernel, rhs, domain, meta, extras={"s": s_field})


def exterior_grid(J_kernel, domain, exterior_resolution=100):
    """Midpoint grid on the collar around ``domain`` (cells and weights).

    The grid covers the bounding box inflated by the kernel's effective
    support radius; its lines pass through the bounding box edges so that
    straight boundaries are resolved exactly. Cells inside the domain or
    farther than the support radius from it are dropped.
    """
    radius = effective_support_radius(J_kernel, EXTERIOR_TOL)
    x0, y0, x1, y1 = domain.bounding_box
    cell = max(x1 - x0, y1 - y0) / int(exterior_resolution)
    nx_in = max(1, int(round((x1 - x0) / cell)))
    ny_in = max(1, int(round((y1 - y0) / cell)))
    dx, dy = (x1 - x0) / nx_in, (y1 - y0) / ny_in
    px, py = int(math.ceil(radius / dx)), int(math.ceil(radius / dy))
    xs = x0 + (np.arange(-px, nx_in + px) + 0.5) * dx
    ys = y0 + (np.arange(-py, ny_in + py) + 0.5) * dy
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    d = domain.sdf(pts)
    keep = (d >= 0.0) & (d <= radius)
    return pts[keep], np.full(int(keep.sum()), dx * dy), radius


def build_dirichlet(J_kernel, g, f, domain, exterior_resolution=100):
    """Dirichlet analog: ``u - int_Omega J u = f + B`` with ``B = int_collar J g``.

    ``B`` is integrated on a masked midpoint grid with ``exterior_resolution``
    cells across the bounding box, truncated at the effective support radius
    (relative tolerance 1e-12).

    Raises
    ------
    NoDecay, NotRadial
        The kernel cannot be truncated.
    """
    f_field = _as_field(f)
    g_field = _as_field(g)
    if getattr(g_field, "constant", None) == 0.0:
        return FredholmProblem(1.0, J_kernel, f_field, domain, "dirichlet",
                               extras={"boundary_source": _as_field(0.0)})
    pts, wts, radius = exterior_grid(J_kernel, domain, exterior_resolution)
    gw = wts * g_field(pts)

    def boundary_source(x):
        return J_kernel.matrix(x, pts) @ gw

    B = PointCache(boundary_source, block=64)

    def rhs(points):
        return f_field(points) + B(points)

    return FredholmProblem(1.0, J_kernel, rhs, domain, "dirichlet",
                           extras={"boundary_source": B, "support_radius": radius})


def neumann_s(J_kernel, rule):
    """``s(x) = sum_i w_i J(x - y_i)`` as a memoized field."""
    def s(x):
        return J_kernel.matrix(x, rule.nodes) @ rule.weights

    return PointCache(s)


def build_neumann(J_kernel, f, domain, rule, absorption=0.0):
    """Neumann analog ``s u - int_Omega J u = f`` with ``s`` from ``rule``.

    ``absorption`` adds a constant ``kappa`` to ``s`` (a linear decay term
    ``-kappa u`` in the source). With ``kappa = 0`` constants lie in the
    kernel of the operator, so a linear solve needs ``kappa > 0``.
    """
    if absorption < 0:
        raise ValidationError("absorption", "absorption must be nonnegative")
    s_rule = neumann_s(J_kernel, rule)
    if absorption:
        def s(x):
            return s_rule(x) + absorption
    else:
        s = s_rule
    prob = normalize_static(s, J_kernel, f, domain, meta="neumann", check_points=rule.nodes)
    extras = dict(prob.extras or {})
    extras["s"] = s
    extras["absorption"] = float(absorption)
    return FredholmProblem(prob.lam, prob.kernel, prob.rhs, domain, "neumann", extras=extras)


def manufacture(u_exact, lam, k, domain, reference_rule):
    """Manufactured case with ``f = lam u* - Q_ref[k(x, .) u*]`` (memoized).

    ``reference_rule`` must be far more accurate than the production rules
    measured against the case.
    """
    if lam == 0:
        raise ValidationError("lambda", "lambda must be nonzero")
    u_field = _as_field(u_exact)
    wu = reference_rule.weights * u_field(reference_rule.nodes)

    def f(points):
        return lam * u_field(points) - k.matrix(points, reference_rule.nodes) @ wu

    prob = FredholmProblem(float(lam), k, PointCache(f), domain, "manufactured", exact=u_field)
    return ManufacturedCase(prob, u_field, reference_rule)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def smooth_solution(points):
    """Default manufactured solution ``exp(x - y/2) cos(2x + y)``."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    return np.exp(p[:, 0] - 0.5 * p[:, 1]) * np.cos(2.0 * p[:, 0] + p[:, 1])


def manufactured_smooth(domain="unit_square", kernel="gaussian", sigma=0.5, lam=1.0,
                        reference_rule=None):
    from .quadrature import reference_rule as make_reference

    dom = named_domain(domain) if isinstance(domain, str) else domain
    k = make_kernel(kernel, sigma=sigma) if kernel in ("gaussian", "poly_decay", "oscillatory") \
        else make_kernel(kernel)
    ref = reference_rule or make_reference(dom, 1e-13)
    return manufacture(smooth_solution, lam, k, dom, ref)


def dirichlet_square(sigma=0.2, exterior_resolution=100):
    """Unit square, Gaussian ``J``, ``g = 1`` and ``f = 0``.

    The exact solution is ``u = 1`` up to the truncation of the collar.
    """
    dom = named_domain("unit_square")
    prob = build_dirichlet(gaussian(sigma), 1.0, 0.0, dom, exterior_resolution)
    return FredholmProblem(prob.lam, prob.kernel, prob.rhs, dom, "dirichlet",
                           exact=_as_field(1.0), extras=prob.extras)


def _disk_forcing(points):
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    return np.cos(math.pi * np.hypot(p[:, 0], p[:, 1])) + 0.5 * p[:, 0]


def neumann_disk(rule, sigma=0.2, absorption=1.0):
    """Unit disk Neumann analog with decay ``absorption`` and a smooth forcing."""
    dom = named_domain("unit_disk")
    return build_neumann(gaussian(sigma), _disk_forcing, dom, rule, absorption)


def _capacity(points):
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    return 1.0 + 0.5 * p[:, 0]


def logistic_disk(rule, sigma=0.2, rate=1.0):
    """Neumann-normalized logistic growth on the unit disk.

    ``s u - int J u = r u (a - u)`` with ``a(x) = 1 + x_1 / 2``, divided
    by ``s``. Solve with :func:`fredholm2d.solver.solve_nonlinear` using
    ``problem.rhs`` and ``problem.rhs.du``.
    """
    dom = named_domain("unit_disk")
    J = gaussian(sigma)
    s = neumann_s(J, rule)
    base = normalize_static(s, J, 0.0, dom, meta="neumann", check_points=rule.nodes)
    source = LogisticSource(_as_field(rate), _capacity, s)
    return FredholmProblem(1.0, base.kernel, source, dom, "neumann", nonlinear=True,
                           extras={"s": s, "carrying_capacity": _capacity})


PRESETS = {
    "manufactured_smooth": manufactured_smooth,
    "dirichlet_square": dirichlet_square,
    "neumann_disk": neumann_disk,
    "logistic_disk": logistic_disk,
}
