"""Kernel library.

A :class:`Kernel` wraps a vectorized ``eval(x, y)`` that broadcasts over
leading axes of two ``(..., 2)`` arrays, plus property flags. Radial
kernels also carry ``profile(r)`` and are evaluated through pairwise
distances, which is both faster and exactly consistent with the profile.
"""
from dataclasses import dataclass, field
import math
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .errors import NoDecay, NonpositiveSigma, NotRadial, ValidationError

FLAG_NAMES = ("symmetric", "nonnegative", "strictly_positive", "translation_invariant", "radial")

# rows of k(X, Y) evaluated per block when reducing over a rule
_BLOCK = 512


@dataclass(frozen=True, eq=False)
class Kernel:
    """A kernel ``k(x, y)`` on R^2 x R^2.

    Parameters
    ----------
    eval : callable
        ``eval(x, y)`` with broadcasting ``(..., 2)`` inputs.
    flags : dict
        Booleans for the names in ``FLAG_NAMES``; missing names are False.
    profile : callable, optional
        ``R(r)`` for radial kernels, or ``J(z)`` on ``(..., 2)`` offsets for
        translation-invariant ones.
    sigma : float, optional
        Length scale.
    matrix_fn : callable, optional
        Fast ``(X, Y) -> K`` used by :meth:`matrix` instead of ``eval``.
    """

    eval: Callable
    flags: dict = field(default_factory=dict)
    profile: Optional[Callable] = None
    sigma: Optional[float] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)
    matrix_fn: Optional[Callable] = None

    def __post_init__(self):
        flags = {k: bool(self.flags.get(k, False)) for k in FLAG_NAMES}
        unknown = set(self.flags) - set(FLAG_NAMES)
        if unknown:
            raise ValidationError("flags", f"unknown kernel flags {sorted(unknown)}")
        object.__setattr__(self, "flags", flags)

    def __call__(self, x, y):
        return self.eval(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    @property
    def radial(self):
        return self.flags["radial"]

    def matrix(self, X, Y):
        """Dense ``K[i, j] = k(X[i], Y[j])``."""
        X = np.asarray(X, dtype=float).reshape(-1, 2)
        Y = np.asarray(Y, dtype=float).reshape(-1, 2)
        if self.matrix_fn is not None:
            return self.matrix_fn(X, Y)
        if self.flags["radial"] and self.profile is not None:
            return self.profile(cdist(X, Y))
        return np.asarray(self.eval(X[:, None, :], Y[None, :, :]), dtype=float) \
            * np.ones((len(X), len(Y)))


def _radial(profile, sigma, name, params, strictly_positive=True, nonnegative=True):
    def ev(x, y):
        d = x - y
        return profile(np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2))

    flags = dict(symmetric=True, nonnegative=nonnegative, strictly_positive=strictly_positive,
                 translation_invariant=True, radial=True)
    return Kernel(ev, flags, profile, sigma, name, params)


def _check_sigma(sigma):
    if not (isinstance(sigma, (int, float)) and sigma > 0 and math.isfinite(sigma)):
        raise NonpositiveSigma(sigma)
    return float(sigma)


def gaussian(sigma):
    """Normalized Gaussian ``(2 pi sigma^2)^-1 exp(-|x-y|^2 / (2 sigma^2))``.

    Integrates to one over R^2.
    """
    sigma = _check_sigma(sigma)
    c = 1.0 / (2.0 * math.pi * sigma * sigma)
    a = 1.0 / (2.0 * sigma * sigma)

    def profile(r):
        r = np.asarray(r, dtype=float)
        return c * np.exp(-a * r * r)

    return _radial(profile, sigma, "gaussian", {"sigma": sigma})


def poly_decay(sigma, power=3.0):
    """Algebraically decaying ``(power-1)/(pi sigma^2) (1 + r^2/sigma^2)^-power``.

    Also normalized to unit mass (``power > 1``).
    """
    sigma = _check_sigma(sigma)
    if not power > 1.0:
        raise ValidationError("power", f"power must exceed 1, got {power}")
    c = (power - 1.0) / (math.pi * sigma * sigma)

    def profile(r):
        r = np.asarray(r, dtype=float)
        return c * (1.0 + (r / sigma) ** 2) ** (-power)

    return _radial(profile, sigma, "poly_decay", {"sigma": sigma, "power": float(power)})


def oscillatory(sigma, frequency=2.0):
    """Sign-changing Gaussian ``cos(frequency r / sigma)`` modulation."""
    sigma = _check_sigma(sigma)
    c = 1.0 / (2.0 * math.pi * sigma * sigma)
    a = 1.0 / (2.0 * sigma * sigma)
    wav = frequency / sigma

    def profile(r):
        r = np.asarray(r, dtype=float)
        return c * np.exp(-a * r * r) * np.cos(wav * r)

    positive = frequency == 0.0
    return _radial(profile, sigma, "oscillatory", {"sigma": sigma, "frequency": float(frequency)},
                   strictly_positive=positive, nonnegative=positive)


def separable(g=None, name="separable"):
    """Rank-one kernel ``g(x) g(y)``; default ``g(x) = x_1``."""
    if g is None:
        def g(p):
            return p[..., 0]

    def ev(x, y):
        return g(x) * g(y)

    return Kernel(ev, dict(symmetric=True), None, None, name, {})


def constant(value=1.0):
    value = float(value)

    def ev(x, y):
        return np.full(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]), value)

    def profile(r):
        return np.full(np.shape(r), value)

    flags = dict(symmetric=True, nonnegative=value >= 0, strictly_positive=value > 0,
                 translation_invariant=True, radial=True)
    return Kernel(ev, flags, profile, None, "constant", {"value": value})


def zero():
    k = constant(0.0)
    return Kernel(k.eval, k.flags, k.profile, None, "zero", {})


KERNELS = {
    "gaussian": gaussian,
    "poly_decay": poly_decay,
    "oscillatory": oscillatory,
    "separable": lambda: separable(),
    "constant": constant,
    "zero": zero,
}


def make_kernel(name, **params):
    """Kernel by name, as selected in configuration files."""
    try:
        factory = KERNELS[name]
    except KeyError:
        raise ValidationError("kernel", f"unknown kernel {name!r}; known: {sorted(KERNELS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ValidationError("kernel", f"bad parameters for {name}: {exc}") from None


def operator_norm_estimate(k, domain, rule):
    """``max_x sum_i w_i |k(x, y_i)|`` over the rule nodes as ``x`` samples.

    A lower-biased estimate of ``max_x int |k(x, y)| dy``; ``domain`` is
    only checked against the rule tag.
    """
    if rule.domain_tag not in (None, domain.name):
        raise ValidationError("rule", f"rule lives on {rule.domain_tag!r}, not {domain.name!r}")
    Y = rule.nodes
    w = rule.weights
    best = 0.0
    for lo in range(0, len(Y), _BLOCK):
        vals = np.abs(k.matrix(Y[lo:lo + _BLOCK], Y)) @ w
        best = max(best, float(vals.max(initial=0.0)))
    return best


def effective_support_radius(k, tolerance):
    """Smallest ``r`` with ``|R(r)| <= tolerance * |R(0)|``, by bisection on ``[0, 100 sigma]``."""
    if not k.radial or k.profile is None:
        raise NotRadial(f"kernel {k.name!r} is not radial")
    scale = k.sigma or 1.0
    p0 = abs(float(k.profile(0.0)))
    target = tolerance * p0

    def small(r):
        return abs(float(k.profile(r))) <= target

    hi = 100.0 * scale
    if p0 == 0.0:
        return 0.0
    if not small(hi):
        raise NoDecay(f"profile of {k.name!r} does not fall below {tolerance:g} of its peak")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if small(mid):
            hi = mid
        else:
            lo = mid
    return hi
