"""Problem builders: static normalization, Dirichlet and Neumann analogs, manufactured cases."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erf

from fredholm2d import (assemble_classical, build_dirichlet, build_neumann, constant,
                        dirichlet_square, fitted_rule, gaussian, generate_nodes, interpolate,
                        logistic_disk, manufacture, manufactured_smooth, named_domain,
                        neumann_disk, neumann_s, normalize_static, reference_rule, solve_linear,
                        solve_nonlinear, zero)
from fredholm2d.errors import NonpositiveS, ValidationError
from fredholm2d.problems import PRESETS, FredholmProblem, PointCache, exterior_grid


def _gauss_box_mass(x, sigma, box):
    """Mass of a normalized Gaussian centered at x over an axis-aligned box."""
    x0, y0, x1, y1 = box
    s = sigma * math.sqrt(2.0)
    mx = 0.5 * (erf((x1 - x[0]) / s) - erf((x0 - x[0]) / s))
    my = 0.5 * (erf((y1 - x[1]) / s) - erf((y0 - x[1]) / s))
    return mx * my


class TestStatic:
    def test_unit_s_is_identity(self, square):
        J = gaussian(0.2)
        f = lambda p: p[:, 0]  # noqa: E731
        prob = normalize_static(1.0, J, f, square)
        assert prob.kernel is J and prob.rhs is f and prob.lam == 1.0

    def test_constant_s_equivalence(self, square):
        rule = fitted_rule(square, generate_nodes(square, 0.1, seed=0), 3)
        J = gaussian(0.2)
        f = lambda p: np.cos(p[:, 0])  # noqa: E731
        prob = normalize_static(2.0, J, f, square)
        a = solve_linear(assemble_classical(prob.lam, prob.kernel, prob.rhs, rule)).values
        b = solve_linear(assemble_classical(2.0, J, f, rule)).values
        assert np.abs(a - b).max() <= 1e-12 * np.abs(b).max()

    def test_nonpositive_s(self, square):
        with pytest.raises(NonpositiveS):
            normalize_static(lambda p: p[:, 0] - 0.5, gaussian(0.2), 1.0, square)
        with pytest.raises(NonpositiveS):
            normalize_static(0.0, gaussian(0.2), 1.0, square)

    def test_kernel_divided_by_s(self, square):
        s = lambda p: 1.0 + p[:, 0]  # noqa: E731
        J = gaussian(0.3)
        prob = normalize_static(s, J, 1.0, square)
        X = np.array([[0.2, 0.3], [0.7, 0.1]])
        Y = np.array([[0.5, 0.5], [0.1, 0.9], [0.3, 0.3]])
        assert np.allclose(prob.kernel.matrix(X, Y), J.matrix(X, Y) / s(X)[:, None], rtol=1e-15)
        assert prob.kernel(X[1], Y[0]) == pytest.approx(J(X[1], Y[0]) / 1.7)
        assert np.allclose(prob.rhs(X), 1.0 / s(X))


class TestDirichlet:
    def test_zero_g(self, square):
        f = lambda p: p[:, 1]  # noqa: E731
        assert build_dirichlet(gaussian(0.2), 0.0, f, square).rhs is f

    def test_deep_interior_vanishes(self, square):
        prob = build_dirichlet(gaussian(0.05), 1.0, 0.0, square)
        radius = prob.extras["support_radius"]
        assert radius < 0.5
        B = prob.extras["boundary_source"]
        assert abs(B(np.array([[0.5, 0.5]]))[0]) <= 1e-12

    def test_half_plane_mass(self, square):
        # collar part below the bottom edge only: the half-plane mass 1/2
        g = lambda p: (p[:, 1] < 0.0).astype(float)  # noqa: E731
        B = build_dirichlet(gaussian(0.2), g, 0.0, square).extras["boundary_source"]
        assert B(np.array([[0.5, 0.0]]))[0] == pytest.approx(0.5, abs=2e-3)

    def test_full_collar_against_erf(self, square):
        # g = 1 on the whole collar: 1 minus the mass inside the square
        x = (0.5, 0.0)
        exact = 1.0 - _gauss_box_mass(x, 0.2, (0, 0, 1, 1))
        errs = []
        for res in (50, 100, 200):
            B = build_dirichlet(gaussian(0.2), 1.0, 0.0, square,
                                exterior_resolution=res).extras["boundary_source"]
            errs.append(abs(B(np.array([x]))[0] - exact))
        # midpoint grid: second order in the resolution
        assert errs[1] <= 1e-5
        assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5

    def test_grid_stays_in_collar(self, square):
        pts, wts, radius = exterior_grid(gaussian(0.2), square, 50)
        d = square.sdf(pts)
        assert np.all(d >= 0) and np.all(d <= radius)
        assert np.all(wts == wts[0])

    def test_preset_solution_near_one(self):
        prob = dirichlet_square(0.2)
        dom = prob.domain
        rule = fitted_rule(dom, generate_nodes(dom, 0.05, seed=0), 3)
        sol = solve_linear(assemble_classical(prob.lam, prob.kernel, prob.rhs, rule))
        assert np.abs(sol.values - 1.0).max() <= 2e-3
        assert prob.meta == "dirichlet"


@pytest.fixture(scope="module")
def fine():
    return reference_rule(named_domain("unit_square"))


class TestNeumann:
    def test_interior_full_mass(self, fine):
        s = neumann_s(gaussian(0.05), fine)
        assert s(np.array([[0.5, 0.5]]))[0] == pytest.approx(1.0, abs=1e-8)

    def test_edge_half_mass(self, fine):
        s = neumann_s(gaussian(0.05), fine)
        assert s(np.array([[0.0, 0.5]]))[0] == pytest.approx(0.5, abs=1e-3)

    def test_mass_bound(self, fine, rng):
        s = neumann_s(gaussian(0.1), fine)
        vals = s(rng.uniform(0, 1, (500, 2)))
        assert vals.min() > 0 and vals.max() <= 1 + 1e-8

    def test_zero_kernel(self, square, fine):
        with pytest.raises(NonpositiveS):
            build_neumann(zero(), 1.0, square, fine)

    def test_negative_absorption(self, square, fine):
        with pytest.raises(ValidationError):
            build_neumann(gaussian(0.1), 1.0, square, fine, absorption=-1.0)

    def test_preset_solves(self):
        dom = named_domain("unit_disk")
        rule = fitted_rule(dom, generate_nodes(dom, 0.08, seed=0), 3)
        prob = neumann_disk(rule)
        sol = solve_linear(assemble_classical(prob.lam, prob.kernel, prob.rhs, rule))
        assert prob.meta == "neumann"
        assert math.isfinite(sol.cond_inf) and sol.cond_inf < 100


class TestManufactured:
    def test_constant_zero_kernel(self, square):
        case = manufacture(1.0, 2.0, zero(), square, reference_rule(square))
        assert np.allclose(case.problem.rhs(np.random.default_rng(0).uniform(0, 1, (5, 2))), 2.0)

    def test_gaussian_center(self, square):
        case = manufacture(1.0, 1.0, gaussian(0.5), square, reference_rule(square))
        mass = _gauss_box_mass((0.5, 0.5), 0.5, (0, 0, 1, 1))
        assert case.problem.rhs(np.array([[0.5, 0.5]]))[0] == pytest.approx(1.0 - mass, abs=1e-12)

    @pytest.mark.parametrize("domain", ["unit_square", "unit_disk", "l_shape"])
    def test_self_consistency(self, domain):
        case = manufactured_smooth(domain=domain, sigma=0.3)
        dom = case.problem.domain
        ref = case.reference_rule
        pts = ref.nodes[np.random.default_rng(5).choice(len(ref), 20, replace=False)]
        k = case.problem.kernel
        Ku = k.matrix(pts, ref.nodes) @ (ref.weights * case.u_exact(ref.nodes))
        resid = case.problem.lam * case.u_exact(pts) - Ku - case.problem.rhs(pts)
        assert np.abs(resid).max() <= 1e-9
        assert dom.name == domain

    def test_memoized(self, square):
        calls = []

        def f(p):
            calls.append(len(p))
            return np.ones(len(p))

        cache = PointCache(f)
        p = np.array([[0.1, 0.2], [0.3, 0.4]])
        cache(p)
        cache(p)
        assert sum(calls) == 2

    def test_interpolant_vs_exact(self, square):
        case = manufactured_smooth(sigma=0.5)
        rule = fitted_rule(square, generate_nodes(square, 0.05, seed=1), 3)
        sol = solve_linear(assemble_classical(1.0, case.problem.kernel, case.problem.rhs, rule))
        pts = np.random.default_rng(3).uniform(0, 1, (50, 2))
        assert np.abs(interpolate(sol, pts) - case.u_exact(pts)).max() <= 1e-5


class TestLogistic:
    def test_disk_converges(self):
        dom = named_domain("unit_disk")
        rule = fitted_rule(dom, generate_nodes(dom, 0.08, seed=0), 3)
        prob = logistic_disk(rule)
        sol = solve_nonlinear(prob.lam, prob.kernel, prob.rhs, prob.rhs.du, rule)
        assert sol.residual <= 1e-9
        assert prob.nonlinear and prob.meta == "neumann"
        # near the carrying capacity, well away from the zero branch
        assert sol.values.min() > 0.3


def test_problem_validation(square):
    with pytest.raises(ValidationError):
        FredholmProblem(0.0, zero(), 1.0, square)
    with pytest.raises(ValidationError):
        FredholmProblem(1.0, zero(), 1.0, square, meta="bogus")


def test_presets_listed():
    assert set(PRESETS) == {"manufactured_smooth", "dirichlet_square", "neumann_disk", "logistic_disk"}


@settings(max_examples=10, deadline=None)
@given(c=st.floats(0.1, 10.0))
def test_constant_s_scales_solution_away(c):
    dom = named_domain("unit_square")
    rule = fitted_rule(dom, generate_nodes(dom, 0.25, seed=0), 2)
    J = constant(0.2)
    prob = normalize_static(c, J, 1.0, dom)
    a = solve_linear(assemble_classical(prob.lam, prob.kernel, prob.rhs, rule)).values
    b = solve_linear(assemble_classical(c, J, 1.0, rule)).values
    assert np.abs(a - b).max() <= 1e-12 * np.abs(b).max()
