"""Classical and decoupled Nystrom systems, interpolation, Newton."""
import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fredholm2d import (assemble_classical, assemble_decoupled, build_mls, constant,
                        fitted_rule, gaussian, generate_nodes, identity_operator, interpolate,
                        manufactured_smooth, named_domain, separable, solve_linear,
                        solve_nonlinear, zero)
from fredholm2d.errors import (NoConvergence, NodeMismatch, SingularJacobian, SingularMatrix,
                               ZeroLambda)
from fredholm2d.problems import LogisticSource, _as_field
from fredholm2d.quadrature import QuadratureRule
from fredholm2d.solver import condition_inf, summary, write_solution_csv, write_summary_json


@pytest.fixture(scope="module")
def rule():
    dom = named_domain("unit_square")
    return fitted_rule(dom, generate_nodes(dom, 0.1, seed=0), 3)


class TestAssembly:
    def test_zero_kernel(self, rule):
        sys_ = assemble_classical(2.0, zero(), lambda p: p[:, 0], rule)
        assert np.array_equal(sys_.A, 2.0 * np.eye(len(rule)))
        sol = solve_linear(sys_)
        assert np.allclose(sol.values, rule.nodes[:, 0] / 2, atol=1e-15)

    def test_one_node(self):
        r = QuadratureRule(np.array([[0.3, 0.4]]), np.array([0.7]), 1)
        k = gaussian(0.5)
        sol = solve_linear(assemble_classical(1.5, k, 2.0, r))
        kyy = k(np.array([0.3, 0.4]), np.array([0.3, 0.4]))
        assert sol.values[0] == pytest.approx(2.0 / (1.5 - 0.7 * kyy), rel=1e-14)

    def test_entries(self, rule):
        k = gaussian(0.5)
        A = assemble_classical(1.0, k, 0.0, rule).A
        Y, w = rule.nodes, rule.weights
        for i, j in [(0, 0), (3, 17), (len(Y) - 1, 5)]:
            expected = (i == j) - k(Y[i], Y[j]) * w[j]
            assert A[i, j] == pytest.approx(expected, abs=1e-15)

    def test_symmetric_kernel_matrix(self, rule):
        K = gaussian(0.3).matrix(rule.nodes, rule.nodes)
        assert np.abs(K - K.T).max() <= 1e-14

    def test_zero_lambda(self, rule):
        with pytest.raises(ZeroLambda):
            assemble_classical(0.0, gaussian(0.5), 1.0, rule)

    def test_node_mismatch(self, rule):
        dom = named_domain("unit_square")
        X = generate_nodes(dom, 0.2, seed=1)
        other = generate_nodes(dom, 0.1, seed=9)
        with pytest.raises(NodeMismatch):
            assemble_decoupled(1.0, gaussian(0.5), 1.0, rule, build_mls(X, other, 1))

    def test_decoupled_zero_kernel(self, rule):
        dom = named_domain("unit_square")
        X = generate_nodes(dom, 0.2, seed=1)
        sys_ = assemble_decoupled(3.0, zero(), 1.0, rule, build_mls(X, rule.node_set, 1))
        assert np.array_equal(sys_.A, 3.0 * np.eye(len(X)))

    def test_decoupled_shape(self, rule):
        dom = named_domain("unit_square")
        X = generate_nodes(dom, 0.2, seed=1)
        R = build_mls(X, rule.node_set, 1)
        sys_ = assemble_decoupled(1.0, gaussian(0.5), 1.0, rule, R)
        assert sys_.A.shape == (len(X), len(X))
        KW = gaussian(0.5).matrix(X.points, rule.nodes) * rule.weights
        assert np.allclose(sys_.A, np.eye(len(X)) - KW @ R.matrix.toarray(), atol=1e-15)


class TestDegeneracy:
    @pytest.mark.parametrize("k", [gaussian(0.5), separable(), constant(0.3)], ids=lambda k: k.name)
    def test_identity_reconstruction(self, rule, k):
        f = lambda p: np.cos(p[:, 0]) + p[:, 1]  # noqa: E731
        c = assemble_classical(1.0, k, f, rule)
        d = assemble_decoupled(1.0, k, f, rule, identity_operator(rule.node_set))
        assert np.abs(c.A - d.A).max() <= 1e-15
        sc, sd = solve_linear(c), solve_linear(d)
        assert np.abs(sc.values - sd.values).max() <= 1e-12 * np.abs(sc.values).max()
        pts = np.random.default_rng(0).uniform(0, 1, (50, 2))
        assert np.abs(interpolate(sc, pts) - interpolate(sd, pts)).max() <= 1e-12


class TestSolve:
    def test_diagonal(self):
        class S:
            A = 2.0 * np.eye(4)
            rhs = np.ones(4)
            nodes = np.zeros((4, 2))
            lam = 2.0
            kernel = zero()
            rule = None
            f = 1.0

        sol = solve_linear(S)
        assert np.allclose(sol.values, 0.5)
        assert sol.cond_inf == pytest.approx(1.0)

    def test_residual(self, rule):
        sol = solve_linear(assemble_classical(1.0, gaussian(0.2), lambda p: p[:, 0] ** 2, rule))
        A = assemble_classical(1.0, gaussian(0.2), lambda p: p[:, 0] ** 2, rule).A
        b = rule.nodes[:, 0] ** 2
        bound = 1e-10 * (np.abs(A).sum(1).max() * np.abs(sol.values).max() + np.abs(b).max())
        assert sol.residual <= bound

    def test_singular_at_discrete_eigenvalue(self, rule):
        lam = float(math.fsum(rule.weights))
        with pytest.raises(SingularMatrix):
            solve_linear(assemble_classical(lam, constant(1.0), 1.0, rule))

    def test_condition_exact_vs_estimate(self, rule):
        A = assemble_classical(1.0, gaussian(0.3), 0.0, rule).A
        exact = condition_inf(A)
        est = condition_inf(A, exact_limit=0)
        assert est <= exact * (1 + 1e-12)
        assert est >= exact / 3

    def test_separable_closed_form(self):
        dom = named_domain("unit_square")
        rule = fitted_rule(dom, generate_nodes(dom, 0.1, seed=3), 4)
        sol = solve_linear(assemble_classical(1.0, separable(), 1.0, rule))
        # u = 1 + c x with c = (int x) / (1 - int x^2) = 3/4
        assert np.abs(sol.values - (1.0 + 0.75 * rule.nodes[:, 0])).max() <= 1e-6


class TestInterpolate:
    def test_zero_kernel(self, rule):
        sol = solve_linear(assemble_classical(4.0, zero(), lambda p: p[:, 1], rule))
        pts = np.random.default_rng(1).uniform(0, 1, (20, 2))
        assert np.allclose(interpolate(sol, pts), pts[:, 1] / 4, atol=1e-15)

    def test_single_point(self, rule):
        sol = solve_linear(assemble_classical(1.0, gaussian(0.5), 1.0, rule))
        v = interpolate(sol, [0.5, 0.5])
        assert isinstance(v, float)
        assert v == pytest.approx(interpolate(sol, np.array([[0.5, 0.5]]))[0])

    @pytest.mark.parametrize("variant", ["classical", "decoupled"])
    def test_nodes_reproduced(self, rule, variant):
        dom = named_domain("unit_square")
        f = lambda p: np.sin(3 * p[:, 0]) * p[:, 1]  # noqa: E731
        if variant == "classical":
            sol = solve_linear(assemble_classical(1.0, gaussian(0.3), f, rule))
        else:
            R = build_mls(generate_nodes(dom, 0.2, seed=4), rule.node_set, 2)
            sol = solve_linear(assemble_decoupled(1.0, gaussian(0.3), f, rule, R))
        assert np.abs(interpolate(sol, sol.nodes) - sol.values).max() <= 1e-12 * np.abs(sol.values).max()

    def test_manufactured_decoupled(self):
        dom = named_domain("unit_square")
        case = manufactured_smooth(sigma=0.5)
        Y = generate_nodes(dom, 0.04, seed=0)
        X = generate_nodes(dom, 0.08, seed=1)
        assert 150 <= len(X) <= 300 and 600 <= len(Y) <= 1000
        rule = fitted_rule(dom, Y, 3)
        sol = solve_linear(assemble_decoupled(1.0, case.problem.kernel, case.problem.rhs, rule,
                                              build_mls(X, Y, 2)))
        nodal = np.abs(sol.values - case.u_exact(X.points)).max()
        assert nodal <= 5e-4
        pts = np.random.default_rng(2).uniform(0.02, 0.98, (50, 2))
        assert np.abs(interpolate(sol, pts) - case.u_exact(pts)).max() <= 1.5 * max(nodal, 1e-6) + 1e-4


class TestNewton:
    def test_affine_source_one_step(self, rule):
        f = lambda p: 1.0 + p[:, 0]  # noqa: E731
        lin = solve_linear(assemble_classical(1.0, gaussian(0.5), f, rule))
        sol = solve_nonlinear(1.0, gaussian(0.5), lambda u, x: f(x), lambda u, x: 0.0, rule, init=0.0)
        assert sol.iterations == 1
        assert np.abs(sol.values - lin.values).max() <= 1e-12

    def test_logistic_zero_kernel(self, rule):
        src = LogisticSource(_as_field(1.0), _as_field(2.0))
        sol = solve_nonlinear(1.0, zero(), src, src.du, rule, init=2.0)
        assert np.abs(sol.values - 1.0).max() <= 1e-10

    def test_zero_rate(self, rule):
        src = LogisticSource(_as_field(0.0), _as_field(2.0))
        sol = solve_nonlinear(1.0, gaussian(0.5), src, src.du, rule, init=0.0)
        assert np.abs(sol.values).max() == 0.0

    def test_superlinear_tail(self, rule):
        src = LogisticSource(_as_field(1.0), lambda p: 1.0 + 0.5 * p[:, 0])
        sol = solve_nonlinear(0.5, gaussian(0.2), src, src.du, rule, tol=1e-14)
        h = sol.history
        assert len(h) >= 3
        assert h[-1] / h[-2] <= 0.25 and h[-2] / h[-3] <= 0.25

    def test_nonlinear_interpolant_at_nodes(self, rule):
        src = LogisticSource(_as_field(1.0), _as_field(2.0))
        sol = solve_nonlinear(1.0, gaussian(0.3), src, src.du, rule)
        assert np.abs(interpolate(sol, sol.nodes) - sol.values).max() <= 1e-12 * np.abs(sol.values).max()

    def test_no_convergence(self, rule):
        src = LogisticSource(_as_field(1.0), _as_field(2.0))
        with pytest.raises(NoConvergence):
            solve_nonlinear(1.0, gaussian(0.3), src, src.du, rule, maxit=1, init=50.0)

    def test_singular_jacobian(self, rule):
        # J = lam - du = 1 - 1 = 0 at every node
        with pytest.raises(SingularJacobian):
            solve_nonlinear(1.0, zero(), lambda u, x: u + 1.0, lambda u, x: 1.0, rule, init=0.0)


class TestExport:
    def test_csv_and_json(self, rule, tmp_path):
        sol = solve_linear(assemble_classical(1.0, gaussian(0.5), 1.0, rule))
        pts = np.array([[0.1, 0.2], [0.5, 0.5]])
        write_solution_csv(tmp_path / "s.csv", sol, pts)
        rows = list(csv.reader(open(tmp_path / "s.csv")))
        assert rows[0] == ["x", "y", "u_h"]
        assert float(rows[2][2]) == interpolate(sol, pts)[1]
        write_summary_json(tmp_path / "s.json", sol, {"note": 1})
        data = json.loads((tmp_path / "s.json").read_text())
        assert data["n_solution_nodes"] == len(rule) and data["note"] == 1
        assert summary(sol)["variant"] == "classical"


@settings(max_examples=15, deadline=None)
@given(lam=st.floats(1.5, 10.0), sigma=st.floats(0.05, 1.0), seed=st.integers(0, 1000))
def test_interpolant_reproduces_nodes(lam, sigma, seed):
    dom = named_domain("unit_disk")
    r = fitted_rule(dom, generate_nodes(dom, 0.3, seed=seed), 2)
    sol = solve_linear(assemble_classical(lam, gaussian(sigma), lambda p: np.exp(p[:, 0]), r))
    assert np.abs(interpolate(sol, sol.nodes) - sol.values).max() <= 1e-12 * np.abs(sol.values).max()
