"""Reference rules, moment fitting, the 1D fixtures and order measurement."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fredholm2d import (Disk, Domain, Rectangle, apply_rule, compute_moments, fitted_rule,
                        generate_nodes, moment_fit_weights, named_domain, reference_rule,
                        stability_l1)
from fredholm2d.errors import DegreeTooLarge, RankDeficient, ValidationError, ZeroError
from fredholm2d.geometry import NAMED_DOMAINS
from fredholm2d.nodes import NodeSet
from fredholm2d.quadrature import (QuadratureRule, composite_gauss, load_rule, measure_order,
                                   rectangle_rule_1d, save_rule, tensor_gauss,
                                   unstable_rectangle_rule_1d, vandermonde)


class TestMoments:
    def test_square_xy(self, square):
        mt = compute_moments(square, 2)
        assert mt.values[mt.exponents.index((1, 1))] == pytest.approx(0.25, rel=1e-14)

    def test_disk_x2(self, disk):
        mt = compute_moments(disk, 2)
        assert mt.values[mt.exponents.index((2, 0))] == pytest.approx(math.pi / 4, rel=1e-14)

    def test_annulus_area(self):
        mt = compute_moments(named_domain("annulus"), 0)
        assert mt.values[0] == pytest.approx(0.75 * math.pi, rel=1e-6)

    def test_ordering(self, square):
        assert compute_moments(square, 2).exponents == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]

    def test_degree_limits(self, square):
        with pytest.raises(DegreeTooLarge):
            compute_moments(square, 21)
        with pytest.raises(ValidationError):
            compute_moments(square, -1)

    @pytest.mark.parametrize("name", sorted(NAMED_DOMAINS))
    def test_against_reference_rule(self, name):
        dom = named_domain(name)
        mt = compute_moments(dom, 6)
        ref = reference_rule(dom)
        for (a, b), v in zip(mt.exponents, mt.values):
            q = apply_rule(ref, ref.nodes[:, 0] ** a * ref.nodes[:, 1] ** b)
            assert q == pytest.approx(v, rel=1e-10, abs=1e-12)


class TestTensorGauss:
    def test_midpoint(self):
        rule = tensor_gauss((0, 0, 1, 1), 1)
        assert np.allclose(rule.nodes, [[0.5, 0.5]])
        assert np.allclose(rule.weights, [1.0])

    def test_degree_three(self):
        rule = tensor_gauss((0, 0, 1, 1), 2)
        assert apply_rule(rule, lambda p: p[:, 0] ** 3 * p[:, 1] ** 3) == pytest.approx(1 / 16, abs=1e-14)

    def test_exp(self):
        rule = tensor_gauss((0, 0, 1, 1), 5)
        val = apply_rule(rule, lambda p: np.exp(p[:, 0] + p[:, 1]))
        assert val == pytest.approx((math.e - 1) ** 2, abs=1e-10)

    def test_positive_unit_l1(self):
        rule = composite_gauss((0, 0, 1, 1), 3, 4)
        assert np.all(rule.weights > 0)
        assert stability_l1(rule) == pytest.approx(1.0, rel=1e-14)

    def test_bad_points(self):
        with pytest.raises(ValidationError):
            tensor_gauss((0, 0, 1, 1), 0)


class TestMomentFit:
    def test_four_corners(self, square):
        nodes = NodeSet.from_points([[0, 0], [1, 0], [0, 1], [1, 1]])
        rule = moment_fit_weights(nodes, compute_moments(square, 1))
        assert np.allclose(rule.weights, 0.25, atol=1e-14)
        assert rule.nominal_order == 2

    def test_too_few_nodes(self, square):
        nodes = NodeSet.from_points([[0, 0], [1, 0]])
        with pytest.raises(RankDeficient):
            moment_fit_weights(nodes, compute_moments(square, 1))

    def test_unknown_mode(self, square, square_nodes):
        with pytest.raises(ValidationError):
            moment_fit_weights(square_nodes, compute_moments(square, 1), mode="magic")

    @pytest.mark.parametrize("mode", ["least_norm", "nonnegative"])
    def test_global_fit_reproduces_moments(self, square, mode):
        nodes = generate_nodes(square, 0.2, seed=0)
        mt = compute_moments(square, 2, center=(0.5, 0.5), scale=(0.5, 0.5))
        rule = moment_fit_weights(nodes, mt, mode=mode)
        V = vandermonde(rule.nodes, mt.exponents, mt.center, mt.scale)
        assert np.abs(V @ rule.weights - mt.values).max() <= 1e-10 * np.abs(mt.values).max()
        if mode == "nonnegative":
            assert rule.weights.min() >= 0


class TestFittedRule:
    @pytest.mark.parametrize("name", sorted(NAMED_DOMAINS))
    @pytest.mark.parametrize("degree", [1, 3])
    def test_moment_exactness(self, name, degree):
        dom = named_domain(name)
        rule = fitted_rule(dom, generate_nodes(dom, 0.1, seed=2), degree)
        mt = compute_moments(dom, degree)
        for (a, b), v in zip(mt.exponents, mt.values):
            q = apply_rule(rule, rule.nodes[:, 0] ** a * rule.nodes[:, 1] ** b)
            assert abs(q - v) <= 1e-10 * max(abs(v), dom.area)

    def test_disk_nonnegative_l1(self, disk):
        rule = fitted_rule(disk, generate_nodes(disk, 0.08, seed=1), 3)
        assert rule.weights.min() >= 0
        assert stability_l1(rule) == pytest.approx(math.pi, rel=1e-10)

    def test_constant_gives_area(self, square):
        rule = fitted_rule(square, generate_nodes(square, 0.1, seed=5), 2)
        assert apply_rule(rule, 1.0) == pytest.approx(1.0, rel=1e-10)
        assert apply_rule(rule, 0.0) == 0.0

    def test_disk_degree_four_smooth(self, disk):
        nodes = generate_nodes(disk, 0.075, seed=4)
        assert 350 <= len(nodes) <= 800
        rule = fitted_rule(disk, nodes, 4)
        f = lambda p: np.exp(p[:, 0]) * np.cos(p[:, 1])  # noqa: E731
        assert apply_rule(rule, f) == pytest.approx(apply_rule(reference_rule(disk), f), abs=1e-4)

    def test_rule_round_trip(self, tmp_path, square):
        rule = fitted_rule(square, generate_nodes(square, 0.2, seed=0), 1)
        save_rule(tmp_path / "r.txt", rule)
        back = load_rule(tmp_path / "r.txt", rule.nominal_order)
        assert np.array_equal(back.nodes, rule.nodes)
        assert np.array_equal(back.weights, rule.weights)


class TestAppendixFixture:
    def test_rectangle_rule(self):
        rule = rectangle_rule_1d(2)
        assert np.allclose(rule.nodes, [0.5, 1.0])
        assert np.allclose(rule.weights, [0.5, 0.5])
        assert apply_rule(rule, lambda x: x) == pytest.approx(0.75)
        for N in (1, 7, 33):
            assert apply_rule(rectangle_rule_1d(N), 1.0) == pytest.approx(1.0, abs=1e-14)

    def test_unstable_rule(self):
        rule = unstable_rectangle_rule_1d(2)
        assert np.allclose(rule.nodes, [0.5, 1.0, 0.25, 0.75])
        assert np.allclose(rule.weights, [1.5, 1.5, -1.0, -1.0])
        assert apply_rule(rule, lambda x: x) == pytest.approx(1.25)

    @pytest.mark.parametrize("N", [1, 2, 5, 17, 64])
    def test_unstable_constant_exact(self, N):
        assert apply_rule(unstable_rectangle_rule_1d(N), 1.0) == pytest.approx(1.0, abs=1e-13)

    def test_orders(self):
        hs = [1 / 4, 1 / 8, 1 / 16, 1 / 32]
        eoc = measure_order(lambda h: rectangle_rule_1d(round(1 / h)), lambda x: x, 0.5, hs)
        assert eoc[-1] == pytest.approx(1.0, abs=0.05)
        eoc = measure_order(lambda h: unstable_rectangle_rule_1d(round(1 / h)), lambda x: x, 0.5, hs)
        assert eoc[-1] == pytest.approx(1.0, abs=0.1)

    def test_exact_family_not_measurable(self):
        hs = [0.5, 0.25, 0.125]
        with pytest.raises(ZeroError):
            measure_order(lambda h: tensor_gauss((0, 0, 1, 1), 3), lambda p: p[:, 0], 0.5, hs)

    def test_too_few_levels(self):
        with pytest.raises(ValidationError):
            measure_order(rectangle_rule_1d, lambda x: x, 0.5, [1, 2])


def test_rule_length_mismatch():
    with pytest.raises(ValidationError):
        QuadratureRule(np.zeros((3, 2)), np.ones(2), 1)


@settings(max_examples=12, deadline=None)
@given(x0=st.floats(-1, 0), y0=st.floats(-1, 0), w=st.floats(0.6, 1.5), hgt=st.floats(0.6, 1.5),
       frac=st.floats(0.1, 0.35), seed=st.integers(0, 100), degree=st.integers(0, 3))
def test_fitted_rule_exact_on_random_csg(x0, y0, w, hgt, frac, seed, degree):
    r = frac * min(w, hgt)
    dom = Domain(Rectangle(x0, y0, x0 + w, y0 + hgt) - Disk(x0 + w / 2, y0 + hgt / 2, r), name="rnd")
    rule = fitted_rule(dom, generate_nodes(dom, 0.12, seed=seed), degree)
    mt = compute_moments(dom, degree)
    assert rule.weights.min() >= 0
    for (a, b), v in zip(mt.exponents, mt.values):
        q = apply_rule(rule, rule.nodes[:, 0] ** a * rule.nodes[:, 1] ** b)
        assert abs(q - v) <= 1e-10 * max(abs(v), dom.area)
