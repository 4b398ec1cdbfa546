"""Expression parsing, symbolic derivatives, and hypothesis checks."""

import numpy as np
import pytest

from magnls.errors import DomainError, ParseError, UnknownIdentifier
from magnls.fieldexpr import evaluate, parse_expression, to_string
from magnls.fields import (FieldExpr, check_hypotheses, eval_field,
                           gaussian_bump, linear_gauge, make_field_spec,
                           parse_field_expression, ring_bump, spec_from_json,
                           spec_to_json)


class TestParser:
    def test_value_at_origin(self):
        expr = parse_field_expression("exp(-(x1^2+x2^2))", 2)
        assert expr([0.0, 0.0]) == 1.0

    def test_parse_error_position(self):
        with pytest.raises(ParseError) as err:
            parse_field_expression("x1 +* 2", 2)
        assert err.value.position == 4

    def test_unknown_identifier(self):
        with pytest.raises(UnknownIdentifier):
            parse_field_expression("y1 + 1", 2)
        with pytest.raises(UnknownIdentifier):
            parse_field_expression("x3", 2)
        with pytest.raises(UnknownIdentifier):
            parse_field_expression("sinh(x1)", 2)

    def test_empty(self):
        with pytest.raises(ParseError):
            parse_field_expression("   ", 2)

    def test_whitespace_tolerated(self):
        expr = parse_field_expression("  x1 *  ( 2+ 1)  ", 2)
        assert expr([2.0, 0.0]) == 6.0

    @pytest.mark.parametrize("text", [
        "x1 + 2*x2",
        "exp(-(x1^2+x2^2))",
        "1/(1+x1^2) - tanh(x2)^2",
        "-x1^2",
        "2^3^2",
        "sqrt(x1^2+4) * cos(0.5*x2)",
        "(x1 - 0.3)/(x2 + 2) + 1e-3",
    ])
    def test_round_trip(self, text):
        node = parse_expression(text, 2)
        again = parse_expression(to_string(node), 2)
        assert node == again

    def test_precedence(self):
        assert evaluate(parse_expression("2^3^2", 1), []) == 512
        assert evaluate(parse_expression("-2^2", 1), []) == -4
        assert evaluate(parse_expression("2-3-4", 1), []) == -5
        assert evaluate(parse_expression("12/3/2", 1), []) == 2

    def test_linear_gradient(self):
        expr = parse_field_expression("0.3*x2", 2)
        g = expr.grad([0.7, -1.2])
        assert g[0] == 0.0
        assert g[1] == 0.3


class TestEvalField:
    def test_constant_A(self):
        spec = make_field_spec(2, V=0.0, K=1.0, A=[0.3, -0.2])
        s = eval_field(spec, np.array([0.4, -0.7]))
        assert np.all(s.J_A == 0.0)
        assert s.div_A == 0.0
        assert np.allclose(s.A, [0.3, -0.2])

    def test_linear_gauge(self):
        spec = make_field_spec(2, A=linear_gauge(2, b=1.0))
        s = eval_field(spec, np.array([0.5, 0.25]))
        assert s.div_A == 0.0
        assert np.allclose(s.J_A, [[0.0, -0.5], [0.5, 0.0]])

    def test_gaussian_derivatives(self):
        spec = make_field_spec(2, V=gaussian_bump(2, 1.0, (0, 0), 1.0))
        s = eval_field(spec, np.zeros(2))
        assert s.V == 1.0
        assert np.allclose(s.grad_V, 0.0)
        assert np.allclose(s.hess_V, -2.0 * np.eye(2))

    def test_div_equals_trace(self, rng):
        spec = make_field_spec(
            2, A=["0.2*x1*x2 - sin(x2)", "cos(x1) + 0.5*x2^2"])
        for _ in range(10):
            x = rng.uniform(-2, 2, size=2)
            s = eval_field(spec, x)
            assert s.div_A == np.trace(s.J_A)


class TestDerivativeProperties:
    def _random_spec(self):
        return make_field_spec(
            2,
            V="0.4*exp(-((x1-0.3)^2+x2^2)/1.5) + 0.05*x1*x2",
            K="1 + 0.2*sin(x1)*cos(x2)",
            A=["0.1*tanh(x2)", "0.3*cos(0.5*x1)"])

    def test_gradient_vs_finite_differences(self, rng):
        spec = self._random_spec()
        h = 1e-5
        for _ in range(100):
            x = rng.uniform(-2.5, 2.5, size=2)
            s = eval_field(spec, x)
            for field, grad in ((spec.V, s.grad_V), (spec.K, s.grad_K)):
                for j in range(2):
                    e = np.zeros(2)
                    e[j] = h
                    fd = (field(list(x + e)) - field(list(x - e))) / (2 * h)
                    scale = max(abs(fd), 1e-3)
                    assert abs(grad[j] - fd) / scale < 1e-6

    def test_hessian_symmetric_and_fd(self, rng):
        spec = self._random_spec()
        h = 1e-4
        for _ in range(25):
            x = rng.uniform(-2.5, 2.5, size=2)
            s = eval_field(spec, x)
            assert np.array_equal(s.hess_V, s.hess_V.T)
            assert np.array_equal(s.hess_K, s.hess_K.T)
            for j in range(2):
                e = np.zeros(2)
                e[j] = h
                fd = (np.array(spec.V.grad(list(x + e)))
                      - np.array(spec.V.grad(list(x - e)))) / (2 * h)
                assert np.abs(s.hess_V[j] - fd).max() < 1e-4

    def test_hessian_ast_symmetry(self):
        # mixed partials are built in sorted index order, so the symbolic
        # trees are identical objects
        expr = FieldExpr.parse("exp(x1*x2) + x1^3*x2", 2)
        assert expr.hessian_node(0, 1) == expr.hessian_node(1, 0)


class TestHypotheses:
    def test_trivial_pass(self):
        spec = make_field_spec(2, V=0.0, K=1.0)
        rep = check_hypotheses(spec, 5.0)
        assert rep.all_ok
        assert rep.inf_one_plus_V == 1.0

    def test_v1_fails(self):
        spec = make_field_spec(2, V=-1.0, K=1.0)
        rep = check_hypotheses(spec, 5.0)
        assert not rep.V1_ok
        assert rep.inf_one_plus_V == 0.0

    def test_k1_fails_for_tanh(self):
        spec = make_field_spec(2, V=0.0, K="tanh(x1)")
        rep = check_hypotheses(spec, 3.0)
        assert not rep.K1_ok

    def test_bad_box(self):
        spec = make_field_spec(2)
        with pytest.raises(DomainError):
            check_hypotheses(spec, -1.0)


class TestJsonBlocks:
    def test_families_and_roundtrip(self):
        block = {
            "V": {"family": "gaussian",
                  "params": {"amplitude": 0.5, "center": [0.1, -0.2],
                             "width": 1.2}},
            "K": {"expr": "1 + 0.1*x1"},
            "A": {"family": "linear_gauge", "params": {"b": 0.8}},
        }
        spec = spec_from_json(block, 2)
        s = eval_field(spec, np.array([0.1, -0.2]))
        assert abs(s.V - 0.5) < 1e-14
        out = spec_to_json(spec)
        spec2 = spec_from_json(out, 2)
        x = np.array([0.4, 0.9])
        s1, s2 = eval_field(spec, x), eval_field(spec2, x)
        assert abs(s1.V - s2.V) < 1e-14
        assert np.allclose(s1.A, s2.A)

    def test_ring_center_not_critical(self):
        # the ring family has a conical tip at its center: the gradient
        # does not vanish there, so the critical set is exactly the ring
        ring = ring_bump(2, 1.0, (0, 0), 1.0, 0.5)
        g = np.array(ring.grad([1e-6, 0.0]))
        assert abs(g[0]) > 0.1  # 8 e^{-4} at the tip, not a critical point

    def test_constant_components(self):
        spec = spec_from_json({"A": {"components": [0.3, -0.2]}}, 2)
        s = eval_field(spec, np.ones(2))
        assert np.allclose(s.A, [0.3, -0.2])
        assert s.div_A == 0.0
