import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from metric_expr import (
    BinOp, Neg, Num, compile_expression, eval_expression, parse_expression, parse_metric, pretty,
    variable_names,
)
from utils.exceptions import (
    ArityError, EvaluationError, ExpressionError, HomogeneityError, ParseError, UnknownIdentifierError,
)

VARS = variable_names(2)


def value(source: str) -> float:
    return compile_expression(source, 2).evaluate([0.0, 0.0], [0.0, 0.0])


class TestGrammar:
    def test_power_binds_tighter_than_unary_minus(self):
        assert value("-2^2") == -4.0
        assert value("2^-1") == 0.5
        assert value("2^3^2") == 512.0
        assert value("(-2)^2") == 4.0

    def test_precedence(self):
        assert value("1 + 2 * 3") == 7.0
        assert value("8 / 4 / 2") == 1.0
        assert value("1 - 2 - 3") == -4.0
        assert value("pow(2, 10)") == 1024.0

    def test_ast_shape(self):
        ast = parse_expression("-x1^2", VARS)
        assert isinstance(ast, Neg)
        assert isinstance(ast.operand, BinOp) and ast.operand.op == "^"
        assert parse_expression("2.5", VARS) == Num(2.5)

    def test_pretty_reparses_to_same_ast(self):
        source = "sqrt(y1^2 + y2^2) + 0.5*y1 - exp(-x1^2)*tanh(x2)/3"
        ast = parse_expression(source, VARS)
        assert parse_expression(pretty(ast), VARS) == ast

    def test_bytes_source(self):
        assert parse_expression(b"x1 + y2", VARS) == parse_expression("x1 + y2", VARS)


class TestErrors:
    def test_parse_error_position(self):
        with pytest.raises(ParseError) as info:
            parse_expression("sqrt(y1^2 + )", VARS)
        assert info.value.position == (1, 13)

    def test_parse_error_position_multiline(self):
        with pytest.raises(ParseError) as info:
            parse_expression("sqrt(y1^2\n + )", VARS)
        assert info.value.position == (2, 4)

    @pytest.mark.parametrize("source, error", [
        ("z1 + y1", UnknownIdentifierError),
        ("foo(y1)", UnknownIdentifierError),
        ("pow(y1)", ArityError),
        ("sqrt(y1, y2)", ArityError),
        ("sqrt + 1", ParseError),
        ("(y1 + y2", ParseError),
        ("y1 y2", ParseError),
        ("y1 # y2", ParseError),
        ("   ", ParseError),
        ("1e999 * y1", ParseError),
    ])
    def test_rejects(self, source, error):
        with pytest.raises(error):
            parse_expression(source, VARS)

    def test_invalid_utf8(self):
        with pytest.raises(ParseError):
            parse_expression(b"y1 + \xff", VARS)

    def test_evaluation_domain_error(self):
        e = compile_expression("sqrt(y1^2 + y2^2) * log(x1)", 2)
        with pytest.raises(EvaluationError):
            e.evaluate([-1.0, 0.0], [1.0, 0.0])
        with pytest.raises(EvaluationError):
            compile_expression("y1 / x1", 2).evaluate([0.0, 0.0], [1.0, 0.0])

    def test_homogeneity_rejected(self):
        with pytest.raises(HomogeneityError):
            parse_metric("y1^2 + y2^2", 2)
        with pytest.raises(HomogeneityError):
            parse_metric("sqrt(y1^2 + y2^2) + 1", 2)

    def test_dimension_rejected(self):
        with pytest.raises(ExpressionError):
            parse_metric("sqrt(y1^2)", 1)

    def test_taylor_order(self):
        e = parse_metric("sqrt(y1^2 + y2^2)", 2)
        with pytest.raises(ExpressionError):
            eval_expression(e, [0, 0], [1, 0], taylor_order=3)


class TestEvaluation:
    def test_randers_jet(self):
        """F = |y| + 0.5 y1：x 方向梯度为零，y 方向梯度为 y/|y| + (0.5, 0)。"""
        e = parse_metric("sqrt(y1^2 + y2^2) + 0.5*y1", 2)
        assert eval_expression(e, [0.1, 0.2], [3.0, 4.0]) == pytest.approx(5.0 + 1.5)
        jet = eval_expression(e, [0.1, 0.2], [3.0, 4.0], taylor_order=2)
        np.testing.assert_allclose(jet.grad, [0.0, 0.0, 1.1, 0.8], atol=1e-14)
        u = np.array([0.6, 0.8])
        np.testing.assert_allclose(jet.hess[2:, 2:], (np.eye(2) - np.outer(u, u)) / 5.0, atol=1e-14)
        np.testing.assert_allclose(jet.hess[:2, :], 0.0, atol=1e-14)

    def test_constant_expression_jet(self):
        e = compile_expression("3", 2)
        jet = eval_expression(e, [0.0, 0.0], [1.0, 0.0], taylor_order=1)
        assert jet.value == 3.0
        assert not np.any(jet.grad)


@given(st.text(alphabet="xy12+-*/^(),. esqrtpow", max_size=40))
@settings(max_examples=300, deadline=None)
def test_fuzz_parser_only_raises_expression_errors(source):
    """任意输入要么解析成功，要么抛出 ExpressionError 的子类。"""
    try:
        ast = parse_expression(source, VARS)
    except ExpressionError:
        return
    assert parse_expression(pretty(ast), VARS) == ast
