"""Expression language tests: grammar, precedence, whitelisting, errors.

Every expected value below is computable by hand from the printed formula.
"""

import math

import numpy as np
import pytest

from boundedgp.expressions import BoundExpression, ExpressionError


def ev(text, point, dim=None):
    d = len(point) if dim is None else dim
    return BoundExpression(text, d)(np.asarray(point, dtype=float))


class TestArithmetic:
    def test_literal(self):
        assert ev("3.5", [0.0]) == 3.5

    def test_integer_literal(self):
        assert ev("2", [0.0]) == 2.0

    def test_scientific_literal(self):
        assert ev("1e-3", [0.0]) == 1e-3

    def test_pi(self):
        assert ev("pi", [0.0]) == math.pi

    def test_coordinates(self):
        assert ev("x1", [4.0, 7.0]) == 4.0
        assert ev("x2", [4.0, 7.0]) == 7.0

    def test_sum_product(self):
        assert ev("2*x1 + 3*x2", [1.0, 2.0]) == 8.0

    def test_division(self):
        assert ev("x1/4", [10.0]) == 2.5

    def test_unary_minus(self):
        assert ev("-x1", [3.0]) == -3.0

    def test_unary_plus(self):
        assert ev("+x1", [3.0]) == 3.0

    def test_parentheses(self):
        assert ev("(x1 + 1)*(x1 - 1)", [3.0]) == 8.0

    def test_power_caret(self):
        assert ev("x1^2", [3.0]) == 9.0

    def test_power_double_star(self):
        assert ev("x1**2", [3.0]) == 9.0

    def test_caret_binds_tighter_than_plus(self):
        # Regression: with Python's native precedence for '^' this would
        # parse as x1^(2+1) = 8.
        assert ev("x1^2 + 1", [2.0]) == 5.0

    def test_caret_right_associative(self):
        assert ev("2^x1^2", [2.0]) == 16.0

    def test_unary_minus_of_power(self):
        assert ev("-x1^2", [3.0]) == -9.0

    def test_min_max(self):
        assert ev("min(x1, x2, 3)", [5.0, 2.0]) == 2.0
        assert ev("max(x1, x2, 3)", [5.0, 2.0]) == 5.0

    def test_abs(self):
        assert ev("abs(-x1)", [3.0]) == 3.0

    def test_sin(self):
        assert ev("sin(pi/2)", [0.0]) == pytest.approx(1.0, abs=1e-15)

    def test_envelope_shape(self):
        # max(min(-1/x1, 1/x1), -1) + max(min(-1/(x2+2), 1/(x2+2)), -1) + 2
        # at x=(4, 2): max(-1/4, -1) + max(-1/4, -1) + 2 = 1.5
        text = "max(min(-1/x1, 1/x1), -1) + max(min(-1/(x2+2), 1/(x2+2)), -1) + 2"
        assert ev(text, [4.0, 2.0]) == 1.5

    def test_float_point_values(self):
        assert ev("x1*x2", [0.5, 0.25]) == 0.125


class TestValidation:
    def test_unknown_name(self):
        with pytest.raises(ExpressionError, match="unknown name"):
            BoundExpression("foo", 1)

    def test_variable_out_of_range(self):
        with pytest.raises(ExpressionError, match="out of range"):
            BoundExpression("x3", 2)

    def test_x0_rejected(self):
        with pytest.raises(ExpressionError, match="out of range"):
            BoundExpression("x0", 2)

    def test_disallowed_function(self):
        with pytest.raises(ExpressionError, match="min, max, abs, sin"):
            BoundExpression("sqrt(x1)", 1)

    def test_call_of_non_name(self):
        with pytest.raises(ExpressionError):
            BoundExpression("(x1)(2)", 1)

    def test_min_needs_two_args(self):
        with pytest.raises(ExpressionError, match="arguments"):
            BoundExpression("min(x1)", 1)

    def test_abs_needs_one_arg(self):
        with pytest.raises(ExpressionError, match="arguments"):
            BoundExpression("abs(x1, 2)", 1)

    def test_keyword_arguments_rejected(self):
        with pytest.raises(ExpressionError):
            BoundExpression("min(x1, default=2)", 1)

    def test_comparison_rejected(self):
        with pytest.raises(ExpressionError):
            BoundExpression("x1 < 2", 1)

    def test_list_rejected(self):
        with pytest.raises(ExpressionError):
            BoundExpression("[1, 2]", 1)

    def test_attribute_access_rejected(self):
        with pytest.raises(ExpressionError):
            BoundExpression("x1.real", 1)

    def test_subscript_rejected(self):
        with pytest.raises(ExpressionError):
            BoundExpression("x1[0]", 1)

    def test_dunder_rejected(self):
        with pytest.raises(ExpressionError):
            BoundExpression("__import__('os')", 1)

    def test_string_literal_rejected(self):
        with pytest.raises(ExpressionError, match="not a number"):
            BoundExpression("'a'", 1)

    def test_boolean_literal_rejected(self):
        with pytest.raises(ExpressionError, match="not a number"):
            BoundExpression("True", 1)

    def test_modulo_rejected(self):
        with pytest.raises(ExpressionError, match="not allowed"):
            BoundExpression("x1 % 2", 1)

    def test_syntax_error(self):
        with pytest.raises(ExpressionError):
            BoundExpression("x1 +", 1)

    def test_empty_rejected(self):
        with pytest.raises(ExpressionError):
            BoundExpression("  ", 1)

    def test_nonpositive_dim_rejected(self):
        with pytest.raises(ExpressionError):
            BoundExpression("1", 0)

    def test_is_value_error(self):
        assert issubclass(ExpressionError, ValueError)


class TestEvaluation:
    def test_division_by_zero(self):
        expr = BoundExpression("1/x1", 1)
        with pytest.raises(ExpressionError, match="divides by zero"):
            expr(np.array([0.0]))

    def test_nan_result(self):
        # 1e400 overflows to inf at parse time, and inf - inf is NaN.
        expr = BoundExpression("x1*0 + 1e400 - 1e400", 1)
        with pytest.raises(ExpressionError, match="NaN"):
            expr(np.array([0.0]))

    def test_dimension_mismatch_at_call(self):
        expr = BoundExpression("x1", 2)
        with pytest.raises(ExpressionError, match="dimension"):
            expr(np.array([1.0]))

    def test_accepts_lists(self):
        assert BoundExpression("x1 + x2", 2)([1.0, 2.0]) == 3.0

    def test_text_round_trip(self):
        text = "min(max(-1/x1, 1/x1), 1) + 2"
        expr = BoundExpression(text, 1)
        assert expr.text == text
        assert "BoundExpression" in repr(expr)
