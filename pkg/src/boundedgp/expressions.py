"""Tiny arithmetic expression language for user-declared bound functions.

Grammar: ``+ - * / ^`` (``^`` is exponentiation; Python's ``**`` is also
accepted), unary minus, calls to ``min``, ``max``, ``abs``, ``sin``, numeric
literals, the constant ``pi``, and input coordinates ``x1`` ... ``xd``.
That is enough to express every bound that is a closed-form combination of
envelopes and monomials, e.g. ``"x1^2"`` or
``"min(max(-1/x1, x1), 1) + 2"``.

Expressions are parsed once with the :mod:`ast` module against a strict
whitelist and compiled to a closure tree; nothing is ever ``eval``-ed, so
model files and request payloads can carry these strings safely.
"""

from __future__ import annotations

import ast
import math
from typing import Callable

import numpy as np

__all__ = ["ExpressionError", "BoundExpression"]

_FUNCTIONS: dict[str, Callable[..., float]] = {
    "min": min,
    "max": max,
    "abs": abs,
    "sin": math.sin,
}

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


class ExpressionError(ValueError):
    """Raised when a bound expression fails to parse or evaluate."""


_Compiled = Callable[[np.ndarray], float]


def _fail(text: str, node: ast.AST, reason: str) -> "ExpressionError":
    col = getattr(node, "col_offset", None)
    where = f" (column {col})" if col is not None else ""
    return ExpressionError(f"bad bound expression {text!r}{where}: {reason}")


def _compile_node(node: ast.AST, text: str, dim: int) -> _Compiled:
    if isinstance(node, ast.Expression):
        return _compile_node(node.body, text, dim)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise _fail(text, node, f"literal {node.value!r} is not a number")
        value = float(node.value)
        return lambda x: value
    if isinstance(node, ast.Name):
        if node.id == "pi":
            return lambda x: math.pi
        if node.id.startswith("x") and node.id[1:].isdigit():
            index = int(node.id[1:]) - 1
            if not 0 <= index < dim:
                raise _fail(
                    text, node, f"variable {node.id!r} out of range for {dim} input(s)"
                )
            return lambda x: float(x[index])
        raise _fail(text, node, f"unknown name {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _compile_node(node.operand, text, dim)
        if isinstance(node.op, ast.UAdd):
            return inner
        return lambda x: -inner(x)
    if isinstance(node, ast.BinOp):
        op = _BINOPS.get(type(node.op))
        if op is None:
            raise _fail(text, node, f"operator {type(node.op).__name__} not allowed")
        left = _compile_node(node.left, text, dim)
        right = _compile_node(node.right, text, dim)
        return lambda x: op(left(x), right(x))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise _fail(text, node, "only min, max, abs, sin may be called")
        if node.keywords:
            raise _fail(text, node, "keyword arguments are not allowed")
        fn = _FUNCTIONS[node.func.id]
        arity_ok = len(node.args) >= 2 if node.func.id in ("min", "max") else len(node.args) == 1
        if not arity_ok:
            raise _fail(text, node, f"wrong number of arguments for {node.func.id}")
        args = [_compile_node(a, text, dim) for a in node.args]
        return lambda x: fn(*(a(x) for a in args))
    raise _fail(text, node, f"syntax element {type(node).__name__} not allowed")


class BoundExpression:
    """A parsed bound expression; callable on one input point.

    Keeps the source text so model files and API payloads can round-trip
    the user's declaration verbatim.
    """

    __slots__ = ("text", "dim", "_fn")

    def __init__(self, text: str, dim: int):
        if not isinstance(text, str) or not text.strip():
            raise ExpressionError("bound expression must be a non-empty string")
        if dim < 1:
            raise ExpressionError(f"dim must be positive, got {dim}")
        # '^' is exponentiation here.  Rewriting it to '**' before parsing
        # gives it the right precedence; Python's own '^' binds looser than
        # '+', which would silently turn "x1^2 + 1" into x1^3.
        try:
            tree = ast.parse(text.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"bad bound expression {text!r}: {exc.msg}") from exc
        self.text = text
        self.dim = dim
        self._fn = _compile_node(tree, text, dim)

    def __call__(self, x: np.ndarray) -> float:
        point = np.asarray(x, dtype=float).reshape(-1)
        if point.shape[0] != self.dim:
            raise ExpressionError(
                f"expression over {self.dim} input(s) evaluated at a point of "
                f"dimension {point.shape[0]}"
            )
        try:
            value = self._fn(point)
        except ZeroDivisionError as exc:
            raise ExpressionError(
                f"bound expression {self.text!r} divides by zero at x={point!r}"
            ) from exc
        if math.isnan(value):
            raise ExpressionError(
                f"bound expression {self.text!r} evaluated to NaN at x={point!r}"
            )
        return float(value)

    def __repr__(self) -> str:
        return f"BoundExpression({self.text!r}, dim={self.dim})"
