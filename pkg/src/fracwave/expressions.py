"""Small expression vocabulary for coefficient and data fields.

Supported grammar: numeric literals, the variables x (and y in 2D), the
constant pi, the operators + - * / **, unary minus, and the calls sin(...)
and cos(...).  Expressions compile to vectorized numpy callables; anything
outside the grammar is rejected with a descriptive error.
"""

from __future__ import annotations

import ast

import numpy as np

__all__ = ["compile_expression", "ExpressionError"]


class ExpressionError(ValueError):
    """Expression uses something outside the documented grammar."""


_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}
_CALLS = {"sin": np.sin, "cos": np.cos}
_CONSTS = {"pi": np.pi}


def _evaluate(node: ast.AST, env: dict, src: str):
    if isinstance(node, ast.Expression):
        return _evaluate(node.body, env, src)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)):
            return float(node.value)
        raise ExpressionError(f"non-numeric literal {node.value!r} in {src!r}")
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        if node.id in _CONSTS:
            return _CONSTS[node.id]
        raise ExpressionError(f"unknown name {node.id!r} in {src!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](
            _evaluate(node.left, env, src), _evaluate(node.right, env, src)
        )
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _evaluate(node.operand, env, src)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.Call):
        if (
            isinstance(node.func, ast.Name)
            and node.func.id in _CALLS
            and len(node.args) == 1
            and not node.keywords
        ):
            return _CALLS[node.func.id](_evaluate(node.args[0], env, src))
        raise ExpressionError(
            f"only sin(...) and cos(...) calls are allowed, got {ast.dump(node)} in {src!r}"
        )
    raise ExpressionError(f"unsupported syntax {type(node).__name__} in {src!r}")


def compile_expression(src: str, variables: tuple[str, ...] = ("x",)):
    """Compile an expression string into a vectorized callable of ``variables``."""
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {src!r}: {exc.msg}") from exc

    def fn(*coords):
        if len(coords) != len(variables):
            raise TypeError(f"expression expects {len(variables)} arguments")
        env = dict(zip(variables, coords))
        val = _evaluate(tree, env, src)
        return np.broadcast_to(np.asarray(val, dtype=float), np.shape(coords[0])).copy()

    # fail fast on grammar violations instead of at sampling time
    probe = [np.zeros(2) for _ in variables]
    fn(*probe)
    return fn
