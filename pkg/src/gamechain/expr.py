"""Small closed-form expression grammar for inline coefficient functions.

Allowed: numeric constants, the state variables ``x`` (alias of ``x0``) and
``x0 .. x{d-1}``, ``pi``, the operators ``+ - * /`` and the functions
``sin cos tanh exp``.  ``exp`` clamps its argument to [-EXP_CLAMP, EXP_CLAMP].
Everything else is rejected at compile time.
"""

from __future__ import annotations

import ast
import math
from typing import Callable

import numpy as np

EXP_CLAMP = 50.0


class ExpressionError(ValueError):
    pass


def _exp(a):
    return np.exp(np.clip(a, -EXP_CLAMP, EXP_CLAMP))


_FUNCS = {"sin": np.sin, "cos": np.cos, "tanh": np.tanh, "exp": _exp}
_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
}


def _build(node: ast.AST, dim: int, src: str):
    if isinstance(node, ast.Expression):
        return _build(node.body, dim, src)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
            and not isinstance(node.value, bool):
        c = float(node.value)
        return lambda x: np.full(x.shape[:-1], c)
    if isinstance(node, ast.Name):
        name = node.id
        if name == "pi":
            return lambda x: np.full(x.shape[:-1], math.pi)
        if name == "x":
            name = "x0"
        if name.startswith("x") and name[1:].isdigit():
            i = int(name[1:])
            if i >= dim:
                raise ExpressionError(f"variable '{node.id}' out of range for dim={dim} in {src!r}")
            return lambda x, i=i: x[..., i]
        raise ExpressionError(f"unknown name '{node.id}' in {src!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        op = _BINOPS[type(node.op)]
        lhs, rhs = _build(node.left, dim, src), _build(node.right, dim, src)
        return lambda x: op(lhs(x), rhs(x))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _build(node.operand, dim, src)
        if isinstance(node.op, ast.USub):
            return lambda x: np.negative(inner(x))
        return inner
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) \
            and node.func.id in _FUNCS and len(node.args) == 1 and not node.keywords:
        fn = _FUNCS[node.func.id]
        arg = _build(node.args[0], dim, src)
        return lambda x: fn(arg(x))
    raise ExpressionError(f"unsupported syntax {ast.dump(node)[:40]!r} in {src!r}")


def compile_expr(src: str, dim: int) -> Callable[[np.ndarray], np.ndarray]:
    """Compile ``src`` into a function of states shaped (..., dim)."""
    if isinstance(src, (int, float)) and not isinstance(src, bool):
        src = repr(float(src))
    if not isinstance(src, str):
        raise ExpressionError(f"expression must be a string, got {type(src).__name__}")
    try:
        tree = ast.parse(src.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {src!r}: {exc.msg}") from None
    return _build(tree, dim, src)


def compile_matrix(rows, dim: int):
    """Compile a dim x dim nested list of expressions into sigma(x) -> (..., d, d)."""
    if len(rows) != dim or any(len(r) != dim for r in rows):
        raise ExpressionError(f"sigma must be a {dim}x{dim} list of expressions")
    fns = [[compile_expr(e, dim) for e in r] for r in rows]

    def sigma(x):
        x = np.asarray(x, dtype=float)
        return np.stack([np.stack([f(x) for f in r], axis=-1) for r in fns], axis=-2)

    return sigma


def compile_vector(items, dim: int):
    if len(items) != dim:
        raise ExpressionError(f"drift must have {dim} expressions")
    fns = [compile_expr(e, dim) for e in items]

    def drift(x):
        x = np.asarray(x, dtype=float)
        return np.stack([f(x) for f in fns], axis=-1)

    return drift
