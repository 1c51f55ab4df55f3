"""Tiny arithmetic expression grammar for config entries.

Supported: numbers, + - * / ^, unary minus, exp, sin, cos, and the declared
variables (typically `t`, `k`, `n`, or `f1..fN`).  `^` is power.  Everything
else is rejected with the offending symbol named so config errors stay
actionable.
"""

from __future__ import annotations

import ast
from typing import Callable, Sequence

import numpy as np

from .errors import ExpressionError

_FUNCS = {"exp": np.exp, "sin": np.sin, "cos": np.cos}
_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARY = (ast.USub, ast.UAdd)


def _check(node: ast.AST, variables: set[str]) -> None:
    if isinstance(node, ast.Expression):
        _check(node.body, variables)
    elif isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        _check(node.left, variables)
        _check(node.right, variables)
    elif isinstance(node, ast.UnaryOp) and isinstance(node.op, _UNARY):
        _check(node.operand, variables)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError(f"function {ast.dump(node.func)} not allowed")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError("functions take exactly one positional argument")
        _check(node.args[0], variables)
    elif isinstance(node, ast.Name):
        if node.id not in variables and node.id not in _FUNCS:
            raise ExpressionError(f"unknown symbol {node.id!r}")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)):
            raise ExpressionError(f"constant {node.value!r} not allowed")
    else:
        raise ExpressionError(f"syntax element {type(node).__name__} not allowed")


def compile_expression(text: str, variables: Sequence[str]) -> Callable:
    """Compile an expression into a function of the declared variables (in order)."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionError("empty expression")
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from exc
    varset = set(variables)
    _check(tree, varset)
    code = compile(tree, "<expression>", "eval")

    def fn(*args):
        if len(args) != len(variables):
            raise ExpressionError(f"expression takes {len(variables)} arguments")
        scope = dict(zip(variables, args))
        scope.update(_FUNCS)
        return eval(code, {"__builtins__": {}}, scope)

    return fn


def matrix_entries(table, variables: Sequence[str]) -> Callable:
    """Compile a matrix whose entries are numbers or expressions.

    Returns a function of the declared variables producing the dense matrix;
    numeric entries are held constant.
    """
    rows = len(table)
    cols = len(table[0]) if rows else 0
    compiled = []
    for i, row in enumerate(table):
        if len(row) != cols:
            raise ExpressionError(f"matrix row {i} has {len(row)} entries, expected {cols}")
        crow = []
        for entry in row:
            if isinstance(entry, str):
                crow.append(compile_expression(entry, variables))
            else:
                crow.append(float(entry))
        compiled.append(crow)

    def fn(*args):
        out = np.empty((rows, cols))
        for i in range(rows):
            for j in range(cols):
                cell = compiled[i][j]
                out[i, j] = cell(*args) if callable(cell) else cell
        return out

    return fn
