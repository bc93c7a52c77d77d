"""Small closed expression grammar for coefficients and forcings.

Supported: ``+ - * /``, unary minus, ``sin`` ``cos`` ``exp``, numeric
literals, the constant ``pi``, the spatial variables ``x`` ``y`` ``z`` and
time ``t``.  Expressions compile once into a numpy-broadcasting callable, so
config files stay declarative and evaluation stays safe.
"""

from __future__ import annotations

import ast

import numpy as np

__all__ = ["ExpressionError", "Expression", "compile_expression"]

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_CONSTANTS = {"pi": np.pi}
_VARIABLES = ("x", "y", "z", "t")

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
}


class ExpressionError(ValueError):
    """Raised for syntax or vocabulary outside the grammar."""


class Expression:
    """Compiled expression over (x, y, z, t); broadcasts over arrays."""

    def __init__(self, source: str):
        self.source = source
        try:
            tree = ast.parse(source, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"invalid expression {source!r}: {exc.msg}") from None
        self._names = sorted(self._collect_names(tree.body))
        self._code = compile(ast.Expression(body=tree.body), "<expression>", "eval")

    @staticmethod
    def _collect_names(node, names=None):
        if names is None:
            names = set()
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)):
                raise ExpressionError(f"non-numeric literal {node.value!r}")
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ExpressionError(f"operator {type(node.op).__name__} not in grammar")
            Expression._collect_names(node.left, names)
            Expression._collect_names(node.right, names)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ExpressionError(f"operator {type(node.op).__name__} not in grammar")
            Expression._collect_names(node.operand, names)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
                raise ExpressionError("only sin, cos and exp calls are allowed")
            if len(node.args) != 1 or node.keywords:
                raise ExpressionError(f"{node.func.id} takes exactly one argument")
            Expression._collect_names(node.args[0], names)
        elif isinstance(node, ast.Name):
            if node.id in _VARIABLES:
                names.add(node.id)
            elif node.id not in _CONSTANTS:
                raise ExpressionError(f"unknown name {node.id!r}")
        else:
            raise ExpressionError(f"syntax {type(node).__name__} not in grammar")
        return names

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(self._names)

    def __call__(self, **values):
        env = dict(_CONSTANTS)
        env.update(_FUNCTIONS)
        for name in self._names:
            if name not in values:
                raise ExpressionError(f"expression {self.source!r} needs variable {name!r}")
        env.update(values)
        return eval(self._code, {"__builtins__": {}}, env)

    def __repr__(self):
        return f"Expression({self.source!r})"


def compile_expression(source: str) -> Expression:
    return Expression(source)
