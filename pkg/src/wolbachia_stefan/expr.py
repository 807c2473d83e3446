"""Tiny arithmetic grammar for closed-form fields such as ``1 + 0.5*sin(x)``.

Only numeric constants, the variable ``x``, ``+ - * /``, unary minus,
``sin``, ``cos``, ``exp``, ``min`` and ``max`` are accepted. Expressions are
parsed once with :mod:`ast` and evaluated elementwise with numpy.
"""

import ast

import numpy as np

from .errors import ValidationError

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
}
_UNARY = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_BINARY = {"min": np.minimum, "max": np.maximum}


def _check(node, source):
    if isinstance(node, ast.Expression):
        return _check(node.body, source)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ValidationError("expression", f"non-numeric constant in {source!r}")
        return
    if isinstance(node, ast.Name):
        if node.id != "x":
            raise ValidationError("expression", f"unknown name {node.id!r} in {source!r}")
        return
    if isinstance(node, ast.BinOp):
        if type(node.op) not in _BINOPS:
            raise ValidationError("expression", f"operator not allowed in {source!r}")
        _check(node.left, source)
        _check(node.right, source)
        return
    if isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.USub, ast.UAdd)):
            raise ValidationError("expression", f"operator not allowed in {source!r}")
        _check(node.operand, source)
        return
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.keywords:
            raise ValidationError("expression", f"bad call in {source!r}")
        name = node.func.id
        if name in _UNARY:
            arity = 1
        elif name in _BINARY:
            arity = 2
        else:
            raise ValidationError("expression", f"unknown function {name!r} in {source!r}")
        if len(node.args) != arity:
            raise ValidationError("expression", f"{name} takes {arity} argument(s)")
        for arg in node.args:
            _check(arg, source)
        return
    raise ValidationError("expression", f"unsupported syntax in {source!r}")


def _eval(node, x):
    if isinstance(node, ast.Constant):
        return np.full_like(x, float(node.value))
    if isinstance(node, ast.Name):
        return x
    if isinstance(node, ast.BinOp):
        return _BINOPS[type(node.op)](_eval(node.left, x), _eval(node.right, x))
    if isinstance(node, ast.UnaryOp):
        val = _eval(node.operand, x)
        return -val if isinstance(node.op, ast.USub) else val
    name = node.func.id
    args = [_eval(a, x) for a in node.args]
    if name in _UNARY:
        return _UNARY[name](*args)
    return _BINARY[name](*args)


class Expression:
    """A parsed, validated expression in ``x``."""

    def __init__(self, source):
        if not isinstance(source, str) or not source.strip():
            raise ValidationError("expression", "must be a non-empty string")
        try:
            tree = ast.parse(source.strip(), mode="eval")
        except SyntaxError as exc:
            raise ValidationError("expression", f"cannot parse {source!r}: {exc.msg}") from None
        _check(tree, source)
        self.source = source.strip()
        self._body = tree.body

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            out = _eval(self._body, np.atleast_1d(x))
        return out.reshape(x.shape) if x.ndim else float(out[0])

    def __repr__(self):
        return f"Expression({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, Expression) and other.source == self.source

    def __hash__(self):
        return hash(self.source)
