"""Scalar field expressions over (t, x, y).

The grammar is deliberately small: numbers, ``pi``, the variables ``t``,
``x``, ``y``, the binary operators ``+ - * /``, powers with a constant
exponent (``**`` or ``^``), unary signs and the functions ``sin``, ``cos``
and ``arctan``. Expressions are parsed once and evaluated in forward mode
so every evaluation also yields exact partial derivatives in t, x and y.
"""

from __future__ import annotations

import ast
import math

import numpy as np

VARIABLES = ("t", "x", "y")
FUNCTIONS = ("sin", "cos", "arctan")
CONSTANTS = {"pi": math.pi}


class ExpressionError(ValueError):
    """Raised for text outside the fixed expression grammar."""


def _check(node, source):
    if isinstance(node, ast.Expression):
        return _check(node.body, source)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
            raise ExpressionError(f"unsupported literal {node.value!r} in {source!r}")
        return
    if isinstance(node, ast.Name):
        if node.id not in VARIABLES and node.id not in CONSTANTS:
            raise ExpressionError(f"unknown name {node.id!r} in {source!r}")
        return
    if isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, (ast.UAdd, ast.USub)):
            raise ExpressionError(f"unsupported unary operator in {source!r}")
        return _check(node.operand, source)
    if isinstance(node, ast.BinOp):
        if not isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)):
            raise ExpressionError(f"unsupported operator in {source!r}")
        if isinstance(node.op, ast.Pow) and _free_names(node.right):
            raise ExpressionError(f"exponent must be constant in {source!r}")
        _check(node.left, source)
        return _check(node.right, source)
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in FUNCTIONS:
            raise ExpressionError(f"unknown function in {source!r}")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"functions take exactly one argument in {source!r}")
        return _check(node.args[0], source)
    raise ExpressionError(f"unsupported syntax {type(node).__name__} in {source!r}")


def _free_names(node) -> set:
    return {n.id for n in ast.walk(node) if isinstance(n, ast.Name) and n.id in VARIABLES}


class Expr:
    """A parsed scalar field f(t, x, y).

    >>> f = Expr("1 + t + x^2 + y^2")
    >>> f.value(0.0, 1.0, 2.0)
    6.0
    """

    def __init__(self, source):
        if isinstance(source, (int, float)):
            source = repr(float(source))
        if not isinstance(source, str):
            raise ExpressionError(f"expression must be a string, got {type(source).__name__}")
        self.source = source.strip()
        text = self.source.replace("^", "**")
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {self.source!r}: {exc.msg}") from None
        _check(tree, self.source)
        self._tree = tree.body
        self.variables = frozenset(_free_names(self._tree))
        self._value_fn = None
        self._grad_fn = None

    def __repr__(self):
        return f"Expr({self.source!r})"

    def __eq__(self, other):
        return isinstance(other, Expr) and other.source == self.source

    def __hash__(self):
        return hash(self.source)

    @property
    def is_constant(self) -> bool:
        return not self.variables

    @property
    def depends_on_time(self) -> bool:
        return "t" in self.variables

    @property
    def depends_on_position(self) -> bool:
        return bool(self.variables & {"x", "y"})

    def value(self, t, x, y):
        if self._value_fn is None:
            self._compile()
        out = self._value_fn(t, x, y)
        return out if np.ndim(out) else float(out)

    def value_and_grad(self, t, x, y):
        """Return ``(f, f_t, f_x, f_y)``; constants come back as plain floats."""
        if self._grad_fn is None:
            self._compile()
        return self._grad_fn(t, x, y)

    def _compile(self):
        gen = _CodeGen()
        val, d = gen.visit(self._tree)
        body = "\n".join("    " + ln for ln in gen.lines)
        src_v = f"def _value(t, x, y):\n{body}\n    return {val}\n"
        grads = ", ".join(g if g is not None else "0.0" for g in d)
        src_g = f"def _grad(t, x, y):\n{body}\n    return ({val}, {grads})\n"
        env = {"_sin": np.sin, "_cos": np.cos, "_arctan": np.arctan, "_pow": np.power}
        exec(compile(src_v, f"<expr {self.source}>", "exec"), env)
        exec(compile(src_g, f"<expr {self.source}>", "exec"), env)
        self._value_fn = env["_value"]
        self._grad_fn = env["_grad"]


class _CodeGen:
    """Emit straight-line forward-mode code; None marks a structurally zero derivative."""

    def __init__(self):
        self.lines = []
        self.n = 0

    def tmp(self, code):
        name = f"_v{self.n}"
        self.n += 1
        self.lines.append(f"{name} = {code}")
        return name

    def visit(self, node):
        if isinstance(node, ast.Constant):
            return repr(float(node.value)), (None, None, None)
        if isinstance(node, ast.Name):
            if node.id in CONSTANTS:
                return repr(CONSTANTS[node.id]), (None, None, None)
            return node.id, tuple("1.0" if v == node.id else None for v in VARIABLES)
        if isinstance(node, ast.UnaryOp):
            u, du = self.visit(node.operand)
            if isinstance(node.op, ast.UAdd):
                return u, du
            return self.tmp(f"-{u}"), tuple(None if d is None else self.tmp(f"-{d}") for d in du)
        if isinstance(node, ast.BinOp):
            a, da = self.visit(node.left)
            b, db = self.visit(node.right)
            op = node.op
            if isinstance(op, (ast.Add, ast.Sub)):
                sym = "+" if isinstance(op, ast.Add) else "-"
                val = self.tmp(f"{a} {sym} {b}")
                out = []
                for p, q in zip(da, db):
                    if p is None and q is None:
                        out.append(None)
                    elif q is None:
                        out.append(p)
                    elif p is None:
                        out.append(q if sym == "+" else self.tmp(f"-{q}"))
                    else:
                        out.append(self.tmp(f"{p} {sym} {q}"))
                return val, tuple(out)
            if isinstance(op, ast.Mult):
                val = self.tmp(f"{a} * {b}")
                out = []
                for p, q in zip(da, db):
                    terms = ([f"{p} * {b}"] if p is not None else []) + ([f"{a} * {q}"] if q is not None else [])
                    out.append(self.tmp(" + ".join(terms)) if terms else None)
                return val, tuple(out)
            if isinstance(op, ast.Div):
                val = self.tmp(f"{a} / {b}")
                out = []
                for p, q in zip(da, db):
                    if p is None and q is None:
                        out.append(None)
                    elif q is None:
                        out.append(self.tmp(f"{p} / {b}"))
                    elif p is None:
                        out.append(self.tmp(f"-{val} * {q} / {b}"))
                    else:
                        out.append(self.tmp(f"({p} - {val} * {q}) / {b}"))
                return val, tuple(out)
            val = self.tmp(f"_pow({a}, {b})")
            if all(p is None for p in da):
                return val, (None, None, None)
            k = self.tmp(f"{b} * _pow({a}, {b} - 1.0)")
            return val, tuple(None if p is None else self.tmp(f"{k} * {p}") for p in da)
        fn = node.func.id
        u, du = self.visit(node.args[0])
        val = self.tmp(f"_{fn}({u})")
        if all(d is None for d in du):
            return val, (None, None, None)
        if fn == "sin":
            k = self.tmp(f"_cos({u})")
        elif fn == "cos":
            k = self.tmp(f"-_sin({u})")
        else:
            k = self.tmp(f"1.0 / (1.0 + {u} * {u})")
        return val, tuple(None if d is None else self.tmp(f"{k} * {d}") for d in du)
