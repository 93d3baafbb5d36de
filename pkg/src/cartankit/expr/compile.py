"""Compile expressions to plain Python callables for fast float evaluation."""
from __future__ import annotations

import math

from ..errors import DomainError
from .evaluate import eval_float
from .nodes import BinOp, Call, Neg, Num, Var


def _pow(a, b):
    if b == int(b):
        return a ** int(b) if abs(b) <= 1024 else a**b
    if a < 0:
        raise ValueError("negative base")
    return a**b


_NS = {
    "_sin": math.sin,
    "_cos": math.cos,
    "_tan": math.tan,
    "_exp": math.exp,
    "_log": math.log,
    "_sqrt": math.sqrt,
    "_abs": abs,
    "_atan2": math.atan2,
    "_pow": _pow,
}


def _py(e, names):
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return f"_v[{names[e.name]}]"
    if isinstance(e, Neg):
        return f"(-{_py(e.arg, names)})"
    if isinstance(e, BinOp):
        a, b = _py(e.left, names), _py(e.right, names)
        if e.op == "^":
            if isinstance(e.right, Num) and e.right.value in (2.0, 3.0):
                return f"({a}**{int(e.right.value)})"
            return f"_pow({a}, {b})"
        return f"({a} {e.op} {b})"
    if e.func == "atan2":
        return f"_atan2({_py(e.args[0], names)}, {_py(e.args[1], names)})"
    return f"_{e.func}({_py(e.args[0], names)})"


class Compiled:
    """Evaluate a flat list of expressions at a point, returning a list of floats."""

    def __init__(self, exprs, names):
        self.exprs = list(exprs)
        self.names = list(names)
        idx = {n: i for i, n in enumerate(self.names)}
        body = ", ".join(_py(e, idx) for e in self.exprs)
        src = f"def _f(_v):\n    return [{body}]\n"
        ns = dict(_NS)
        exec(compile(src, "<expr>", "exec"), ns)
        self._f = ns["_f"]

    def __call__(self, values):
        try:
            out = self._f(values)
        except (ValueError, ZeroDivisionError, OverflowError):
            self._diagnose(values)
            raise
        return out

    def _diagnose(self, values):
        env = dict(zip(self.names, (float(v) for v in values)))
        for e in self.exprs:
            eval_float(e, env)
        raise DomainError("evaluation failed")
