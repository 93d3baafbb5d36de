"""Jet evaluation of expression trees."""
from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError
from .jet import Jet, JetSpace, jet_space
from .nodes import BinOp, Call, Neg, Num, Var, to_source


def _is_const(c):
    return not np.any(c[1:])


def _sin_derivs(a0, m):
    base = [math.sin(a0), math.cos(a0), -math.sin(a0), -math.cos(a0)]
    return [base[k % 4] for k in range(m + 1)]


def _cos_derivs(a0, m):
    base = [math.cos(a0), -math.sin(a0), -math.cos(a0), math.sin(a0)]
    return [base[k % 4] for k in range(m + 1)]


def _power_derivs(a0, p, m):
    out, coef = [], 1.0
    for k in range(m + 1):
        out.append(coef * a0 ** (p - k))
        coef *= p - k
    return out


def _int_power(S, c, k):
    result = S.constant(1.0)
    base = c
    while k:
        if k & 1:
            result = S.mul(result, base)
        k >>= 1
        if k:
            base = S.mul(base, base)
    return result


class _Evaluator:
    def __init__(self, S: JetSpace, env: dict):
        self.S = S
        self.env = env

    def fail(self, msg, node):
        raise DomainError(msg, to_source(node))

    def ev(self, e):
        S = self.S
        if isinstance(e, Num):
            return S.constant(e.value)
        if isinstance(e, Var):
            try:
                return self.env[e.name]
            except KeyError:
                raise DomainError("unbound variable", e.name) from None
        if isinstance(e, Neg):
            return -self.ev(e.arg)
        if isinstance(e, BinOp):
            a = self.ev(e.left)
            b = self.ev(e.right)
            if e.op == "+":
                return a + b
            if e.op == "-":
                return a - b
            if e.op == "*":
                return S.mul(a, b)
            if e.op == "/":
                if b[0] == 0.0:
                    self.fail("division by zero", e)
                return S.mul(a, S.reciprocal(b))
            return self.power(a, b, e)
        return self.call(e)

    def power(self, a, b, e):
        S = self.S
        a0 = a[0]
        if _is_const(b):
            p = b[0]
            if p == int(p) and abs(p) <= 1024:
                k = int(p)
                if k >= 0:
                    return _int_power(S, a, k)
                if a0 == 0.0:
                    self.fail("division by zero", e)
                return _int_power(S, S.reciprocal(a), -k)
            if a0 > 0.0:
                return S.compose(a, _power_derivs(a0, p, S.order))
            if a0 == 0.0 and p > 0 and _is_const(a):
                return S.constant(0.0)
            self.fail("power of nonpositive base", e)
        if a0 <= 0.0:
            self.fail("variable power of nonpositive base", e)
        loga = S.compose(a, [math.log(a0)] + [(-1.0) ** (k - 1) * math.factorial(k - 1) / a0**k for k in range(1, S.order + 1)])
        prod = S.mul(b, loga)
        return S.compose(prod, [math.exp(prod[0])] * (S.order + 1))

    def call(self, e):
        S = self.S
        m = S.order
        if e.func == "atan2":
            y = self.ev(e.args[0])
            x = self.ev(e.args[1])
            y0, x0 = y[0], x[0]
            if x0 == 0.0 and y0 == 0.0:
                self.fail("atan2 at the origin", e)
            num = x0 * y - y0 * x
            den = x0 * x + y0 * y
            w = S.mul(num, S.reciprocal(den))
            coeffs = [0.0] + [((-1.0) ** ((k - 1) // 2) * math.factorial(k - 1) if k % 2 else 0.0) for k in range(1, m + 1)]
            out = S.compose(w, coeffs)
            out[0] = math.atan2(y0, x0)
            return out
        a = self.ev(e.args[0])
        a0 = a[0]
        f = e.func
        if f == "sin":
            return S.compose(a, _sin_derivs(a0, m))
        if f == "cos":
            return S.compose(a, _cos_derivs(a0, m))
        if f == "tan":
            c = S.compose(a, _cos_derivs(a0, m))
            if c[0] == 0.0:
                self.fail("tan pole", e)
            return S.mul(S.compose(a, _sin_derivs(a0, m)), S.reciprocal(c))
        if f == "exp":
            try:
                v = math.exp(a0)
            except OverflowError:
                self.fail("exp overflow", e)
            return S.compose(a, [v] * (m + 1))
        if f == "log":
            if a0 <= 0.0:
                self.fail("log of nonpositive", e)
            return S.compose(a, [math.log(a0)] + [(-1.0) ** (k - 1) * math.factorial(k - 1) / a0**k for k in range(1, m + 1)])
        if f == "sqrt":
            if a0 > 0.0:
                return S.compose(a, _power_derivs(a0, 0.5, m))
            if a0 == 0.0 and _is_const(a):
                return S.constant(0.0)
            self.fail("sqrt of nonpositive" if a0 < 0 else "sqrt not differentiable at 0", e)
        if f == "abs":
            if a0 != 0.0:
                return a if a0 > 0 else -a
            if _is_const(a):
                return S.constant(0.0)
            self.fail("abs not differentiable at 0", e)
        raise DomainError("unknown function", f)


def eval_coef(e, S: JetSpace, env: dict):
    """Evaluate ``e`` to a coefficient array; ``env`` maps names to coefficient arrays."""
    return _Evaluator(S, env).ev(e)


def eval_jet(e, point, order: int = 1, names=None) -> Jet:
    """Value and partials of ``e`` at ``point`` up to total ``order``.

    ``names`` orders the variables; by default ``x1..xn`` with ``n = len(point)``.
    """
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if names is None:
        names = [f"x{i + 1}" for i in range(len(point))]
    S = jet_space(len(point), order)
    X = S.variable(point)
    env = {nm: X[i] for i, nm in enumerate(names)}
    return Jet(S, eval_coef(e, S, env))


def eval_float(e, env: dict) -> float:
    """Plain value of ``e`` with variables bound to floats."""
    S = jet_space(1, 0)
    return float(eval_coef(e, S, {k: np.array([float(v)]) for k, v in env.items()})[0])
