"""Constructors with light constant folding, used when the library assembles
expressions itself (Maurer-Cartan forms, connection forms, disguises)."""
from __future__ import annotations

from .nodes import BinOp, Call, Neg, Num, Var

ZERO = Num(0.0)
ONE = Num(1.0)


def num(c: float):
    c = float(c)
    if c == 0.0:
        return ZERO
    return Neg(Num(-c)) if c < 0 else Num(c)


def const_value(e):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Neg) and isinstance(e.arg, Num):
        return -e.arg.value
    return None


def is_zero(e):
    return const_value(e) == 0.0


def neg(a):
    c = const_value(a)
    if c is not None:
        return num(-c)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a, b):
    ca, cb = const_value(a), const_value(b)
    if ca is not None and cb is not None:
        return num(ca + cb)
    if ca == 0.0:
        return b
    if cb == 0.0:
        return a
    if isinstance(b, Neg):
        return BinOp("-", a, b.arg)
    return BinOp("+", a, b)


def sub(a, b):
    return add(a, neg(b))


def mul(a, b):
    ca, cb = const_value(a), const_value(b)
    if ca is not None and cb is not None:
        return num(ca * cb)
    if ca == 0.0 or cb == 0.0:
        return ZERO
    if ca == 1.0:
        return b
    if cb == 1.0:
        return a
    if ca == -1.0:
        return neg(b)
    if cb == -1.0:
        return neg(a)
    if isinstance(a, Neg) and isinstance(b, Neg):
        return BinOp("*", a.arg, b.arg)
    if isinstance(a, Neg):
        return neg(BinOp("*", a.arg, b))
    if isinstance(b, Neg):
        return neg(BinOp("*", a, b.arg))
    return BinOp("*", a, b)


def div(a, b):
    ca, cb = const_value(a), const_value(b)
    if cb == 1.0:
        return a
    if ca == 0.0:
        return ZERO
    if ca is not None and cb is not None and cb != 0.0:
        return num(ca / cb)
    return BinOp("/", a, b)


def power(a, p):
    cp = const_value(p) if not isinstance(p, (int, float)) else float(p)
    pe = num(cp) if cp is not None else p
    if cp == 0.0:
        return ONE
    if cp == 1.0:
        return a
    return BinOp("^", a, pe)


def call(f, *args):
    return Call(f, tuple(args))


def var(name):
    return Var(name)


def total(terms):
    out = ZERO
    for t in terms:
        out = add(out, t)
    return out


def linear_combination(coeffs, exprs, digits=12):
    """sum c_i e_i with coefficients rounded to ``digits`` significant digits."""
    out = ZERO
    for c, e in zip(coeffs, exprs):
        c = float(f"{float(c):.{digits}g}")
        if abs(c) < 1e-14 or is_zero(e):
            continue
        out = add(out, mul(num(c), e))
    return out


def diff(e, name):
    """Symbolic partial derivative (no simplification beyond constant folding)."""
    if isinstance(e, Num):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == name else ZERO
    if isinstance(e, Neg):
        return neg(diff(e.arg, name))
    if isinstance(e, BinOp):
        a, b = e.left, e.right
        da, db = diff(a, name), diff(b, name)
        if e.op == "+":
            return add(da, db)
        if e.op == "-":
            return sub(da, db)
        if e.op == "*":
            return add(mul(da, b), mul(a, db))
        if e.op == "/":
            return div(sub(mul(da, b), mul(a, db)), power(b, 2.0))
        cb = const_value(b)
        if cb is not None:
            return mul(mul(num(cb), power(a, cb - 1.0)), da)
        # a^b = exp(b log a)
        return mul(e, add(mul(db, call("log", a)), div(mul(b, da), a)))
    f = e.func
    if f == "atan2":
        y, x = e.args
        dy, dx = diff(y, name), diff(x, name)
        return div(sub(mul(x, dy), mul(y, dx)), add(power(x, 2.0), power(y, 2.0)))
    (a,) = e.args
    da = diff(a, name)
    if is_zero(da):
        return ZERO
    if f == "sin":
        return mul(call("cos", a), da)
    if f == "cos":
        return neg(mul(call("sin", a), da))
    if f == "tan":
        return div(da, power(call("cos", a), 2.0))
    if f == "exp":
        return mul(e, da)
    if f == "log":
        return div(da, a)
    if f == "sqrt":
        return div(da, mul(num(2.0), e))
    if f == "abs":
        return mul(div(a, e), da)
    raise ValueError(f)


def substitute(e, mapping):
    """Replace variables by expressions."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return neg(substitute(e.arg, mapping))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, mapping), substitute(e.right, mapping))
    return Call(e.func, tuple(substitute(a, mapping) for a in e.args))
