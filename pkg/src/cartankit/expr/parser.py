"""Recursive-descent parser for the expression language.

Grammar (unary minus binds looser than ``^``)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := atom ('^' factor)?
    atom   := number | ident | ident '(' args ')' | '(' expr ')' | '-' factor
"""
from __future__ import annotations

import re

from ..errors import ExprSyntaxError, UnknownIdentifier
from .nodes import FUNCTIONS, BinOp, Call, Neg, Num, Var

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)
_DEFAULT_VAR = re.compile(r"^(x[1-9][0-9]*|t)$")
_ATOM_START = ("number", "identifier", "(", "-")


class _Parser:
    def __init__(self, src, names):
        self.src = src
        self.names = names
        self.toks = []
        pos = 0
        while True:
            m = _TOKEN.match(src, pos)
            if not m or m.end() == pos:
                rest = src[pos:]
                if rest.strip() == "":
                    break
                off = pos + (len(rest) - len(rest.lstrip()))
                raise ExprSyntaxError(f"unexpected character {src[off]!r}", self._byte(off), _ATOM_START)
            kind = m.lastgroup
            self.toks.append((kind, m.group(kind), self._byte(m.start(kind))))
            pos = m.end()
        self.end = self._byte(len(src))
        self.i = 0

    def _byte(self, charpos):
        return len(self.src[:charpos].encode("utf-8"))

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else ("eof", "", self.end)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, op):
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"unexpected {val or 'end of input'!r}", off, (op,))
        self.i += 1

    def parse(self):
        e = self.expr()
        kind, val, off = self.peek()
        if kind != "eof":
            raise ExprSyntaxError(f"unexpected {val!r}", off, ("+", "-", "*", "/", "^", "end of input"))
        return e

    def expr(self):
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            e = BinOp(op, e, self.term())
        return e

    def term(self):
        e = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            e = BinOp(op, e, self.factor())
        return e

    def factor(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def atom(self):
        kind, val, off = self.take()
        if kind == "num":
            return Num(float(val))
        if kind == "ident":
            if self.peek()[:2] == ("op", "("):
                if val not in FUNCTIONS:
                    raise UnknownIdentifier(val, off)
                self.take()
                args = [self.expr()]
                while self.peek()[:2] == ("op", ","):
                    self.take()
                    args.append(self.expr())
                if len(args) != FUNCTIONS[val]:
                    raise ExprSyntaxError(f"{val} takes {FUNCTIONS[val]} argument(s)", off, ())
                self.expect(")")
                return Call(val, tuple(args))
            if val in FUNCTIONS:
                raise ExprSyntaxError(f"function {val} needs arguments", self.peek()[2], ("(",))
            if (self.names is None and not _DEFAULT_VAR.match(val)) or (
                self.names is not None and val not in self.names
            ):
                raise UnknownIdentifier(val, off)
            return Var(val)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "op" and val == "-":
            return Neg(self.factor())
        raise ExprSyntaxError(f"unexpected {val or 'end of input'!r}", off, _ATOM_START)


def parse(src: str, names=None):
    """Parse ``src`` into an expression tree.

    ``names`` restricts the admissible variables; by default ``x1, x2, ...``
    and ``t`` are accepted.
    """
    if not isinstance(src, str) or not src.strip():
        raise ExprSyntaxError("empty expression", 0, _ATOM_START)
    return _Parser(src, None if names is None else set(names)).parse()
