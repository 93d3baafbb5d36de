"""A small analytic expression language with exact forward-mode derivatives."""
from .build import diff, linear_combination, num, substitute
from .compile import Compiled
from .evaluate import eval_coef, eval_float, eval_jet
from .jet import Jet, JetSpace, jet_space
from .nodes import FUNCTIONS, BinOp, Call, Neg, Node, Num, Var, to_source, variables
from .parser import parse

Expr = Node


def as_expr(obj, names=None):
    """Accept an expression tree, a source string, or a number."""
    if isinstance(obj, (Num, Var, Neg, BinOp, Call)):
        return obj
    if isinstance(obj, (int, float)):
        return num(obj)
    return parse(str(obj), names)


__all__ = [
    "Expr", "Jet", "JetSpace", "Compiled", "parse", "to_source", "eval_jet", "eval_coef",
    "eval_float", "jet_space", "diff", "num", "substitute", "linear_combination", "as_expr",
    "variables", "FUNCTIONS", "Num", "Var", "Neg", "BinOp", "Call",
]
