import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from cartankit import expr as E
from cartankit.errors import DomainError, ExprSyntaxError, UnknownIdentifier
from cartankit.expr import BinOp, Call, Neg, Num, Var


def test_parse_coefficient_formula():
    e = E.parse("1/(2+sin(x1^2*x2))")
    assert isinstance(e, BinOp) and e.op == "/"
    assert isinstance(e.right, BinOp) and isinstance(e.right.right, Call)
    assert E.variables(e) == {"x1", "x2"}


def test_parse_variable():
    assert E.parse("x1") == Var("x1")


def test_trailing_operator_offset():
    with pytest.raises(ExprSyntaxError) as info:
        E.parse("x1 + ")
    assert info.value.offset == 5
    assert "(" in info.value.expected


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier) as info:
        E.parse("x1 + y")
    assert info.value.name == "y" and info.value.offset == 5
    with pytest.raises(UnknownIdentifier):
        E.parse("foo(x1)")


def test_declared_names():
    assert E.parse("u*v", {"u", "v"}) == BinOp("*", Var("u"), Var("v"))


@pytest.mark.parametrize(
    "src, value",
    [
        ("2^3^2", 512.0),
        ("-2^2", -4.0),
        ("2*3+4", 10.0),
        ("2+3*4", 14.0),
        ("8/4/2", 1.0),
        ("10-3-2", 5.0),
        ("(2+3)*4", 20.0),
        ("-(1)--1", 0.0),
        ("2^-1", 0.5),
        ("1.5e1 + .5", 15.5),
    ],
)
def test_precedence(src, value):
    assert E.eval_float(E.parse(src), {}) == value


@pytest.mark.parametrize("src", ["", "(", "x1 x2", "sin x1", "sin()", "atan2(x1)", "1 +* 2", "x1)", "3 $ 4"])
def test_malformed(src):
    with pytest.raises(ExprSyntaxError):
        E.parse(src)


def test_offsets_are_bytes():
    # the multibyte character sits before the error position
    with pytest.raises(ExprSyntaxError) as info:
        E.parse("x1 + é")
    assert info.value.offset == 5


def test_jet_sin():
    j = E.eval_jet(E.parse("sin(x1)"), [0.0], 1)
    assert j.value == 0.0 and j.partial(0) == 1.0


def test_jet_polynomial():
    j = E.eval_jet(E.parse("x1^2*x2"), [1.0, 2.0], 1)
    assert j.value == 2.0
    assert np.array_equal(j.gradient(), [4.0, 1.0])


def test_jet_matches_finite_differences():
    e = E.parse("1/(2+sin(x1^2*x2))")
    j = E.eval_jet(e, [1.0, 0.0], 2)
    f = lambda a, b: 1 / (2 + math.sin(a * a * b))
    h = 1e-4
    x, y = 1.0, 0.0
    fd = {
        (0,): (f(x + h, y) - f(x - h, y)) / (2 * h),
        (1,): (f(x, y + h) - f(x, y - h)) / (2 * h),
        (0, 0): (f(x + h, y) - 2 * f(x, y) + f(x - h, y)) / h**2,
        (1, 1): (f(x, y + h) - 2 * f(x, y) + f(x, y - h)) / h**2,
        (0, 1): (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h * h),
    }
    for idx, v in fd.items():
        assert abs(j.partial(*idx) - v) < 1e-5


def test_jet_symmetry_and_value():
    j = E.eval_jet(E.parse("exp(x1*x2)*cos(x2 - x1^2)"), [0.3, -0.7], 3)
    parts = j.partials
    assert parts[()] == j.value
    assert j.partial(0, 1, 1) == j.partial(1, 0, 1) == j.partial(1, 1, 0)


SYMS = sp.symbols("x1 x2 x3", real=True)


def test_third_order_against_sympy():
    src = "atan2(x2, x1) + log(x1^2 + 1) * sqrt(x2 + 3) - tan(x1*x2) + abs(x1 - 2)"
    e = E.parse(src)
    s = sp.sympify(src.replace("^", "**"), locals={"x1": SYMS[0], "x2": SYMS[1]})
    pt = {SYMS[0]: 0.4, SYMS[1]: 0.9}
    j = E.eval_jet(e, [0.4, 0.9], 3)
    for idx in [(0,), (1,), (0, 1), (1, 1, 0), (0, 0, 0)]:
        ref = float(sp.diff(s, *[SYMS[k] for k in idx]).subs(pt))
        assert j.partial(*idx) == pytest.approx(ref, rel=1e-11, abs=1e-12)


@pytest.mark.parametrize(
    "src, point",
    [("log(x1)", [0.0]), ("log(x1)", [-1.0]), ("1/x1", [0.0]), ("sqrt(x1)", [-1.0]), ("x1^0.5", [-2.0])],
)
def test_domain_errors(src, point):
    with pytest.raises(DomainError) as info:
        E.eval_jet(E.parse(src), point, 1)
    assert info.value.subexpression


def test_domain_error_names_subexpression():
    with pytest.raises(DomainError) as info:
        E.eval_jet(E.parse("x1 + log(x1 - 1)"), [1.0], 1)
    assert "log" in info.value.subexpression


def test_compiled_matches_jets():
    exprs = [E.parse(s) for s in ["sin(x1)*x2", "x1^3/(1+x2^2)", "atan2(x1, x2)"]]
    c = E.Compiled(exprs, ("x1", "x2"))
    vals = c([0.3, -1.2])
    for e, v in zip(exprs, vals):
        assert v == pytest.approx(E.eval_jet(e, [0.3, -1.2], 0).value, rel=1e-15)


def test_compiled_domain_error():
    c = E.Compiled([E.parse("log(x1)")], ("x1",))
    with pytest.raises(DomainError):
        c([-1.0])


# --- properties ------------------------------------------------------------

_leaf = st.one_of(
    st.sampled_from([Var("x1"), Var("x2"), Var("x3")]),
    st.floats(-5, 5, allow_nan=False).map(lambda v: Num(abs(round(v, 3)))),
)


def _nodes(children):
    return st.one_of(
        st.builds(Neg, children),
        st.builds(BinOp, st.sampled_from("+-*/"), children, children),
        st.builds(lambda a: BinOp("^", a, Num(2.0)), children),
        st.builds(lambda a: Call("sin", (a,)), children),
        st.builds(lambda a, b: Call("atan2", (a, b)), children, children),
    )


trees = st.recursive(_leaf, _nodes, max_leaves=12)


@given(trees)
def test_print_parse_roundtrip(e):
    assert E.parse(E.to_source(e)) == e



poly_terms = st.lists(
    st.tuples(st.integers(-5, 5), st.integers(0, 2), st.integers(0, 2), st.integers(0, 2)).filter(
        lambda t: t[1] + t[2] + t[3] <= 4
    ),
    min_size=1,
    max_size=6,
)


@given(poly_terms, st.tuples(*[st.floats(-2, 2, allow_nan=False)] * 3))
def test_polynomial_gradient_matches_symbolic(terms, point):
    src = " + ".join(f"({c})*x1^{a}*x2^{b}*x3^{d}" for c, a, b, d in terms)
    e = E.parse(src)
    j = E.eval_jet(e, list(point), 1)
    for k in range(3):
        ref = E.eval_float(E.diff(e, f"x{k + 1}"), dict(zip(("x1", "x2", "x3"), point)))
        assert j.partial(k) == pytest.approx(ref, rel=1e-12, abs=1e-12)


@given(trees, trees, st.floats(-3, 3), st.floats(-3, 3))
def test_jet_linearity(e1, e2, a, b):
    pt = [0.31, -0.47, 0.83]
    try:
        j1 = E.eval_jet(e1, pt, 2).coef
        j2 = E.eval_jet(e2, pt, 2).coef
        j = E.eval_jet(BinOp("+", BinOp("*", Num(a), e1) if a >= 0 else Neg(BinOp("*", Num(-a), e1)),
                             BinOp("*", Num(b), e2) if b >= 0 else Neg(BinOp("*", Num(-b), e2))), pt, 2).coef
    except DomainError:
        return
    ref = a * j1 + b * j2
    scale = 1 + np.abs(a * j1) + np.abs(b * j2)
    assert np.all(np.abs(j - ref) <= 1e-12 * scale)
