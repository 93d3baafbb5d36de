import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cartankit import algebra as A
from cartankit import expr as E
from cartankit.errors import InvalidModel, NotClosed, Overflow, SizeMismatch, UnknownModel


@pytest.mark.parametrize(
    "name, dim, h_dim",
    [
        ("flat-R2(trivial)", 2, 0),
        ("flat-R2(SO2)", 3, 1),
        ("flat-R2(R+SO2)", 4, 2),
        ("flat-R3(On)", 6, 3),
        ("flat-R2(GLn)", 6, 4),
        ("sphere-S2", 3, 1),
        ("sl3-projective-point", 8, 6),
        ("sl3-projective-pointed-line", 8, 5),
        ("sl3-projective-line", 6, 5),
        ("sl4-projective", 15, 12),
    ],
)
def test_builtin_dimensions(name, dim, h_dim):
    m = A.builtin_model(name)
    assert (m.dim, m.h_dim) == (dim, h_dim)


def test_symbolic_dimension():
    assert A.builtin_model("flat-Rn(On)", n=4).dim == 10
    assert A.builtin_model("sln-projective", n=3).dim == 15


@pytest.mark.parametrize("name", ["flat-R2(Sp)", "hyperbolic", "flat-R3(SO2)"])
def test_unknown_models(name):
    with pytest.raises(UnknownModel):
        A.builtin_model(name)


def test_so3_brackets():
    c = A.builtin_model("sphere-S2").g.structure
    # J = e12, e1 = e13, e2 = e23 in so(3)
    J, e1, e2 = np.eye(3)
    assert np.allclose(np.einsum("kij,i,j->k", c, J, e1), -e2)
    assert np.allclose(np.einsum("kij,i,j->k", c, J, e2), e1)
    assert np.allclose(np.einsum("kij,i,j->k", c, e1, e2), -J)


def test_se2_brackets_close_on_translations():
    c = A.builtin_model("flat-R2(SO2)").g.structure
    assert np.allclose(c[:, 1, 2], 0)
    assert np.allclose(c[:, 0, 1], [0, 0, -1])


def test_bracket_size_mismatch():
    with pytest.raises(SizeMismatch):
        A.bracket(np.eye(2), np.eye(3))


def test_not_closed():
    alg = A.MatrixLieAlgebra("bad", np.array([A.E_(2, 0, 1), A.E_(2, 1, 0)]))
    with pytest.raises(NotClosed):
        alg.structure


def test_expm_closed_forms():
    t = 0.83
    J = np.array([[0.0, -t], [t, 0.0]])
    assert np.allclose(A.expm(J), [[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]], atol=1e-15)
    N = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    assert np.allclose(A.expm(N), np.eye(3) + N + N @ N / 2, atol=1e-15)
    assert np.allclose(A.expm(np.diag([1.0, -2.0])), np.diag([np.e, np.exp(-2.0)]))


def test_expm_overflow():
    with pytest.raises(Overflow):
        A.expm(np.array([[1000.0]]))


matrices = arrays(np.float64, (3, 3), elements=st.floats(-1.5, 1.5, allow_nan=False))


@given(matrices)
def test_expm_inverse(X):
    assert np.allclose(A.expm(X) @ A.expm(-X), np.eye(3), atol=1e-10)


@given(st.sampled_from(["sphere-S2", "flat-R2(R+SO2)", "sl3-projective-point"]), st.data())
def test_Ad_of_exp_is_exp_of_ad(name, data):
    m = A.builtin_model(name)
    X = np.array(data.draw(st.lists(st.floats(-1, 1), min_size=m.dim, max_size=m.dim)))
    lhs = m.Ad(A.expm(m.g.matrix(X)))
    rhs = scipy.linalg.expm(m.g.ad(X))
    assert np.allclose(lhs, rhs, atol=1e-9)


@given(st.sampled_from(["sphere-S2", "flat-R3(On)", "sl3-projective-point"]), st.data())
def test_structure_reproduces_brackets(name, data):
    g = A.builtin_model(name).g
    X = np.array(data.draw(st.lists(st.floats(-2, 2), min_size=g.dim, max_size=g.dim)))
    Y = np.array(data.draw(st.lists(st.floats(-2, 2), min_size=g.dim, max_size=g.dim)))
    direct = A.bracket(g.matrix(X), g.matrix(Y))
    via = g.matrix(np.einsum("kij,i,j->k", g.structure, X, Y))
    assert np.allclose(direct, via, atol=1e-12)


def test_model_validation_catches_non_subalgebra():
    g = A.builtin_model("sphere-S2").g
    # take an h that is not closed under the bracket: span of e1, e2
    bad = A.LocalModel("bad", A.MatrixLieAlgebra("so3", g.basis[[1, 2, 0]]), 2)
    with pytest.raises(InvalidModel):
        bad.validate()


def test_affine_to_projective_morphism():
    phi = A.affine_to_projective(2).validate()
    assert phi.lie_map.shape == (8, 6)
    assert np.linalg.matrix_rank(phi.quotient_map) == 2
    assert phi.equivariance_residual() < 1e-12


def test_inclusion_and_compose():
    so3 = A.builtin_model("sphere-S2")
    sl3 = A.builtin_model("sl3-projective-point")
    inc = A.inclusion(so3, A.builtin_model("sl3-projective-pointed-line"))
    assert inc.lie_map.shape == (8, 3)
    ident = A.identity_morphism(sl3)
    phi = A.affine_to_projective(2)
    comp = ident.compose(phi)
    assert np.allclose(comp.lie_map, phi.lie_map)
    assert comp.source is phi.source and comp.target is sl3


def test_matched_basis():
    phi = A.matched_basis(A.builtin_model("flat-R2(SO2)"), A.builtin_model("sphere-S2")).validate()
    assert np.array_equal(phi.lie_map, np.eye(3))


def test_morphism_shape_checked():
    with pytest.raises(SizeMismatch):
        A.ModelMorphism(A.builtin_model("sphere-S2"), A.builtin_model("sphere-S2"), np.eye(2))


@pytest.mark.parametrize(
    "M",
    [
        np.array([[0.0, -1.0], [1.0, 0.0]]),
        np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]),
        np.array([[1.0, 2.0], [0.0, -0.5]]),
        np.array([[0.3, -1.0, 0.0], [1.0, 0.3, 0.0], [0.0, 0.0, 0.0]]),
    ],
)
def test_exp_exprs_matches_expm(M):
    s = E.Var("t")
    ex = A.exp_exprs(M, s)
    for t in (-1.3, 0.0, 0.7, 2.1):
        num = np.array([[E.eval_float(e, {"t": t}) for e in row] for row in ex])
        assert np.allclose(num, scipy.linalg.expm(t * M), atol=1e-12)


def test_mc_columns_are_maurer_cartan_form():
    g = A.builtin_model("sphere-S2").g
    ys = [E.Var(n) for n in ("x1", "x2", "x3")]
    cols, H, Hinv = A.mc_columns(list(g.basis), ys)
    pt = {"x1": 0.3, "x2": -0.4, "x3": 0.9}
    ev = lambda P: np.array([[E.eval_float(e, pt) for e in row] for row in P])
    h = A.expm(0.3 * g.basis[0]) @ A.expm(-0.4 * g.basis[1]) @ A.expm(0.9 * g.basis[2])
    assert np.allclose(ev(H), h) and np.allclose(ev(Hinv), np.linalg.inv(h))
    eps = 1e-6
    for k, nm in enumerate(("x1", "x2", "x3")):
        up = dict(pt, **{nm: pt[nm] + eps})
        dn = dict(pt, **{nm: pt[nm] - eps})
        evp = lambda P, q: np.array([[E.eval_float(e, q) for e in row] for row in P])
        dh = (evp(H, up) - evp(H, dn)) / (2 * eps)
        assert np.allclose(ev(cols[k]), np.linalg.inv(h) @ dh, atol=1e-8)
