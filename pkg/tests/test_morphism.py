import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cartankit import algebra as A
from cartankit import catalog as C
from cartankit import coframing as F
from cartankit import morphism as M
from cartankit import rolling as R
from cartankit.errors import IntegrationEscaped, ObstructionTooLarge, TooDeep

INF = float("inf")


def _const(B):
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    return F.Coframing(F.Chart(((-INF, INF),) * n), [[repr(float(v)) for v in row] for row in B])


def _transformed(cof, Binv):
    """Coframing Binv . omega, the same manifold with new frame values."""
    n = cof.dim
    rows = [
        [" + ".join(f"({float(Binv[i, k])!r})*({F.E.to_source(cof.omega[k][c])})" for k in range(n)) for c in range(n)]
        for i in range(n)
    ]
    return F.Coframing(cof.chart, rows)


def test_identity_pair_vanishes():
    cof = C.sin_example()
    for ob in M.obstruction_tower(cof, cof, np.eye(2), [0.4, 0.3], [0.4, 0.3], 3):
        assert ob.norm == 0.0
    hits, norms = M.hits_to_order(cof, cof, np.eye(2), [0.4, 0.3], [0.4, 0.3], 3, tol=1e-8)
    assert hits and len(norms) == 4


def test_se2_against_so3_fails_at_order_zero():
    plane = R.frame_bundle_coframing(C.plane())
    sphere = R.frame_bundle_coframing(C.round_sphere())
    hits, norms = M.hits_to_order(plane, sphere, np.eye(3), [0.3, 0.2, 0.1], [1.0, 0.2, 0.1], 1, tol=1e-3)
    assert not hits
    assert norms[0] == pytest.approx(1.0, abs=1e-6)
    assert norms[1] < 1e-8


def test_lie_algebra_morphism_pair_hits():
    so3 = A.builtin_model("sphere-S2").g
    sl3 = A.builtin_model("sl3-projective-point").g
    inc = A.inclusion(A.builtin_model("sphere-S2"), A.builtin_model("sl3-projective-point")).lie_map
    c0 = F.maurer_cartan(so3)
    c1 = F.maurer_cartan(sl3)
    hits, norms = M.hits_to_order(c0, c1, inc, np.zeros(3), np.zeros(8), 3, tol=1e-8)
    assert hits, norms


def test_frame_change_hits():
    B = np.array([[2.0, 1.0], [0.5, 1.0]])
    hits, _ = M.hits_to_order(C.flat(), _const(B), B, [0.0, 0.0], [0.1, 0.2], 3, tol=1e-8)
    assert hits


def test_obstruction_depth_limit():
    with pytest.raises(TooDeep):
        M.obstruction(C.flat(), C.flat(), np.eye(2), [0, 0], [0, 0], 4)


def test_obstruction_antisymmetric():
    ob = M.obstruction(C.sin_example(), C.radial(), [[1.0, 0.5], [0.0, 2.0]], [0.4, 0.3], [1.1, 0.9], 2)
    assert np.allclose(ob.tensor, -np.swapaxes(ob.tensor, 1, 2))


def test_default_tolerance_scales_with_torsion():
    big = _transformed(C.sin_example(), np.eye(2) / 50.0)
    small = M.default_tolerance(C.flat(), C.flat(), [0, 0], [0, 0])
    assert small == 1e-6
    assert M.default_tolerance(big, big, [1.0, 0.5], [1.0, 0.5]) > small


invertible = arrays(np.float64, (2, 2), elements=st.floats(-2, 2)).filter(lambda B: abs(np.linalg.det(B)) > 0.3)


@settings(max_examples=15)
@given(invertible)
def test_obstruction_naturality(B):
    cof0, cof1 = C.sin_example(), C.radial()
    Am = np.array([[1.0, 0.3], [-0.2, 0.8]])
    m0, m1 = [0.5, 0.4], [1.2, 0.8]
    base = M.obstruction_tower(cof0, cof1, Am, m0, m1, 1)
    moved = M.obstruction_tower(_transformed(cof0, np.linalg.inv(B)), cof1, Am @ B, m0, m1, 1)
    for a, b in zip(base, moved):
        want = M._pull(a.tensor, B)
        assert np.allclose(b.tensor, want, rtol=1e-8, atol=1e-8 * max(1.0, np.abs(want).max()))


def test_integrate_identity_pair():
    cof = C.sin_example()
    g = M.integrate_morphism(cof, cof, np.eye(2), [0.2, 0.1], [0.2, 0.1], 0.5, k=3)
    assert np.allclose(g.source, g.target, atol=1e-12)
    assert g.residual <= 1e-9


def test_integrate_frame_change_is_affine():
    B = np.array([[2.0, 1.0], [0.5, 1.0]])
    Am = np.array([[1.0, -0.5], [0.3, 2.0]])
    m0, m1 = np.array([0.0, 0.0]), np.array([0.1, 0.2])
    g = M.integrate_morphism(C.flat(), _const(B), Am, m0, m1, 0.5, k=5)
    want = m1 + (np.linalg.solve(B, Am) @ (g.source - m0).T).T
    assert np.max(np.abs(g.target - want)) <= 1e-6
    assert g.residual <= 1e-9


def test_integrate_is_deterministic_and_stable():
    B = np.array([[2.0, 1.0], [0.5, 1.0]])
    args = (C.sin_example(), _transformed(C.sin_example(), np.linalg.inv(B)), np.linalg.inv(B))
    base = M.integrate_morphism(*args, [0.3, 0.2], [0.3, 0.2], 0.3, k=3)
    again = M.integrate_morphism(*args, [0.3, 0.2], [0.3, 0.2], 0.3, k=3)
    assert np.array_equal(base.target, again.target)
    ratios = []
    for d in (1e-3, 1e-4):
        moved = M.integrate_morphism(*args, [0.3, 0.2], [0.3 + d, 0.2], 0.3, k=3, hit_tol=1.0)
        ratios.append(np.max(np.abs(moved.target - base.target)) / d)
    assert max(ratios) / min(ratios) <= 10


def test_integrate_refuses_non_hitting_pair():
    plane = R.frame_bundle_coframing(C.plane())
    sphere = R.frame_bundle_coframing(C.round_sphere())
    with pytest.raises(ObstructionTooLarge):
        M.integrate_morphism(plane, sphere, np.eye(3), [0.3, 0.2, 0.1], [1.0, 0.2, 0.1], 0.1)


def test_integrate_reports_escape():
    box = F.Coframing(F.Chart(((-0.1, 0.1), (-0.1, 0.1))), [["1", "0"], ["0", "1"]])
    with pytest.raises(IntegrationEscaped):
        M.integrate_morphism(box, box, np.eye(2), [0, 0], [0, 0], 0.5, k=3)


def test_maurer_cartan_pair_gives_group_homomorphism():
    so3 = A.builtin_model("sphere-S2")
    sl3 = A.builtin_model("sl3-projective-point")
    inc = A.inclusion(so3, sl3).lie_map
    g = M.integrate_morphism(F.maurer_cartan(so3.g), F.maurer_cartan(sl3.g), inc, np.zeros(3), np.zeros(8), 0.3, k=2)
    for x0, x1 in zip(g.source, g.target):
        assert np.max(np.abs(F.group_element(so3.g, x0) - F.group_element(sl3.g, x1))) <= 1e-8
