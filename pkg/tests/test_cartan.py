import numpy as np
import pytest
import scipy.integrate
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from cartankit import algebra as A
from cartankit import cartan as K
from cartankit import catalog as C
from cartankit import coframing as F
from cartankit.coframing import Chart
from cartankit.errors import NotADisguise, NotASubalgebra, NotInvariant, TooDeep
from cartankit.integrate import CHART_EXIT, COMPLETED
from cartankit.rolling import SurfaceMetric

INF = float("inf")
PT = [1.0, 0.3]


def _forget():
    return A.inclusion(A.builtin_model("flat-R2(SO2)"), A.builtin_model("flat-R2(GLn)"))


def _projective(S):
    return K.disguise(K.disguise(K.euclidean_gauge(S), _forget()), A.affine_to_projective(2))


def _gauss_oracle(G_src, x1):
    """K = -(sqrt G)'' / sqrt G for the metric dx1^2 + G dx2^2."""
    x = sp.Symbol("x1", real=True)
    r = sp.sqrt(sp.sympify(G_src.replace("^", "**"), locals={"x1": x}))
    return float((-sp.diff(r, x, 2) / r).subs(x, x1))


@pytest.mark.parametrize(
    "name",
    ["flat-R2(trivial)", "flat-R2(SO2)", "flat-R2(R+SO2)", "flat-R2(GLn)", "sphere-S2", "sl3-projective-point", "sl3-projective-pointed-line"],
)
def test_flat_gauges_have_no_curvature(name):
    g = K.maurer_cartan_gauge(A.builtin_model(name))
    for x in g.chart.sample_grid(2):
        assert np.max(np.abs(K.curvature(g, x))) <= 1e-10


def test_flat_tower_vanishes():
    g = K.maurer_cartan_gauge(A.builtin_model("sl3-projective-point"))
    t = K.curvature_tower(g, [0.2, -0.1], 2)
    assert all(np.max(np.abs(T)) <= 1e-10 for T in t.tensors)


@pytest.mark.parametrize("radius", [1.0, 2.0, 3.0])
def test_sphere_curvature(radius):
    g = K.euclidean_gauge(C.round_sphere(radius))
    t = K.curvature_tower(g, [0.9 * radius, 0.3], 1)
    assert t[0][0, 0, 1] == pytest.approx(1 / radius**2, abs=1e-8)
    assert np.max(np.abs(t[0][1:])) <= 1e-10
    assert np.max(np.abs(t[1])) <= 1e-6


@pytest.mark.parametrize("G", ["(1 + x1^2)^2", "exp(2*x1)", "(2 + cos(x1))^2", "(2 + sin(x1))^2"])
def test_curvature_matches_symbolic_gauss(G):
    S = SurfaceMetric(Chart(((-2.0, 2.0), (-2.0, 2.0))), "1", "0", G)
    g = K.euclidean_gauge(S)
    for x1 in (-0.7, 0.0, 0.5, 1.3):
        assert K.curvature(g, [x1, 0.1])[0, 0, 1] == pytest.approx(_gauss_oracle(G, x1), abs=1e-8)


def test_covariant_derivative_matches_finite_difference():
    S = SurfaceMetric(Chart(((-2.0, 2.0), (-2.0, 2.0))), "1", "0", "(1 + x1^2)^2")
    g = K.euclidean_gauge(S)
    x = np.array([0.5, 0.2])
    t = K.curvature_tower(g, x, 1)
    # along the soldering frame e1 the scalar K changes by its directional derivative
    u = np.linalg.solve(g.soldering(x), [1.0, 0.0])
    eps = 1e-5
    fd = (K.curvature(g, x + eps * u)[0, 0, 1] - K.curvature(g, x - eps * u)[0, 0, 1]) / (2 * eps)
    assert t[1][0, 0, 1, 1] == pytest.approx(fd, abs=1e-7)


def test_gauge_transformation_keeps_curvature():
    S = C.round_sphere()
    base = K.euclidean_gauge(S)
    (e1, e2), alpha = S.coframe
    src = lambda e: F.E.to_source(e)
    phi = "x1*x2"
    c, s = f"cos({phi})", f"sin({phi})"
    gamma = [
        [f"({src(alpha[0])}) + x2", f"({src(alpha[1])}) + x1"],
        [f"{c}*({src(e1[k])}) - {s}*({src(e2[k])})" for k in range(2)],
        [f"{s}*({src(e1[k])}) + {c}*({src(e2[k])})" for k in range(2)],
    ]
    moved = K.CartanGauge(base.model, S.chart, gamma)
    for x in ([1.0, 0.3], [2.0, -0.4]):
        a, b = K.curvature(base, x), K.curvature(moved, x)
        assert b[0, 0, 1] == pytest.approx(a[0, 0, 1], abs=1e-8)
        assert np.max(np.abs(b[1:])) <= 1e-8


def test_tower_depth_limit():
    with pytest.raises(TooDeep):
        K.curvature_tower(K.euclidean_gauge(C.plane()), [0, 0], 3)


def test_frame_change_transforms_tower():
    g = K.euclidean_gauge(C.round_sphere())
    h = A.expm(0.7 * g.model.g.basis[0])
    a = K.curvature_tower(g, PT, 1)
    b = K.curvature_tower(g, PT, 1, h=h)
    # K lives in the invariant so(2) slot, so a rotated frame leaves it fixed
    assert np.allclose(a[0], b[0], atol=1e-12)


def test_phi_obstruction_plane_vs_sphere():
    plane = K.euclidean_gauge(C.plane())
    sphere = K.euclidean_gauge(C.round_sphere())
    ident = A.identity_morphism(A.builtin_model("flat-R2(SO2)"))
    assert K.phi_obstruction(plane, plane, ident, [0, 0], [1, 2], 2) == [0.0, 0.0, 0.0]
    norms = K.phi_obstruction(plane, sphere, ident, [0, 0], PT, 1)
    assert norms[0] == pytest.approx(1.0, abs=1e-8)
    assert not K.phi_hits(plane, sphere, ident, [0, 0], PT, 0)


def _line_to_point():
    return A.inclusion(A.builtin_model("sl3-projective-line"), A.builtin_model("sl3-projective-point"))


@settings(max_examples=10)
@given(st.floats(0.5, 3.0), st.floats(-1.0, 1.0), st.floats(0.2, 2.5))
def test_one_dimensional_base_always_hits(radius, c, x1):
    S = SurfaceMetric(Chart(((0.01, 3.1), (-INF, INF))), "1", "0", f"({radius!r}*sin(x1) + {c!r}*x1^2)^2 + 0.1")
    g1 = _projective(S)
    g0 = K.maurer_cartan_gauge(A.builtin_model("sl3-projective-line"), [(-INF, INF)])
    assert K.phi_obstruction(g0, g1, _line_to_point(), [0.0], [x1, 0.2], 0) == [0.0]


def test_affine_disguise_of_plane_is_flat():
    aff = K.disguise(K.euclidean_gauge(C.plane()), _forget())
    proj = K.disguise(aff, A.affine_to_projective(2))
    for g in (aff, proj):
        assert np.max(np.abs(K.curvature(g, [0.3, -0.2]))) <= 1e-12


def test_projective_disguise_of_sphere_satisfies_transform():
    S = C.round_sphere()
    g0 = K.disguise(K.euclidean_gauge(S), _forget())
    phi = A.affine_to_projective(2)
    g1 = K.disguise(g0, phi)
    grid = [np.array([a, b]) for a in np.linspace(0.3, 2.8, 5) for b in np.linspace(-1, 1, 5)]
    assert K.disguise_residual(g0, g1, phi, grid) <= 1e-6


def test_disguise_composes():
    g = K.euclidean_gauge(C.round_sphere())
    phi, psi = _forget(), A.affine_to_projective(2)
    twice = K.disguise(K.disguise(g, phi), psi)
    once = K.disguise(g, psi.compose(phi))
    assert twice.gamma == once.gamma


def test_disguise_rejects_mismatched_model():
    with pytest.raises(NotADisguise):
        K.disguise(K.euclidean_gauge(C.plane()), A.affine_to_projective(2))
    bad = A.ModelMorphism(A.builtin_model("flat-R2(SO2)"), A.builtin_model("flat-R2(SO2)"), np.diag([1.0, 1.0, 0.0]))
    with pytest.raises(NotADisguise):
        K.disguise(K.euclidean_gauge(C.plane()), bad)


def test_lift_by_full_h_is_unchanged():
    g = K.euclidean_gauge(C.round_sphere())
    lifted = K.lift(g, 1)
    assert lifted.gamma == g.gamma and lifted.model.h_dim == 1


def test_lift_to_pointed_geodesics():
    g = K.maurer_cartan_gauge(A.builtin_model("sl3-projective-point"), [(-1, 1), (-1, 1)])
    lifted = K.lift(g, 5)
    assert lifted.model.h_dim == 5 and lifted.dim == 3
    assert np.max(np.abs(K.curvature(lifted, [0.1, 0.2, -0.3]))) <= 1e-10


def test_lift_by_trivial_subalgebra_is_coframing():
    g = K.euclidean_gauge(C.round_sphere())
    lifted = K.lift(g, 0, fiber_box=[(-INF, INF)])
    assert lifted.model.h_dim == 0 and lifted.dim == 3
    # curvature of an h = 0 geometry is its torsion as a coframing
    T = F.torsion_tower(lifted.coframing(), [1.0, 0.3, 0.4], 0)[0]
    assert np.allclose(K.curvature(lifted, [1.0, 0.3, 0.4]), T + lifted.model.g.structure, atol=1e-10)


def test_lift_rejects_non_subalgebra():
    g = K.maurer_cartan_gauge(A.builtin_model("flat-R2(GLn)"))
    with pytest.raises(NotASubalgebra):
        K.lift(g, 3)


def _develop(S, start, length, frames=None):
    plane = K.euclidean_gauge(C.plane())
    target = K.euclidean_gauge(S)
    ident = A.identity_morphism(A.builtin_model("flat-R2(SO2)"))
    frames = frames or (None, start, None)
    return K.develop_base_curve(plane, target, ident, ["t", "0"], frames, (0.0, length), tol=1e-10)


def test_develop_into_sphere_gives_great_circle():
    tr = _develop(C.round_sphere(), [np.pi / 4, 0.0], np.pi / 2)
    assert tr.status == COMPLETED
    P = np.array([C.sphere_point(x) for x in tr.x])
    n = np.cross(P[0], P[-1])
    assert np.max(np.abs(P @ n)) / np.linalg.norm(n) <= 1e-5
    assert np.arccos(np.clip(P[0] @ P[-1], -1, 1)) == pytest.approx(np.pi / 2, abs=1e-5)


def test_develop_past_hemisphere_exits():
    tr = _develop(C.hemisphere(), [0.5, np.pi / 2], 3.5)
    assert tr.status == CHART_EXIT


def test_develop_flat_to_flat_is_rigid():
    tr = _develop(C.plane(), [1.0, 2.0], 2.0)
    assert np.allclose(tr.end, [3.0, 2.0], atol=1e-9)


@settings(max_examples=8)
@given(st.floats(-3, 3), st.floats(-1, 1))
def test_bundle_development_is_frame_equivariant(angle, tilt):
    J = A.builtin_model("flat-R2(SO2)").g.basis[0]
    h0, h1, h = A.expm(tilt * J), A.expm(0.4 * J), A.expm(angle * J)
    start = [1.0, 0.2]
    a = _develop(C.round_sphere(), start, 1.2, (h0, start, h1))
    b = _develop(C.round_sphere(), start, 1.2, (h0 @ h, start, h1 @ h))
    assert np.linalg.norm(a.end - b.end) <= 1e-9


def test_canonical_metric():
    plane = K.euclidean_gauge(C.plane())
    assert K.canonical_base_metric(plane, [0.3, 0.1], [1, 0]) == pytest.approx(1.0)
    sphere = K.euclidean_gauge(C.round_sphere())
    x = [1.0, 0.3]
    for u in ([1, 0], [0, 1], [0.3, -0.7]):
        want = np.sqrt(u[0] ** 2 + np.sin(1.0) ** 2 * u[1] ** 2)
        assert K.canonical_base_metric(sphere, x, u) == pytest.approx(want, rel=1e-8)
        assert K.canonical_base_metric(sphere, x, u, 9 * np.eye(3)) == pytest.approx(3 * want, rel=1e-8)


def test_canonical_metric_needs_invariance():
    sphere = K.euclidean_gauge(C.round_sphere())
    with pytest.raises(NotInvariant):
        K.canonical_base_metric(sphere, PT, [1, 0], np.diag([1.0, 1.0, 2.0]))


def test_base_lengths_contract():
    sphere = K.euclidean_gauge(C.round_sphere())
    E = K.lift(sphere, 0, fiber_box=[(-INF, INF)]).coframing()
    v = np.array([0.6, 0.48, 0.64])
    tr = F.flow(E, v, [1.0, 0.3, 0.2], (0.0, 1.0), tol=1e-11)
    assert tr.status == COMPLETED
    total = F.curve_length(E, tr)
    speeds = [K.canonical_base_metric(sphere, x[:2], dx[:2]) for x, dx in zip(tr.x, tr.dx)]
    base = scipy.integrate.simpson(speeds, x=tr.t)
    assert total == pytest.approx(np.linalg.norm(v), rel=1e-8)
    assert base <= total + 1e-8


def test_gauge_json_roundtrip():
    g = K.euclidean_gauge(C.round_sphere())
    back = K.CartanGauge.from_json(g.to_json())
    assert back.to_json() == g.to_json()
