"""Cartan geometries in gauge form on a single base chart."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as E
from .algebra import (
    LocalModel,
    MatrixLieAlgebra,
    ModelMorphism,
    builtin_model,
    expr_coords,
    expr_matmul,
    mc_columns,
)
from .coframing import COND_LIMIT, Chart, Coframing, default_names
from .development import CurveSource
from .errors import (
    NotADisguise,
    NotASubalgebra,
    NotInvariant,
    NumericalError,
    SingularCoframe,
    TooDeep,
    ValidationError,
)
from .expr import build as B
from .integrate import Trajectory, integrate


@dataclass(frozen=True, eq=False)
class CartanGauge:
    """A g-valued 1-form gamma on a chart whose g/h block is a coframing.

    On E = chart x H the Cartan connection is Ad(h)^{-1} gamma + h^{-1} dh.
    ``gamma`` has one row per basis vector of g and one column per coordinate.
    """

    model: LocalModel
    chart: Chart
    gamma: tuple
    name: str = ""
    # optional linear presentation gamma = coeffs @ base, kept so repeated
    # disguises compose exactly
    base: tuple = field(default=None, repr=False)
    coeffs: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        d, n = self.model.dim, self.model.base_dim
        if self.chart.dim != n:
            raise ValidationError(f"chart dimension {self.chart.dim} != dim g/h = {n}")
        names = set(self.chart.names)
        gm = tuple(tuple(E.as_expr(e, names) for e in row) for row in self.gamma)
        if len(gm) != d or any(len(r) != n for r in gm):
            raise ValidationError(f"gamma must be {d}x{n}")
        object.__setattr__(self, "gamma", gm)
        object.__setattr__(self, "_c", E.Compiled([e for r in gm for e in r], self.chart.names))

    @property
    def dim(self):
        return self.model.base_dim

    def matrix(self, x):
        return np.array(self._c(list(map(float, x)))).reshape(self.model.dim, self.dim)

    def soldering(self, x):
        return self.matrix(x)[self.model.h_dim :]

    def jet(self, x, order):
        S = E.jet_space(self.dim, order)
        if order == 1:
            # first jets are hot inside ODE right-hand sides; compiled derivatives are much cheaper
            d1 = self.__dict__.get("_d1")
            if d1 is None:
                flat = [e for r in self.gamma for e in r]
                exprs = flat + [E.diff(e, nm) for nm in self.chart.names for e in flat]
                d1 = E.Compiled(exprs, self.chart.names)
                object.__setattr__(self, "_d1", d1)
            vals = np.array(d1(list(map(float, x)))).reshape(S.size, self.model.dim, self.dim)
            return S, np.moveaxis(vals, 0, -1)
        X = S.variable(np.asarray(x, dtype=float))
        env = {nm: X[i] for i, nm in enumerate(self.chart.names)}
        return S, np.array([[E.eval_coef(e, S, env) for e in row] for row in self.gamma])

    def coframing(self) -> Coframing:
        return Coframing(self.chart, self.gamma[self.model.h_dim :], name=f"solder({self.name})")

    def validate(self, k=5):
        for p in self.chart.sample_grid(k):
            d = np.linalg.det(self.soldering(p))
            if abs(d) < 1e-8:
                raise SingularCoframe(f"soldering block singular at {p.tolist()}")
        return self

    def to_json(self):
        return {
            "model": self.model.name,
            "chart": self.chart.to_json(),
            "gamma": [[E.to_source(e) for e in row] for row in self.gamma],
        }

    @staticmethod
    def from_json(d, name=""):
        model = model_from_json(d["model"])
        return CartanGauge(model, Chart.from_json(d["chart"]), d["gamma"], name)


def model_from_json(m):
    if isinstance(m, str):
        return builtin_model(m)
    basis = np.array(m["basis"], dtype=float)
    return LocalModel(m.get("name", "inline"), MatrixLieAlgebra(m.get("name", "inline"), basis), int(m["h_dim"])).validate()


# ---------------------------------------------------------------------------
# Constructors


def maurer_cartan_gauge(model: LocalModel, box=None) -> CartanGauge:
    """Flat gauge s^{-1} ds for the section s(x) = prod exp(x_i q_i) over the quotient basis."""
    n, hd = model.base_dim, model.h_dim
    names = default_names(n)
    cols, _, _ = mc_columns(list(model.g.basis[hd:]), [E.Var(nm) for nm in names])
    coords = [expr_coords(model.g, P) for P in cols]
    gamma = [[coords[k][a] for k in range(n)] for a in range(model.dim)]
    box = box or [(-1.0, 1.0)] * n
    return CartanGauge(model, Chart(tuple(box)), gamma, name=f"flat({model.name})")


def euclidean_gauge(S, model: LocalModel | None = None) -> CartanGauge:
    """Levi-Civita gauge (alpha; eta1; eta2) of a surface metric in an SO(2) x R^2 model."""
    (eta1, eta2), alpha = S.coframe
    model = model or builtin_model("flat-Rn(SO2)")
    return CartanGauge(model, S.chart, [list(alpha), list(eta1), list(eta2)], name=f"LC({S.name})")


# ---------------------------------------------------------------------------
# Curvature


def _curvature_jet(g: CartanGauge, x, order):
    """Jet of K[a, i, j] (valid to ``order``) together with the gauge jet."""
    S, G = g.jet(x, order + 1)
    d, n, hd = g.model.dim, g.dim, g.model.h_dim
    if np.linalg.cond(G[hd:, :, 0]) > COND_LIMIT:
        raise SingularCoframe("soldering block is numerically singular")
    c = g.model.g.structure
    Om = np.zeros((d, n, n, S.size))
    for k in range(n):
        for l in range(n):
            Om[:, k, l] = S.diff(G[:, l], k) - S.diff(G[:, k], l)
    # bracket term [gamma(d_k), gamma(d_l)]^a = c[a, b, e] G[b, k] G[e, l]
    P = S.mul(G[:, None, :, None, :], G[None, :, None, :, :])  # [b, e, k, l]
    Om += np.einsum("abe,beklN->aklN", c, P)
    Sinv = S.matinv(G[hd:])
    tmp = np.zeros((d, n, n, S.size))  # [a, i, l]
    for k in range(n):
        tmp += S.mul(Om[:, k, None, :, :], Sinv[k][None, :, None, :])
    K = np.zeros((d, n, n, S.size))
    for l in range(n):
        K += S.mul(tmp[:, :, l, None, :], Sinv[l][None, None, :, :])
    return S, K, G, Sinv


def _antisym(K):
    return 0.5 * (K - np.swapaxes(K, 1, 2))


def curvature(g: CartanGauge, x) -> np.ndarray:
    """K[a, i, j] = (d gamma + 1/2 [gamma, gamma])^a on the soldering frame at the identity section."""
    _, K, _, _ = _curvature_jet(g, x, 0)
    return _antisym(K[..., 0])


def _rho_star(model: LocalModel, xi, F, S):
    """Infinitesimal action of xi (h-coordinates as jets) on a tensor F[a, i, j, b...]."""
    c = model.g.structure
    hd = model.h_dim
    # ad(xi)[p, q] = sum_m xi_m c[p, m, q]
    ad = sum(c[:, m, :, None] * xi[m][None, None, :] for m in range(hd))
    adq = ad[hd:, hd:]
    out = _slot_mul(S, ad, F, 0)
    for s_ in (1, 2):
        out = out - _slot_mul_in(S, adq, F, s_)
    for s_ in range(3, F.ndim - 1):
        out = out - _slot_mul_in(S, ad, F, s_)
    return out


def _slot_mul(S, M, F, slot):
    """sum_q M[p, q] F[..., q (at slot), ...] as jets."""
    Fm = np.moveaxis(F, slot, 0)
    out = np.zeros((M.shape[0],) + Fm.shape[1:])
    for p in range(M.shape[0]):
        for q in range(M.shape[1]):
            if np.any(M[p, q]):
                out[p] += S.mul(M[p, q], Fm[q])
    return np.moveaxis(out, 0, slot)


def _slot_mul_in(S, M, F, slot):
    """sum_q F[..., q (at slot), ...] M[q, p] as jets (action on an input slot)."""
    return _slot_mul(S, np.swapaxes(M, 0, 1), F, slot)


@dataclass
class CurvatureTower:
    point: np.ndarray
    depth: int
    tensors: list

    def __getitem__(self, j):
        return self.tensors[j]


def _transform(model: LocalModel, T, h):
    """rho(h)^{-1} T for T[a, i, j, b...] at a frame h (ambient matrix)."""
    if h is None:
        return T
    Ad = model.Ad(h)
    Adi = np.linalg.inv(Ad)
    hd = model.h_dim
    Aq = Ad[hd:, hd:]
    out = np.tensordot(Adi, T, axes=(1, 0))
    for s_ in (1, 2):
        out = np.moveaxis(np.tensordot(out, Aq, axes=(s_, 0)), -1, s_)
    for s_ in range(3, T.ndim):
        out = np.moveaxis(np.tensordot(out, Ad, axes=(s_, 0)), -1, s_)
    return out


def curvature_tower(g: CartanGauge, x, depth: int = 0, h=None) -> CurvatureTower:
    """K and its covariant derivatives along constant vector fields, at the frame h (default identity)."""
    if not 0 <= depth <= 2:
        raise TooDeep("curvature tower depth must be between 0 and 2")
    S, K, G, Sinv = _curvature_jet(g, x, depth)
    model = g.model
    d, n, hd = model.dim, g.dim, model.h_dim
    K = _antisym(K)
    out = [K[..., 0]]
    cur = K
    for _ in range(depth):
        parts = []
        for A in range(d):
            eA = np.zeros(d)
            eA[A] = 1.0
            aq = eA[hd:]
            u = np.einsum("kiN,i->kN", Sinv, aq)
            deriv = sum(S.mul(u[k], S.diff(cur, k)) for k in range(n))
            if hd:
                gh = np.array([sum(S.mul(G[m, k], u[k]) for k in range(n)) for m in range(hd)])
                xi = S.constant(eA[:hd]) - gh
                deriv = deriv - _rho_star(model, xi, cur, S)
            parts.append(deriv)
        cur = np.stack(parts, axis=-2)
        out.append(cur[..., 0])
    out = [_transform(model, T, h) for T in out]
    return CurvatureTower(np.asarray(x, dtype=float), depth, out)


def _pushforward(Phi: ModelMorphism, T):
    """T1-shaped tensor pulled back through Lambda^2 Phi (x) Phi^j."""
    Pq = Phi.quotient_map
    out = T
    for s_ in (1, 2):
        out = np.moveaxis(np.tensordot(out, Pq, axes=(s_, 0)), -1, s_)
    for s_ in range(3, T.ndim):
        out = np.moveaxis(np.tensordot(out, Phi.lie_map, axes=(s_, 0)), -1, s_)
    return out


def phi_obstruction(g0, g1, Phi: ModelMorphism, x0, x1, depth=0, h0=None, h1=None) -> list:
    """Max-abs norms of nabla^j K1 (Lambda^2 Phi (x) Phi^j) - Phi nabla^j K0 for j <= depth."""
    t0 = curvature_tower(g0, x0, depth, h0)
    t1 = curvature_tower(g1, x1, depth, h1)
    norms = []
    for j in range(depth + 1):
        lhs = _pushforward(Phi, t1[j])
        rhs = np.tensordot(Phi.lie_map, t0[j], axes=(1, 0))
        norms.append(float(np.max(np.abs(lhs - rhs), initial=0.0)))
    return norms


def phi_hits(g0, g1, Phi, x0, x1, order, tol=1e-6, **kw) -> bool:
    return max(phi_obstruction(g0, g1, Phi, x0, x1, order, **kw)) <= tol


# ---------------------------------------------------------------------------
# Disguise and lift


def disguise(g0: CartanGauge, Phi: ModelMorphism, check=True) -> CartanGauge:
    """gamma_1 = Phi o gamma_0 on the same chart."""
    if Phi.source.dim != g0.model.dim or Phi.source.h_dim != g0.model.h_dim:
        raise NotADisguise("morphism source does not match the gauge model")
    Pq = Phi.quotient_map
    if Pq.shape[0] != Pq.shape[1] or abs(np.linalg.det(Pq)) < 1e-8:
        raise NotADisguise("Phi does not induce an isomorphism g0/h0 -> g1/h1")
    base = g0.base if g0.base is not None else g0.gamma
    coeffs = g0.coeffs if g0.coeffs is not None else np.eye(g0.model.dim)
    C = Phi.lie_map @ coeffs
    n = g0.dim
    gamma = [[E.linear_combination(C[a], [base[b][k] for b in range(len(base))]) for k in range(n)] for a in range(C.shape[0])]
    g1 = CartanGauge(Phi.target, g0.chart, gamma, name=f"{Phi.name}({g0.name})", base=base, coeffs=C)
    if check:
        res = disguise_residual(g0, g1, Phi, g0.chart.sample_grid(2))
        if res > 1e-6:
            raise NumericalError(f"disguise curvature transform residual {res:.3g}")
    return g1


def coordinate_curvature(g: CartanGauge, x):
    """Omega(d_k, d_l) = d gamma + [gamma, gamma] on coordinate vectors."""
    K = curvature(g, x)
    Sm = g.soldering(x)
    return np.einsum("aij,ik,jl->akl", K, Sm, Sm)


def disguise_residual(g0, g1, Phi, points) -> float:
    """Max deviation from Omega_1 = Phi Omega_0 + [Phi gamma_0, Phi gamma_0] - Phi [gamma_0, gamma_0]."""
    c0 = g0.model.g.structure
    c1 = g1.model.g.structure
    worst = 0.0
    for x in points:
        O0 = coordinate_curvature(g0, x)
        O1 = coordinate_curvature(g1, x)
        G0 = g0.matrix(x)
        PG = Phi.lie_map @ G0
        br1 = np.einsum("abe,bk,el->akl", c1, PG, PG)
        br0 = np.einsum("abe,bk,el->akl", c0, G0, G0)
        rhs = np.tensordot(Phi.lie_map, O0, axes=(1, 0)) + br1 - np.tensordot(Phi.lie_map, br0, axes=(1, 0))
        worst = max(worst, float(np.max(np.abs(O1 - rhs))))
    return worst


def lift(g: CartanGauge, k: int, fiber_box=None) -> CartanGauge:
    """Shrink H to the subgroup generated by the first k basis vectors of h.

    The base grows by the complementary h-directions y, realized through
    h(y) = prod exp(y_j f_j): gamma' = Ad(h(y))^{-1} gamma + h(y)^{-1} dh(y).
    """
    model = g.model
    hd = model.h_dim
    if not 0 <= k <= hd:
        raise NotASubalgebra(f"prefix length must lie in [0, {hd}]")
    c = model.g.structure
    if k and np.max(np.abs(c[k:, :k, :k]), initial=0.0) > 1e-10:
        raise NotASubalgebra("the prefix does not span a subalgebra")
    new_model = LocalModel(f"{model.name}|{k}", model.g, k).validate()
    if k == hd:
        return CartanGauge(new_model, g.chart, g.gamma, name=f"lift({g.name})")
    n = g.dim
    m = hd - k
    names = default_names(n + m)
    ys = [E.Var(nm) for nm in names[n:]]
    comp = list(model.g.basis[k:hd])
    cols, H, Hinv = mc_columns(comp, ys)
    # Ad(h)^{-1} e_a in coordinates
    adinv = [expr_coords(model.g, expr_matmul(expr_matmul(Hinv, [[E.num(v) for v in row] for row in b]), H)) for b in model.g.basis]
    # adinv[a][p] is the p-th coordinate of Ad(h)^{-1} e_a
    d = model.dim
    gam = g.gamma
    rows = []
    fib = [expr_coords(model.g, P) for P in cols]
    for p in range(d):
        row = [B.total(B.mul(adinv[a][p], gam[a][j]) for a in range(d)) for j in range(n)]
        row += [fib[j][p] for j in range(m)]
        rows.append(row)
    box = tuple(g.chart.box) + tuple(fiber_box or [(-1.0, 1.0)] * m)
    chart = Chart(box, g.chart.inside)
    return CartanGauge(new_model, chart, rows, name=f"lift({g.name})")


# ---------------------------------------------------------------------------
# Bundle-level development


def develop_base_curve(g0, g1, Phi: ModelMorphism, curve, frames, t_span, tol=1e-8) -> Trajectory:
    """Develop a base curve of g0 into g1 through the bundles.

    The curve is lifted to E0 at the constant frame h0; its E1-development
    (x1(t), h1(t)) solves Ad(h1)^{-1} gamma1(x1') + h1^{-1} h1' = Phi(Ad(h0)^{-1} gamma0(c')).
    The returned trajectory is the base projection; the bundle states are in
    ``meta["bundle"]`` as (x1, vec(h1)) and ``meta["source_velocity"]`` gives
    the g0-coordinates of the lifted source velocity.
    """
    h0, x1, h1 = frames
    h0 = np.eye(g0.model.g.ambient_size) if h0 is None else np.asarray(h0, dtype=float)
    h1 = np.eye(g1.model.g.ambient_size) if h1 is None else np.asarray(h1, dtype=float)
    c = CurveSource(curve)
    Ad0inv = np.linalg.inv(g0.model.Ad(h0))
    P = Phi.lie_map
    alg1 = g1.model.g
    n1, hd1, m1 = g1.dim, g1.model.h_dim, alg1.ambient_size
    hbasis = alg1.basis[:hd1]

    def source_velocity(t):
        return Ad0inv @ (g0.matrix(c.position(t)) @ c.velocity(t))

    def drive(t):
        return P @ source_velocity(t)

    def rhs(t, z):
        x, h = z[:n1], z[n1:].reshape(m1, m1)
        Bv = drive(t)
        W = alg1.coords(h @ alg1.matrix(Bv) @ np.linalg.inv(h))
        G = g1.matrix(x)
        Sm = G[hd1:]
        if np.linalg.cond(Sm) > COND_LIMIT:
            raise SingularCoframe("soldering block is numerically singular")
        dx = np.linalg.solve(Sm, W[hd1:])
        zeta = W[:hd1] - G[:hd1] @ dx
        dh = np.tensordot(zeta, hbasis, axes=(0, 0)) @ h if hd1 else np.zeros((m1, m1))
        return np.concatenate([dx, dh.ravel()])

    z0 = np.concatenate([np.asarray(x1, dtype=float), h1.ravel()])
    inside = lambda z: g1.chart.contains(z[:n1])
    tr = integrate(rhs, float(t_span[0]), z0, float(t_span[1]), rtol=tol, atol=tol, inside=inside)
    base = Trajectory(tr.t, tr.x[:, :n1], tr.dx[:, :n1], tr.status, tr.accepted, tr.rejected, tr.steps, tr.errors, dict(tr.meta))
    base.meta["bundle"] = tr
    base.meta["source_velocity"] = source_velocity
    base.meta["bundle_rhs"] = rhs
    return base


# ---------------------------------------------------------------------------
# Canonical metric


def canonical_base_metric(g: CartanGauge, x, u, inner_product=None) -> float:
    """Length of u for the metric induced on the horizontal complement of h."""
    model = g.model
    d, hd = model.dim, model.h_dim
    G = np.eye(d) if inner_product is None else np.asarray(inner_product, dtype=float)
    for h in model.samples():
        Ad = model.Ad(h)
        if np.max(np.abs(Ad.T @ G @ Ad - G)) > 1e-8:
            raise NotInvariant("inner product is not H-invariant")
    w = g.matrix(x) @ np.asarray(u, dtype=float)
    if hd:
        Hb = np.eye(d)[:, :hd]
        w = w - Hb @ np.linalg.solve(Hb.T @ G @ Hb, Hb.T @ G @ w)
    return float(np.sqrt(w @ G @ w))
