"""Surfaces, their orthonormal frame bundles and the rolling 2-plane field."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as E
from .coframing import Chart, Coframing, flow
from .errors import DegenerateMetric, ValidationError
from .expr import build as B
from .integrate import Trajectory

X, Y = E.Var("x1"), E.Var("x2")


@dataclass(frozen=True, eq=False)
class SurfaceMetric:
    """First fundamental form E dx1^2 + 2F dx1 dx2 + G dx2^2 on a 2-dim chart."""

    chart: Chart
    E: object
    F: object
    G: object
    name: str = ""

    def __post_init__(self):
        if self.chart.dim != 2:
            raise ValidationError("surface charts are 2-dimensional")
        names = set(self.chart.names)
        for k in ("E", "F", "G"):
            object.__setattr__(self, k, E.as_expr(getattr(self, k), names))
        object.__setattr__(self, "_c", E.Compiled([self.E, self.F, self.G], self.chart.names))

    def matrix(self, p):
        e, f, g = self._c(list(map(float, p)))
        return np.array([[e, f], [f, g]])

    def validate(self):
        for p in self.chart.sample_grid(5):
            e, f, g = self._c(list(p))
            if not (e > 0 and g > 0 and e * g - f * f > 0):
                raise DegenerateMetric(f"metric degenerate at {p.tolist()}")
        return self

    def to_json(self):
        return {"chart": self.chart.to_json(), "E": E.to_source(self.E), "F": E.to_source(self.F), "G": E.to_source(self.G)}

    @staticmethod
    def from_json(d, name=""):
        return SurfaceMetric(Chart.from_json(d["chart"]), d["E"], d["F"], d["G"], name)

    # Gram-Schmidt data ------------------------------------------------
    @property
    def coframe(self):
        """(eta, alpha): rows eta1, eta2 and the connection form, each as (dx1, dx2) components."""
        cache = self.__dict__.setdefault("_gs", {})
        if "v" not in cache:
            sE = B.call("sqrt", self.E)
            eta1 = (sE, B.div(self.F, sE))
            eta2 = (E.num(0.0), B.call("sqrt", B.div(B.sub(B.mul(self.E, self.G), B.power(self.F, 2.0)), self.E)))
            c1 = B.sub(E.diff(eta1[1], "x1"), E.diff(eta1[0], "x2"))
            c2 = B.sub(E.diff(eta2[1], "x1"), E.diff(eta2[0], "x2"))
            D = B.sub(B.mul(eta1[0], eta2[1]), B.mul(eta1[1], eta2[0]))
            alpha = tuple(
                B.neg(B.div(B.add(B.mul(c1, eta1[k]), B.mul(c2, eta2[k])), D)) for k in range(2)
            )
            cache["v"] = ((eta1, eta2), alpha)
        return cache["v"]


def gauss_curvature(S: SurfaceMetric, p) -> float:
    """K from d(alpha) = K eta1 ^ eta2 with exact jets."""
    (eta1, eta2), alpha = S.coframe
    J = E.jet_space(2, 1)
    Xv = J.variable(np.asarray(p, dtype=float))
    env = {"x1": Xv[0], "x2": Xv[1]}
    a = [E.eval_coef(e, J, env) for e in alpha]
    dalpha = a[1][1] - a[0][2]
    ev = lambda e: E.eval_coef(e, J, env)[0]
    D = ev(eta1[0]) * ev(eta2[1]) - ev(eta1[1]) * ev(eta2[0])
    return float(dalpha / D)


def _min_expr(a, b):
    """min(a, b) = (a + b - |a - b|)/2, so both predicates hold iff it is positive."""
    return B.mul(E.num(0.5), B.sub(B.add(a, b), B.call("abs", B.sub(a, b))))


def _rename(e, mapping):
    return E.substitute(e, {k: E.Var(v) for k, v in mapping.items()})


def frame_bundle_coframing(S: SurfaceMetric) -> Coframing:
    """Coframing (omega12, omega1, omega2) on chart x R with coordinates (x1, x2, x3 = theta).

    omega1 = cos(theta) eta1 - sin(theta) eta2, omega2 = sin(theta) eta1 + cos(theta) eta2,
    omega12 = alpha + dtheta, so d omega12 = K omega1 ^ omega2.
    """
    (eta1, eta2), alpha = S.coframe
    th = E.Var("x3")
    c, s = B.call("cos", th), B.call("sin", th)
    zero, one = E.num(0.0), E.num(1.0)
    w1 = [B.sub(B.mul(c, eta1[k]), B.mul(s, eta2[k])) for k in range(2)] + [zero]
    w2 = [B.add(B.mul(s, eta1[k]), B.mul(c, eta2[k])) for k in range(2)] + [zero]
    w12 = [alpha[0], alpha[1], one]
    box = tuple(S.chart.box) + ((-float("inf"), float("inf")),)
    chart = Chart(box, S.chart.inside)
    return Coframing(chart, [w12, w1, w2], name=f"frames({S.name})")


def structure_residual(S: SurfaceMetric, p) -> float:
    """Max deviation from d w1 = -w12^w2, d w2 = w12^w1, d w12 = K w1^w2 at (p, theta)."""
    from .coframing import torsion_tower

    cof = frame_bundle_coframing(S)
    K = gauss_curvature(S, p[:2])
    T = torsion_tower(cof, p, 0)[0]
    # dw = 1/2 T w^w with index order (w12, w1, w2)
    want = np.zeros((3, 3, 3))
    want[0, 1, 2], want[0, 2, 1] = K, -K
    want[1, 0, 2], want[1, 2, 0] = -1.0, 1.0
    want[2, 0, 1], want[2, 1, 0] = 1.0, -1.0
    return float(np.max(np.abs(T - want)))


# ---------------------------------------------------------------------------
# Rolling space


def _inv_upper(eta1, eta2):
    """Inverse of [[a, b], [0, d]] as expressions."""
    a, b = eta1
    d = eta2[1]
    return [[B.div(E.num(1.0), a), B.neg(B.div(b, B.mul(a, d)))], [E.num(0.0), B.div(E.num(1.0), d)]]


@dataclass(frozen=True, eq=False)
class RollingSpace:
    S: SurfaceMetric
    S2: SurfaceMetric
    chart: Chart
    fields: tuple  # two tuples of 5 Exprs

    @property
    def names(self):
        return self.chart.names

    def field_values(self, p):
        c = self.__dict__.get("_fc")
        if c is None:
            c = E.Compiled([e for f in self.fields for e in f], self.names)
            object.__setattr__(self, "_fc", c)
        return np.array(c(list(map(float, p)))).reshape(2, 5)

    def form_exprs(self):
        """Rows of the three Pfaffian equations (w1-w1', w2-w2', w12-w12') in dx1..dx5."""
        cache = self.__dict__.setdefault("_forms", {})
        if "v" in cache:
            return cache["v"]
        (e1, e2), al = self.S.coframe
        (f1, f2), al2 = self.S2.coframe
        mp = {"x1": "x3", "x2": "x4"}
        f1 = [_rename(e, mp) for e in f1]
        f2 = [_rename(e, mp) for e in f2]
        al2 = [_rename(e, mp) for e in al2]
        psi = E.Var("x5")
        c, s = B.call("cos", psi), B.call("sin", psi)
        z = E.num(0.0)
        rows = [
            [e1[0], e1[1], B.neg(B.sub(B.mul(c, f1[0]), B.mul(s, f2[0]))), B.neg(B.sub(B.mul(c, f1[1]), B.mul(s, f2[1]))), z],
            [e2[0], e2[1], B.neg(B.add(B.mul(s, f1[0]), B.mul(c, f2[0]))), B.neg(B.add(B.mul(s, f1[1]), B.mul(c, f2[1]))), z],
            [al[0], al[1], B.neg(al2[0]), B.neg(al2[1]), E.num(-1.0)],
        ]
        cache["v"] = rows
        return rows

    def pfaffian(self, p, v):
        """Values of the three Pfaffian forms at p on the tangent vector v."""
        c = self.__dict__.get("_pc")
        if c is None:
            c = E.Compiled([e for r in self.form_exprs() for e in r], self.names)
            object.__setattr__(self, "_pc", c)
        M = np.array(c(list(map(float, p)))).reshape(3, 5)
        return M @ np.asarray(v, dtype=float)


def rolling_space(S: SurfaceMetric, S2: SurfaceMetric) -> RollingSpace:
    """Space of tangent-space isometries with coordinates (x, y, x', y', psi).

    The frame on S is gauge-fixed at theta = 0 and psi is the frame angle on S'.
    """
    S.validate()
    S2.validate()
    (e1, e2), al = S.coframe
    (f1, f2), al2 = S2.coframe
    mp = {"x1": "x3", "x2": "x4"}
    f1 = tuple(_rename(e, mp) for e in f1)
    f2 = tuple(_rename(e, mp) for e in f2)
    al2 = [_rename(e, mp) for e in al2]
    Einv = _inv_upper(e1, e2)
    Finv = _inv_upper(f1, f2)
    psi = E.Var("x5")
    c, s = B.call("cos", psi), B.call("sin", psi)
    # eta'(u') = R(psi)^T e_k, R = [[c, -s], [s, c]]
    Rt = [[c, s], [B.neg(s), c]]
    fields = []
    for k in range(2):
        u = [Einv[0][k], Einv[1][k]]
        w = [Rt[0][k], Rt[1][k]]
        u2 = [B.add(B.mul(Finv[i][0], w[0]), B.mul(Finv[i][1], w[1])) for i in range(2)]
        dpsi = B.sub(B.add(B.mul(al[0], u[0]), B.mul(al[1], u[1])), B.add(B.mul(al2[0], u2[0]), B.mul(al2[1], u2[1])))
        fields.append((u[0], u[1], u2[0], u2[1], dpsi))
    box = tuple(S.chart.box) + tuple(S2.chart.box) + ((-float("inf"), float("inf")),)
    inside = None
    if S.chart.inside is not None or S2.chart.inside is not None:
        parts = []
        if S.chart.inside is not None:
            parts.append(S.chart.inside)
        if S2.chart.inside is not None:
            parts.append(_rename(S2.chart.inside, mp))
        inside = parts[0] if len(parts) == 1 else _min_expr(*parts)
    rs = RollingSpace(S, S2, Chart(box, inside), tuple(fields))
    for p in _config_samples(rs, 3):
        vals = rs.field_values(p)
        sv = np.linalg.svd(vals, compute_uv=False)
        if sv[-1] < 1e-8 * sv[0]:
            raise DegenerateMetric(f"plane field degenerates at {p.tolist()}")
        semi = np.max(np.abs(np.array([rs.pfaffian(p, v) for v in vals])))
        if semi > 1e-8:
            raise DegenerateMetric(f"plane field does not solve the Pfaffian system at {p.tolist()}")
    return rs


def _config_samples(rs, k):
    g1 = rs.S.chart.sample_grid(k)
    g2 = rs.S2.chart.sample_grid(k)
    out = []
    for i, a in enumerate(g1):
        b = g2[(3 * i + 1) % len(g2)]
        out.append(np.concatenate([a, b, [0.3 + 0.7 * i]]))
    return out


def _bracket(S, Xc, Yc):
    """[X, Y]^i = X^k d_k Y^i - Y^k d_k X^i on coefficient arrays (5, N)."""
    n = Xc.shape[0]
    out = np.zeros_like(Xc)
    for k in range(n):
        out += S.mul(Xc[k], S.diff(Yc, k)) - S.mul(Yc[k], S.diff(Xc, k))
    return out


def _rank(vectors, rel=1e-8):
    sv = np.linalg.svd(np.array(vectors), compute_uv=False)
    return int(np.sum(sv >= rel * sv[0])) if sv[0] > 0 else 0


def growth_ranks(rs: RollingSpace, point) -> tuple:
    """Ranks of P, P + [P, P] and P^(1) + [P^(1), P^(1)] at ``point``."""
    S = E.jet_space(5, 2)
    Xv = S.variable(np.asarray(point, dtype=float))
    env = {nm: Xv[i] for i, nm in enumerate(rs.names)}
    X1 = np.array([E.eval_coef(e, S, env) for e in rs.fields[0]])
    X2 = np.array([E.eval_coef(e, S, env) for e in rs.fields[1]])
    X3 = _bracket(S, X1, X2)
    X4 = _bracket(S, X1, X3)
    X5 = _bracket(S, X2, X3)
    v = [X1[:, 0], X2[:, 0], X3[:, 0], X4[:, 0], X5[:, 0]]
    return (_rank(v[:2]), _rank(v[:3]), _rank(v))


def rank_map(rs: RollingSpace, points) -> dict:
    return {"points": [list(map(float, p)) for p in points], "ranks": [list(growth_ranks(rs, p)) for p in points]}


# ---------------------------------------------------------------------------
# Characteristic curves


def frame_angle(S: SurfaceMetric, p, direction) -> float:
    """theta whose first frame vector is the unit tangent ``direction`` at p."""
    (eta1, eta2), _ = S.coframe
    c = E.Compiled([eta1[0], eta1[1], eta2[0], eta2[1]], S.chart.names)
    M = np.array(c(list(map(float, p)))).reshape(2, 2)
    a, b = M @ np.asarray(direction, dtype=float)
    if abs(np.hypot(a, b) - 1.0) > 1e-8:
        raise ValidationError("direction is not a unit vector")
    return float(np.arctan2(-b, a))


def _product_coframing(S, S2):
    c1 = frame_bundle_coframing(S)
    c2 = frame_bundle_coframing(S2)
    mp = {"x1": "x4", "x2": "x5", "x3": "x6"}
    z = E.num(0.0)
    rows = [list(r) + [z, z, z] for r in c1.omega] + [[z, z, z] + [_rename(e, mp) for e in r] for r in c2.omega]
    ins = None
    if c1.chart.inside is not None and c2.chart.inside is None:
        ins = c1.chart.inside
    elif c2.chart.inside is not None and c1.chart.inside is None:
        ins = _rename(c2.chart.inside, mp)
    elif c1.chart.inside is not None:
        ins = _min_expr(c1.chart.inside, _rename(c2.chart.inside, mp))
    return Coframing(Chart(tuple(c1.chart.box) + tuple(c2.chart.box), ins), rows, name="product")


@dataclass
class CharacteristicResult:
    trajectory: Trajectory  # in 5-space
    frames: Trajectory  # in the product of frame bundles
    tangency_residual: float
    geodesic_residuals: tuple = field(default=(0.0, 0.0))


def characteristic_curve(rs: RollingSpace, data, t_span, tol=1e-8) -> CharacteristicResult:
    """Roll along geodesics: data = (p, u, p2, u2, speed_ratio) with unit directions.

    Both frames move by the geodesic (parallel) flow; speed_ratio scales the
    arc-length speed on S' (tangency to the plane field requires 1).
    """
    p, u, p2, u2 = data[:4]
    ratio = float(data[4]) if len(data) > 4 else 1.0
    th = frame_angle(rs.S, p, u)
    th2 = frame_angle(rs.S2, p2, u2)
    prod = _product_coframing(rs.S, rs.S2)
    z0 = np.array([p[0], p[1], th, p2[0], p2[1], th2], dtype=float)
    fr = flow(prod, [0.0, 1.0, 0.0, 0.0, ratio, 0.0], z0, t_span, tol)
    x5 = np.column_stack([fr.x[:, 0], fr.x[:, 1], fr.x[:, 3], fr.x[:, 4], fr.x[:, 5] - fr.x[:, 2]])
    v5 = np.column_stack([fr.dx[:, 0], fr.dx[:, 1], fr.dx[:, 3], fr.dx[:, 4], fr.dx[:, 5] - fr.dx[:, 2]])
    tr = Trajectory(fr.t, x5, v5, fr.status, fr.accepted, fr.rejected, fr.steps, fr.errors, dict(fr.meta))
    tang = max(float(np.max(np.abs(rs.pfaffian(x, v)))) for x, v in zip(x5, v5))
    g1 = geodesic_residual(rs.S, fr.x[:, :3])
    g2 = geodesic_residual(rs.S2, fr.x[:, 3:], ratio)
    tr.meta["tangency_residual"] = tang
    return CharacteristicResult(tr, fr, tang, (g1, g2))


def christoffel(S: SurfaceMetric, p):
    """Gamma[i, j, k] of the Levi-Civita connection at p."""
    J = E.jet_space(2, 1)
    Xv = J.variable(np.asarray(p, dtype=float))
    env = {"x1": Xv[0], "x2": Xv[1]}
    e, f, g = (E.eval_coef(x, J, env) for x in (S.E, S.F, S.G))
    gm = np.array([[e[0], f[0]], [f[0], g[0]]])
    dg = np.array([[[e[1 + k], f[1 + k]], [f[1 + k], g[1 + k]]] for k in range(2)])  # dg[k, i, j]
    ginv = np.linalg.inv(gm)
    # low[l, j, k] = 1/2 (d_j g_lk + d_k g_lj - d_l g_jk)
    low = np.zeros((2, 2, 2))
    for l in range(2):
        for j in range(2):
            for k in range(2):
                low[l, j, k] = 0.5 * (dg[j, l, k] + dg[k, l, j] - dg[l, j, k])
    return np.einsum("il,ljk->ijk", ginv, low)


def geodesic_residual(S: SurfaceMetric, frames, speed=1.0) -> float:
    """Max of |x'' + Gamma(x', x')| along frame-bundle geodesic flow samples."""
    cof = frame_bundle_coframing(S)
    v = np.array([0.0, speed, 0.0])
    worst = 0.0
    for z in frames:
        Sj, W = cof.jet(z, 1)
        Winv = Sj.matinv(W)
        V = (Winv * v[None, :, None]).sum(axis=1)
        vel = V[:, 0]
        acc = sum(V[:, 1 + k] * vel[k] for k in range(3))
        G = christoffel(S, z[:2])
        res = acc[:2] + np.einsum("ijk,j,k->i", G, vel[:2], vel[:2])
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


def closure_time(traj: Trajectory, embed, tol=1e-4, t_min=1.0, samples_per_unit=200):
    """First time after t_min where embed(x(t)) returns within tol of embed(x(0))."""
    import scipy.optimize

    start = embed(traj.x[0])
    a, b = float(traj.t[0]), float(traj.t[-1])
    ts = np.linspace(a, b, max(3, int((b - a) * samples_per_unit)))
    dist = lambda s: float(np.linalg.norm(embed(traj(s)) - start))
    d = np.array([dist(s) for s in ts])
    for i in range(1, len(ts) - 1):
        if ts[i] - a < t_min or not (d[i] <= d[i - 1] and d[i] <= d[i + 1]):
            continue
        r = scipy.optimize.minimize_scalar(dist, bounds=(ts[i - 1], ts[i + 1]), method="bounded", options={"xatol": 1e-12})
        if r.fun <= tol:
            return float(r.x), float(r.fun)
    return None
