"""Coframings on charts, constant vector fields, flows and torsion data."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from . import expr as E
from .algebra import MatrixLieAlgebra, expr_coords, mc_columns
from .errors import DomainError, SingularCoframe, TooDeep, ValidationError
from .integrate import Trajectory, integrate

COND_LIMIT = 1e12


def default_names(n):
    return tuple(f"x{i + 1}" for i in range(n))


@dataclass(frozen=True, eq=False)
class Chart:
    """Box in R^n, optionally cut down by ``inside > 0``."""

    box: tuple
    inside: object = None
    names: tuple = ()

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if any(not lo < hi for lo, hi in box):
            raise ValidationError("empty chart box")
        object.__setattr__(self, "box", box)
        if not self.names:
            object.__setattr__(self, "names", default_names(len(box)))
        if self.inside is not None:
            ins = E.as_expr(self.inside, set(self.names))
            object.__setattr__(self, "inside", ins)
            object.__setattr__(self, "_pred", E.Compiled([ins], self.names))

    @property
    def dim(self):
        return len(self.box)

    def contains(self, x) -> bool:
        for v, (lo, hi) in zip(x, self.box):
            if not lo <= v <= hi:
                return False
        if self.inside is not None:
            try:
                return self._pred(x)[0] > 0
            except (DomainError, ArithmeticError, ValueError):
                return False
        return True

    def sample_grid(self, k=5, clip=10.0):
        """Cell-centre grid with k nodes per axis (infinite sides clipped)."""
        axes = []
        for lo, hi in self.box:
            lo, hi = max(lo, -clip), min(hi, clip)
            axes.append(lo + (np.arange(k) + 0.5) / k * (hi - lo))
        pts = [np.array(p) for p in itertools.product(*axes)]
        return [p for p in pts if self.contains(p)]

    def to_json(self):
        box = [[_num_json(lo), _num_json(hi)] for lo, hi in self.box]
        out = {"box": box}
        if self.inside is not None:
            out["inside"] = E.to_source(self.inside)
        if self.names != default_names(self.dim):
            out["variables"] = list(self.names)
        return out

    @staticmethod
    def from_json(d):
        box = [[_num_parse(lo), _num_parse(hi)] for lo, hi in d["box"]]
        names = tuple(d.get("variables", ())) or default_names(len(box))
        return Chart(tuple(map(tuple, box)), d.get("inside"), names)


def _num_json(v):
    return v if np.isfinite(v) else ("inf" if v > 0 else "-inf")


def _num_parse(v):
    if v is None:
        raise ValidationError("chart bounds must be numbers or +-inf")
    return float(v)


@dataclass(frozen=True, eq=False)
class Coframing:
    """Rows of ``omega`` are the components of the coframe forms in the dx basis."""

    chart: Chart
    omega: tuple
    inner_product: np.ndarray = None
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n = self.chart.dim
        names = set(self.chart.names)
        om = tuple(tuple(E.as_expr(e, names) for e in row) for row in self.omega)
        if len(om) != n or any(len(r) != n for r in om):
            raise ValidationError(f"omega must be {n}x{n}")
        object.__setattr__(self, "omega", om)
        G = np.eye(n) if self.inner_product is None else np.asarray(self.inner_product, dtype=float)
        if G.shape != (n, n) or np.max(np.abs(G - G.T)) > 1e-12 or np.min(np.linalg.eigvalsh(G)) <= 0:
            raise ValidationError("inner product must be symmetric positive definite")
        object.__setattr__(self, "inner_product", G)
        object.__setattr__(self, "_compiled", E.Compiled([e for r in om for e in r], self.chart.names))

    @property
    def dim(self):
        return self.chart.dim

    @property
    def names(self):
        return self.chart.names

    def matrix(self, x) -> np.ndarray:
        n = self.dim
        return np.array(self._compiled(list(map(float, x)))).reshape(n, n)

    def jet(self, x, order):
        """Coefficient array of shape (n, n, N) for the omega entries around x."""
        S = E.jet_space(self.dim, order)
        X = S.variable(np.asarray(x, dtype=float))
        env = {nm: X[i] for i, nm in enumerate(self.names)}
        return S, np.array([[E.eval_coef(e, S, env) for e in row] for row in self.omega])

    def validate(self, k=5):
        for p in self.chart.sample_grid(k):
            d = np.linalg.det(self.matrix(p))
            if abs(d) < 1e-8:
                raise SingularCoframe(f"det(omega) = {d:.3g} at {p.tolist()}")
        return self

    def to_json(self):
        return {
            "chart": self.chart.to_json(),
            "omega": [[E.to_source(e) for e in row] for row in self.omega],
            "inner_product": self.inner_product.tolist(),
        }

    @staticmethod
    def from_json(d, name=""):
        chart = Chart.from_json(d["chart"])
        return Coframing(chart, d["omega"], d.get("inner_product"), name)


def _solve(W, v):
    if np.linalg.cond(W) > COND_LIMIT:
        raise SingularCoframe("coframe matrix is numerically singular")
    return np.linalg.solve(W, v)


def _solve_small(w, v, n):
    """Solve W u = v for n <= 3 from the flat entry list, with a cheap conditioning test."""
    if n == 1:
        if abs(w[0]) < 1e-300:
            raise SingularCoframe("coframe matrix is numerically singular")
        return np.array([v[0] / w[0]])
    if n == 2:
        a, b, c, d = w
        det = a * d - b * c
        scale = ((a * a + b * b) * (c * c + d * d)) ** 0.5
        if abs(det) <= 1e-12 * scale or scale == 0.0:
            raise SingularCoframe("coframe matrix is numerically singular")
        return np.array([(d * v[0] - b * v[1]) / det, (a * v[1] - c * v[0]) / det])
    W = np.array(w).reshape(n, n)
    return _solve(W, v)


def constant_field(cof: Coframing, v, x) -> np.ndarray:
    """Tangent vector u with omega(x) u = v."""
    return _solve(cof.matrix(x), np.asarray(v, dtype=float))


def _driver(f, dim):
    """Normalize a V-valued driver: constant vector, Exprs of t, or callable."""
    if callable(f):
        return f
    items = list(f)
    if all(isinstance(c, (int, float, np.floating, np.integer)) for c in items):
        vec = np.array(items, dtype=float)
        return lambda t: vec
    comp = E.Compiled([E.as_expr(c, {"t"}) for c in items], ("t",))
    return lambda t: np.array(comp([t]))


def flow(cof: Coframing, f, x0, t_span, tol=1e-8, **kw) -> Trajectory:
    """Integrate x' = omega(x)^{-1} f(t); escape shows up in the status."""
    drive = _driver(f, cof.dim)
    compiled = cof._compiled
    n = cof.dim

    def rhs(t, x):
        return _solve_small(compiled(x.tolist()), drive(t), n)

    t0, t1 = map(float, t_span)
    tr = integrate(rhs, t0, x0, t1, rtol=tol, atol=tol, inside=cof.chart.contains, **kw)
    tr.meta["tol"] = tol
    return tr


# ---------------------------------------------------------------------------
# Torsion


@dataclass
class TorsionTower:
    point: np.ndarray
    depth: int
    tensors: list  # T^(j) with shape (n, n, n) + (n,)*j

    def __getitem__(self, j):
        return self.tensors[j]


def _antisym(T):
    return 0.5 * (T - np.swapaxes(T, 1, 2))


def _contract_last(S, A, B):
    """sum_k A[..., k, :] * B[k, a, :] -> [..., a, :] as jets."""
    return sum(S.mul(A[..., k, None, :], B[k][None, ...] if A.ndim > 2 else B[k]) for k in range(B.shape[0]))


def _frame_derivative(S, T, Einv, order):
    """Append a slot, (...)[d] = sum_k Einv[k, d] d_k T, keeping jets to ``order``."""
    n = Einv.shape[0]
    R, Ei = S.truncate(Einv, order)
    dT = np.stack([S.truncate(S.diff(T, k), order)[1] for k in range(n)], axis=-2)  # (..., k, N)
    out = 0
    for k in range(n):
        out = out + R.mul(dT[..., k, None, :], Ei[k])
    return R, out


def torsion_jets(cof: Coframing, x, order):
    """Jets of T^(0) (valid to ``order``) and of the inverse frame (valid to order+1)."""
    S, W = cof.jet(x, order + 1)
    if np.linalg.cond(W[..., 0]) > COND_LIMIT:
        raise SingularCoframe("coframe matrix is numerically singular")
    n = cof.dim
    Einv = S.matinv(W)
    D = np.empty((n, n, n, S.size))
    for k in range(n):
        for l in range(n):
            D[:, k, l] = S.diff(W[:, l], k) - S.diff(W[:, k], l)
    # T[i, a, b] = sum_{k,l} D[i, k, l] Einv[k, a] Einv[l, b]
    tmp = np.zeros((n, n, n, S.size))  # [i, a, l]
    for k in range(n):
        tmp += S.mul(D[:, k, None, :, :], Einv[k][None, :, None, :])
    T = np.zeros((n, n, n, S.size))
    for l in range(n):
        T += S.mul(tmp[:, :, l, None, :], Einv[l][None, None, :, :])
    return S, T, Einv


def torsion_tower(cof: Coframing, x, depth: int = 0) -> TorsionTower:
    """T^(0..depth) at x with dw = 1/2 T w^w and T^(j+1) the frame derivative of T^(j)."""
    if not 0 <= depth <= 3:
        raise TooDeep("torsion tower depth must be between 0 and 3")
    S, T, Einv = torsion_jets(cof, x, depth)
    out = [_antisym(T[..., 0])]
    cur = T
    for level in range(depth):
        S, cur = _frame_derivative(S, cur, Einv, depth - level - 1)
        Einv = Einv[..., : S.size]
        out.append(_antisym(cur[..., 0]))
    return TorsionTower(np.asarray(x, dtype=float), depth, out)


def bracket_tower(cof: Coframing, x, vs) -> np.ndarray:
    """Iterated bracket tau_p(v1..vp) = [v1,[v2,...,vp]] of constant fields, as a V-vector.

    Evaluated from the torsion jets alone through
    tau_{p+1} = L_{v1} tau_p - T(v1, tau_p).
    """
    vs = [np.asarray(v, dtype=float) for v in vs]
    p = len(vs)
    if not 1 <= p <= 4:
        raise TooDeep("bracket tower needs between 1 and 4 vectors")
    if p == 1:
        return vs[0].copy()
    S, T, Einv = torsion_jets(cof, x, p - 2)
    n = cof.dim
    tau = S.constant(vs[-1])
    for v in reversed(vs[:-1]):
        field_ = sum(Einv[:, a] * v[a] for a in range(n))  # (n, N) components of the constant field
        lie = sum(S.mul(field_[k], S.diff(tau, k)) for k in range(n))
        Tv = np.einsum("iabN,a->ibN", T, v)
        twist = sum(S.mul(Tv[:, b], tau[b]) for b in range(n))
        tau = lie - twist
    return tau[..., 0]


# ---------------------------------------------------------------------------
# Lengths and symmetries


def speeds(cof: Coframing, traj: Trajectory) -> np.ndarray:
    G = cof.inner_product
    out = np.empty(len(traj.t))
    for i, (x, dx) in enumerate(zip(traj.x, traj.dx)):
        w = cof.matrix(x) @ dx
        out[i] = np.sqrt(w @ G @ w)
    return out


def curve_length(cof: Coframing, traj: Trajectory) -> float:
    """Canonical-metric length by composite Simpson over the samples."""
    if len(traj.t) < 2:
        return 0.0
    return float(abs(scipy.integrate.simpson(speeds(cof, traj), x=traj.t)))


def lie_derivative(cof: Coframing, Y, x) -> np.ndarray:
    """(L_Y omega)^i_k = Y^j d_j omega^i_k + omega^i_j d_k Y^j."""
    n = cof.dim
    S, W = cof.jet(x, 1)
    X = S.variable(np.asarray(x, dtype=float))
    env = {nm: X[i] for i, nm in enumerate(cof.names)}
    Yj = np.array([E.eval_coef(E.as_expr(y, set(cof.names)), S, env) for y in Y])
    val = Yj[:, 0]
    dY = np.array([[Yj[j, 1 + k] for k in range(n)] for j in range(n)])  # dY[j, k] = d_k Y^j
    dW = np.stack([W[:, :, 1 + j] for j in range(n)], axis=0)  # dW[j] = d_j omega
    return np.einsum("j,jik->ik", val, dW) + W[..., 0] @ dY


def symmetry_residual(cof: Coframing, Y, grid) -> float:
    """max over the grid of the Frobenius norm of L_Y omega."""
    return max(float(np.linalg.norm(lie_derivative(cof, Y, p))) for p in grid)


# ---------------------------------------------------------------------------
# Maurer-Cartan coframings


def group_element(alg: MatrixLieAlgebra, x):
    """exp(x1 e1) exp(x2 e2) ... for coordinates of the second kind."""
    from .algebra import expm

    g = np.eye(alg.ambient_size)
    for xi, b in zip(x, alg.basis):
        g = g @ expm(xi * b)
    return g


def maurer_cartan(alg: MatrixLieAlgebra, box=None, name="") -> Coframing:
    """g^{-1} dg in coordinates of the second kind, valued in the basis of ``alg``."""
    d = alg.dim
    names = default_names(d)
    cols, _, _ = mc_columns(list(alg.basis), [E.Var(nm) for nm in names])
    coords = [expr_coords(alg, P) for P in cols]
    omega = [[coords[k][a] for k in range(d)] for a in range(d)]
    if box is None:
        box = [(-1.0, 1.0)] * d
    return Coframing(Chart(tuple(box)), omega, name=name or f"MC({alg.name})")
