"""Morphism curvature, first variation along morphisms, projective Jacobi fields."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import ModelMorphism, inclusion, line_model
from .cartan import CartanGauge, curvature_tower, develop_base_curve, maurer_cartan_gauge
from .errors import IllDefined, NotTorsionFree, ValidationError
from .integrate import COMPLETED, Trajectory, integrate


class QuotientFrame:
    """Coordinates on R^d modulo the column span of ``sub``, via a greedy complement of standard vectors."""

    def __init__(self, sub: np.ndarray, d: int, tol=1e-10):
        sub = np.asarray(sub, dtype=float).reshape(d, -1)
        cols = []
        rank = 0
        for k in range(sub.shape[1]):
            trial = np.column_stack(cols + [sub[:, k]])
            if np.linalg.matrix_rank(trial, tol) > rank:
                cols.append(sub[:, k])
                rank += 1
        self.span = np.column_stack(cols) if cols else np.zeros((d, 0))
        comp = []
        for k in range(d):
            e = np.zeros(d)
            e[k] = 1.0
            trial = np.column_stack(cols + [e])
            if np.linalg.matrix_rank(trial, tol) > rank:
                cols.append(e)
                comp.append(k)
                rank += 1
        self.complement = comp
        self.dim = len(comp)
        self._full_inv = np.linalg.inv(np.column_stack(cols))

    def project(self, v):
        """Complement coordinates of v (last axis of length d)."""
        return (self._full_inv @ np.asarray(v, dtype=float).T).T[..., -self.dim :] if self.dim else np.zeros(np.shape(v)[:-1] + (0,))

    def lift(self, a):
        """Representative in R^d built from the complement vectors."""
        d = self._full_inv.shape[0]
        out = np.zeros(d)
        out[self.complement] = a
        return out


@dataclass
class VariationState:
    t: float
    a: np.ndarray


@dataclass
class MorphismCurvature:
    """R[k, i, j]: k over g1/Phi g0, i over g0/h0, j over Q = g1/(Phi g0 + h1)."""

    R: np.ndarray
    point: np.ndarray
    residual: float
    deformations: QuotientFrame
    targets: QuotientFrame

    def __call__(self, A, a):
        """R(A, a-bar) for A in g0/h0 and a in g1/Phi g0."""
        qa = self.targets.project(self.deformations.lift(a))
        return np.einsum("kij,i,j->k", self.R, A, qa)


def _frames(g1: CartanGauge, Phi: ModelMorphism):
    d1, hd1 = g1.model.dim, g1.model.h_dim
    L = Phi.lie_map
    dq = QuotientFrame(L, d1)
    tq = QuotientFrame(np.column_stack([L, np.eye(d1)[:, :hd1]]), d1)
    return dq, tq


def _morphism_curvature_from_K(K, Phi: ModelMorphism, hd1, dq, tq, point):
    L = Phi.lie_map
    hd0 = Phi.source.h_dim
    bar = lambda v: v[hd1:]
    Aq = [bar(L[:, hd0 + i]) for i in range(Phi.source.base_dim)]
    R = np.zeros((dq.dim, len(Aq), tq.dim))
    for i, a in enumerate(Aq):
        for j in range(tq.dim):
            C = bar(tq.lift(np.eye(tq.dim)[j]))
            R[:, i, j] = dq.project(np.einsum("aij,i,j->a", K, a, C))
    # lift independence: q K(Phi A, Phi X) must vanish for X in g0
    res = 0.0
    for a in Aq:
        for X in L.T:
            res = max(res, float(np.max(np.abs(dq.project(np.einsum("aij,i,j->a", K, a, bar(X)))), initial=0.0)))
    return MorphismCurvature(R, np.asarray(point, dtype=float), res, dq, tq)


def morphism_curvature(g1: CartanGauge, Phi: ModelMorphism, x1, h1=None) -> MorphismCurvature:
    """Morphism curvature at the frame h1 over x1 (identity section by default)."""
    if Phi.target.dim != g1.model.dim or Phi.target.h_dim != g1.model.h_dim:
        raise ValidationError("morphism target does not match the gauge model")
    K = curvature_tower(g1, x1, 0, h1)[0]
    dq, tq = _frames(g1, Phi)
    mc = _morphism_curvature_from_K(K, Phi, g1.model.h_dim, dq, tq, x1)
    if mc.residual > 1e-6:
        raise IllDefined(f"morphism curvature depends on the lift (residual {mc.residual:.3g})")
    return mc


def _rho(Phi: ModelMorphism, g1: CartanGauge, dq: QuotientFrame):
    """rho(X) on g1/Phi g0 coordinates as a function of X in g0 coordinates."""
    c = g1.model.g.structure
    L = Phi.lie_map
    reps = [dq.lift(e) for e in np.eye(dq.dim)]
    cols = np.zeros((L.shape[1], dq.dim, dq.dim))
    for x in range(L.shape[1]):
        Y = L[:, x]
        for k, r in enumerate(reps):
            cols[x, :, k] = dq.project(np.einsum("abe,b,e->a", c, Y, r))
    return lambda X: np.tensordot(X, cols, axes=(0, 0))


def _bundle_state(curve: Trajectory, n1, m1):
    bundle = curve.meta.get("bundle")
    if bundle is None:
        raise ValidationError("curve must come from develop_base_curve")
    if curve.status != COMPLETED:
        raise ValidationError(f"morphism curve has status {curve.status}")

    def state(t):
        z = bundle(t)
        return z[:n1], z[n1:].reshape(m1, m1)

    return bundle, state


def integrate_first_variation(g0, g1, Phi, curve: Trajectory, a0, tol=1e-10) -> Trajectory:
    """Solve da = -rho(omega0(x')) a + R(Phi omega0(x'), a-bar) along a morphism curve.

    ``curve`` is the output of :func:`develop_base_curve`; the returned
    trajectory samples a(t) in the greedy complement coordinates of g1/Phi g0.
    """
    n1, m1 = g1.dim, g1.model.g.ambient_size
    hd0 = Phi.source.h_dim
    bundle, state = _bundle_state(curve, n1, m1)
    vel = curve.meta["source_velocity"]
    dq, tq = _frames(g1, Phi)
    rho = _rho(Phi, g1, dq)
    a0 = np.asarray(a0, dtype=float)
    if a0.shape[0] != dq.dim or not np.all(np.isfinite(a0)):
        raise ValidationError(f"initial deformation must be a finite vector of length {dq.dim}")
    cols = a0.ndim == 2

    def rhs(t, a):
        x, h = state(t)
        X = vel(t)
        K = curvature_tower(g1, x, 0, h)[0]
        mc = _morphism_curvature_from_K(K, Phi, g1.model.h_dim, dq, tq, x)
        A = a.reshape(dq.dim, -1)
        qa = tq.project(np.array([dq.lift(A[:, k]) for k in range(A.shape[1])]))
        out = -rho(X) @ A + np.einsum("kij,i,jm->km", mc.R, X[hd0:], qa.T)
        return out.ravel()

    tr = integrate(rhs, float(bundle.t[0]), a0.ravel(), float(bundle.t[-1]), rtol=tol, atol=tol)
    if cols:
        tr.meta["columns"] = a0.shape[1]
    tr.meta["deformation_basis"] = dq.complement
    return tr


def variation_states(tr: Trajectory) -> list[VariationState]:
    return [VariationState(float(t), x.copy()) for t, x in zip(tr.t, tr.x)]


# ---------------------------------------------------------------------------
# Projective connections


def _check_projective(g: CartanGauge):
    m = g.model.g.ambient_size
    n = m - 1
    if g.model.dim != m * m - 1 or g.model.base_dim != n:
        raise ValidationError("gauge is not modelled on projective space")
    # the quotient must be spanned by E_{I0}
    for k in range(n):
        b = g.model.g.basis[g.model.h_dim + k]
        if np.count_nonzero(b) != 1 or b[k + 1, 0] != 1.0:
            raise ValidationError("projective gauge must use the E_{I0} quotient basis")
    return n


def projective_geodesic(g: CartanGauge, start, frame=None, t_max=1.0, tol=1e-10) -> Trajectory:
    """Unit-parameter geodesic: development of the model line t -> exp(t E10)."""
    n = _check_projective(g)
    src = line_model(n)
    g0 = maurer_cartan_gauge(src, [(-np.inf, np.inf)])
    Phi = inclusion(src, g.model)
    tr = develop_base_curve(g0, g, Phi, ["t"], (None, start, frame), (0.0, t_max), tol)
    tr.meta["morphism"] = Phi
    tr.meta["source_gauge"] = g0
    return tr


def _pulled_back(g: CartanGauge, curve: Trajectory, state, t):
    """omega(d/dt) at the frame along the curve, as an ambient matrix."""
    bundle = curve.meta["bundle"]
    n = g.dim
    z = bundle(t)
    dz = curve.meta["bundle_rhs"](t, z)
    x, h = z[:n], z[n:].reshape(h_shape := (g.model.g.ambient_size,) * 2)
    dx, dh = dz[:n], dz[n:].reshape(h_shape)
    hinv = np.linalg.inv(h)
    Gam = g.model.g.matrix(g.matrix(x) @ dx)
    return x, h, hinv @ Gam @ h + hinv @ dh


def projective_jacobi(g: CartanGauge, geodesic: Trajectory, a0, tol=1e-10) -> Trajectory:
    """Integrate the Jacobi system of a torsion-free projective connection along a geodesic.

    State is (a^I_0, a^I_1) for I = 2..n, stacked; a0 may carry several columns.
    """
    n = _check_projective(g)
    m = n + 1
    r = n - 1
    _, state = _bundle_state(geodesic, n, m)
    bundle = geodesic.meta["bundle"]
    a0 = np.asarray(a0, dtype=float)
    if a0.shape[0] != 2 * r:
        raise ValidationError(f"initial data must have length {2 * r}")
    alg = g.model.g

    def blocks(t):
        x, h, W = _pulled_back(g, geodesic, state, t)
        K = curvature_tower(g, x, 0, h)[0]
        # KM[i, j] = ambient matrix of K(E_{i+1,0}, E_{j+1,0})
        KM = np.array([[alg.matrix(K[:, i, j]) for j in range(n)] for i in range(n)])
        return W, KM

    W0, K0 = blocks(float(bundle.t[0]))
    tors = float(np.max(np.abs(K0[0, 1:, 2:, 0]), initial=0.0))
    if tors > 1e-6:
        raise NotTorsionFree(f"K^I_01J residual {tors:.3g}")

    def rhs(t, a):
        W, KM = blocks(t)
        A = a.reshape(2 * r, -1)
        a0_, a1_ = A[:r], A[r:]
        WIJ = W[2:, 2:]
        K01 = KM[0, 1:, 2:, 0].T  # [I, J]
        K11 = KM[0, 1:, 2:, 1].T
        d0 = a0_ * W[0, 0] + a1_ * W[1, 0] - WIJ @ a0_ + W[1, 0] * (K01 @ a0_)
        d1 = a0_ * W[0, 1] + a1_ * W[1, 1] - WIJ @ a1_ + W[1, 0] * (K11 @ a0_)
        return np.concatenate([d0, d1]).ravel()

    tr = integrate(rhs, float(bundle.t[0]), a0.ravel(), float(bundle.t[-1]), rtol=tol, atol=tol)
    tr.meta["columns"] = 1 if a0.ndim == 1 else a0.shape[1]
    return tr


def conjugate_point(g: CartanGauge, geodesic: Trajectory, t_max=None, tol=1e-10):
    """First t* > 0 where a Jacobi field vanishing at 0 vanishes again, or None."""
    n = _check_projective(g)
    r = n - 1
    a0 = np.zeros((2 * r, r))
    a0[r:] = np.eye(r)
    tr = projective_jacobi(g, geodesic, a0, tol)
    t_end = tr.t[-1] if t_max is None else min(t_max, tr.t[-1])

    def det(t):
        Y = tr(t).reshape(2 * r, r)[:r]
        return float(np.linalg.det(Y))

    ts = tr.t[(tr.t > 0) & (tr.t <= t_end)]
    if len(ts) < 2:
        return None
    # det Y ~ t^r > 0 right after the start
    t_prev = ts[0]
    for t in ts[1:]:
        if det(t) <= 0.0:
            lo, hi = t_prev, t
            while hi - lo > 1e-7:
                mid = 0.5 * (lo + hi)
                if det(mid) > 0.0:
                    lo = mid
                else:
                    hi = mid
            return 0.5 * (lo + hi)
        t_prev = t
    return None
