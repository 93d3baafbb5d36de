"""Coframing morphisms: obstruction tensors, hitting tests and local integration."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as E
from .coframing import COND_LIMIT, Coframing, torsion_tower
from .errors import IntegrationEscaped, ObstructionTooLarge, SingularCoframe, TooDeep, ValidationError
from .integrate import COMPLETED, integrate


@dataclass
class Obstruction:
    order: int
    tensor: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.tensor), initial=0.0))


def _as_map(A, n1, n0):
    A = np.asarray(A, dtype=float).reshape(n1, n0)
    if not np.all(np.isfinite(A)):
        raise ValidationError("A must have finite entries")
    return A


def _pull(T, A):
    """Precompose every input slot of T[a, i, j, ...] with A."""
    out = T
    for s in range(1, T.ndim):
        out = np.moveaxis(np.tensordot(out, A, axes=(s, 0)), -1, s)
    return out


def obstruction_tower(cof0: Coframing, cof1: Coframing, A, m0, m1, j: int) -> list[Obstruction]:
    """Ob^(i) = T1^(i)(m1) o (L2 A x A^i) - A T0^(i)(m0) for i <= j."""
    if not 0 <= j <= 3:
        raise TooDeep("obstruction order must be between 0 and 3")
    A = _as_map(A, cof1.dim, cof0.dim)
    t0 = torsion_tower(cof0, m0, j)
    t1 = torsion_tower(cof1, m1, j)
    return [Obstruction(i, _pull(t1[i], A) - np.tensordot(A, t0[i], axes=(1, 0))) for i in range(j + 1)]


def obstruction(cof0, cof1, A, m0, m1, j: int) -> Obstruction:
    return obstruction_tower(cof0, cof1, A, m0, m1, j)[j]


def default_tolerance(cof0, cof1, m0, m1) -> float:
    scale = max(
        float(np.max(np.abs(torsion_tower(cof0, m0, 0)[0]), initial=0.0)),
        float(np.max(np.abs(torsion_tower(cof1, m1, 0)[0]), initial=0.0)),
    )
    return 1e-6 * max(1.0, scale)


def hits_to_order(cof0, cof1, A, m0, m1, p: int, tol=None):
    """(hits, norms): whether m0 hits m1 to order p, with the per-order obstruction norms."""
    if tol is None:
        tol = default_tolerance(cof0, cof1, m0, m1)
    norms = [ob.norm for ob in obstruction_tower(cof0, cof1, A, m0, m1, p)]
    return max(norms) <= tol, norms


# ---------------------------------------------------------------------------
# Local integration of the graph distribution


@dataclass
class MorphismGrid:
    """Sampled germ of a morphism: ``source[k]`` maps to ``target[k]``."""

    m0: np.ndarray
    m1: np.ndarray
    directions: np.ndarray
    source: np.ndarray
    target: np.ndarray
    residual: float
    residuals: np.ndarray = field(repr=False)

    def to_json(self):
        return {
            "m0": self.m0.tolist(),
            "m1": self.m1.tolist(),
            "pairs": [{"source": s.tolist(), "target": t.tolist()} for s, t in zip(self.source, self.target)],
            "residual": self.residual,
        }


def _variational_rhs(cof: Coframing, v):
    """Field for (x, J): x' = W(x)^{-1} v s, J = dx/d(v s), with s the radial scale."""
    n = cof.dim
    names = cof.chart.names
    dW = E.Compiled([E.diff(e, nm) for nm in names for row in cof.omega for e in row], names)

    def f(x, J):
        W = cof.matrix(x)
        if np.linalg.cond(W) > COND_LIMIT:
            raise SingularCoframe("coframe matrix is numerically singular")
        u = np.linalg.solve(W, v)
        D = np.array(dW(list(map(float, x)))).reshape(n, n, n)  # D[k] = dW/dx_k
        # d/dt J = -W^{-1} (dW[J] u) + W^{-1}
        dWJu = np.einsum("kab,b,kc->ac", D, u, J)
        dJ = np.linalg.solve(W, np.eye(n) - dWJu)
        return u, dJ

    return f


def integrate_morphism(cof0, cof1, A, m0, m1, radius: float, tol: float = 1e-10, k: int = 5, hit_tol=None) -> MorphismGrid:
    """Construct the local map with omega_1 pulled back = A omega_0 near (m0, m1).

    Each source node is exp_{m0}(v) for v on a k^n grid of the cube of half-width
    ``radius`` in V0; its image is exp_{m1}(A v).  The pullback identity is
    checked at every node from the variational equations of both flows.
    """
    n0, n1 = cof0.dim, cof1.dim
    A = _as_map(A, n1, n0)
    m0 = np.asarray(m0, dtype=float)
    m1 = np.asarray(m1, dtype=float)
    ok, norms = hits_to_order(cof0, cof1, A, m0, m1, 2, hit_tol)
    if not ok:
        raise ObstructionTooLarge(f"obstruction norms {norms} exceed tolerance")
    axis = np.linspace(-radius, radius, k)
    grid = np.stack(np.meshgrid(*([axis] * n0), indexing="ij"), axis=-1).reshape(-1, n0)
    src, tgt, res = [], [], []
    for v in grid:
        x0, J0 = _flow_with_jacobian(cof0, v, m0, tol)
        x1, J1 = _flow_with_jacobian(cof1, A @ v, m1, tol)
        # d phi J0 = J1 A on V0-directions; pulled back: omega1 J1 A = A omega0 J0
        lhs = cof1.matrix(x1) @ J1 @ A
        rhs = A @ cof0.matrix(x0) @ J0
        src.append(x0)
        tgt.append(x1)
        res.append(float(np.max(np.abs(lhs - rhs))))
    res = np.array(res)
    return MorphismGrid(m0, m1, grid, np.array(src), np.array(tgt), float(res.max()), res)


def _flow_with_jacobian(cof: Coframing, w, m, tol):
    """End point of the constant field w from m at time 1 and its derivative in w."""
    n = cof.dim
    f = _variational_rhs(cof, np.asarray(w, dtype=float))

    def rhs(t, z):
        u, dJ = f(z[:n], z[n:].reshape(n, n))
        return np.concatenate([u, dJ.ravel()])

    z0 = np.concatenate([m, np.zeros(n * n)])
    tr = integrate(rhs, 0.0, z0, 1.0, rtol=tol, atol=tol, inside=lambda z: cof.chart.contains(z[:n]))
    if tr.status != COMPLETED:
        raise IntegrationEscaped(f"radial flow along {np.asarray(w).tolist()} ended with {tr.status}")
    z = tr.x[-1]
    return z[:n], z[n:].reshape(n, n)
