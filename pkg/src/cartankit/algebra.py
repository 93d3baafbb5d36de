"""Matrix Lie algebras, local models (H, g) and morphisms between them."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.linalg

from . import expr as E
from .errors import InvalidModel, NotClosed, Overflow, SizeMismatch, UnknownModel


def bracket(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.shape != Y.shape or X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise SizeMismatch(f"cannot bracket {X.shape} with {Y.shape}")
    return X @ Y - Y @ X


def expm(X):
    """Matrix exponential (scaling and squaring with a degree-13 Pade approximant)."""
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)) or np.any(np.abs(X) > 1e100):
        raise Overflow("matrix entries too large for expm")
    out = scipy.linalg.expm(X)
    if not np.all(np.isfinite(out)):
        raise Overflow("matrix exponential overflowed")
    return out


def E_(m, i, j):
    M = np.zeros((m, m))
    M[i, j] = 1.0
    return M


@dataclass(frozen=True, eq=False)
class MatrixLieAlgebra:
    name: str
    basis: np.ndarray  # shape (d, m, m)

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 3:
            b = b.reshape(0, 0, 0) if b.size == 0 else b
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def ambient_size(self) -> int:
        return self.basis.shape[1]

    @property
    def _flat(self):
        return self.basis.reshape(self.dim, -1).T

    def matrix(self, coords):
        """Ambient matrix of a coordinate vector."""
        return np.tensordot(np.asarray(coords, dtype=float), self.basis, axes=(0, 0))

    @property
    def pinv(self):
        p = self.__dict__.get("_pinv")
        if p is None:
            p = np.linalg.pinv(self._flat) if self.dim else np.zeros((0, self.ambient_size**2))
            self.__dict__["_pinv"] = p
        return p

    def coords(self, M, check=False):
        """Coordinates of an ambient matrix in the basis (least squares)."""
        M = np.asarray(M, dtype=float)
        c = self.pinv @ M.reshape(-1)
        if check:
            res = np.linalg.norm(self._flat @ c - M.reshape(-1))
            if res > 1e-10 * max(1.0, np.linalg.norm(M)):
                raise NotClosed(f"matrix not in span of {self.name} (residual {res:.3g})")
        return c

    def ad(self, X):
        """Matrix of ad(X) on coordinates, X given by coordinates."""
        return np.einsum("i,kij->kj", np.asarray(X, dtype=float), self.structure)

    @property
    def structure(self):
        return _structure_cached(self)

    def validate(self):
        if self.dim == 0:
            return self
        s = np.linalg.svd(self._flat, compute_uv=False)
        if s[-1] < 1e-10 * s[0]:
            raise InvalidModel(f"basis of {self.name} is linearly dependent")
        c = self.structure
        jac = (
            np.einsum("lij,mlk->mijk", c, c)
            + np.einsum("ljk,mli->mijk", c, c)
            + np.einsum("lki,mlj->mijk", c, c)
        )
        if np.max(np.abs(jac), initial=0.0) > 1e-10:
            raise InvalidModel(f"Jacobi identity fails for {self.name}")
        return self


def structure_constants(alg: MatrixLieAlgebra) -> np.ndarray:
    """Tensor c[k, i, j] with [e_i, e_j] = sum_k c[k, i, j] e_k."""
    d = alg.dim
    c = np.zeros((d, d, d))
    for i in range(d):
        for j in range(i + 1, d):
            M = bracket(alg.basis[i], alg.basis[j])
            col = alg.coords(M)
            res = np.linalg.norm(alg.matrix(col) - M)
            if res > 1e-10 * max(1.0, np.linalg.norm(M)):
                raise NotClosed(f"[e{i},e{j}] leaves span of {alg.name} (residual {res:.3g})")
            c[:, i, j] = col
            c[:, j, i] = -col
    c[np.abs(c) < 1e-14] = 0.0
    return c


@lru_cache(maxsize=None)
def _structure_cached(alg):
    return structure_constants(alg)


# ---------------------------------------------------------------------------
# Local models


@dataclass(frozen=True, eq=False)
class LocalModel:
    """Pair (H, g) with the Lie algebra of H spanned by the first ``h_dim`` basis vectors."""

    name: str
    g: MatrixLieAlgebra
    h_dim: int
    # group elements sampled for invariance checks; defaults to exp of h basis
    group_samples: tuple = field(default=())

    @property
    def h(self) -> MatrixLieAlgebra:
        return MatrixLieAlgebra(self.name + ":h", self.g.basis[: self.h_dim])

    @property
    def dim(self):
        return self.g.dim

    @property
    def base_dim(self):
        return self.g.dim - self.h_dim

    def Ad(self, h):
        """Matrix of Ad(h) on g-coordinates for an ambient group element h."""
        h = np.asarray(h, dtype=float)
        hinv = np.linalg.inv(h)
        return np.stack([self.g.coords(h @ b @ hinv) for b in self.g.basis], axis=1)

    def samples(self):
        if self.group_samples:
            return list(self.group_samples)
        out = []
        for k in range(self.h_dim):
            for t in (-0.7, 0.4, 1.1):
                out.append(expm(t * self.g.basis[k]))
        return out

    def validate(self):
        self.g.validate()
        c = self.g.structure
        hd = self.h_dim
        if hd and np.max(np.abs(c[hd:, :hd, :hd]), initial=0.0) > 1e-10:
            raise InvalidModel(f"h is not a subalgebra in {self.name}")
        for h in self.samples():
            A = self.Ad(h)
            hinv = np.linalg.inv(h)
            res = max(np.max(np.abs(self.g.matrix(A[:, k]) - h @ b @ hinv)) for k, b in enumerate(self.g.basis))
            if res > 1e-8:
                raise InvalidModel(f"Ad(h) leaves g in {self.name}")
            if hd and np.max(np.abs(A[hd:, :hd]), initial=0.0) > 1e-8:
                raise InvalidModel(f"Ad(h) does not preserve h in {self.name}")
        return self

    def quotient_action(self, h):
        """Induced linear map of h on g/h."""
        return self.Ad(h)[self.h_dim :, self.h_dim :]


@dataclass(frozen=True, eq=False)
class ModelMorphism:
    source: LocalModel
    target: LocalModel
    lie_map: np.ndarray
    group_map: Callable = field(default=lambda h: h)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "lie_map", np.asarray(self.lie_map, dtype=float))
        if self.lie_map.shape != (self.target.dim, self.source.dim):
            raise SizeMismatch(
                f"lie map has shape {self.lie_map.shape}, expected {(self.target.dim, self.source.dim)}"
            )

    @property
    def quotient_map(self):
        """Induced map g0/h0 -> g1/h1."""
        return self.lie_map[self.target.h_dim :, self.source.h_dim :]

    def validate(self):
        P = self.lie_map
        s, t = self.source, self.target
        if s.h_dim and np.max(np.abs(P[t.h_dim :, : s.h_dim]), initial=0.0) > 1e-10:
            raise InvalidModel("Phi(h0) is not contained in h1")
        c0, c1 = s.g.structure, t.g.structure
        for i in range(s.h_dim):
            for j in range(s.h_dim):
                lhs = P @ c0[:, i, j]
                rhs = np.einsum("kab,a,b->k", c1, P[:, i], P[:, j])
                if np.max(np.abs(lhs - rhs)) > 1e-10:
                    raise InvalidModel("Phi restricted to h0 is not a Lie algebra morphism")
        if self.equivariance_residual() > 1e-8:
            raise InvalidModel("Phi is not equivariant")
        return self

    def equivariance_residual(self):
        worst = 0.0
        for h in self.source.samples():
            lhs = self.lie_map @ self.source.Ad(h)
            rhs = self.target.Ad(self.group_map(h)) @ self.lie_map
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return worst

    def compose(self, first: "ModelMorphism") -> "ModelMorphism":
        """self o first."""
        return ModelMorphism(
            first.source,
            self.target,
            self.lie_map @ first.lie_map,
            lambda h, f=first.group_map, g=self.group_map: g(f(h)),
            name=f"{self.name}*{first.name}",
        )


# ---------------------------------------------------------------------------
# Builtin models


def _flat_h_basis(n, H):
    m = n + 1
    if H == "trivial":
        return []
    if H == "SO2":
        if n != 2:
            raise UnknownModel("SO2 requires n = 2")
        return [E_(m, 0, 1) - E_(m, 1, 0)]
    if H == "R+SO2":
        if n != 2:
            raise UnknownModel("R+SO2 requires n = 2")
        return [E_(m, 0, 1) - E_(m, 1, 0), E_(m, 0, 0) + E_(m, 1, 1)]
    if H == "On":
        return [E_(m, i, j) - E_(m, j, i) for i in range(n) for j in range(i + 1, n)]
    if H == "GLn":
        return [E_(m, i, j) for i in range(n) for j in range(n)]
    raise UnknownModel(f"unknown structure group {H!r}")


def flat_model(n: int, H: str) -> LocalModel:
    m = n + 1
    basis = _flat_h_basis(n, H) + [E_(m, i, n) for i in range(n)]
    hd = len(basis) - n
    return LocalModel(f"flat-R{n}({H})", MatrixLieAlgebra(f"{H}+R{n}", np.array(basis).reshape(-1, m, m)), hd)


def sphere_model() -> LocalModel:
    J = E_(3, 0, 1) - E_(3, 1, 0)
    e1 = E_(3, 0, 2) - E_(3, 2, 0)
    e2 = E_(3, 1, 2) - E_(3, 2, 1)
    return LocalModel("sphere-S2", MatrixLieAlgebra("so3", np.array([J, e1, e2])), 1)


def _sl_blocks(n):
    """sl(n+1) basis split as (pointed-line stabilizer, extra point-stabilizer, E_I0 quotient)."""
    m = n + 1
    diag = [E_(m, k, k) - E_(m, k + 1, k + 1) for k in range(n)]
    off = [
        E_(m, i, j)
        for i in range(m)
        for j in range(m)
        if i != j and not (j == 0 and i >= 1) and not (j == 1 and i >= 2)
    ]
    h0 = diag + off
    extra = [E_(m, i, 1) for i in range(2, m)]
    quot = [E_(m, i, 0) for i in range(1, m)]
    return h0, extra, quot


def projective_model(n: int) -> LocalModel:
    h0, extra, quot = _sl_blocks(n)
    basis = np.array(h0 + extra + quot)
    return LocalModel(
        "sl3-projective-point" if n == 2 else f"sl{n + 1}-projective", MatrixLieAlgebra(f"sl{n + 1}", basis), len(h0) + len(extra)
    )


def pointed_line_model(n: int = 2) -> LocalModel:
    """sl(n+1) with H the stabilizer of a point on a line through it."""
    h0, extra, quot = _sl_blocks(n)
    return LocalModel(
        "sl3-projective-pointed-line" if n == 2 else f"sl{n + 1}-projective-pointed-line",
        MatrixLieAlgebra(f"sl{n + 1}", np.array(h0 + extra + quot)),
        len(h0),
    )


def line_model(n: int = 2) -> LocalModel:
    """Stabilizer of a projective line, with H the stabilizer of a point on it (1-dim base)."""
    h0, extra, quot = _sl_blocks(n)
    return LocalModel(
        "sl3-projective-line" if n == 2 else f"sl{n + 1}-projective-line",
        MatrixLieAlgebra("line-stabilizer", np.array(h0 + quot[:1])),
        len(h0),
    )


_FLAT = re.compile(r"^flat-R(n|\d+)\((trivial|SO2|R\+SO2|On|GLn)\)$")


def builtin_model(name: str, n: int | None = None) -> LocalModel:
    """Look up a registry model; ``n`` fills in a symbolic dimension."""
    name = name.strip()
    m = _FLAT.match(name)
    if m:
        dim = m.group(1)
        H = m.group(2)
        nn = n if dim == "n" else int(dim)
        if nn is None:
            nn = 2
        return flat_model(nn, H).validate()
    if name == "trivial":
        return flat_model(2 if n is None else n, "trivial").validate()
    if name == "sphere-S2":
        return sphere_model().validate()
    if name == "sl3-projective-point":
        return projective_model(2).validate()
    if name == "sl3-projective-pointed-line":
        return pointed_line_model(2).validate()
    if name == "sl3-projective-line":
        return line_model(2).validate()
    m = re.match(r"^sl(n|\d+)-projective$", name)
    if m:
        nn = (n if n is not None else 2) if m.group(1) == "n" else int(m.group(1)) - 1
        return projective_model(nn).validate()
    raise UnknownModel(f"unknown model {name!r}")


BUILTIN_NAMES = (
    "flat-Rn(trivial)",
    "flat-Rn(SO2)",
    "flat-Rn(R+SO2)",
    "flat-Rn(On)",
    "flat-Rn(GLn)",
    "sphere-S2",
    "sl3-projective-point",
    "sl3-projective-pointed-line",
    "sl3-projective-line",
    "sln-projective",
)


# ---------------------------------------------------------------------------
# Builtin morphisms


def identity_morphism(model: LocalModel) -> ModelMorphism:
    return ModelMorphism(model, model, np.eye(model.dim), name="identity")


def inclusion(source: LocalModel, target: LocalModel) -> ModelMorphism:
    """Morphism induced by literal inclusion of ambient matrices."""
    if source.g.ambient_size != target.g.ambient_size:
        raise SizeMismatch("inclusion needs equal ambient sizes")
    P = np.stack([target.g.coords(b, check=True) for b in source.g.basis], axis=1)
    P[np.abs(P) < 1e-14] = 0.0
    return ModelMorphism(source, target, P, name="inclusion")


def matched_basis(source: LocalModel, target: LocalModel) -> ModelMorphism:
    """Identity on matched bases with the identity group map (e.g. Euclidean to spherical)."""
    if source.dim != target.dim or source.h_dim != target.h_dim:
        raise SizeMismatch("matched bases need equal dimensions")
    return ModelMorphism(source, target, np.eye(source.dim), name="matched")


def _cycle(n):
    m = n + 1
    P = np.zeros((m, m))
    # moves index n to 0 and shifts the others up by one
    P[0, n] = 1.0
    for i in range(n):
        P[i + 1, i] = 1.0
    return P


def affine_to_projective(n: int = 2) -> ModelMorphism:
    src = flat_model(n, "GLn")
    tgt = projective_model(n)
    P = _cycle(n)
    Pinv = P.T
    m = n + 1

    def lie(X):
        Y = P @ X @ Pinv
        return Y - np.trace(Y) / m * np.eye(m)

    L = np.stack([tgt.g.coords(lie(b), check=True) for b in src.g.basis], axis=1)
    L[np.abs(L) < 1e-14] = 0.0

    def group(h):
        d = np.linalg.det(h)
        if d < 0 and m % 2 == 0:
            raise InvalidModel("orientation-reversing element has no image in SL")
        return (P @ h @ Pinv) / (np.sign(d) * abs(d) ** (1.0 / m))

    return ModelMorphism(src, tgt, L, group, name="affine-to-projective")


# ---------------------------------------------------------------------------
# Closed-form exponentials as expressions


def _cluster(vals, tol=1e-3):
    groups = []
    for v in vals:
        for g in groups:
            if abs(g[0] - v) < tol:
                g[1].append(v)
                break
        else:
            groups.append([v, [v]])
    out = []
    for _, members in groups:
        c = np.mean(members)
        c = complex(round(c.real, 9), round(c.imag, 9))
        out.append((c, len(members)))
    return out


def exp_exprs(M, s):
    """Matrix of expressions for expm(s M), ``s`` an expression.

    Uses Hermite interpolation of e^{sz} on the spectrum of M, so the entries
    are combinations of s^j e^{as} cos(bs), s^j e^{as} sin(bs).
    """
    M = np.asarray(M, dtype=float)
    m = M.shape[0]
    roots = _cluster(np.linalg.eigvals(M))
    # confluent Vandermonde: rows are d^j/dz^j (z^k) at each root
    rows, labels = [], []
    for lam, mult in roots:
        for j in range(mult):
            row = np.zeros(m, dtype=complex)
            for k in range(j, m):
                coef = np.prod(np.arange(k - j + 1, k + 1)) if j else 1.0
                row[k] = coef * lam ** (k - j)
            rows.append(row)
            labels.append((lam, j))
    V = np.array(rows)
    Vinv = np.linalg.inv(V)
    powers = [np.linalg.matrix_power(M, k).astype(complex) for k in range(m)]
    # column c of Vinv multiplies the basis function s^j e^{lam s}
    terms = {}
    for c, (lam, j) in enumerate(labels):
        C = sum(Vinv[k, c] * powers[k] for k in range(m))
        if lam.imag < -1e-12:
            continue
        if abs(lam.imag) < 1e-12:
            terms[(lam.real, 0.0, j, "c")] = C.real
        else:
            terms[(lam.real, lam.imag, j, "c")] = 2 * C.real
            terms[(lam.real, lam.imag, j, "s")] = -2 * C.imag
    funcs = []
    for (a, b, j, kind), C in terms.items():
        f = E.build.power(s, float(j))
        if a != 0.0:
            f = E.build.mul(f, E.build.call("exp", E.build.mul(E.num(a), s)))
        if b != 0.0:
            f = E.build.mul(f, E.build.call("cos" if kind == "c" else "sin", E.build.mul(E.num(b), s)))
        funcs.append((C, f))
    out = [[E.build.linear_combination([C[i, k] for C, _ in funcs], [f for _, f in funcs]) for k in range(m)] for i in range(m)]
    # self-check against the numerical exponential
    Ssym = E.variables(s)
    probe = {nm: 0.37 for nm in Ssym}
    sval = E.eval_float(s, probe) if Ssym else E.eval_float(s, {})
    num_ = np.array([[E.eval_float(out[i][k], probe) for k in range(m)] for i in range(m)])
    if np.max(np.abs(num_ - scipy.linalg.expm(sval * M))) > 1e-9:
        raise NotImplementedError("closed-form exponential unavailable for this matrix")
    return out


def expr_matmul(A, B):
    n, k, m = len(A), len(B), len(B[0])
    return [[E.build.total(E.build.mul(A[i][r], B[r][j]) for r in range(k)) for j in range(m)] for i in range(n)]


def mc_columns(basis, variables):
    """Ambient expression matrices h^{-1} d h / d y_j for h(y) = prod_j exp(y_j f_j).

    Returns (columns, H, Hinv) with H and Hinv the expression matrices of h(y)
    and h(y)^{-1}.
    """
    m = basis[0].shape[0] if len(basis) else 0
    ident = [[E.num(1.0 if i == j else 0.0) for j in range(m)] for i in range(m)]
    cols = [None] * len(basis)
    Q, Qinv = ident, ident
    for k in range(len(basis) - 1, -1, -1):
        Bk = [[E.num(v) for v in row] for row in basis[k]]
        cols[k] = expr_matmul(expr_matmul(Qinv, Bk), Q)
        Q = expr_matmul(exp_exprs(basis[k], variables[k]), Q)
        Qinv = expr_matmul(Qinv, exp_exprs(basis[k], E.build.neg(variables[k])))
    return cols, Q, Qinv


def expr_coords(alg: MatrixLieAlgebra, P):
    """Coordinates (expressions) of an ambient expression matrix in the basis of ``alg``."""
    m = alg.ambient_size
    flat = [P[i][j] for i in range(m) for j in range(m)]
    return [E.build.linear_combination(alg.pinv[a], flat) for a in range(alg.dim)]
