"""Truncated multivariate Taylor arithmetic (forward-mode, arbitrary order).

A jet in ``n`` variables truncated at ``order`` is stored as the coefficient
vector of its Taylor polynomial over the graded monomial basis of a
:class:`JetSpace`.  Arithmetic on coefficient arrays broadcasts over leading
axes so whole matrices of jets can be multiplied at once.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
import scipy.sparse as sp


class JetSpace:
    def __init__(self, n: int, order: int):
        self.n = n
        self.order = order
        mons = []
        for d in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(n), d):
                alpha = [0] * n
                for k in combo:
                    alpha[k] += 1
                mons.append(tuple(alpha))
        self.monomials = mons
        self.index = {m: i for i, m in enumerate(mons)}
        self.size = N = len(mons)
        self.degree = np.array([sum(m) for m in mons])
        # alpha! converts Taylor coefficients to partial derivatives
        self.factorial = np.array([math.prod(math.factorial(a) for a in m) for m in mons], dtype=float)
        pi, pj, pk = [], [], []
        for i, a in enumerate(mons):
            for j, b in enumerate(mons):
                if self.degree[i] + self.degree[j] <= order:
                    pi.append(i)
                    pj.append(j)
                    pk.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self.pi = np.array(pi)
        self.pj = np.array(pj)
        self.pk = np.array(pk)
        self.summer = sp.csr_matrix((np.ones(len(pk)), (np.arange(len(pk)), pk)), shape=(len(pk), N))
        # d/dx_v: coefficient of alpha in the derivative is (alpha_v+1) c[alpha+e_v]
        self.dsrc, self.dfac = [], []
        for v in range(n):
            src = np.zeros(N, dtype=int)
            fac = np.zeros(N)
            for i, a in enumerate(mons):
                if self.degree[i] < order:
                    up = list(a)
                    up[v] += 1
                    src[i] = self.index[tuple(up)]
                    fac[i] = a[v] + 1
            self.dsrc.append(src)
            self.dfac.append(fac)

    # coefficient-array operations -------------------------------------
    def mul(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.ndim == 1 and b.ndim == 1:
            return np.bincount(self.pk, weights=a[self.pi] * b[self.pj], minlength=self.size)
        shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1])
        prod = (a[..., self.pi] * b[..., self.pj]).reshape(-1, len(self.pi))
        return np.asarray(prod @ self.summer).reshape(shape + (self.size,))

    def truncate(self, a, order):
        """Drop coefficients above ``order``; returns the smaller space and array."""
        T = jet_space(self.n, order)
        return T, a[..., : T.size]

    def diff(self, a, v):
        """Partial derivative along variable ``v``; the top degree becomes invalid (zeroed)."""
        return a[..., self.dsrc[v]] * self.dfac[v]

    def constant(self, value):
        out = np.zeros(np.shape(value) + (self.size,))
        out[..., 0] = value
        return out

    def variable(self, point):
        """Coefficient arrays of the coordinate functions around ``point``."""
        out = np.zeros((self.n, self.size))
        out[:, 0] = point
        for v in range(self.n):
            alpha = [0] * self.n
            alpha[v] = 1
            if self.order >= 1:
                out[v, self.index[tuple(alpha)]] = 1.0
        return out

    def compose(self, a, derivs):
        """Taylor-compose a univariate function with known derivatives at a[...,0]."""
        h = np.array(a, dtype=float, copy=True)
        h[..., 0] = 0.0
        m = len(derivs) - 1
        acc = self.constant(np.asarray(derivs[m]) / math.factorial(m))
        for k in range(m - 1, -1, -1):
            acc = self.mul(acc, h)
            acc[..., 0] += np.asarray(derivs[k]) / math.factorial(k)
        return acc

    def reciprocal(self, a):
        a0 = a[..., 0]
        return self.compose(a, [(-1.0) ** k * math.factorial(k) / a0 ** (k + 1) for k in range(self.order + 1)])

    def matmul(self, A, B):
        """Product of matrices of jets, shapes (p,q,N) and (q,r,N)."""
        return self.mul(A[:, :, None, :], B[None, :, :, :]).sum(axis=1)

    def matinv(self, A):
        """Inverse of a matrix of jets via the Neumann series about its value."""
        A0inv = np.linalg.inv(A[..., 0])
        inv0 = self.constant(A0inv)
        # A = A0 (I + D), D nilpotent in the truncated algebra
        D = self.matmul(inv0, A)
        D[..., 0] -= np.eye(A.shape[0])
        term = self.constant(np.eye(A.shape[0]))
        total = term.copy()
        for _ in range(self.order):
            term = -self.matmul(D, term)
            total = total + term
        return self.matmul(total, inv0)

    def partials(self, a):
        """Map from sorted index tuples to partial derivatives."""
        out = {}
        for i, m in enumerate(self.monomials):
            idx = tuple(v for v in range(self.n) for _ in range(m[v]))
            out[idx] = float(a[i] * self.factorial[i])
        return out


@lru_cache(maxsize=None)
def jet_space(n: int, order: int) -> JetSpace:
    return JetSpace(n, order)


class Jet:
    """Value and partial derivatives of a scalar function at a point."""

    __slots__ = ("space", "coef")

    def __init__(self, space: JetSpace, coef):
        self.space = space
        self.coef = np.asarray(coef, dtype=float)

    @property
    def value(self) -> float:
        return float(self.coef[0])

    @property
    def partials(self) -> dict:
        return self.space.partials(self.coef)

    def partial(self, *idx) -> float:
        """Partial derivative along the listed variables (any order, 0-based)."""
        alpha = [0] * self.space.n
        for k in idx:
            alpha[k] += 1
        i = self.space.index[tuple(alpha)]
        return float(self.coef[i] * self.space.factorial[i])

    def gradient(self):
        return np.array([self.partial(k) for k in range(self.space.n)])

    def __repr__(self):
        return f"Jet(value={self.value!r}, order={self.space.order})"
