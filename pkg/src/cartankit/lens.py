"""Freeness of cyclic subgroups of SU(2) x SU(2) on the two G2 flag varieties."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from math import gcd, lcm

import numpy as np

from .errors import TooLarge, ValidationError

BRUTE_FORCE_LIMIT = 10**6
SURVEY_LIMIT = 60


@dataclass(frozen=True, order=True)
class CyclicAction:
    """Generator with eigenvalue phases p1/q1 and p2/q2 (in lowest terms)."""

    p1: int
    q1: int
    p2: int
    q2: int

    def __post_init__(self):
        for p, q in ((self.p1, self.q1), (self.p2, self.q2)):
            if q < 1 or not 0 <= p < q or gcd(p, q) != 1:
                raise ValidationError(f"{p}/{q} is not a reduced fraction in [0, 1)")

    @property
    def order(self) -> int:
        return lcm(self.q1, self.q2)


def _divides(a, b):
    return a != 0 and b % a == 0


def free_on_p2(c: CyclicAction) -> bool:
    return _divides(gcd(c.q1 * c.q2, abs(c.p1 * c.q2 - c.q1 * c.p2)), 2 * gcd(c.q1, c.q2))


def free_on_p1(c: CyclicAction) -> bool:
    return _divides(gcd(c.q1 * c.q2, abs(c.p1 * c.q2 + 3 * c.q1 * c.p2)), 2 * gcd(c.q1, c.q2))


def _fixed_masks(a1, a2, M, L):
    """Boolean masks (P1, P2) of powers with a fixed point; phases are integers mod M = 2L."""
    central = ((a1 == 0) | (a1 == L)) & (a1 == a2)
    p2 = ((a1 - a2) % M == 0) | ((a1 + a2) % M == 0)
    p1 = ((a1 + 3 * a2) % M == 0) | ((a1 - 3 * a2) % M == 0)
    return p1 & ~central, p2 & ~central


def brute_force_free(c: CyclicAction, which: str) -> bool:
    """Enumerate every nontrivial power of the generator and test for fixed points."""
    if which not in ("P1", "P2"):
        raise ValidationError("which must be 'P1' or 'P2'")
    L = c.order
    if L > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"group order {L} exceeds {BRUTE_FORCE_LIMIT}")
    M = 2 * L
    k = np.arange(1, L, dtype=np.int64)
    a1 = (2 * k * c.p1 * (L // c.q1)) % M
    a2 = (2 * k * c.p2 * (L // c.q2)) % M
    p1, p2 = _fixed_masks(a1, a2, M, L)
    return not bool((p1 if which == "P1" else p2).any())


def _reduced(q):
    return [p for p in range(q) if gcd(p, q) == 1]


@dataclass(frozen=True)
class SurveyRow:
    action: CyclicAction
    formula_p1: bool
    formula_p2: bool
    oracle_p1: bool
    oracle_p2: bool

    @property
    def agree(self) -> bool:
        return self.formula_p1 == self.oracle_p1 and self.formula_p2 == self.oracle_p2

    @property
    def family_exception(self) -> bool:
        """A (2/q, 1/q) row with q prime that is not free on both spaces."""
        c = self.action
        prime = c.q1 > 2 and all(c.q1 % d for d in range(2, int(c.q1**0.5) + 1))
        in_family = prime and c.q1 == c.q2 and c.p1 == 2 and c.p2 == 1
        return in_family and not (self.oracle_p1 and self.oracle_p2)

    @property
    def flag(self) -> str:
        parts = []
        if not self.agree:
            parts.append("disagree")
        if self.family_exception:
            parts.append("family")
        return ";".join(parts)


def survey(q_max: int) -> list[SurveyRow]:
    """Formula and brute-force verdicts for every reduced pair with q1, q2 <= q_max."""
    if not 1 <= q_max <= SURVEY_LIMIT:
        raise ValidationError(f"q_max must lie in [1, {SURVEY_LIMIT}]")
    rows = []
    for q1 in range(1, q_max + 1):
        P1 = np.array(_reduced(q1), dtype=np.int64)
        for q2 in range(1, q_max + 1):
            P2 = np.array(_reduced(q2), dtype=np.int64)
            L = lcm(q1, q2)
            M = 2 * L
            # k and L - k give negated phases, so half the powers suffice
            k = np.arange(1, L // 2 + 1, dtype=np.int64)
            a1 = (2 * (L // q1) * P1[:, None] * k[None, :]) % M
            a2 = (2 * (L // q2) * P2[:, None] * k[None, :]) % M
            f1, f2 = _fixed_masks(a1[:, None, :], a2[None, :, :], M, L)
            o1 = ~f1.any(axis=-1)
            o2 = ~f2.any(axis=-1)
            for i, p1 in enumerate(P1.tolist()):
                for j, p2 in enumerate(P2.tolist()):
                    c = CyclicAction(p1, q1, p2, q2)
                    rows.append(SurveyRow(c, free_on_p1(c), free_on_p2(c), bool(o1[i, j]), bool(o2[i, j])))
    rows.sort(key=lambda r: (r.action.p1, r.action.q1, r.action.p2, r.action.q2))
    return rows


CSV_COLUMNS = ("p1", "q1", "p2", "q2", "formula_p1", "formula_p2", "oracle_p1", "oracle_p2", "agree", "flag")


def survey_csv(rows) -> str:
    """CSV text; ``flag`` marks formula/oracle disagreements and failures of the (2/q, 1/q) family."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        c = r.action
        w.writerow([c.p1, c.q1, c.p2, c.q2, int(r.formula_p1), int(r.formula_p2), int(r.oracle_p1), int(r.oracle_p2), int(r.agree), r.flag])
    return buf.getvalue()
