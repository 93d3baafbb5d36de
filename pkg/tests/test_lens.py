from math import gcd

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cartankit import lens as Ls
from cartankit.errors import TooLarge, ValidationError
from cartankit.lens import CyclicAction


def _ok(a, q1, q2):
    g = gcd(q1 * q2, abs(a))
    return g != 0 and (2 * gcd(q1, q2)) % g == 0


def _sym_p2(c):
    return _ok(c.p1 * c.q2 - c.q1 * c.p2, c.q1, c.q2) and _ok(c.p1 * c.q2 + c.q1 * c.p2, c.q1, c.q2)


def _sym_p1(c):
    return _ok(c.p1 * c.q2 + 3 * c.q1 * c.p2, c.q1, c.q2) and _ok(c.p1 * c.q2 - 3 * c.q1 * c.p2, c.q1, c.q2)


def test_free_on_both():
    c = CyclicAction(2, 7, 1, 7)
    assert Ls.free_on_p1(c) and Ls.free_on_p2(c)
    assert Ls.brute_force_free(c, "P1") and Ls.brute_force_free(c, "P2")


def test_free_on_p2_only():
    c = CyclicAction(4, 7, 1, 7)
    assert Ls.free_on_p2(c) and not Ls.free_on_p1(c)
    assert Ls.brute_force_free(c, "P2") and not Ls.brute_force_free(c, "P1")


def test_trivial_and_central():
    t = CyclicAction(0, 1, 0, 1)
    assert Ls.free_on_p1(t) and Ls.free_on_p2(t)
    assert Ls.brute_force_free(t, "P1") and Ls.brute_force_free(t, "P2")
    z = CyclicAction(1, 2, 1, 2)
    assert Ls.free_on_p1(z) and Ls.brute_force_free(z, "P1") and Ls.brute_force_free(z, "P2")


def test_q5_family_member():
    c = CyclicAction(2, 5, 1, 5)
    assert not Ls.free_on_p1(c)
    assert not Ls.brute_force_free(c, "P1")


def test_invalid_actions():
    for args in ((2, 4, 1, 3), (3, 3, 0, 1), (-1, 3, 0, 1), (0, 0, 0, 1)):
        with pytest.raises(ValidationError):
            CyclicAction(*args)
    with pytest.raises(ValidationError):
        Ls.brute_force_free(CyclicAction(0, 1, 0, 1), "P3")


def test_brute_force_size_limit():
    with pytest.raises(TooLarge):
        Ls.brute_force_free(CyclicAction(1, 1009, 1, 997 * 2), "P1")


def test_survey_small_tables():
    assert [r.action for r in Ls.survey(1)] == [CyclicAction(0, 1, 0, 1)]
    rows = {r.action: r for r in Ls.survey(7)}
    both = rows[CyclicAction(2, 7, 1, 7)]
    assert both.oracle_p1 and both.oracle_p2 and both.flag == ""
    p2 = rows[CyclicAction(4, 7, 1, 7)]
    assert p2.oracle_p2 and not p2.oracle_p1


def test_q5_row_is_flagged():
    rows = {r.action: r for r in Ls.survey(5)}
    assert "family" in rows[CyclicAction(2, 5, 1, 5)].flag


def test_survey_oracle_matches_brute_force():
    for r in Ls.survey(12)[::7]:
        assert r.oracle_p1 == Ls.brute_force_free(r.action, "P1")
        assert r.oracle_p2 == Ls.brute_force_free(r.action, "P2")


def test_oracle_matches_symmetrized_criteria():
    # with both eigenvalue signs the gcd criteria reproduce the enumeration exactly
    for r in Ls.survey(30):
        assert r.oracle_p1 == _sym_p1(r.action)
        assert r.oracle_p2 == _sym_p2(r.action)


def test_flags_mark_every_disagreement():
    rows = Ls.survey(30)
    assert len(rows) == 77284
    for r in rows:
        assert ("disagree" in r.flag) == (not r.agree)


def test_survey_limits():
    with pytest.raises(ValidationError):
        Ls.survey(61)
    with pytest.raises(ValidationError):
        Ls.survey(0)


def test_csv_layout():
    text = Ls.survey_csv(Ls.survey(2))
    lines = text.splitlines()
    assert lines[0] == ",".join(Ls.CSV_COLUMNS)
    assert len(lines) == 1 + 4


reduced = st.integers(1, 40).flatmap(lambda q: st.tuples(st.sampled_from([p for p in range(q) if gcd(p, q) == 1]), st.just(q)))


@given(reduced, reduced)
def test_p2_formula_symmetric(a, b):
    assert Ls.free_on_p2(CyclicAction(*a, *b)) == Ls.free_on_p2(CyclicAction(*b, *a))


@given(reduced, reduced)
def test_p2_oracle_symmetric(a, b):
    assert Ls.brute_force_free(CyclicAction(*a, *b), "P2") == Ls.brute_force_free(CyclicAction(*b, *a), "P2")


@given(reduced, reduced)
def test_formulas_never_claim_less_than_symmetrized(a, b):
    c = CyclicAction(*a, *b)
    assert Ls.free_on_p2(c) or not _sym_p2(c)
    assert Ls.free_on_p1(c) or not _sym_p1(c)
