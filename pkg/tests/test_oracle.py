from fractions import Fraction

import pytest
from hypothesis import given, settings

import corpus as K
from pnk import oracle as O
from pnk import syntax as S
from pnk.domain import ResourceError

H, Q = Fraction(1, 2), Fraction(1, 4)
COIN = S.parse_program("f:=0 +[1/2] f:=1")


def one_field():
    U = O.Universe({"f": (0, 1)})
    return U, U.mask_of({"f": 0}), U.mask_of({"f": 1})


def test_drop():
    U, a, b = one_field()
    assert O.Oracle(U).run(S.DROP, a | b) == O.point(0)


def test_union_convolves():
    U, a, b = one_field()
    got = O.Oracle(U).run(S.Union(COIN, COIN), a)
    assert got == {a: Q, b: Q, a | b: H}


def test_star_saturates():
    U, a, b = one_field()
    assert O.Oracle(U).run(S.Star(COIN), a) == {a | b: 1}
    assert O.bigstep_ref(S.Star(COIN), [{"f": 0}], U) == {a | b: 1}


def test_star_chain_shape():
    U, a, b = one_field()
    ch = O.smallstep_chain(O.Oracle(U), COIN, starts=[a])
    assert len(ch.states) == 6
    assert set(ch.states) == {(a, 0), (a, a), (b, a), (a, a | b), (b, a | b), (0, a | b)}
    # every edge of the coin chain carries 1/2
    for i, (cur, _) in enumerate(ch.states):
        if cur:
            assert set(ch.S.rows[i].values()) == {H}


def test_u_matrix():
    U, a, b = one_field()
    ch = O.smallstep_chain(O.Oracle(U), COIN, starts=[a])
    for i, s in enumerate(ch.states):
        (j, w), = ch.U.rows[i].items()
        assert w == 1
        if s in ch.saturated:
            assert ch.states[j] == (0, s[1])
        else:
            assert j == i
    assert (b, a) not in ch.saturated and (b, a | b) in ch.saturated


def test_universe_cap():
    with pytest.raises(ResourceError):
        O.Universe({"f": (0, 1, 2), "g": (0, 1)})


def test_singleton_row_rejects_sets():
    U, a, _ = one_field()
    with pytest.raises(ValueError):
        O.singleton_row(O.Oracle(U), S.Union(S.SKIP, S.Assign("f", 1)), {"f": 0})


@settings(max_examples=60, deadline=None)
@given(K.programs(loops=2))
def test_small_step_lemmas(p):
    orc = O.Oracle(K.universe())
    ch = O.smallstep_chain(orc, p)
    assert ch.S.is_stochastic()
    for i, (_, b) in enumerate(ch.states):
        for j in ch.S.rows[i]:
            assert b & ch.states[j][1] == b
    assert ch.SU @ ch.SU == ch.S @ ch.S @ ch.U


@settings(max_examples=40, deadline=None)
@given(K.programs(loops=1))
def test_unrollings_monotone(p):
    U = K.universe()
    orc = O.Oracle(U)
    for a in U.all_sets():
        prev = orc.run(O.unrolling(p, 0), a)
        for n in range(1, 4):
            cur = orc.run(O.unrolling(p, n), a)
            assert O.leq_cpo(prev, cur, U)
            prev = cur


@settings(max_examples=40, deadline=None)
@given(K.programs(loops=1))
def test_guarded_keeps_singletons(p):
    U = K.universe()
    orc = O.Oracle(U)
    for pk in K.PACKETS:
        for m in orc.run(p, U.mask_of(pk)):
            assert bin(m).count("1") <= 1
