from fractions import Fraction

import pytest
from hypothesis import given, settings

import corpus as K
from pnk import compile as C
from pnk import domain as D
from pnk import fdd as F
from pnk import oracle as O
from pnk import syntax as S

H = Fraction(1, 2)
P = S.parse_program
FIG4 = "if pt=1 then pt:=2 +[1/2] pt:=3 else if pt=2 then pt:=1 else if pt=3 then pt:=1 else drop"


def test_skip_is_identity():
    assert C.compile(S.SKIP) == F.SKIP


def test_fdd_to_matrix_trivia():
    _, T = C.fdd_to_matrix(F.DROP, {"f": (1,)})
    assert all(r == {0: 1} for r in T.rows)
    ss, T = C.fdd_to_matrix(F.SKIP, {"f": (1,)})
    assert T.to_dense() == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    assert C.matrix_to_fdd(ss, T) == F.SKIP


def test_fig4_round_trip():
    x = C.compile(P(FIG4))
    ss, T = C.fdd_to_matrix(x)
    assert C.matrix_to_fdd(ss, T) == x


def test_while_one_iteration():
    x = C.compile(P("while f=0 do { f:=1 }"))
    assert F.evaluate(x, {"f": 0}) == {(("f", 1),): 1}
    assert F.evaluate(x, {"f": 1}) == {(("f", 1),): 1}


def test_while_geometric():
    x = C.compile(P("while f=0 do { f:=0 +[1/2] f:=1 }"))
    assert F.evaluate(x, {"f": 0}) == {(("f", 1),): 1}


def test_while_true_skip_is_drop():
    assert C.compile(P("while true do { skip }")) == F.DROP


def test_while_false_is_skip():
    assert C.compile(P("while false do { f:=1 }")) == F.SKIP


def test_float_mode_tags_inexact():
    x = C.compile(P("while f=0 do { f:=0 +[1/3] f:=1 }"), C.CompileConfig(mode="float"))
    assert not F.is_exact(x)
    out = F.evaluate(x, {"f": 0})
    assert abs(out[(("f", 1),)] - 1.0) < 1e-12


def test_unroll_converges_monotonically():
    a, body = S.Test("f", 0), P("f:=0 +[1/2] f:=1")
    limit = F.evaluate(C.compile(S.While(a, body)), {"f": 0}).get((("f", 1),), 0)
    prev = Fraction(0)
    for n in (1, 2, 4, 8, 16):
        got = F.evaluate(C.compile(C.unroll_while(a, body, n)), {"f": 0}).get((("f", 1),), 0)
        assert got == 1 - Fraction(1, 2**n)
        assert prev <= got <= limit
        prev = got


def test_case_equals_if():
    case = P("case { f=0 -> g:=1 | f=1 -> g:=0 | }")
    ite = P("if f=0 then g:=1 else if f=1 then g:=0 else drop")
    assert C.compile(case) == C.compile(ite)


def test_case_overlap_error():
    with pytest.raises(C.OverlapError, match="sw=1"):
        C.compile(S.Case(((S.Test("sw", 1), S.SKIP), (S.PTrue(), S.DROP))))


def test_cap_error():
    p = P("while f=0 do { choice { 1/4 -> f:=1, 1/4 -> f:=2, 1/4 -> f:=3, 1/4 -> f:=4 } }")
    with pytest.raises(D.ResourceError):
        C.compile(p, C.CompileConfig(cap=3))


def test_parallel_case_deterministic():
    branches = tuple((S.Test("sw", i), P(f"while pt={i} do {{ pt:={i} +[1/3] pt:={i + 1} }}"))
                     for i in range(6))
    ids = set()
    for jobs in (1, 2, 3):
        F.STORE.clear_caches()
        ids.add(C.compile(S.Case(branches), C.CompileConfig(jobs=jobs)))
    assert len(ids) == 1


def test_bad_config():
    with pytest.raises(ValueError):
        C.CompileConfig(jobs=0)


@settings(max_examples=120, deadline=None)
@given(K.programs(loops=2))
def test_sound_vs_oracle(p):
    x = C.compile(p, C.CompileConfig(mode="exact"))
    orc = O.Oracle(K.universe())
    for pk in K.PACKETS:
        assert {k: v for k, v in F.evaluate(x, pk).items() if v} == O.singleton_row(orc, p, pk)


@settings(max_examples=40, deadline=None)
@given(K.programs(loops=1))
def test_float_close_to_exact(p):
    x = C.compile(p, C.CompileConfig(mode="exact"))
    y = C.compile(p, C.CompileConfig(mode="float"))
    for pk in K.PACKETS:
        a, b = F.evaluate(x, pk), F.evaluate(y, pk)
        for k in set(a) | set(b):
            assert abs(float(a.get(k, 0)) - float(b.get(k, 0))) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(K.loop_free())
def test_matrix_round_trip(p):
    x = C.compile(p)
    ss, T = C.fdd_to_matrix(x)
    assert C.matrix_to_fdd(ss, T) == x
