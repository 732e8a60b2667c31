from fractions import Fraction

import pytest
from hypothesis import given, settings

import corpus as K
from pnk import oracle as O
from pnk import syntax as S

FIG4 = "if pt=1 then pt:=2 +[1/2] pt:=3 else if pt=2 then pt:=1 else if pt=3 then pt:=1 else drop"


def test_primitives():
    assert S.parse_program("drop") == S.Filter(S.PFalse())
    assert S.parse_program("skip") == S.Filter(S.PTrue())
    assert S.parse_program("f:=3") == S.Assign("f", 3)
    assert S.parse_program("f=3") == S.Filter(S.Test("f", 3))


def test_fig4_ast():
    p = S.parse_program(FIG4)
    h = Fraction(1, 2)
    want = S.If(S.Test("pt", 1), S.Choice(((h, S.Assign("pt", 2)), (h, S.Assign("pt", 3)))),
                S.If(S.Test("pt", 2), S.Assign("pt", 1),
                     S.If(S.Test("pt", 3), S.Assign("pt", 1), S.DROP)))
    assert p == want


def test_choice_sum_error():
    with pytest.raises(S.ProbabilityError, match="2/3"):
        S.parse_program("choice { 1/3 -> skip, 1/3 -> skip }")


def test_syntax_error_position():
    with pytest.raises(S.ParseError) as e:
        S.parse_program("f:=1;\n  g:=")
    assert "2:" in str(e.value)


def test_decimal_is_exact():
    p = S.parse_program("f:=1 +[0.8] f:=0")
    assert p.branches[0][0] == Fraction(4, 5)


def test_seq_binds_tighter_than_choice():
    p = S.parse_program("f:=1; g:=1 +[1/2] f:=0")
    assert isinstance(p, S.Choice)
    assert p.branches[0][1] == S.Seq(S.Assign("f", 1), S.Assign("g", 1))


def test_braced_forms():
    p = S.parse_program("while f=0 do { f:=1 }; do { g:=1 } while g=0; var up:=1 in { skip }")
    kinds = {type(n).__name__ for n in S.walk(p)}
    assert {"While", "DoWhile", "VarIn"} <= kinds


def test_case_parses():
    p = S.parse_program("case { sw=1 -> pt:=2 | sw=2 -> pt:=1 | }")
    assert isinstance(p, S.Case) and len(p.branches) == 2


def test_desugar_var():
    p = S.VarIn("up2", 1, S.SKIP)
    assert S.desugar(p) == S.Seq(S.Assign("up2", 1), S.Seq(S.SKIP, S.Assign("up2", 0)))


def test_desugar_do_while():
    body = S.Assign("f", 1)
    cond = S.Neg(S.Test("sw", 1))
    assert S.desugar(S.DoWhile(body, cond)) == S.Seq(body, S.While(cond, body))


def test_desugar_keeps_if():
    p = S.If(S.Test("f", 1), S.SKIP, S.DROP)
    assert S.desugar(p) == p


def test_module_header():
    p, ranges = S.parse_module("fields { f: 0..3 }\nf:=2")
    assert ranges == {"f": (0, 3)} and p == S.Assign("f", 2)


@settings(max_examples=150, deadline=None)
@given(K.programs())
def test_pretty_round_trip(p):
    assert S.parse_program(S.pretty(p)) == p


@settings(max_examples=100, deadline=None)
@given(K.programs())
def test_desugar_idempotent(p):
    q = S.desugar(p)
    assert S.desugar(q) == q


@settings(max_examples=60, deadline=None)
@given(K.programs(loops=1), K.programs(loops=0), K.preds())
def test_case_matches_nested_if(p, q, a):
    case = S.Case(((a, p), (S.Neg(a), q)))
    orc = O.Oracle(K.universe())
    for m in orc.U.all_sets():
        assert orc.run(case, m) == orc.run(S.case_as_if(case), m)
