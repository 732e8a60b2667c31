from fractions import Fraction

import pytest
from hypothesis import given, settings

import corpus as K
from pnk import compile as C
from pnk import fdd as F
from pnk import prismgen as P
from pnk import syntax as S
from pnk.netmodel import models as M

H = Fraction(1, 2)
FIG4 = "if pt=1 then pt:=2 +[1/2] pt:=3 else if pt=2 then pt:=1 else if pt=3 then pt:=1 else drop"


def test_skip_automaton():
    a = P.to_automaton(S.SKIP)
    (rule,) = a.rules[a.initial]
    assert isinstance(rule.guard, S.PTrue)
    (b,) = rule.branches
    assert b.prob == 1 and b.updates == () and b.dst == a.halt()


def test_coin_is_one_state():
    a = P.collapse_blocks(P.to_automaton(S.parse_program("f:=0 +[1/2] f:=1")))
    (rule,) = a.rules[a.initial]
    assert [(b.prob, b.updates) for b in rule.branches] == [(H, (("f", 0),)), (H, (("f", 1),))]


def test_while_shape():
    a = P.to_automaton(S.parse_program("while f=0 do { f:=1 }"))
    guards = [r.guard for r in a.rules[a.initial]]
    assert guards == [S.Test("f", 0), S.Neg(S.Test("f", 0))]
    assert a.rules[a.initial][1].branches[0].dst == a.halt()


def test_collapse_skips():
    a = P.collapse_blocks(P.to_automaton(S.parse_program("skip; skip; skip")))
    assert a.size() == 2


def test_collapse_idempotent():
    a = P.collapse_blocks(P.to_automaton(S.parse_program(FIG4)))
    b = P.collapse_blocks(a)
    assert P.emit_text(a, {"pt": (0, 3)}) == P.emit_text(b, {"pt": (0, 3)})


def test_fig4_states():
    a = P.collapse_blocks(P.to_automaton(S.parse_program(FIG4)))
    # three tests, one coin, then halt and drop
    assert a.size() == 6 and a.drop() is not None


def test_simulate_examples():
    a, _ = P.translate(S.SKIP)
    assert P.simulate_automaton(a, {"f": 3}) == {(("f", 3),): 1}
    a, _ = P.translate(S.parse_program(FIG4))
    assert P.simulate_automaton(a, {"pt": 1}) == {(("pt", 2),): H, (("pt", 3),): H}
    a, _ = P.translate(S.parse_program("while f=0 do { f:=0 +[1/2] f:=1 }"))
    assert P.simulate_automaton(a, {"f": 0}) == {(("f", 1),): 1}


def test_emit_errors():
    a = P.collapse_blocks(P.to_automaton(S.parse_program("f:=1")))
    with pytest.raises(ValueError, match="range"):
        P.emit_text(a, {})
    b = P.collapse_blocks(P.to_automaton(S.parse_program("pc:=1")))
    with pytest.raises(ValueError, match="pc"):
        P.emit_text(b, {"pc": (0, 1)})


def test_emit_shape():
    _, text = P.translate(S.parse_program("if f=1 then g:=1 else drop"))
    assert text.startswith("dtmc\n")
    assert "  f : [0..1] init 0;" in text and "  g : [0..1] init 0;" in text
    assert "  [] (pc=0) & (f=1) -> 1:(g'=1)&(pc'=1);" in text
    assert "  [] (pc=0) & (!(f=1)) -> 1:(pc'=2);" in text


def test_property_text():
    a, _ = P.translate(S.SKIP)
    assert P.property_text(a, S.Test("sw", 2)) == "P=? [ F pc=1 & sw=2 ]\n"


def test_chain_model_matches():
    m = M.chain_model(1, Fraction(1, 1000))
    a, text = P.translate(m.program)
    out = P.simulate_automaton(a, m.ingress_packets[0])
    got = sum(p for k, p in out.items() if k is not None and S.holds(m.egress, dict(k)))
    assert got == Fraction(1999, 2000)
    assert "pc :" in text


@settings(max_examples=100, deadline=None)
@given(K.programs(loops=2))
def test_translation_sound(p):
    raw = P.to_automaton(p)
    a = P.collapse_blocks(raw)
    assert raw.size() <= 4 * S.ast_size(p)
    assert a.size() <= raw.size()
    P.check_well_formed(a, K.PACKETS)
    x = C.compile(p)
    for pk in K.PACKETS:
        assert {k: v for k, v in P.simulate_automaton(a, pk).items() if v} == \
            {k: v for k, v in F.evaluate(x, pk).items() if v}
