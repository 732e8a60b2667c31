from fractions import Fraction

import pytest
from hypothesis import given, settings

import corpus as K
from pnk import compile as C
from pnk import fdd as F
from pnk import oracle as O
from pnk import syntax as S

H = Fraction(1, 2)
FIG4 = "if pt=1 then pt:=2 +[1/2] pt:=3 else if pt=2 then pt:=1 else if pt=3 then pt:=1 else drop"


def fig4():
    return C.compile(S.parse_program(FIG4))


def test_leaves():
    assert F.leaf({(): 1}) == F.SKIP
    assert F.leaf({None: 1}) == F.DROP
    left = F.leaf({(("pt", 2),): H, (("pt", 3),): H})
    assert F.mix([(H, F.assign("pt", 2)), (H, F.assign("pt", 3))]) == left


def test_bad_leaf():
    with pytest.raises(F.FddError):
        F.leaf({(): Fraction(1, 3)})


def test_branch_reduces():
    x = F.assign("f", 1)
    assert F.branch("pt", 1, x, x) == x


def test_fig4_shape():
    x = fig4()
    assert F.size(x) == 6  # 3 tests, 3 leaves
    nodes = {(k[1], k[2]): k for _, k in F.STORE.export(x) if k[0] == "N"}
    assert sorted(nodes) == [("pt", 1), ("pt", 2), ("pt", 3)]
    # pt=2 and pt=3 share the pt:=1 leaf
    assert nodes["pt", 2][3] == nodes["pt", 3][3] == F.assign("pt", 1)


def test_branch_out_of_order():
    inner = F.mk("a", 1, F.SKIP, F.DROP)
    x = F.branch("b", 1, inner, F.DROP)
    F.check_invariants(x)
    for a in (0, 1):
        for b in (0, 1):
            want = {(("a", a), ("b", b)): 1} if a == 1 and b == 1 else {None: 1}
            assert F.evaluate(x, {"a": a, "b": b}) == want


def test_seq_identities():
    g = fig4()
    assert F.seq(F.SKIP, g) == g and F.seq(g, F.SKIP) == g
    assert F.seq(F.DROP, g) == F.DROP


def test_seq_assign_then_filter():
    assert F.seq(F.assign("f", 1), F.test("f", 1)) == F.assign("f", 1)


def test_combine():
    f, g = F.assign("f", 1), F.assign("f", 2)
    assert F.combine(1, f, g) == f
    assert F.combine(Fraction(1, 3), f, f) == f
    assert F.combine(Fraction(1, 3), f, g) == F.combine(Fraction(2, 3), g, f)


def test_ite():
    t, e = F.assign("f", 1), F.assign("f", 2)
    assert F.ite(F.SKIP, t, e) == t
    assert F.ite(F.test("g", 0), t, t) == t
    with pytest.raises(F.FddError):
        F.ite(F.mix([(H, F.SKIP), (H, F.DROP)]), t, e)


def test_of_pred():
    assert F.of_pred(S.Neg(S.PTrue())) == F.DROP
    x = F.of_pred(S.Test("pt", 1))
    assert F.node(x) == ("N", "pt", 1, F.SKIP, F.DROP)
    assert F.of_pred(S.And(S.Test("f", 1), S.Test("f", 2))) == F.DROP


def test_evaluate_fig4():
    x = fig4()
    assert F.evaluate(x, {"pt": 1}) == {(("pt", 2),): H, (("pt", 3),): H}
    assert F.evaluate(x, {"pt": 7}) == {None: 1}
    assert F.evaluate(F.SKIP, {"pt": 7}) == {(("pt", 7),): 1}


def test_canonical_eq():
    x = fig4()
    assert F.canonical_eq(x, x)
    assert not F.canonical_eq(F.SKIP, F.DROP)
    case = S.parse_program("case { pt=1 -> pt:=2 +[1/2] pt:=3 | pt=2 -> pt:=1 | pt=3 -> pt:=1 | }")
    assert C.compile(case) == x


def test_dot():
    assert "digraph" in F.to_dot(fig4())


@settings(max_examples=100, deadline=None)
@given(K.loop_free())
def test_sound_vs_oracle(p):
    x = C.compile(p)
    F.check_invariants(x)
    orc = O.Oracle(K.universe())
    for pk in K.PACKETS:
        assert {k: v for k, v in F.evaluate(x, pk).items() if v} == O.singleton_row(orc, p, pk)


@settings(max_examples=60, deadline=None)
@given(K.loop_free(), K.loop_free(), K.loop_free())
def test_seq_associative(p, q, r):
    a, b, c = C.compile(p), C.compile(q), C.compile(r)
    assert F.seq(F.seq(a, b), c) == F.seq(a, F.seq(b, c))


@settings(max_examples=40, deadline=None)
@given(K.loop_free())
def test_canonical_under_cache_reset(p):
    x = C.compile(p)
    F.STORE.clear_caches()
    assert C.compile(p) == x
