import itertools

import pytest

from pnk import compile as C
from pnk import domain as D
from pnk import fdd as F
from pnk import syntax as S

FIG4 = "if pt=1 then pt:=2 +[1/2] pt:=3 else if pt=2 then pt:=1 else if pt=3 then pt:=1 else drop"


def test_infer_fig4():
    assert D.infer_domain(C.compile(S.parse_program(FIG4))) == {"pt": (1, 2, 3)}


def test_infer_skip_empty():
    assert D.infer_domain(F.SKIP) == {}


def test_infer_test_and_mod():
    x = C.compile(S.parse_program("f=1; f:=5"))
    assert D.infer_domain(x) == {"f": (1, 5)}


def test_enumerate_fig4():
    ss = D.enumerate_states({"pt": (1, 2, 3)})
    assert [ss.label(i) for i in range(len(ss))] == ["drop", "pt=1", "pt=2", "pt=3", "pt=*"]


def test_enumerate_single_wildcard():
    ss = D.enumerate_states({}, ["f"])
    assert len(ss) == 2 and ss.label(1) == "f=*"


def test_enumerate_count():
    assert len(D.enumerate_states({"f": (0, 1), "g": (7,)})) == 7


def test_cap():
    with pytest.raises(D.ResourceError):
        D.enumerate_states({"f": tuple(range(10)), "g": tuple(range(10))}, cap=50)


def test_ranges_prune_empty_wildcard():
    ss = D.enumerate_states({"f": (0, 1)}, ranges={"f": (0, 1)})
    assert len(ss) == 3


def test_partition():
    dom = {"f": (0, 2), "g": (1,)}
    ss = D.enumerate_states(dom)
    for f, g in itertools.product(range(4), range(3)):
        pk = {"f": f, "g": g}
        hits = [i for i in range(1, len(ss))
                if all(v is None and pk[k] not in dom[k] or v == pk[k]
                       for k, v in zip(ss.fields, ss.states[i]))]
        assert hits == [ss.classify(pk)]
