"""Random guarded programs over two binary fields, plus hypothesis strategies."""

from __future__ import annotations

import random
from fractions import Fraction

from hypothesis import strategies as st

from pnk import syntax as S
from pnk.oracle import Universe

FIELDS = ("f", "g")
VALUES = (0, 1)
PROBS = (Fraction(1, 2), Fraction(1, 3), Fraction(2, 3), Fraction(1, 4), Fraction(3, 4))
PACKETS = [{"f": a, "g": b} for a in VALUES for b in VALUES]


def universe() -> Universe:
    return Universe({f: VALUES for f in FIELDS})


def rand_pred(rng: random.Random, depth: int = 2) -> S.Pred:
    r = rng.random()
    if depth == 0 or r < 0.45:
        return S.Test(rng.choice(FIELDS), rng.choice(VALUES))
    if r < 0.52:
        return rng.choice([S.PTrue(), S.PFalse()])
    if r < 0.67:
        return S.Neg(rand_pred(rng, depth - 1))
    if r < 0.84:
        return S.And(rand_pred(rng, depth - 1), rand_pred(rng, depth - 1))
    return S.Or(rand_pred(rng, depth - 1), rand_pred(rng, depth - 1))


def rand_prog(rng: random.Random, depth: int = 3, loops: int = 2) -> tuple[S.Prog, int]:
    """Random program and the number of loops it used (at most ``loops``)."""
    r = rng.random()
    if depth == 0 or r < 0.3:
        if rng.random() < 0.75:
            return S.Assign(rng.choice(FIELDS), rng.choice(VALUES)), 0
        return S.Filter(rand_pred(rng, 1)), 0
    if r < 0.5:
        a, n = rand_prog(rng, depth - 1, loops)
        b, m = rand_prog(rng, depth - 1, loops - n)
        return S.Seq(a, b), n + m
    if r < 0.65:
        a, n = rand_prog(rng, depth - 1, loops)
        b, m = rand_prog(rng, depth - 1, loops - n)
        q = rng.choice(PROBS)
        return S.Choice(((q, a), (1 - q, b))), n + m
    if r < 0.8 or loops == 0:
        a, n = rand_prog(rng, depth - 1, loops)
        b, m = rand_prog(rng, depth - 1, loops - n)
        return S.If(rand_pred(rng), a, b), n + m
    body, n = rand_prog(rng, depth - 1, loops - 1)
    return S.While(rand_pred(rng), body), n + 1


def loop_corpus(n: int, seed: int = 2024) -> list[S.Prog]:
    """``n`` programs, each with one or two loops."""
    rng = random.Random(seed)
    out = []
    while len(out) < n:
        if rng.random() < 0.7:
            a, used = rand_prog(rng, 2, 1)
            b, _ = rand_prog(rng, 2, 1 - used)
            q = rng.choice(PROBS)
            body: S.Prog = S.Choice(((q, a), (1 - q, b)))
        else:
            body, _ = rand_prog(rng, 3, 1)
        p = S.While(rand_pred(rng), body)
        if rng.random() < 0.4:
            pre, _ = rand_prog(rng, 1, 0)
            p = S.Seq(pre, p)
        out.append(p)
    return out


def corpus(n: int, seed: int = 7, loops: int = 2) -> list[S.Prog]:
    rng = random.Random(seed)
    return [rand_prog(rng, 4, loops)[0] for _ in range(n)]


def star_encode(p: S.Prog) -> S.Prog:
    """Replace every guarded loop by its star form ``(a; body)*; !a``."""
    if isinstance(p, S.While):
        body = star_encode(p.body)
        return S.Seq(S.Star(S.Seq(S.Filter(p.cond), body)), S.Filter(S.Neg(p.cond)))
    if isinstance(p, S.If):
        return S.If(p.cond, star_encode(p.then), star_encode(p.orelse))
    if isinstance(p, S.Seq):
        return S.Seq(star_encode(p.first), star_encode(p.second))
    if isinstance(p, S.Choice):
        return S.Choice(tuple((r, star_encode(q)) for r, q in p.branches))
    if isinstance(p, S.Case):
        return S.Case(tuple((g, star_encode(q)) for g, q in p.branches))
    return p


def union_encode(p: S.Prog) -> S.Prog:
    """Replace conditionals by their guarded-union form ``a;p & !a;q``."""
    if isinstance(p, S.If):
        return S.Union(S.Seq(S.Filter(p.cond), union_encode(p.then)),
                       S.Seq(S.Filter(S.Neg(p.cond)), union_encode(p.orelse)))
    if isinstance(p, S.While):
        return S.While(p.cond, union_encode(p.body))
    if isinstance(p, S.Seq):
        return S.Seq(union_encode(p.first), union_encode(p.second))
    if isinstance(p, S.Choice):
        return S.Choice(tuple((r, union_encode(q)) for r, q in p.branches))
    return p


# ---------------------------------------------------------------- hypothesis

def _seeded(fn):
    return st.integers(0, 2**32 - 1).map(lambda s: fn(random.Random(s)))


def programs(loops: int = 2, depth: int = 3):
    return _seeded(lambda rng: rand_prog(rng, depth, loops)[0])


def loop_free():
    return programs(loops=0)


def preds():
    return _seeded(lambda rng: rand_pred(rng, 2))


def packets():
    return st.sampled_from(PACKETS)
