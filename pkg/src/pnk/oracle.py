"""Reference packet-set semantics for tiny universes.

Everything here is exact and deliberately naive: packet sets are bitmasks
over an explicit universe, distributions are dicts, and loops go through
the small-step chain over (current set, accumulator) pairs.  It accepts
union and star, which the compiler does not, so it can check the guarded
encodings of ``if`` and ``while`` against their definitions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from . import linalg as L
from . import syntax as S
from .domain import ResourceError

DEFAULT_UNIVERSE_CAP = 4

Dist = dict  # packet-set mask -> Fraction


def point(mask: int) -> Dist:
    return {mask: Fraction(1)}


def mix(parts) -> Dist:
    out: Dist = {}
    for w, d in parts:
        for m, p in d.items():
            out[m] = out.get(m, 0) + w * p
    return {m: p for m, p in out.items() if p}


def convolve(d1: Dist, d2: Dist) -> Dist:
    """Distribution of ``A | B`` for independent ``A ~ d1``, ``B ~ d2``."""
    out: Dist = {}
    for m1, p1 in d1.items():
        for m2, p2 in d2.items():
            m = m1 | m2
            out[m] = out.get(m, 0) + p1 * p2
    return out


class Universe:
    """Finite packet universe: the product of per-field value sets."""

    def __init__(self, values: Mapping[str, tuple], cap: int = DEFAULT_UNIVERSE_CAP):
        self.fields = tuple(sorted(values))
        combos = list(itertools.product(*(tuple(sorted(values[f])) for f in self.fields)))
        if len(combos) > cap:
            raise ResourceError(f"universe of {len(combos)} packets exceeds cap {cap}")
        self.packets = combos
        self.index = {pk: i for i, pk in enumerate(combos)}
        self.full = (1 << len(combos)) - 1

    @classmethod
    def for_program(cls, *progs: S.Prog, cap: int = DEFAULT_UNIVERSE_CAP, extra=None) -> "Universe":
        vals: dict[str, set] = {}
        for p in progs:
            for f, vs in S.mentioned_values(p).items():
                vals.setdefault(f, set()).update(vs)
        for f, vs in (extra or {}).items():
            vals.setdefault(f, set()).update(vs)
        return cls({f: tuple(vs) for f, vs in vals.items()}, cap)

    def __len__(self) -> int:
        return len(self.packets)

    def packet(self, i: int) -> dict:
        return dict(zip(self.fields, self.packets[i]))

    def mask_of(self, pk: Mapping) -> int:
        return 1 << self.index[tuple(pk.get(f, 0) for f in self.fields)]

    def members(self, mask: int) -> list[int]:
        return [i for i in range(len(self.packets)) if mask >> i & 1]

    def all_sets(self) -> range:
        return range(self.full + 1)

    def sat(self, a: S.Pred) -> int:
        mask = 0
        for i in range(len(self.packets)):
            if S.holds(a, self.packet(i)):
                mask |= 1 << i
        return mask

    def assign(self, mask: int, f: str, v: int) -> int:
        out = 0
        for i in self.members(mask):
            pk = self.packet(i)
            pk[f] = v
            key = tuple(pk[g] for g in self.fields)
            if key not in self.index:
                raise ResourceError(f"assignment {f}:={v} leaves the universe")
            out |= 1 << self.index[key]
        return out

    def show(self, mask: int) -> str:
        pks = [",".join(f"{f}={v}" for f, v in zip(self.fields, self.packets[i]))
               for i in self.members(mask)]
        return "{" + "; ".join(pks) + "}"


# --------------------------------------------------------- absorbing chains

def _saturated(succ: dict, acc_of) -> set:
    """States whose every reachable state carries the same accumulator."""
    pred: dict = {s: [] for s in succ}
    bad = set()
    for s, nxt in succ.items():
        for t in nxt:
            pred[t].append(s)
            if acc_of(t) != acc_of(s):
                bad.add(s)
    work = list(bad)
    while work:
        t = work.pop()
        for s in pred[t]:
            if s not in bad:
                bad.add(s)
                work.append(s)
    return set(succ) - bad


def _absorb(start, step, acc_of, final) -> Dist:
    """Run the chain ``step`` from ``start`` with saturated states quotiented.

    ``step(s)`` gives the successor distribution; ``final(s)`` says whether
    ``s`` is already absorbing.  Returns the distribution of ``acc_of`` at
    absorption.
    """
    succ: dict = {}
    todo = [start]
    while todo:
        s = todo.pop()
        if s in succ:
            continue
        succ[s] = step(s)
        todo.extend(t for t in succ[s] if t not in succ)
    sat = _saturated(succ, acc_of)

    def quot(s):
        return ("done", acc_of(s)) if (s in sat or final(s)) else s

    states = sorted({quot(s) for s in succ} | {quot(start)}, key=repr)
    idx = {s: i for i, s in enumerate(states)}
    rows = []
    for s in states:
        if s[0] == "done":
            rows.append({idx[s]: Fraction(1)})
            continue
        row: dict = {}
        for t, p in succ[s].items():
            j = idx[quot(t)]
            row[j] = row.get(j, 0) + p
        rows.append(row)
    T = L.SparseMatrix(len(states), len(states), rows)
    absorbing = [i for i, s in enumerate(states) if s[0] == "done"]
    s0 = idx[quot(start)]
    if s0 in absorbing:
        return point(states[s0][1])
    sys = L.partition_absorbing(T, absorbing)
    if L.trapped_states(sys):
        raise AssertionError("quotiented chain has a trapped state")
    A = L.absorbing_limit(sys, sink=absorbing[0], mode="exact")
    row = A.rows[sys.transient.index(s0)]
    out: Dist = {}
    for c, p in row.items():
        b = states[sys.absorbing[c]][1]
        out[b] = out.get(b, 0) + p
    return out


# ------------------------------------------------------------------ oracle

class Oracle:
    def __init__(self, universe: Universe):
        self.U = universe
        self._memo: dict = {}

    def run(self, p: S.Prog, a: int) -> Dist:
        """``[[p]](a)`` as a distribution over output packet sets."""
        key = (p, a)
        r = self._memo.get(key)
        if r is None:
            r = self._run(p, a)
            self._memo[key] = r
        return r

    def _run(self, p: S.Prog, a: int) -> Dist:
        U = self.U
        if a == 0:
            return point(0)
        if isinstance(p, S.Filter):
            return point(a & U.sat(p.pred))
        if isinstance(p, S.Assign):
            return point(U.assign(a, p.field, p.value))
        if isinstance(p, S.Seq):
            return mix((w, self.run(p.second, b)) for b, w in self.run(p.first, a).items())
        if isinstance(p, S.Choice):
            return mix((r, self.run(q, a)) for r, q in p.branches)
        if isinstance(p, S.Union):
            return convolve(self.run(p.left, a), self.run(p.right, a))
        if isinstance(p, S.If):
            t = U.sat(p.cond)
            return convolve(self.run(p.then, a & t), self.run(p.orelse, a & ~t & U.full))
        if isinstance(p, S.Case):
            out, rest = point(0), a
            for g, q in p.branches:
                part = rest & U.sat(g)
                rest &= ~part
                out = convolve(out, self.run(q, part))
            return out
        if isinstance(p, S.While):
            return self._while(p.cond, p.body, a)
        if isinstance(p, S.Star):
            return closed_form_star(self, p.body, a)
        if isinstance(p, (S.VarIn, S.DoWhile)):
            return self.run(S.desugar(p), a)
        raise TypeError(f"not a program: {p!r}")

    def _while(self, cond: S.Pred, body: S.Prog, a: int) -> Dist:
        t = self.U.sat(cond)

        def step(s):
            cur, acc = s
            acc2 = acc | (cur & ~t)
            return {(c, acc2): w for c, w in self.run(body, cur & t).items()}

        return _absorb((a, 0), step, lambda s: s[1], lambda s: s[0] == 0)

    def matrix(self, p: S.Prog) -> dict:
        """Full big-step matrix: input set -> output distribution."""
        return {a: self.run(p, a) for a in self.U.all_sets()}


def bigstep_ref(p: S.Prog, a, universe: Universe | None = None) -> Dist:
    U = universe or Universe.for_program(p)
    if not isinstance(a, int):
        mask = 0
        for pk in a:
            mask |= U.mask_of(pk)
        a = mask
    return Oracle(U).run(p, a)


# ------------------------------------------------------------- small steps

def closed_form_star(orc: Oracle, p: S.Prog, a: int) -> Dist:
    """Absorption of the S-then-U chain from ``(a, {})``, read at ``(empty, b)``."""
    def step(s):
        cur, acc = s
        return {(c, acc | cur): w for c, w in orc.run(p, cur).items()}

    return _absorb((a, 0), step, lambda s: s[1], lambda s: s[0] == 0)


@dataclass
class SmallStepChain:
    states: list  # (a, b) pairs
    S: L.SparseMatrix
    U: L.SparseMatrix
    saturated: set

    @property
    def SU(self) -> L.SparseMatrix:
        return self.S @ self.U

    def index(self, s) -> int:
        return self.states.index(s)


def smallstep_chain(orc: Oracle, p: S.Prog, starts=None) -> SmallStepChain:
    """Explicit S and U over states reachable from ``(a, {})`` for each start ``a``."""
    starts = list(orc.U.all_sets()) if starts is None else list(starts)
    succ: dict = {}
    todo = [(a, 0) for a in starts]
    while todo:
        s = todo.pop()
        if s in succ:
            continue
        cur, acc = s
        succ[s] = {(c, acc | cur): w for c, w in orc.run(p, cur).items()}
        todo.extend(t for t in succ[s] if t not in succ)
    sat = _saturated(succ, lambda s: s[1])
    for s in sat:
        q = (0, s[1])
        if q not in succ:
            succ[q] = {q: Fraction(1)}
    states = sorted(succ)
    idx = {s: i for i, s in enumerate(states)}
    n = len(states)
    S_rows = [{idx[t]: w for t, w in succ[s].items()} for s in states]
    U_rows = [{idx[(0, s[1])] if s in sat else idx[s]: Fraction(1)} for s in states]
    return SmallStepChain(states, L.SparseMatrix(n, n, S_rows), L.SparseMatrix(n, n, U_rows), sat)


def unrolling(p: S.Prog, n: int) -> S.Prog:
    """``p^(0) = skip``, ``p^(n+1) = skip & p; p^(n)``."""
    out: S.Prog = S.SKIP
    for _ in range(n):
        out = S.Union(S.SKIP, S.Seq(p, out))
    return out


def leq_cpo(mu: Dist, nu: Dist, universe: Universe) -> bool:
    """``mu`` below ``nu``: every up-set ``{b : b >= a}`` gets no more mass."""
    for a in universe.all_sets():
        up_mu = sum((w for b, w in mu.items() if b & a == a), Fraction(0))
        up_nu = sum((w for b, w in nu.items() if b & a == a), Fraction(0))
        if up_mu > up_nu:
            return False
    return True


def singleton_row(orc: Oracle, p: S.Prog, pk: Mapping) -> dict:
    """Output distribution on one input packet: packet tuple or None -> prob.

    Raises if the program produced a set with two or more packets.
    """
    U = orc.U
    out: dict = {}
    for m, w in orc.run(p, U.mask_of(pk)).items():
        members = U.members(m)
        if len(members) > 1:
            raise ValueError(f"non-singleton output {U.show(m)}")
        key = None if not members else tuple(sorted(U.packet(members[0]).items()))
        out[key] = out.get(key, 0) + w
    return out
