"""Translation to guarded-command Markov chains (PRISM ``dtmc`` models).

A Thompson-style pass builds one automaton state per program node, wiring
each construct to an explicit continuation.  Deterministic unguarded states
are then fused into their predecessors, and the survivors get dense
program-counter values.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

from . import linalg as L
from . import syntax as S
from .domain import DEFAULT_CAP, ResourceError

HALT, DROP = "halt", "drop"

Updates = tuple  # ((field, value), ...), applied left to right


@dataclass
class Branch:
    prob: Fraction
    updates: Updates
    dst: int


@dataclass
class Rule:
    guard: S.Pred
    branches: list[Branch]


@dataclass
class Automaton:
    initial: int
    rules: dict[int, list[Rule]] = field(default_factory=dict)
    kind: dict[int, str] = field(default_factory=dict)  # halt / drop markers

    @property
    def states(self) -> list[int]:
        return sorted(set(self.rules) | set(self.kind))

    def halt(self) -> int:
        return next(s for s, k in self.kind.items() if k == HALT)

    def drop(self) -> int | None:
        return next((s for s, k in self.kind.items() if k == DROP), None)

    def size(self) -> int:
        return len(self.states)


def _neg(a: S.Pred) -> S.Pred:
    if isinstance(a, S.PTrue):
        return S.PFalse()
    if isinstance(a, S.PFalse):
        return S.PTrue()
    return S.Neg(a)


class _Builder:
    def __init__(self):
        self.rules: dict[int, list[Rule]] = {}
        self.n = 0
        self.halt = self.fresh()
        self.drop = self.fresh()

    def fresh(self) -> int:
        self.n += 1
        return self.n - 1

    def state(self, rules: list[Rule]) -> int:
        s = self.fresh()
        self.rules[s] = [r for r in rules if not isinstance(r.guard, S.PFalse)]
        return s

    def build(self, p: S.Prog, k: int) -> int:
        one = Fraction(1)
        if isinstance(p, S.Filter):
            a = p.pred
            if isinstance(a, S.PTrue):
                return self.state([Rule(a, [Branch(one, (), k)])])
            if isinstance(a, S.PFalse):
                return self.state([Rule(S.PTrue(), [Branch(one, (), self.drop)])])
            return self.state([Rule(a, [Branch(one, (), k)]),
                               Rule(_neg(a), [Branch(one, (), self.drop)])])
        if isinstance(p, S.Assign):
            return self.state([Rule(S.PTrue(), [Branch(one, ((p.field, p.value),), k)])])
        if isinstance(p, S.Seq):
            return self.build(p.first, self.build(p.second, k))
        if isinstance(p, S.Choice):
            brs = [Branch(Fraction(r), (), self.build(q, k)) for r, q in p.branches if r]
            return self.state([Rule(S.PTrue(), brs)])
        if isinstance(p, S.If):
            t, e = self.build(p.then, k), self.build(p.orelse, k)
            return self.state([Rule(p.cond, [Branch(one, (), t)]),
                               Rule(_neg(p.cond), [Branch(one, (), e)])])
        if isinstance(p, S.Case):
            rules = [Rule(g, [Branch(one, (), self.build(q, k))]) for g, q in p.branches]
            rest = _neg(S.disj(*(g for g, _ in p.branches)))
            rules.append(Rule(rest, [Branch(one, (), self.drop)]))
            return self.state(rules)
        if isinstance(p, S.While):
            loop = self.fresh()
            body = self.build(p.body, loop)
            self.rules[loop] = [r for r in (Rule(p.cond, [Branch(one, (), body)]),
                                            Rule(_neg(p.cond), [Branch(one, (), k)]))
                                if not isinstance(r.guard, S.PFalse)]
            return loop
        if isinstance(p, (S.VarIn, S.DoWhile)):
            return self.build(S.desugar(p), k)
        raise TypeError(f"cannot translate {type(p).__name__}")


def to_automaton(p: S.Prog) -> Automaton:
    b = _Builder()
    init = b.build(p, b.halt)
    return Automaton(init, b.rules, {b.halt: HALT, b.drop: DROP})


def _merge(u: Updates, v: Updates) -> Updates:
    out = dict(u)
    for f, x in v:
        out.pop(f, None)
        out[f] = x
    return tuple(out.items())


def _passthrough(a: Automaton, s: int):
    """``(updates, dst)`` when ``s`` is a single unguarded probability-one step."""
    if s == a.initial or s in a.kind:
        return None
    rules = a.rules.get(s, [])
    if len(rules) != 1 or not isinstance(rules[0].guard, S.PTrue):
        return None
    brs = rules[0].branches
    if len(brs) != 1 or brs[0].prob != 1 or brs[0].dst == s:
        return None
    return brs[0].updates, brs[0].dst


def collapse_blocks(a: Automaton) -> Automaton:
    """Fuse deterministic unguarded states into their predecessors, then renumber."""
    rules = {s: [Rule(r.guard, [Branch(b.prob, b.updates, b.dst) for b in r.branches])
                 for r in rs] for s, rs in a.rules.items()}
    work = Automaton(a.initial, rules, dict(a.kind))

    def resolve(b: Branch) -> Branch:
        seen = set()
        upd, dst = b.updates, b.dst
        while dst not in seen:
            seen.add(dst)
            step = _passthrough(work, dst)
            if step is None:
                break
            upd, dst = _merge(upd, step[0]), step[1]
        return Branch(b.prob, upd, dst)

    for s in list(work.rules):
        for r in work.rules[s]:
            r.branches = _combine([resolve(b) for b in r.branches])
    return _renumber(work)


def _combine(brs: list[Branch]) -> list[Branch]:
    out: dict = {}
    for b in brs:
        key = (b.updates, b.dst)
        out[key] = out.get(key, 0) + b.prob
    return [Branch(p, u, d) for (u, d), p in out.items()]


def _renumber(a: Automaton) -> Automaton:
    order, seen = [], {a.initial}
    q = deque([a.initial])
    while q:
        s = q.popleft()
        if s in a.kind:
            continue
        order.append(s)
        for r in a.rules.get(s, []):
            for b in r.branches:
                if b.dst not in seen:
                    seen.add(b.dst)
                    q.append(b.dst)
    halt, drop = a.halt(), a.drop()
    order.append(halt)
    if drop is not None and drop in seen:
        order.append(drop)
    pc = {s: i for i, s in enumerate(order)}
    rules = {pc[s]: [Rule(r.guard, [Branch(b.prob, b.updates, pc[b.dst]) for b in r.branches])
                     for r in a.rules[s]] for s in order if s not in a.kind}
    kind = {pc[halt]: HALT}
    if drop in pc:
        kind[pc[drop]] = DROP
    return Automaton(pc[a.initial], rules, kind)


def check_well_formed(a: Automaton, packets=None) -> None:
    """Guards partition every packet in ``packets``; each rule's probabilities sum to one."""
    for s, rs in a.rules.items():
        for r in rs:
            if sum(b.prob for b in r.branches) != 1:
                raise ValueError(f"state {s}: probabilities do not sum to one")
        for pk in packets or ():
            hits = sum(1 for r in rs if S.holds(r.guard, pk))
            if hits != 1:
                raise ValueError(f"state {s}: {hits} guards hold on {pk}")


# ---------------------------------------------------------------- emission

def _pred(a: S.Pred) -> str:
    if isinstance(a, S.PTrue):
        return "true"
    if isinstance(a, S.PFalse):
        return "false"
    if isinstance(a, S.Test):
        return f"{a.field}={a.value}"
    if isinstance(a, S.Neg):
        return f"!({_pred(a.arg)})"
    op = "&" if isinstance(a, S.And) else "|"
    return f"({_pred(a.left)} {op} {_pred(a.right)})"


def _prob(p: Fraction) -> str:
    p = Fraction(p)
    return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"


def default_ranges(p: S.Prog) -> dict[str, tuple[int, int]]:
    return {f: (0, max(vs)) for f, vs in S.mentioned_values(p).items()}


def emit_text(a: Automaton, ranges: dict[str, tuple[int, int]], fields=None,
              init: dict | None = None, module: str = "net") -> str:
    fields = sorted(fields if fields is not None else _fields(a))
    for f in fields:
        if f not in ranges:
            raise ValueError(f"no declared range for field {f!r}")
        if f == "pc":
            raise ValueError("field name 'pc' clashes with the program counter")
    n = max(a.states)
    lines = ["dtmc", "", f"module {module}", f"  pc : [0..{n}] init {a.initial};"]
    for f in fields:
        lo, hi = ranges[f]
        start = (init or {}).get(f, lo)
        lines.append(f"  {f} : [{lo}..{hi}] init {start};")
    lines.append("")
    for s in sorted(a.rules):
        for r in a.rules[s]:
            guard = f"(pc={s})" if isinstance(r.guard, S.PTrue) else f"(pc={s}) & ({_pred(r.guard)})"
            parts = []
            for b in r.branches:
                ups = "".join(f"({f}'={v})&" for f, v in b.updates)
                parts.append(f"{_prob(b.prob)}:{ups}(pc'={b.dst})")
            lines.append(f"  [] {guard} -> {' + '.join(parts)};")
    lines += ["endmodule", ""]
    return "\n".join(lines)


def property_text(a: Automaton, egress: S.Pred | None = None) -> str:
    target = f"pc={a.halt()}"
    if egress is not None and not isinstance(egress, S.PTrue):
        target += f" & {_pred(egress)}"
    return f"P=? [ F {target} ]\n"


def _fields(a: Automaton) -> set[str]:
    out = set()
    for rs in a.rules.values():
        for r in rs:
            for n in S.walk(r.guard):
                if isinstance(n, S.Test):
                    out.add(n.field)
            for b in r.branches:
                out.update(f for f, _ in b.updates)
    return out


# -------------------------------------------------------------- simulation

def simulate_automaton(a: Automaton, pk: dict, cap: int = DEFAULT_CAP) -> dict:
    """Output distribution from ``(initial, pk)``: packet item tuple or None -> prob."""
    start = (a.initial, tuple(sorted(pk.items())))
    index = {None: 0, start: 1}
    states = [None, start]
    rows: list[dict] = [{0: Fraction(1)}]
    absorbing = [0]
    k = 1
    while k < len(states):
        s, items = states[k]
        kind = a.kind.get(s)
        if kind == HALT:
            rows.append({k: Fraction(1)})
            absorbing.append(k)
        elif kind == DROP:
            rows.append({0: Fraction(1)})
        else:
            cur = dict(items)
            rule = next((r for r in a.rules[s] if S.holds(r.guard, cur)), None)
            if rule is None:
                raise ValueError(f"no guard of state {s} holds on {cur}")
            row: dict = {}
            for b in rule.branches:
                nxt = dict(cur)
                nxt.update(b.updates)
                key = (b.dst, tuple(sorted(nxt.items())))
                j = index.get(key)
                if j is None:
                    j = index[key] = len(states)
                    states.append(key)
                    if len(states) > cap:
                        raise ResourceError(f"automaton chain exceeds cap {cap}")
                row[j] = row.get(j, 0) + b.prob
            rows.append(row)
        k += 1
    T = L.SparseMatrix(len(states), len(states), rows)
    lim = L.limit_matrix(T, sink=0, mode="exact", absorbing=absorbing)
    out: dict = {}
    for j, p in lim.rows[1].items():
        key = None if j == 0 else states[j][1]
        out[key] = out.get(key, 0) + p
    return out


def translate(p: S.Prog, ranges=None, collapse: bool = True) -> tuple[Automaton, str]:
    a = to_automaton(p)
    if collapse:
        a = collapse_blocks(a)
    else:
        a = _renumber(a)
    return a, emit_text(a, ranges if ranges is not None else default_ranges(p))
