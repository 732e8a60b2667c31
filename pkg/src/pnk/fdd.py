"""Probabilistic forwarding decision diagrams.

Diagrams are identified by a 64-bit content hash of their canonical key, so
the same diagram gets the same id in every process.  That is what lets
parallel workers build sub-diagrams independently and ship them back.

Canonical form:
  * tests are ordered by ``(field, value)`` and strictly increase on paths;
  * the true branch of ``f=v`` never tests ``f`` again and its leaves never
    carry the no-op write ``f:=v``;
  * a node is dropped whenever its true branch agrees with what the false
    branch would do on packets with ``f=v``.

An action is ``None`` (drop) or a sorted tuple of ``(field, value)`` writes;
``()`` is the identity.
"""

from __future__ import annotations

import hashlib
import math
from fractions import Fraction
from typing import Iterable, Mapping

from . import syntax as S

Action = tuple | None
DROP_ACTION = None
IDENTITY: tuple = ()


class FddError(Exception):
    pass


def _akey(a: Action):
    return (0,) if a is None else (1, a)


def _hash_key(key: tuple) -> int:
    return int.from_bytes(hashlib.blake2b(repr(key).encode(), digest_size=8).digest(), "big")


class FddStore:
    """Hash-consing table plus operation caches."""

    def __init__(self):
        self.nodes: dict[int, tuple] = {}
        self.index: dict[tuple, int] = {}
        # id -> (frozenset of (field, value) writes below, exact?)
        self.meta: dict[int, tuple[frozenset, bool]] = {}
        self.caches: dict[str, dict] = {}

    def cache(self, name: str) -> dict:
        c = self.caches.get(name)
        if c is None:
            c = self.caches[name] = {}
        return c

    def clear_caches(self):
        self.caches.clear()

    def intern(self, key: tuple) -> int:
        uid = self.index.get(key)
        if uid is not None:
            return uid
        uid = _hash_key(key)
        old = self.nodes.get(uid)
        if old is not None and old != key:
            raise FddError(f"hash collision between {old!r} and {key!r}")
        self._insert(uid, key)
        return uid

    def _insert(self, uid: int, key: tuple):
        self.nodes[uid] = key
        self.index[key] = uid
        if key[0] == "L":
            mods = frozenset(m for a, _ in key[1] if a for m in a)
            exact = all(isinstance(p, (int, Fraction)) for _, p in key[1])
        else:
            mh, eh = self.meta[key[3]]
            ml, el = self.meta[key[4]]
            mods = mh if ml <= mh else (ml if mh <= ml else mh | ml)
            exact = eh and el
        self.meta[uid] = (mods, exact)

    def export(self, root: int) -> list[tuple[int, tuple]]:
        """Nodes reachable from ``root``, children before parents."""
        out, seen, stack = [], set(), [(root, False)]
        while stack:
            x, done = stack.pop()
            if done:
                out.append((x, self.nodes[x]))
                continue
            if x in seen:
                continue
            seen.add(x)
            stack.append((x, True))
            key = self.nodes[x]
            if key[0] == "N":
                stack.append((key[4], False))
                stack.append((key[3], False))
        return out

    def import_nodes(self, items: Iterable[tuple[int, tuple]]):
        for uid, key in items:
            old = self.nodes.get(uid)
            if old is None:
                self._insert(uid, key)
            elif old != key:
                raise FddError("hash collision while merging worker results")


STORE = FddStore()


def store() -> FddStore:
    return STORE


# ------------------------------------------------------------------- leaves

def _normalize_dist(dist) -> tuple:
    acc: dict = {}
    items = dist.items() if isinstance(dist, Mapping) else dist
    for a, p in items:
        if a is not None:
            a = tuple(sorted(dict(a).items()))
        if p == 0:
            continue
        if p < 0:
            raise FddError(f"negative probability {p}")
        acc[a] = acc.get(a, 0) + p
    if not acc:
        raise FddError("empty action distribution")
    return tuple(sorted(acc.items(), key=lambda ap: _akey(ap[0])))


def leaf(dist) -> int:
    """Leaf holding a distribution over actions (mapping or (action, prob) pairs)."""
    norm = _normalize_dist(dist)
    total = sum(p for _, p in norm)
    exact = all(isinstance(p, (int, Fraction)) for _, p in norm)
    if exact and total != 1 or not exact and abs(total - 1) > 1e-9:
        raise FddError(f"leaf probabilities sum to {total}")
    return STORE.intern(("L", norm))


SKIP = leaf({IDENTITY: Fraction(1)})
DROP = leaf({DROP_ACTION: Fraction(1)})


def assign(field: str, value: int) -> int:
    return leaf({((field, value),): Fraction(1)})


def is_leaf(x: int) -> bool:
    return STORE.nodes[x][0] == "L"


def node(x: int) -> tuple:
    return STORE.nodes[x]


def dist_of(x: int) -> tuple:
    key = STORE.nodes[x]
    if key[0] != "L":
        raise FddError("not a leaf")
    return key[1]


def is_exact(x: int) -> bool:
    return STORE.meta[x][1]


# ------------------------------------------------------ restriction & strip

def restrict(x: int, f: str, v: int, positive: bool) -> int:
    """Cofactor of ``x`` assuming ``f=v`` (positive) or ``f!=v``."""
    key = STORE.nodes[x]
    if key[0] == "L":
        return x
    _, g, w, hi, lo = key
    if g > f or (g == f and w > v and not positive):
        return x
    if g == f:
        if w == v:
            return hi if positive else lo
        if positive:
            table, tail = _jumps(x)
            return table.get(v, tail)
    memo = STORE.cache("restrict")
    k = (x, f, v, positive)
    r = memo.get(k)
    if r is None:
        r = mk(g, w, restrict(hi, f, v, positive), restrict(lo, f, v, positive))
        memo[k] = r
    return r


def _jumps(x: int) -> tuple[dict, int]:
    """Along the run of tests on x's field: value -> true branch, plus the node after the run."""
    memo = STORE.cache("jumps")
    r = memo.get(x)
    if r is not None:
        return r
    f = STORE.nodes[x][1]
    run, y = [], x
    table, tail = None, None
    while True:
        key = STORE.nodes[y]
        if key[0] != "N" or key[1] != f:
            table, tail = {}, y
            break
        if y in memo:
            table, tail = dict(memo[y][0]), memo[y][1]
            break
        run.append(key)
        y = key[4]
    for key in reversed(run):
        table[key[2]] = key[3]
    r = memo[x] = (table, tail)
    return r


def strip(x: int, f: str, v: int) -> int:
    """Remove the no-op write ``f:=v`` from every leaf (caller knows ``f=v``)."""
    if (f, v) not in STORE.meta[x][0]:
        return x
    memo = STORE.cache("strip")
    k = (x, f, v)
    r = memo.get(k)
    if r is not None:
        return r
    key = STORE.nodes[x]
    if key[0] == "L":
        r = leaf([(None if a is None else tuple(m for m in a if m != (f, v)), p)
                  for a, p in key[1]])
    else:
        r = mk(key[1], key[2], strip(key[3], f, v), strip(key[4], f, v))
    memo[k] = r
    return r


def mk(f: str, v: int, hi: int, lo: int) -> int:
    """Canonical node testing ``f=v``; children may be arbitrary diagrams."""
    hi = strip(restrict(hi, f, v, True), f, v)
    lo = restrict(lo, f, v, False)
    if hi == lo:
        return lo
    if strip(restrict(lo, f, v, True), f, v) == hi:
        return lo
    return STORE.intern(("N", f, v, hi, lo))


def branch(f: str, v: int, hi: int, lo: int) -> int:
    """Like ``mk`` but accepts children whose tests precede ``(f, v)``."""
    top = _top((hi, lo))
    if top is not None and top < (f, v):
        return ite(test(f, v), hi, lo)
    return mk(f, v, hi, lo)


def test(f: str, v: int) -> int:
    return mk(f, v, SKIP, DROP)


def _top(xs) -> tuple | None:
    best = None
    for x in xs:
        key = STORE.nodes[x]
        if key[0] == "N":
            t = (key[1], key[2])
            if best is None or t < best:
                best = t
    return best


# ------------------------------------------------------------- combinators

def ite(c: int, t: int, e: int) -> int:
    """Per packet: ``t`` where the 0/1 diagram ``c`` accepts, else ``e``."""
    if t == e:
        return t
    key = STORE.nodes[c]
    if key[0] == "L":
        if c == SKIP:
            return t
        if c == DROP:
            return e
        raise FddError("ite condition must be a 0/1 diagram")
    memo = STORE.cache("ite")
    k = (c, t, e)
    r = memo.get(k)
    if r is not None:
        return r
    f, v = _top((c, t, e))
    r = mk(f, v,
           ite(restrict(c, f, v, True), restrict(t, f, v, True), restrict(e, f, v, True)),
           ite(restrict(c, f, v, False), restrict(t, f, v, False), restrict(e, f, v, False)))
    memo[k] = r
    return r


def mix(parts: Iterable[tuple]) -> int:
    """Convex combination ``sum r_i * x_i`` of diagrams."""
    acc: dict[int, object] = {}
    for r, x in parts:
        if r:
            acc[x] = acc.get(x, 0) + r
    if not acc:
        raise FddError("empty mixture")
    if len(acc) == 1:
        return next(iter(acc))
    items = tuple(sorted(acc.items()))
    memo = STORE.cache("mix")
    r = memo.get(items)
    if r is not None:
        return r
    top = _top(x for x, _ in items)
    if top is None:
        out: dict = {}
        for x, w in items:
            for a, p in STORE.nodes[x][1]:
                out[a] = out.get(a, 0) + w * p
        r = leaf(out)
    else:
        f, v = top
        r = mk(f, v,
               mix((w, restrict(x, f, v, True)) for x, w in items),
               mix((w, restrict(x, f, v, False)) for x, w in items))
    memo[items] = r
    return r


def combine(r, x: int, y: int) -> int:
    """``x`` with probability ``r``, else ``y``."""
    if not 0 <= r <= 1:
        raise FddError(f"probability {r} outside [0,1]")
    return mix(((r, x), (1 - r, y)))


def map_leaves(x: int, tag, fn) -> int:
    """Rebuild ``x`` with each leaf distribution replaced by ``fn(dist)`` (a diagram)."""
    memo = STORE.cache("map")
    k = (x, tag)
    r = memo.get(k)
    if r is not None:
        return r
    key = STORE.nodes[x]
    if key[0] == "L":
        r = fn(key[1])
    else:
        r = mk(key[1], key[2], map_leaves(key[3], tag, fn), map_leaves(key[4], tag, fn))
    memo[k] = r
    return r


def _after(a: tuple, g: int) -> int:
    """Diagram for: apply writes ``a``, then run ``g``."""
    memo = STORE.cache("after")
    k = (a, g)
    r = memo.get(k)
    if r is not None:
        return r
    h = g
    for f, v in a:
        h = restrict(h, f, v, True)
    if a:
        def compose(dist):
            out = []
            for b, p in dist:
                if b is None:
                    out.append((None, p))
                else:
                    w = dict(a)
                    w.update(b)
                    out.append((w, p))
            return leaf(out)
        h = map_leaves(h, ("after", a), compose)
    memo[k] = h
    return h


def seq(x: int, y: int) -> int:
    """Sequential composition: run ``x``, then ``y`` on each output packet."""
    if x == DROP or y == SKIP:
        return x
    if x == SKIP:
        return y
    memo = STORE.cache("seq")
    k = (x, y)
    r = memo.get(k)
    if r is not None:
        return r
    key = STORE.nodes[x]
    if key[0] == "L":
        r = mix((p, DROP if a is None else _after(a, y)) for a, p in key[1])
    else:
        _, f, v, hi, lo = key
        r = ite(test(f, v), seq(hi, y), seq(lo, y))
    memo[k] = r
    return r


def negate(c: int) -> int:
    def swap(dist):
        (a, _), = dist
        return DROP if a == IDENTITY else SKIP
    return map_leaves(c, "negate", swap)


def of_pred(a: S.Pred) -> int:
    memo = STORE.cache("pred")
    r = memo.get(a)
    if r is not None:
        return r
    if isinstance(a, S.PTrue):
        r = SKIP
    elif isinstance(a, S.PFalse):
        r = DROP
    elif isinstance(a, S.Test):
        r = test(a.field, a.value)
    elif isinstance(a, S.Neg):
        r = negate(of_pred(a.arg))
    elif isinstance(a, S.And):
        r = ite(of_pred(a.left), of_pred(a.right), DROP)
    elif isinstance(a, S.Or):
        r = ite(of_pred(a.left), SKIP, of_pred(a.right))
    else:
        raise TypeError(f"not a predicate: {a!r}")
    memo[a] = r
    return r


# ----------------------------------------------------------------- queries

Packet = Mapping[str, int | None]


def apply_action(a: Action, pk: Packet):
    if a is None:
        return None
    out = dict(pk)
    out.update(a)
    return tuple(sorted(out.items()))


def leaf_for(x: int, pk: Packet) -> tuple:
    """Leaf distribution reached by packet ``pk``; absent fields read as 0,
    a ``None`` value (wildcard) fails every test on its field."""
    key = STORE.nodes[x]
    while key[0] == "N":
        _, f, v, hi, lo = key
        key = STORE.nodes[hi if pk.get(f, 0) == v else lo]
    return key[1]


def evaluate(x: int, pk: Packet) -> dict:
    """Output distribution: frozen packet (sorted item tuple) or None (drop) -> prob."""
    out: dict = {}
    for a, p in leaf_for(x, pk):
        o = apply_action(a, pk)
        out[o] = out.get(o, 0) + p
    return out


def size(x: int) -> int:
    return len(STORE.export(x))


def tests_and_mods(x: int) -> dict[str, set[int]]:
    vals: dict[str, set[int]] = {}
    for _, key in STORE.export(x):
        if key[0] == "N":
            vals.setdefault(key[1], set()).add(key[2])
        else:
            for a, _ in key[1]:
                for f, v in a or ():
                    vals.setdefault(f, set()).add(v)
    return vals


def paths(x: int):
    """Yield ``(constraints, dist)``; constraints are ``(field, value, bool)`` triples."""
    stack = [(x, ())]
    while stack:
        y, path = stack.pop()
        key = STORE.nodes[y]
        if key[0] == "L":
            yield path, key[1]
        else:
            _, f, v, hi, lo = key
            stack.append((lo, path + ((f, v, False),)))
            stack.append((hi, path + ((f, v, True),)))


def check_invariants(x: int):
    """Structural check of ordering, reduction and the true-branch rule."""
    for _, key in STORE.export(x):
        if key[0] == "L":
            continue
        _, f, v, hi, lo = key
        if hi == lo:
            raise FddError(f"unreduced node on {f}={v}")
        for child, is_hi in ((hi, True), (lo, False)):
            ck = STORE.nodes[child]
            if ck[0] == "N" and (ck[1], ck[2]) <= (f, v):
                raise FddError(f"order violated below {f}={v}")
        if any(k[0] == "N" and k[1] == f for _, k in STORE.export(hi)):
            raise FddError(f"true branch of {f}={v} re-tests {f}")
        if (f, v) in STORE.meta[hi][0]:
            raise FddError(f"true branch of {f}={v} writes {f}:={v}")


# --------------------------------------------------------------- comparison

def _close(p, q, eps) -> bool:
    return p == q if eps is None else abs(p - q) <= eps


def semantic_diff(x: int, y: int, eps: float | None = None, drop_matters: bool = True):
    """Walk ``x`` and ``y`` jointly.

    Returns ``(lt, gt)``: witnesses ``(constraints, action, px, py)`` where some
    output gets strictly less (resp. more) mass from ``x`` than from ``y``, or
    None.  Each joint region is judged at its generic packet (every field not
    pinned by a positive test holds a value no diagram mentions); there distinct
    actions give distinct outputs, and on any other packet outputs only merge, so
    the per-action comparison decides the whole region.
    """
    lt = gt = None
    seen = set()
    stack = [(x, y, ())]
    while stack and (lt is None or gt is None):
        a, b, path = stack.pop()
        if (a, b) in seen:
            continue
        seen.add((a, b))
        top = _top((a, b))
        if top is None:
            da, db = dict(STORE.nodes[a][1]), dict(STORE.nodes[b][1])
            for act in sorted(set(da) | set(db), key=_akey):
                if act is None and not drop_matters:
                    continue
                pa, pb = da.get(act, 0), db.get(act, 0)
                if _close(pa, pb, eps):
                    continue
                if pa < pb and lt is None:
                    lt = (path, act, pa, pb)
                elif pa > pb and gt is None:
                    gt = (path, act, pa, pb)
            continue
        f, v = top
        stack.append((restrict(a, f, v, False), restrict(b, f, v, False), path + ((f, v, False),)))
        stack.append((strip(restrict(a, f, v, True), f, v), strip(restrict(b, f, v, True), f, v),
                      path + ((f, v, True),)))
    return lt, gt


def canonical_eq(x: int, y: int, eps: float | None = None) -> bool:
    """Semantic equality; id equality suffices for exact diagrams."""
    if x == y:
        return True
    if eps is None and not (is_exact(x) and is_exact(y)):
        eps = 1e-9
    lt, gt = semantic_diff(x, y, eps)
    return lt is None and gt is None


def generic_packet(path) -> dict:
    pk: dict = {}
    for f, v, pos in path:
        if pos:
            pk[f] = v
        else:
            pk.setdefault(f, None)
    return pk


# --------------------------------------------------------------------- DOT

def _fmt(p) -> str:
    if isinstance(p, Fraction):
        return str(p) if p.denominator != 1 else str(p.numerator)
    return f"{p:.6g}"


def leaf_label(dist) -> str:
    parts = []
    for a, p in dist:
        if a is None:
            s = "drop"
        elif not a:
            s = "id"
        else:
            s = ";".join(f"{f}:={v}" for f, v in a)
        parts.append(s if len(dist) == 1 else f"{_fmt(p)}: {s}")
    return "\\n".join(parts)


def to_dot(x: int, name: str = "fdd") -> str:
    lines = [f"digraph {name} {{"]
    for uid, key in STORE.export(x):
        nid = f"n{uid:016x}"
        if key[0] == "L":
            lines.append(f'  {nid} [shape=box, label="{leaf_label(key[1])}"];')
        else:
            _, f, v, hi, lo = key
            lines.append(f'  {nid} [shape=ellipse, label="{f}={v}"];')
            lines.append(f"  {nid} -> n{hi:016x};")
            lines.append(f"  {nid} -> n{lo:016x} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def dist_total(dist) -> float:
    return math.fsum(float(p) for _, p in dist)
