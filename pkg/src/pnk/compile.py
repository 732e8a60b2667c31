"""Structural compilation of core programs to diagrams.

Loops are solved in closed form over the joint domain of guard and body.
Top-level ``case`` arms can be compiled in forked worker processes; their
diagrams come back as node lists and are merged by content hash, so the
result does not depend on the worker count.
"""

from __future__ import annotations

import itertools
import multiprocessing as mp
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction

from . import domain as D
from . import fdd as F
from . import linalg as L
from . import syntax as S


@dataclass(frozen=True)
class CompileConfig:
    mode: str = "auto"  # exact | float | auto
    jobs: int = 1
    cap: int = D.DEFAULT_CAP
    unroll: int = 0  # diagnostics only: report n-fold unrolling mass next to the solve

    def __post_init__(self):
        if self.jobs < 1:
            raise ValueError("worker count must be at least 1")
        if self.mode not in ("exact", "float", "auto"):
            raise ValueError(f"unknown solver mode {self.mode!r}")


# seconds spent in loop solves since the last reset; read by the CLI timing report
TIMINGS = {"solve": 0.0}


class OverlapError(ValueError):
    """Two case arms accept a common packet."""


# ------------------------------------------------------------ matrix bridge

def fdd_to_matrix(x: int, domain=None, cap: int = D.DEFAULT_CAP):
    """Stochastic matrix of ``x`` over the classes of ``domain`` (default: its own)."""
    dom = D.infer_domain(x) if domain is None else domain
    ss = D.enumerate_states(dom, sorted(dom), cap=cap)
    rows: list[dict] = [{0: Fraction(1)}]
    for i in range(1, len(ss)):
        row: dict = {}
        for out, p in F.evaluate(x, ss.packet(i)).items():
            j = 0 if out is None else ss.classify(dict(out))
            row[j] = row.get(j, 0) + p
        rows.append(row)
    return ss, L.SparseMatrix(len(ss), len(ss), rows, exact=F.is_exact(x))


def _row_leaf(ss: D.StateSpace, i: int, row: dict) -> int:
    src = ss.states[i]
    dist = []
    for j, p in row.items():
        tgt = ss.states[j]
        if tgt is None:
            dist.append((None, p))
            continue
        mods = []
        for f, sv, tv in zip(ss.fields, src, tgt):
            if tv == sv:
                continue
            if tv is None:
                raise F.FddError(f"row {ss.label(i)} sends mass to wildcard class {ss.label(j)}")
            mods.append((f, tv))
        dist.append((tuple(mods), p))
    return F.leaf(dist)


def matrix_to_fdd(ss: D.StateSpace, A: L.SparseMatrix, only=None) -> int:
    """Diagram with one path per class.  Classes outside ``only`` map to drop."""
    if list(ss.fields) != sorted(ss.fields):
        raise ValueError("state space fields must be sorted")
    keep = range(1, len(ss)) if only is None else only
    items = [(ss.states[i], _row_leaf(ss, i, A.rows[i])) for i in keep if i != 0]
    return _trie(ss.fields, 0, items)


def _trie(fields, k: int, items) -> int:
    if not items:
        return F.DROP
    if k == len(fields):
        return items[0][1]
    groups: dict = {}
    for st, lf in items:
        groups.setdefault(st[k], []).append((st, lf))
    out = _trie(fields, k + 1, groups.pop(None, []))
    for v in sorted(groups, reverse=True):
        out = F.mk(fields[k], v, _trie(fields, k + 1, groups[v]), out)
    return out


# ------------------------------------------------------------------- loops

def _first_step_states(g: int, dom: dict, fields) -> set:
    """Classes some packet can occupy after one guarded body step."""
    classes = {f: D.field_classes(dom, f) for f in fields}
    out = set()
    for path, dist in F.paths(g):
        pos = {f: v for f, v, b in path if b}
        neg: dict = {}
        for f, v, b in path:
            if not b:
                neg.setdefault(f, set()).add(v)
        for a, _ in dist:
            if a is None:
                continue
            mods = dict(a)
            choices = []
            for f in fields:
                if f in mods:
                    choices.append((mods[f],))
                elif f in pos:
                    choices.append((pos[f],))
                else:
                    choices.append(tuple(c for c in classes[f] if c not in neg.get(f, ())))
            out.update(itertools.product(*choices))
    return out


@dataclass
class LoopSystem:
    """Step chain of ``while a do body``: drop at 0, guard-failing states absorbing."""
    space: D.StateSpace
    T: L.SparseMatrix
    absorbing: list
    guard: int


def loop_system(a: S.Pred, body: int, cap: int = D.DEFAULT_CAP) -> LoopSystem:
    guard = F.of_pred(a)
    dom = D.infer_domain(guard, body)
    fields = tuple(sorted(dom))
    step = F.ite(guard, body, F.DROP)

    reach = _first_step_states(step, dom, fields)
    if len(reach) > cap:
        raise D.ResourceError(f"loop state space exceeds cap {cap}")
    order = sorted(reach, key=_state_key)
    index = {s: i + 1 for i, s in enumerate(order)}
    states: list = [None] + order
    rows: list[dict] = [{0: Fraction(1)}]
    absorbing = [0]
    k = 1
    while k < len(states):
        s = states[k]
        pk = dict(zip(fields, s))
        if F.leaf_for(guard, pk)[0][0] is None:
            rows.append({k: Fraction(1)})
            absorbing.append(k)
        else:
            row: dict = {}
            for out, p in F.evaluate(body, pk).items():
                if out is None:
                    j = 0
                else:
                    t = tuple(v for _, v in out)
                    j = index.get(t)
                    if j is None:
                        j = index[t] = len(states)
                        states.append(t)
                        if len(states) > cap:
                            raise D.ResourceError(f"loop state space exceeds cap {cap}")
                row[j] = row.get(j, 0) + p
            rows.append(row)
        k += 1
    n = len(states)
    T = L.SparseMatrix(n, n, rows, exact=F.is_exact(body))
    return LoopSystem(D.StateSpace(fields, states, dict(dom)), T, absorbing, guard)


def compile_while(a: S.Pred, body: int, cfg: CompileConfig = CompileConfig()) -> int:
    if F.of_pred(a) == F.DROP:
        return F.SKIP
    sys_ = loop_system(a, body, cfg.cap)
    mode = cfg.mode if F.is_exact(body) else "float"
    t0 = time.perf_counter()
    limit = L.limit_matrix(sys_.T, sink=0, mode=mode, absorbing=sys_.absorbing)
    TIMINGS["solve"] += time.perf_counter() - t0
    lim = matrix_to_fdd(sys_.space, limit)
    return F.ite(sys_.guard, F.seq(body, lim), F.SKIP)


def _state_key(s):
    return tuple((1, 0) if v is None else (0, v) for v in s)


def unroll_while(a: S.Pred, body: S.Prog, n: int) -> S.Prog:
    """n-fold unrolling; packets still looping after n rounds are dropped."""
    out: S.Prog = S.If(a, S.DROP, S.SKIP)
    for _ in range(n):
        out = S.If(a, S.Seq(body, out), S.SKIP)
    return out


# -------------------------------------------------------------------- case

def check_disjoint(guards: list[int], labels: list[str]):
    seen = F.DROP
    for i, g in enumerate(guards):
        if F.ite(g, seen, F.DROP) != F.DROP:
            for j in range(i):
                if F.ite(g, guards[j], F.DROP) != F.DROP:
                    raise OverlapError(
                        f"case arms {j} ({labels[j]}) and {i} ({labels[i]}) overlap")
        seen = F.ite(g, F.SKIP, seen)


def _worker(args):
    prog, cfg = args
    root = _compile(prog, cfg, nested=True)
    return root, F.STORE.export(root)


def compile_case_parallel(branches, cfg: CompileConfig = CompileConfig(), nested: bool = False) -> int:
    guards = [F.of_pred(g) for g, _ in branches]
    check_disjoint(guards, [S.pretty_pred(g) for g, _ in branches])
    progs = [q for _, q in branches]
    if cfg.jobs > 1 and not nested and len(progs) > 1:
        seq_cfg = replace(cfg, jobs=1)
        ctx = mp.get_context("fork")
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(progs)), mp_context=ctx) as ex:
            results = list(ex.map(_worker, [(q, seq_cfg) for q in progs]))
        bodies = []
        for root, nodes in results:
            F.STORE.import_nodes(nodes)
            bodies.append(root)
    else:
        bodies = [_compile(q, cfg, nested=True) for q in progs]
    out = F.DROP
    for g, b in reversed(list(zip(guards, bodies))):
        out = F.ite(g, b, out)
    return out


# ----------------------------------------------------------------- driver

def _compile(p: S.Prog, cfg: CompileConfig, nested: bool) -> int:
    if isinstance(p, S.Filter):
        return F.of_pred(p.pred)
    if isinstance(p, S.Assign):
        return F.assign(p.field, p.value)
    if isinstance(p, S.Seq):
        # flatten long left-nested chains without deep recursion
        parts = []
        q = p
        while isinstance(q, S.Seq):
            parts.append(q.second)
            q = q.first
        parts.append(q)
        out = _compile(parts.pop(), cfg, nested)
        while parts:
            out = F.seq(out, _compile(parts.pop(), cfg, nested))
        return out
    if isinstance(p, S.Choice):
        return F.mix((r, _compile(q, cfg, nested)) for r, q in p.branches)
    if isinstance(p, S.If):
        return F.ite(F.of_pred(p.cond), _compile(p.then, cfg, nested), _compile(p.orelse, cfg, nested))
    if isinstance(p, S.While):
        return compile_while(p.cond, _compile(p.body, cfg, nested), cfg)
    if isinstance(p, S.Case):
        return compile_case_parallel(p.branches, cfg, nested)
    if isinstance(p, (S.VarIn, S.DoWhile)):
        return _compile(S.desugar(p), cfg, nested)
    raise TypeError(f"cannot compile {type(p).__name__}; union and star are outside the guarded fragment")


def compile(p: S.Prog, cfg: CompileConfig | None = None) -> int:
    """Diagram of the single-packet big-step semantics of ``p``."""
    return _compile(p, cfg or CompileConfig(), nested=False)
