"""``pnk`` command line: compile, compare, query, generate and export."""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import analysis as A
from . import compile as C
from . import fdd as F
from . import prismgen as P
from . import syntax as S
from .domain import ResourceError, infer_domain, state_count
from .netmodel import models as M
from .netmodel import topology as T

EXIT_OK, EXIT_DIFF, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ parsing

def rational(text: str) -> Fraction:
    try:
        r = Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from exc
    if r < 0:
        raise argparse.ArgumentTypeError("expected a nonnegative rational")
    return r


def kfail(text: str):
    if text.strip().lower() in ("inf", "infinity", "oo"):
        return M.INF
    try:
        k = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a natural number or inf, got {text!r}") from exc
    if k < 0:
        raise argparse.ArgumentTypeError("k must be nonnegative")
    return k


def int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def packets(text: str) -> list[dict]:
    """``sw=1,pt=1;sw=2,pt=1`` -> list of packets."""
    out = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        pk = {}
        for kv in chunk.split(","):
            k, _, v = kv.partition("=")
            if not _:
                raise argparse.ArgumentTypeError(f"bad packet field {kv!r}")
            pk[k.strip()] = int(v)
        out.append(pk)
    return out


def ranges_arg(text: str) -> dict:
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        f, _, rng = item.partition("=")
        lo, _, hi = rng.partition("..")
        try:
            out[f.strip()] = (int(lo), int(hi))
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad range {item!r}; expected f=lo..hi") from exc
    return out


# ------------------------------------------------------------------ models

def _model_from(ns) -> M.Model:
    topo = ns.topo or "running"
    if topo == "running":
        scheme = ns.scheme or "resilient"
        if scheme not in ("naive", "resilient"):
            raise UsageError("the running example takes --scheme naive|resilient")
        return M.running_model(scheme == "resilient", ns.failure or "f2", hops=ns.hops)
    if topo == "chain":
        if ns.scheme not in (None, "chain"):
            raise UsageError("the chain topology takes --scheme chain")
        pf = ns.pfail if ns.pfail is not None else Fraction(1, 1000)
        return M.chain_model(ns.k or 1, pf, hops=ns.hops)
    if topo in ("fattree", "abfattree"):
        t = T.gen_fattree(ns.k or 4) if topo == "fattree" else T.gen_ab_fattree(ns.k or 4)
    else:
        path = Path(topo)
        if not path.exists():
            raise UsageError(f"unknown topology {topo!r} (not a generator name or file)")
        t = T.load_dot(path.read_text())
    pf = ns.pfail if ns.pfail is not None else Fraction(1, 4)
    kf = ns.kfail if ns.kfail is not None else M.INF
    return M.fattree_model(ns.scheme or "f10_0", kf, pf, topo=t, dst=ns.dst, hops=ns.hops)


_MODEL_KEYS = {"topo": str, "scheme": str, "failure": str, "k": int, "kfail": kfail,
               "pfail": rational, "dst": int, "hops": int}


def _model_operand(text: str, ns) -> M.Model:
    sub = argparse.Namespace(**vars(ns))
    for item in text[len("model:"):].split(","):
        if not item:
            continue
        key, _, val = item.partition("=")
        if key not in _MODEL_KEYS:
            raise UsageError(f"unknown model key {key!r}")
        setattr(sub, key, _MODEL_KEYS[key](val))
    return _model_from(sub)


class Operand:
    def __init__(self, prog, model: M.Model | None = None, ranges=None, label=""):
        self.prog, self.model, self.ranges, self.label = prog, model, ranges or {}, label


def load_operand(text: str, ns, other: Operand | None = None) -> Operand:
    if text in ("drop", "skip"):
        return Operand(S.DROP if text == "drop" else S.SKIP, label=text)
    if text == "teleport":
        base = other.model if other and other.model else _model_from(ns)
        return Operand(base.teleport, base, label="teleport")
    if text.startswith("model:"):
        m = _model_operand(text, ns)
        return Operand(m.program, m, label=m.name)
    if text == "model":
        m = _model_from(ns)
        return Operand(m.program, m, label=m.name)
    path = Path(text)
    if not path.exists():
        raise UsageError(f"no such file: {text}")
    prog, ranges = S.parse_module(path.read_text())
    return Operand(prog, ranges=ranges, label=text)


def load_pair(ns) -> tuple[Operand, Operand]:
    a_is_tp, b_is_tp = ns.a == "teleport", ns.b == "teleport"
    if a_is_tp and not b_is_tp:
        b = load_operand(ns.b, ns)
        return load_operand(ns.a, ns, b), b
    a = load_operand(ns.a, ns)
    return a, load_operand(ns.b, ns, a)


# ------------------------------------------------------------------ output

def _json_default(x):
    if isinstance(x, Fraction):
        return A.fmt_prob(x)
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, (set, frozenset, tuple)):
        return list(x)
    raise TypeError(f"cannot serialize {type(x).__name__}")


class Clock:
    def __init__(self):
        self.t = {"compile": 0.0, "solve": 0.0, "query": 0.0}

    def compile(self, prog, cfg) -> int:
        C.TIMINGS["solve"] = 0.0
        t0 = time.perf_counter()
        x = C.compile(prog, cfg)
        dt = time.perf_counter() - t0
        self.t["solve"] += C.TIMINGS["solve"]
        self.t["compile"] += dt - C.TIMINGS["solve"]
        return x

    def query(self, fn, *args, **kw):
        t0 = time.perf_counter()
        r = fn(*args, **kw)
        self.t["query"] += time.perf_counter() - t0
        return r

    def report(self) -> dict:
        out = {k: round(v, 6) for k, v in self.t.items()}
        out["total"] = round(sum(self.t.values()), 6)
        return out


def emit(ns, query: str, result, witnesses=None, clock: Clock | None = None):
    doc = {"query": query, "mode": ns.mode, "result": result}
    if witnesses is not None:
        doc["witnesses"] = [w.as_json() for w in witnesses]
    doc["timings"] = clock.report() if clock else {}
    if ns.format == "json":
        print(json.dumps(doc, default=_json_default, indent=2, sort_keys=False))
    else:
        for line in _table(doc):
            print(line)


def _flat(prefix, v, out):
    if isinstance(v, dict) and not ({"exact", "float"} >= set(v) and "float" in v):
        for k, x in v.items():
            _flat(f"{prefix}.{k}" if prefix else str(k), x, out)
    elif isinstance(v, list) and v and isinstance(v[0], dict):
        for i, x in enumerate(v):
            _flat(f"{prefix}[{i}]", x, out)
    else:
        if isinstance(v, dict):
            v = v["exact"] or v["float"]
        elif isinstance(v, Fraction):
            v = f"{v.numerator}/{v.denominator}"
        out.append((prefix, v))


def _table(doc) -> list[str]:
    rows: list = []
    _flat("", json.loads(json.dumps(doc, default=_json_default)), rows)
    w = max((len(k) for k, _ in rows), default=0)
    return [f"{k.ljust(w)}  {v}" for k, v in rows]


# ---------------------------------------------------------------- commands

def _cfg(ns) -> C.CompileConfig:
    return C.CompileConfig(mode=ns.mode, jobs=ns.jobs, cap=ns.cap)


def cmd_compile(ns) -> int:
    op = load_operand(ns.program, ns)
    clock = Clock()
    x = clock.compile(op.prog, _cfg(ns))
    dom = infer_domain(x)
    res = {"program": op.label, "fdd_nodes": F.size(x), "exact": F.is_exact(x),
           "domain": {f: list(v) for f, v in dom.items()},
           "matrix_states": state_count(dom, sorted(dom))}
    if ns.emit_source:
        res["source"] = S.pretty(op.prog)
    if ns.out:
        Path(ns.out).write_text(F.to_dot(x))
        res["dot"] = ns.out
    emit(ns, "compile", res, clock=clock)
    return EXIT_OK


def cmd_equiv(ns) -> int:
    a, b = load_pair(ns)
    clock = Clock()
    x, y = clock.compile(a.prog, _cfg(ns)), clock.compile(b.prog, _cfg(ns))
    ok, ws = clock.query(A.equivalence, x, y)
    emit(ns, "equiv", {"a": a.label, "b": b.label, "equivalent": ok}, ws, clock)
    return EXIT_OK if ok else EXIT_DIFF


def cmd_order(ns) -> int:
    a, b = load_pair(ns)
    clock = Clock()
    x, y = clock.compile(a.prog, _cfg(ns)), clock.compile(b.prog, _cfg(ns))
    r = clock.query(A.compare_fdds, x, y)
    emit(ns, "order", {"a": a.label, "b": b.label, "verdict": r.verdict, "symbol": r.symbol},
         r.witnesses, clock)
    return EXIT_OK


def _query_target(ns):
    if ns.program and ns.program not in ("model",) and not ns.program.startswith("model:"):
        op = load_operand(ns.program, ns)
        if not ns.ingress or ns.egress is None:
            raise UsageError("a program file needs --ingress and --egress")
        return op.prog, op.label, ns.ingress, S.parse_pred(ns.egress)
    op = load_operand(ns.program or "model", ns)
    m = op.model
    ingress = ns.ingress or m.ingress_packets
    egress = S.parse_pred(ns.egress) if ns.egress else m.egress
    return m.program, m.name, ingress, egress


def cmd_delivery(ns) -> int:
    prog, label, ingress, egress = _query_target(ns)
    clock = Clock()
    x = clock.compile(prog, _cfg(ns))
    rep = clock.query(A.delivery_probability, x, ingress, egress)
    res = {"model": label}
    res.update(rep.as_json())
    emit(ns, "delivery", res, clock=clock)
    return EXIT_OK


def cmd_hops(ns) -> int:
    if ns.hops is None:
        ns.hops = 12
    prog, label, ingress, egress = _query_target(ns)
    clock = Clock()
    x = clock.compile(prog, _cfg(ns))
    rep = clock.query(A.hop_stats, x, ingress, egress, ns.hops)
    res = {"model": label, "max_hops": ns.hops}
    res.update(rep.as_json())
    if ns.plot:
        from . import plotting
        plotting.hop_cdf({label: rep.cdf()}, ns.plot)
        res["plot"] = ns.plot
    emit(ns, "hops", res, clock=clock)
    return EXIT_OK


def cmd_gen_topo(ns) -> int:
    gen = T.GENERATORS.get(ns.kind)
    if gen is None:
        raise UsageError(f"unknown topology kind {ns.kind!r}")
    topo = gen(ns.k if ns.k is not None else (1 if ns.kind == "chain" else 4))
    text = T.to_dot(topo)
    res = {"kind": ns.kind, "switches": len(topo.switches()), "hosts": len(topo.hosts()),
           "links": len(topo.links) // 2, "failable": len(topo.failable_links())}
    if ns.out:
        Path(ns.out).write_text(text)
        res["path"] = ns.out
    else:
        res["dot"] = text
    emit(ns, "gen-topo", res)
    return EXIT_OK


def cmd_export_prism(ns) -> int:
    op = load_operand(ns.program, ns)
    t0 = time.perf_counter()
    raw = P.to_automaton(op.prog)
    aut = P.collapse_blocks(raw)
    ranges = P.default_ranges(op.prog)
    ranges.update(op.ranges)
    ranges.update(ns.ranges or {})
    text = P.emit_text(aut, ranges)
    egress = op.model.egress if op.model else None
    prop = P.property_text(aut, egress)
    res = {"program": op.label, "states_before_collapse": raw.size(), "states": aut.size(),
           "commands": sum(len(r) for r in aut.rules.values())}
    if ns.out:
        Path(ns.out).write_text(text)
        pp = str(Path(ns.out).with_suffix(".props"))
        Path(pp).write_text(prop)
        res.update(path=ns.out, property_path=pp)
    else:
        res.update(model=text, property=prop)
    clock = Clock()
    clock.t["compile"] = time.perf_counter() - t0
    emit(ns, "export-prism", res, clock=clock)
    return EXIT_OK


def cmd_bench_chain(ns) -> int:
    ks = ns.ks or [1, 2, 4, 8, 16, 32]
    pf = ns.pfail if ns.pfail is not None else Fraction(1, 1000)
    rows, total = [], Clock()
    for k in ks:
        clock = Clock()
        m = M.chain_model(k, pf)
        x = clock.compile(m.program, _cfg(ns))
        rep = clock.query(A.delivery_probability, x, m.ingress_packets, m.egress)
        expect = (1 - pf / 2) ** k
        ok = rep.mean == expect if rep.exact else abs(float(rep.mean) - float(expect)) <= A.EPS
        t = clock.report()
        for key in ("compile", "solve", "query"):
            total.t[key] += t[key]
        rows.append({"k": k, "switches": 4 * k, "delivery": rep.mean, "closed_form": expect,
                     "match": ok, "seconds": t["total"]})
    res = {"pfail": pf, "runs": rows, "loglog_slope": _slope(ks, [r["seconds"] for r in rows])}
    if ns.plot:
        from . import plotting
        plotting.runtime_scaling(ks, [max(r["seconds"], 1e-6) for r in rows], ns.plot)
        res["plot"] = ns.plot
    emit(ns, "bench-chain", res, clock=total)
    return EXIT_OK if all(r["match"] for r in rows) else EXIT_DIFF


def _slope(xs, ys):
    import numpy as np
    pts = [(math.log(x), math.log(max(y, 1e-6))) for x, y in zip(xs, ys) if x >= 4]
    if len(pts) < 2:
        return None
    a, b = zip(*pts)
    return float(np.polyfit(a, b, 1)[0])


def cmd_bench_fattree(ns) -> int:
    schemes = (ns.scheme or "f10_0,f10_3,f10_35").split(",")
    ks = [kfail(x) for x in (ns.kfail_list or "0,1,2,3,4,inf").split(",")]
    pf = ns.pfail if ns.pfail is not None else Fraction(1, 4)
    arity = ns.k or 4
    topo = T.gen_fattree(arity) if ns.topo == "fattree" else T.gen_ab_fattree(arity)
    rows, total = [], Clock()
    tp = None
    for kf in ks:
        for sch in schemes:
            clock = Clock()
            m = M.fattree_model(sch, kf, pf, topo=topo, dst=ns.dst, hops=ns.hops)
            x = clock.compile(m.program, _cfg(ns))
            if tp is None or ns.hops is not None:
                tp = C.compile(m.teleport, _cfg(ns))
            ok, _ = clock.query(A.equivalence, x, tp)
            if ns.hops is not None:
                rep = clock.query(A.hop_stats, x, m.ingress_packets, m.egress, ns.hops)
            else:
                rep = clock.query(A.delivery_probability, x, m.ingress_packets, m.egress)
            t = clock.report()
            for key in ("compile", "solve", "query"):
                total.t[key] += t[key]
            row = {"scheme": sch, "kfail": kf, "teleport_equivalent": ok, "delivery": rep.mean,
                   "min_delivery": rep.minimum, "fdd_nodes": F.size(x), "seconds": t["total"]}
            if ns.hops is not None:
                row["cdf"] = {str(h): v for h, v in rep.cdf().items()}
                row["cdf_raw"] = rep.cdf()
            rows.append(row)
    res = {"topology": topo.name, "pfail": pf, "jobs": ns.jobs, "runs": rows}
    if ns.plot:
        from . import plotting
        if ns.hops is not None:
            plotting.hop_cdf({f"{r['scheme']} k={r['kfail']}": r["cdf_raw"] for r in rows}, ns.plot)
        else:
            plotting.delivery_bars([f"{r['scheme']}\nk={r['kfail']}" for r in rows],
                                   [r["delivery"] for r in rows], ns.plot)
        res["plot"] = ns.plot
    for r in rows:
        r.pop("cdf_raw", None)
    emit(ns, "bench-fattree", res, clock=total)
    return EXIT_OK


# ------------------------------------------------------------------ parser

def _common(p: argparse.ArgumentParser):
    p.add_argument("--mode", choices=("exact", "float", "auto"), default="exact")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--cap", type=int, default=10**7, metavar="STATES")
    p.add_argument("--format", choices=("json", "table"), default="json")
    p.add_argument("--out", metavar="PATH")


def _model_flags(p: argparse.ArgumentParser):
    p.add_argument("--topo", help="running | chain | fattree | abfattree | path to a DOT file")
    p.add_argument("--scheme", help="naive | resilient | chain | ecmp | f10_0 | f10_3 | f10_35")
    p.add_argument("--failure", choices=("f0", "f1", "f2"), help="running-example failure model")
    p.add_argument("--k", type=int, help="chain length or tree arity")
    p.add_argument("--kfail", type=kfail, help="maximum number of failures (NAT or inf)")
    p.add_argument("--pfail", type=rational, help="per-link failure probability")
    p.add_argument("--dst", type=int, default=1, help="destination switch for tree models")
    p.add_argument("--hops", type=int, metavar="MAX", help="enable a hop counter bounded by MAX")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pnk", description="Exact analysis of guarded probabilistic network programs.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a program and summarize its diagram")
    p.add_argument("program")
    p.add_argument("--emit-source", action="store_true")
    _common(p)
    _model_flags(p)
    p.set_defaults(func=cmd_compile)

    for name, fn, hlp in (("equiv", cmd_equiv, "decide equivalence (exit 0 equal, 1 different)"),
                          ("order", cmd_order, "compare under the refinement order")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("a")
        p.add_argument("b")
        _common(p)
        _model_flags(p)
        p.set_defaults(func=fn)

    for name, fn in (("delivery", cmd_delivery), ("hops", cmd_hops)):
        p = sub.add_parser(name, help=f"{name} statistics for a model or program")
        p.add_argument("program", nargs="?")
        p.add_argument("--ingress", type=packets, help="packets like 'sw=1,pt=1;sw=2,pt=1'")
        p.add_argument("--egress", help="egress predicate, e.g. 'sw=2 & pt=2'")
        if name == "hops":
            p.add_argument("--plot", metavar="PNG")
        _common(p)
        _model_flags(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("gen-topo", help="generate a topology in DOT")
    p.add_argument("kind", choices=sorted(T.GENERATORS))
    p.add_argument("--k", type=int)
    _common(p)
    p.set_defaults(func=cmd_gen_topo)

    p = sub.add_parser("export-prism", help="translate to a PRISM dtmc model")
    p.add_argument("program")
    p.add_argument("--ranges", type=ranges_arg, help="field ranges like 'sw=0..20,pt=0..4'")
    _common(p)
    _model_flags(p)
    p.set_defaults(func=cmd_export_prism)

    p = sub.add_parser("bench-chain", help="chain benchmark against the closed form")
    p.add_argument("--ks", type=int_list, help="comma-separated chain lengths")
    p.add_argument("--pfail", type=rational)
    p.add_argument("--plot", metavar="PNG")
    _common(p)
    p.set_defaults(func=cmd_bench_chain)

    p = sub.add_parser("bench-fattree", help="F10 schemes on a (AB) FatTree")
    p.add_argument("--topo", choices=("fattree", "abfattree"), default="abfattree")
    p.add_argument("--k", type=int, help="tree arity")
    p.add_argument("--scheme", help="comma-separated schemes")
    p.add_argument("--kfail", dest="kfail_list", help="comma-separated failure bounds")
    p.add_argument("--pfail", type=rational)
    p.add_argument("--dst", type=int, default=1)
    p.add_argument("--hops", type=int, metavar="MAX")
    p.add_argument("--plot", metavar="PNG")
    _common(p)
    p.set_defaults(func=cmd_bench_fattree)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    if ns.jobs < 1:
        ap.error("--jobs must be at least 1")
    try:
        return ns.func(ns)
    except ResourceError as exc:
        print(f"pnk: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (UsageError, S.ParseError, T.TopologyError, M.ModelError, C.OverlapError,
            ValueError, argparse.ArgumentTypeError) as exc:
        print(f"pnk: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
