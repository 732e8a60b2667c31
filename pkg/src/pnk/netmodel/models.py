"""Failure models and full network-model assembly, plus the case-study presets."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

from .. import syntax as S
from . import routing as R
from .topology import Topology, gen_ab_fattree, gen_chain, gen_running

INF = math.inf
COUNTER = "cnt"
HOPS = "hops"
RESERVED = (COUNTER, HOPS)


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class FailureSpec:
    pr: Fraction = Fraction(1, 4)
    k: float = INF  # an int, or INF for unbounded
    persistent: bool = False  # counter survives across hops (one budget per packet)
    per_switch: bool = True  # flags belong to the switch currently holding the packet

    def __post_init__(self):
        if not 0 <= self.pr <= 1:
            raise ValueError("failure probability must lie in [0, 1]")
        if self.k != INF and (self.k < 0 or int(self.k) != self.k):
            raise ValueError("k must be a natural number or inf")


@dataclass
class FailureModel:
    prog: S.Prog
    flags: tuple[str, ...]
    counter: bool  # needs a persistent ``cnt`` local


def _lt(k: int) -> S.Pred:
    return S.disj(*(S.Test(COUNTER, i) for i in range(k)))


def fail_flags(flags, pr: Fraction, k, counter: bool) -> S.Prog:
    """Sample the given flags under at most ``k`` failures."""
    flags = list(flags)
    if not flags:
        return S.SKIP
    pr = Fraction(pr)
    if k == 0 or pr == 0:
        return S.seq(*(S.Assign(f, 1) for f in flags))
    if k == INF:
        return S.seq(*(_coin(f, pr) for f in flags))
    n = len(flags)
    if k == 1 and not counter and n * pr <= 1:
        arms = []
        if n * pr < 1:
            arms.append((1 - n * pr, S.seq(*(S.Assign(f, 1) for f in flags))))
        for down in flags:
            arms.append((pr, S.seq(*(S.Assign(f, 0 if f == down else 1) for f in flags))))
        return S.Choice(tuple(arms)) if len(arms) > 1 else arms[0][1]
    incr = R.increment(COUNTER, int(k))
    steps = [S.If(_lt(int(k)), S.Choice(((1 - pr, S.Assign(f, 1)), (pr, S.Seq(S.Assign(f, 0), incr)))),
                  S.Assign(f, 1)) for f in flags]
    body = S.seq(*steps)
    return body if counter else S.VarIn(COUNTER, 0, body)


def _coin(f: str, pr: Fraction) -> S.Prog:
    if pr == 1:
        return S.Assign(f, 0)
    return S.Choice(((1 - pr, S.Assign(f, 1)), (pr, S.Assign(f, 0))))


def failure_program(spec: FailureSpec, topo: Topology) -> FailureModel:
    links = topo.failable_links()
    if not links and spec.k != 0:
        raise ModelError("topology has no failable links")
    k = spec.k
    if spec.per_switch:
        ports_of: dict[int, list[int]] = {}
        for lk in links:
            ports_of.setdefault(topo.nodes[lk.src].sw, []).append(lk.src_port)
        bysig: dict[tuple, list[int]] = {}
        for sw, ports in sorted(ports_of.items()):
            bysig.setdefault(tuple(sorted(ports)), []).append(sw)
        limit = len(links) if spec.persistent else max((len(p) for p in bysig), default=0)
        if k != INF and k > limit:
            warnings.warn(f"k={k} exceeds the {limit} links that can fail; clamped")
            k = limit
        arms = []
        flags = set()
        for ports, sws in bysig.items():
            fl = [R.flag(p) for p in ports]
            flags.update(fl)
            arms.append((S.disj(*(S.Test(R.SW, s) for s in sws)),
                         fail_flags(fl, spec.pr, k, spec.persistent)))
        prog = S.ite_chain(arms, S.SKIP)
        return FailureModel(prog, tuple(sorted(flags)), spec.persistent and k not in (0, INF))
    fl = [R.flag(lk.src_port) for lk in links]
    if len(set(fl)) != len(fl):
        raise ModelError("global failure flags collide; use per-switch flags")
    if k != INF and k > len(fl):
        warnings.warn(f"k={k} exceeds the {len(fl)} failable links; clamped")
        k = len(fl)
    return FailureModel(fail_flags(fl, spec.pr, k, spec.persistent), tuple(fl),
                        spec.persistent and k not in (0, INF))


@dataclass
class ModelSpec:
    policy: S.Prog
    topology: S.Prog
    failure: FailureModel
    ingress: S.Pred
    egress: S.Pred
    form: str = "dowhile"  # while | dowhile
    hops: int | None = None  # hop-counter bound, None disables the counter
    locals: tuple = ()  # extra (field, init) locals, e.g. the detour flag
    clear_flags: bool = True

    def __post_init__(self):
        if self.form not in ("while", "dowhile"):
            raise ModelError(f"unknown model form {self.form!r}")


def _wrap(spec: ModelSpec, prog: S.Prog) -> S.Prog:
    for f, init in reversed(spec.locals):
        prog = S.VarIn(f, init, prog)
    if spec.failure.counter:
        prog = S.VarIn(COUNTER, 0, prog)
    for f in reversed(spec.failure.flags):
        prog = S.VarIn(f, 1, prog)
    return prog


def _check_reserved(spec: ModelSpec):
    used = set(S.mentioned_values(spec.policy)) | set(S.mentioned_values(spec.topology))
    if spec.hops is None:
        used_t = set()
    else:
        used_t = {HOPS}
    clash = (used & set(RESERVED)) - used_t
    if clash:
        raise ModelError(f"reserved fields used by policy or topology: {sorted(clash)}")
    if HOPS in S.mentioned_values(spec.policy):
        raise ModelError("policy may not touch the hop counter")


def assemble(spec: ModelSpec) -> S.Prog:
    _check_reserved(spec)
    f, p, t = spec.failure.prog, spec.policy, spec.topology
    start: list = [S.Filter(spec.ingress)]
    if spec.hops is not None:
        start.append(S.Assign(HOPS, 0))
    clear = [S.Assign(x, 1) for x in spec.failure.flags] if spec.clear_flags else []
    if spec.form == "while":
        step = S.seq(t, f, p, *clear)
        core = S.seq(*start, f, p, *clear, S.While(S.Neg(spec.egress), step))
    else:
        core = S.seq(*start, S.DoWhile(S.seq(f, p, t, *clear), S.Neg(spec.egress)))
    return _wrap(spec, core)


def teleport(ingress: S.Pred, dst: dict, spec: ModelSpec | None = None) -> S.Prog:
    """Ingress filter followed by direct assignments, in the same local scopes as ``spec``."""
    parts = [S.Filter(ingress)] + [S.Assign(f, v) for f, v in sorted(dst.items())]
    if spec is not None and spec.hops is not None and HOPS not in dst:
        parts.append(S.Assign(HOPS, 0))
    prog = S.seq(*parts)
    return prog if spec is None else _wrap(spec, prog)


# ----------------------------------------------------------------- presets

@dataclass
class Model:
    """An assembled case-study model with its matching teleport specification."""
    name: str
    program: S.Prog
    teleport: S.Prog
    ingress_packets: list[dict]
    egress: S.Pred
    spec: ModelSpec = field(repr=False)


RUNNING_FAILURES = {
    "f0": FailureSpec(Fraction(1, 4), 0, per_switch=False),
    "f1": FailureSpec(Fraction(1, 4), 1, per_switch=False),
    "f2": FailureSpec(Fraction(1, 5), INF, per_switch=False),
}


def running_policy(resilient: bool) -> S.Prog:
    at, fwd = R.at, R.fwd
    if resilient:
        p1 = S.ite_chain([(S.Test("up2", 1), fwd(2)), (S.Test("up2", 0), fwd(3))])
    else:
        p1 = fwd(2)
    arms = [(at(1), p1), (at(2), fwd(2))]
    if resilient:
        arms.append((at(3), fwd(2)))
    return S.ite_chain(arms)


def running_model(resilient: bool, failure="f0", hops: int | None = None) -> Model:
    topo = gen_running()
    fspec = RUNNING_FAILURES[failure] if isinstance(failure, str) else failure
    fm = failure_program(fspec, topo)
    ingress, egress = R.at(1, 1), R.at(2, 2)
    t = R.topology_program(topo, S.DROP, HOPS if hops is not None else None, hops or 0)
    spec = ModelSpec(running_policy(resilient), t, fm, ingress, egress, form="while", hops=hops,
                     clear_flags=False)
    return Model(f"running-{'resilient' if resilient else 'naive'}-{failure}", assemble(spec),
                 teleport(ingress, {"sw": 2, "pt": 2}, spec), [{"sw": 1, "pt": 1}], egress, spec)


def chain_model(k: int, pfail=Fraction(1, 1000), hops: int | None = None) -> Model:
    topo = gen_chain(k)
    fm = failure_program(FailureSpec(Fraction(pfail), INF), topo)
    last = 4 * k - 1
    ingress, egress = R.at(0, 1), R.at(last, 3)
    t = R.topology_program(topo, S.SKIP, HOPS if hops is not None else None, hops or 0)
    spec = ModelSpec(R.routing("chain", topo), t, fm, ingress, egress, hops=hops)
    return Model(f"chain-{k}", assemble(spec), teleport(ingress, {"sw": last, "pt": 3}, spec),
                 [{"sw": 0, "pt": 1}], egress, spec)


def fattree_model(scheme: str, k=INF, pr=Fraction(1, 4), topo: Topology | None = None,
                  dst: int = 1, hops: int | None = None) -> Model:
    """Data-center model towards switch ``dst``; ingress at every edge host port."""
    topo = topo or gen_ab_fattree(4)
    d = topo.by_sw(dst)
    egress_port = (topo.host_ports(d.name) or [1])[0]
    ingress_pk = [{"sw": n.sw, "pt": p} for n in topo.switches() if n.level == "edge"
                  for p in topo.host_ports(n.name)]
    ingress = S.disj(*(R.at(x["sw"], x["pt"]) for x in ingress_pk))
    egress = R.at(dst, egress_port)
    fm = failure_program(FailureSpec(Fraction(pr), k, persistent=True), topo)
    t = R.topology_program(topo, S.SKIP, HOPS if hops is not None else None, hops or 0)
    # every scheme declares the detour flag so all models share one set of locals
    extra = ((R.DETOUR, 0),)
    spec = ModelSpec(R.routing(scheme, topo, dst), t, fm, ingress, egress, hops=hops, locals=extra)
    kname = "inf" if k == INF else str(k)
    return Model(f"{topo.name}-{scheme}-k{kname}", assemble(spec),
                 teleport(ingress, {"sw": dst, "pt": egress_port}, spec), ingress_pk, egress, spec)
