"""Routing programs: ECMP, the F10 family and the diamond-chain scheme.

Every scheme is a ``case`` over switch ids.  Link health is read from the
per-port flag ``up<port>`` of the current switch, which the failure model
samples right before the policy runs.
"""

from __future__ import annotations

from fractions import Fraction

from .. import syntax as S
from .topology import Topology, TopologyError

SCHEMES = ("ecmp", "f10_0", "f10_3", "f10_35", "chain")

SW, PT = "sw", "pt"
DETOUR = "det"


def flag(port: int) -> str:
    return f"up{port}"


def at(sw: int, pt: int | None = None) -> S.Pred:
    t = S.Test(SW, sw)
    return t if pt is None else S.And(t, S.Test(PT, pt))


def fwd(port: int) -> S.Prog:
    return S.Assign(PT, port)


def ecmp_choice(ports) -> S.Prog:
    return S.uniform(fwd(p) for p in sorted(ports))


def live_choice(ports, fallback: S.Prog, prefix: S.Prog | None = None) -> S.Prog:
    """Uniform over the ports whose flag is up; ``fallback`` when none is."""
    ports = sorted(ports)

    def go(i, live):
        if i == len(ports):
            if not live:
                return fallback
            pick = ecmp_choice(live)
            return pick if prefix is None else S.Seq(prefix, pick)
        p = ports[i]
        return S.If(S.Test(flag(p), 1), go(i + 1, live + [p]), go(i + 1, live))

    return go(0, [])


def _by_arrival(arms, default: S.Prog) -> S.Prog:
    """``if pt=a1 then .. else if pt=a2 ..`` from (port set, program) arms."""
    flat = []
    for ports, prog in arms:
        for p in sorted(ports):
            flat.append((S.Test(PT, p), prog))
    return S.ite_chain(flat, default)


class _Ctx:
    def __init__(self, topo: Topology, dst_sw: int):
        self.topo = topo
        self.dst = topo.by_sw(dst_sw)
        if self.dst.kind != "switch":
            raise TopologyError(f"destination {dst_sw} is not a switch")
        self.dist = topo.distances_to(self.dst.name)
        hp = topo.host_ports(self.dst.name)
        self.egress_port = hp[0] if hp else 1
        self.unreachable = [n.sw for n in topo.switches() if n.name not in self.dist]

    def shortest(self, name: str) -> list[int]:
        d = self.dist.get(name)
        if d is None:
            return []
        return [lk.src_port for lk in self.topo.out_links(name)
                if self.dist.get(lk.dst, -1) == d - 1]

    def ports_where(self, name: str, pred) -> list[int]:
        return [lk.src_port for lk in self.topo.out_links(name) if pred(self.topo.nodes[lk.dst])]


def _ecmp_switch(c: _Ctx, n) -> S.Prog:
    if n.name == c.dst.name:
        return fwd(c.egress_port)
    return ecmp_choice(c.shortest(n.name))


def _f10_switch(c: _Ctx, n, scheme: str) -> S.Prog:
    topo = c.topo
    if n.name == c.dst.name:
        return fwd(c.egress_port)
    short = c.shortest(n.name)
    hosts = topo.host_ports(n.name)
    up = c.ports_where(n.name, lambda m: m.kind == "switch" and m.level in ("agg", "core")
                       and (n.level != "agg" or m.level == "core"))
    down = c.ports_where(n.name, lambda m: m.kind == "switch" and (
        (n.level == "agg" and m.level == "edge") or (n.level == "core" and m.level == "agg")))
    if n.level == "edge":
        from_host = ecmp_choice(short)
        arms = []
        for a in up:
            rest = [p for p in up if p != a] or up
            prog = ecmp_choice(rest)
            if scheme == "f10_35":
                prog = S.Seq(S.Assign(DETOUR, 0), prog)
            arms.append(([a], prog))
        return _by_arrival([(hosts, from_host)] + arms, from_host)
    if n.level == "agg":
        if c.dist.get(n.name) == 1:
            return ecmp_choice(short)
        arms = [(down, ecmp_choice(short))]
        for a in up:
            upward = ecmp_choice([p for p in up if p != a] or up)
            if scheme == "f10_35":
                upward = S.If(S.Test(DETOUR, 1), ecmp_choice(down), upward)
            arms.append(([a], upward))
        return _by_arrival(arms, ecmp_choice(short))
    if n.level == "core":
        dst_pod, dst_type = c.dst.pod, c.dst.subtree
        others = [lk for lk in topo.out_links(n.name) if lk.src_port not in short]
        other_type = [lk.src_port for lk in others
                      if topo.nodes[lk.dst].pod != dst_pod and topo.nodes[lk.dst].subtree != dst_type]
        same_type = [lk.src_port for lk in others
                     if topo.nodes[lk.dst].pod != dst_pod and topo.nodes[lk.dst].subtree == dst_type]
        fallback: S.Prog = S.DROP
        if scheme == "f10_35":
            fallback = live_choice(same_type, S.DROP, prefix=S.Assign(DETOUR, 1))
        if scheme in ("f10_3", "f10_35"):
            fallback = live_choice(other_type, fallback)
        return live_choice(short, fallback)
    raise TopologyError(f"F10 routing needs edge/agg/core levels; {n.name} has {n.level!r}")


def _chain_switch(n) -> S.Prog:
    r = n.sw % 4
    if r == 0:
        return S.Choice(((Fraction(1, 2), fwd(2)), (Fraction(1, 2), fwd(3))))
    if r == 1:
        return fwd(2)
    if r == 2:
        return S.If(S.Test(flag(2), 1), fwd(2), S.DROP)
    return fwd(3)


def routing(scheme: str, topo: Topology, dst_sw: int | None = None) -> S.Prog:
    """Per-switch ``case`` program for ``scheme`` towards switch ``dst_sw``."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")
    arms = []
    if scheme == "chain":
        for n in topo.switches():
            arms.append((at(n.sw), _chain_switch(n)))
        return S.Case(tuple(arms))
    if dst_sw is None:
        raise ValueError(f"scheme {scheme} needs a destination switch")
    c = _Ctx(topo, dst_sw)
    if c.unreachable:
        raise TopologyError(f"switches {c.unreachable} cannot reach destination {dst_sw}")
    for n in topo.switches():
        body = _ecmp_switch(c, n) if scheme == "ecmp" else _f10_switch(c, n, scheme)
        arms.append((at(n.sw), body))
    return S.Case(tuple(arms))


def validation_report(topo: Topology, dst_sw: int) -> dict:
    c = _Ctx(topo, dst_sw)
    return {"destination": dst_sw, "unreachable": c.unreachable,
            "max_distance": max(c.dist.values(), default=0)}


def increment(field: str, bound: int) -> S.Prog:
    """Saturating ``field += 1`` as a cascade of tests; stays at ``bound``."""
    return S.ite_chain([(S.Test(field, i), S.Assign(field, i + 1)) for i in range(bound)], S.SKIP)


def topology_program(topo: Topology, default: S.Prog = S.DROP,
                     hop_field: str | None = None, hop_bound: int = 0) -> S.Prog:
    """Link cascade: move the packet across the link at its current port.

    A failable link drops the packet when the flag of its port is down.
    Ports without a switch-to-switch link take ``default``.
    """
    by_sw: dict[int, list] = {}
    for lk in topo.switch_links():
        by_sw.setdefault(topo.nodes[lk.src].sw, []).append(lk)
    arms = []
    for n in topo.switches():
        inner = []
        for lk in by_sw.get(n.sw, []):
            d = topo.nodes[lk.dst]
            move: S.Prog = S.Seq(S.Assign(SW, d.sw), S.Assign(PT, lk.dst_port))
            if hop_field:
                move = S.Seq(move, increment(hop_field, hop_bound))
            if lk.failable:
                move = S.If(S.Test(flag(lk.src_port), 1), move, S.DROP)
            inner.append((S.Test(PT, lk.src_port), move))
        arms.append((at(n.sw), S.ite_chain(inner, default)))
    return S.Case(tuple(arms))
