"""Port-labeled topologies: generators and the DOT dialect used to exchange them.

Port conventions (every generator, kappa-ary trees with h = kappa/2):

* edge switch: ports 1..h face hosts, port h+1+j goes to aggregation j of its pod
* aggregation switch: port i+1 goes to edge i of its pod, ports h+1..kappa go up
* core switch: port p+1 goes to pod p
* switch ids: edges 1..kappa^2/2, aggregations next, cores last
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import networkx as nx
import pydot


class TopologyError(ValueError):
    pass


LEVELS = ("edge", "agg", "core")


@dataclass(frozen=True)
class Node:
    name: str
    kind: str  # switch | host
    level: str | None = None  # edge | agg | core for switches
    sw: int | None = None
    subtree: str | None = None  # A | B for pod members of an AB FatTree
    pod: int | None = None


@dataclass(frozen=True)
class Link:
    src: str
    src_port: int
    dst: str
    dst_port: int
    failable: bool = False  # only this orientation can fail

    def reverse(self) -> "Link":
        return Link(self.dst, self.dst_port, self.src, self.src_port, False)


@dataclass
class Topology:
    nodes: dict[str, Node] = field(default_factory=dict)
    links: list[Link] = field(default_factory=list)  # both orientations
    name: str = "topo"

    # -- construction
    def add_node(self, node: Node):
        if node.name in self.nodes:
            raise TopologyError(f"duplicate node {node.name}")
        self.nodes[node.name] = node

    def connect(self, a: str, pa: int, b: str, pb: int, failable: bool = False):
        lk = Link(a, pa, b, pb, failable)
        self.links.append(lk)
        self.links.append(lk.reverse())

    # -- queries
    def switches(self) -> list[Node]:
        return sorted((n for n in self.nodes.values() if n.kind == "switch"), key=lambda n: n.sw)

    def hosts(self) -> list[Node]:
        return sorted((n for n in self.nodes.values() if n.kind == "host"), key=lambda n: n.name)

    def by_sw(self, sw: int) -> Node:
        for n in self.nodes.values():
            if n.sw == sw:
                return n
        raise TopologyError(f"no switch with id {sw}")

    def out_links(self, name: str) -> list[Link]:
        return sorted((lk for lk in self.links if lk.src == name), key=lambda lk: lk.src_port)

    def peer(self, name: str, port: int) -> Link | None:
        for lk in self.links:
            if lk.src == name and lk.src_port == port:
                return lk
        return None

    def switch_links(self) -> list[Link]:
        """Oriented switch-to-switch links, sorted by (src id, src port)."""
        out = [lk for lk in self.links
               if self.nodes[lk.src].kind == "switch" and self.nodes[lk.dst].kind == "switch"]
        return sorted(out, key=lambda lk: (self.nodes[lk.src].sw, lk.src_port))

    def host_ports(self, name: str) -> list[int]:
        return [lk.src_port for lk in self.out_links(name) if self.nodes[lk.dst].kind == "host"]

    def failable_links(self) -> list[Link]:
        return [lk for lk in self.switch_links() if lk.failable]

    def max_degree(self) -> int:
        return max((len(self.out_links(n.name)) for n in self.switches()), default=0)

    def distances_to(self, dst: str) -> dict[str, int]:
        """Hop distance from every switch to ``dst`` over switch links."""
        adj: dict[str, list[str]] = {}
        for lk in self.switch_links():
            adj.setdefault(lk.dst, []).append(lk.src)
        dist = {dst: 0}
        q = deque([dst])
        while q:
            u = q.popleft()
            for v in adj.get(u, []):
                if v not in dist:
                    dist[v] = dist[u] + 1
                    q.append(v)
        return dist

    def validate(self):
        seen = set()
        for lk in self.links:
            for n in (lk.src, lk.dst):
                if n not in self.nodes:
                    raise TopologyError(f"link refers to unknown node {n}")
            if (lk.src, lk.src_port) in seen:
                raise TopologyError(f"port {lk.src_port} of {lk.src} used twice")
            seen.add((lk.src, lk.src_port))
        pairs = {(lk.src, lk.src_port, lk.dst, lk.dst_port) for lk in self.links}
        for lk in self.links:
            if (lk.dst, lk.dst_port, lk.src, lk.src_port) not in pairs:
                raise TopologyError(f"dangling port {lk.src_port} on {lk.src}")
        ids = [n.sw for n in self.switches()]
        if None in ids or len(set(ids)) != len(ids):
            raise TopologyError("switch ids must be present and unique")
        for n in self.nodes.values():
            if n.kind not in ("switch", "host"):
                raise TopologyError(f"node {n.name}: unknown kind {n.kind!r}")
            if n.kind == "switch" and n.level not in (None,) + LEVELS:
                raise TopologyError(f"node {n.name}: unknown level {n.level!r}")
        return self

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        for n in self.nodes.values():
            g.add_node(n.name, level=n.level if n.kind == "switch" else "host")
        for lk in self.links:
            g.add_edge(lk.src, lk.dst)
        return g


# ------------------------------------------------------------------ DOT

def to_dot(topo: Topology) -> str:
    g = pydot.Dot(topo.name, graph_type="graph")
    for n in sorted(topo.nodes.values(), key=lambda n: (n.kind, n.sw or 0, n.name)):
        attrs = {"kind": n.kind}
        if n.level:
            attrs["level"] = n.level
        if n.sw is not None:
            attrs["sw"] = str(n.sw)
        if n.subtree:
            attrs["subtree"] = n.subtree
        if n.pod is not None:
            attrs["pod"] = str(n.pod)
        g.add_node(pydot.Node(n.name, **attrs))
    done = set()
    for lk in topo.links:
        key = frozenset([(lk.src, lk.src_port), (lk.dst, lk.dst_port)])
        if key in done:
            continue
        done.add(key)
        # write the failable orientation first so the attribute keeps its meaning
        if not lk.failable:
            back = next(x for x in topo.links
                        if x.src == lk.dst and x.src_port == lk.dst_port and x.dst == lk.src)
            if back.failable:
                lk = back
        attrs = {"src_port": str(lk.src_port), "dst_port": str(lk.dst_port)}
        if lk.failable:
            attrs["failable"] = "true"
        g.add_edge(pydot.Edge(lk.src, lk.dst, **attrs))
    return g.to_string()


def _attr(obj, name, required=True):
    v = obj.get(name)
    if v is None:
        if required:
            raise TopologyError(f"{obj.get_name()}: missing attribute {name!r}")
        return None
    return str(v).strip('"')


def load_dot(text: str) -> Topology:
    graphs = pydot.graph_from_dot_data(text)
    if not graphs:
        raise TopologyError("no graph found in DOT input")
    g = graphs[0]
    topo = Topology(name=g.get_name().strip('"') or "topo")
    next_id = 1
    for nd in g.get_nodes():
        name = nd.get_name().strip('"')
        if name in ("node", "edge", "graph"):
            continue
        kind = _attr(nd, "kind")
        level = _attr(nd, "level", False)
        sw = _attr(nd, "sw", False)
        pod = _attr(nd, "pod", False)
        topo.add_node(Node(name, kind, level, int(sw) if sw is not None else None,
                           _attr(nd, "subtree", False), int(pod) if pod is not None else None))
    # switches without an explicit id get the next free one in file order
    used = {n.sw for n in topo.nodes.values() if n.sw is not None}
    for name, n in list(topo.nodes.items()):
        if n.kind == "switch" and n.sw is None:
            while next_id in used:
                next_id += 1
            topo.nodes[name] = Node(n.name, n.kind, n.level, next_id, n.subtree, n.pod)
            used.add(next_id)
    for e in g.get_edges():
        a, b = e.get_source().strip('"'), e.get_destination().strip('"')
        for n in (a, b):
            if n not in topo.nodes:
                raise TopologyError(f"edge refers to undeclared node {n}")
        try:
            sp, dp = int(_attr(e, "src_port")), int(_attr(e, "dst_port"))
        except ValueError as exc:
            raise TopologyError(f"edge {a}--{b}: ports must be integers") from exc
        fl = (_attr(e, "failable", False) or "false").lower() in ("true", "1", "yes")
        topo.connect(a, sp, b, dp, fl)
    return topo.validate()


def isomorphic(t1: Topology, t2: Topology) -> bool:
    """Graph isomorphism that respects node levels (ports ignored)."""
    return nx.is_isomorphic(t1.to_networkx(), t2.to_networkx(),
                            node_match=lambda a, b: a["level"] == b["level"])


# ------------------------------------------------------------ generators

def _check_arity(k: int, minimum: int):
    if k < minimum or k % 2:
        raise TopologyError(f"arity must be even and at least {minimum}, got {k}")


def _tree(k: int, kinds: list[str], name: str, failable_down: bool) -> Topology:
    h = k // 2
    t = Topology(name=name)
    edge = lambda p, i: f"e{p}_{i}"
    agg = lambda p, j: f"a{p}_{j}"
    core = lambda c: f"c{c}"
    for p in range(k):
        for i in range(h):
            t.add_node(Node(edge(p, i), "switch", "edge", p * h + i + 1, kinds[p], p))
        for j in range(h):
            t.add_node(Node(agg(p, j), "switch", "agg", k * k // 2 + p * h + j + 1, kinds[p], p))
    for c in range(h * h):
        t.add_node(Node(core(c), "switch", "core", k * k + c + 1))
    host = 0
    for p in range(k):
        for i in range(h):
            for port in range(1, h + 1):
                hn = f"h{host}"
                t.add_node(Node(hn, "host", None))
                t.connect(edge(p, i), port, hn, 1)
                host += 1
            for j in range(h):
                t.connect(edge(p, i), h + 1 + j, agg(p, j), i + 1)
        for j in range(h):
            for m in range(h):
                c = j * h + m if kinds[p] == "A" else j + m * h
                # core c reaches pod p through its port p+1
                t.connect(core(c), p + 1, agg(p, j), h + 1 + m, failable_down)
    return t.validate()


def gen_fattree(k: int, failable_down: bool = True) -> Topology:
    """Standard three-level FatTree; core-to-aggregation links may fail."""
    _check_arity(k, 2)
    return _tree(k, ["A"] * k, f"fattree{k}", failable_down)


def gen_ab_fattree(k: int, failable_down: bool = True) -> Topology:
    """FatTree with type A (even) and type B (odd, staggered) pods."""
    _check_arity(k, 4)
    return _tree(k, ["A" if p % 2 == 0 else "B" for p in range(k)], f"abfattree{k}", failable_down)


def gen_chain(k: int) -> Topology:
    """``k`` diamonds in series; the S(4i+2) to S(4i+3) link may fail."""
    if k < 1:
        raise TopologyError("chain needs at least one diamond")
    t = Topology(name=f"chain{k}")
    s = lambda j: f"S{j}"
    for j in range(4 * k):
        t.add_node(Node(s(j), "switch", None, j))
    t.add_node(Node("H1", "host"))
    t.add_node(Node("H2", "host"))
    t.connect(s(0), 1, "H1", 1)
    for i in range(k):
        b = 4 * i
        t.connect(s(b), 2, s(b + 1), 1)
        t.connect(s(b), 3, s(b + 2), 1)
        t.connect(s(b + 1), 2, s(b + 3), 1)
        t.connect(s(b + 2), 2, s(b + 3), 2, failable=True)
        if i + 1 < k:
            t.connect(s(b + 3), 3, s(b + 4), 1)
        else:
            t.connect(s(b + 3), 3, "H2", 1)
    return t.validate()


def gen_running() -> Topology:
    """Three switches in a triangle; sw1's links to sw2 and sw3 may fail."""
    t = Topology(name="running")
    for i in (1, 2, 3):
        t.add_node(Node(f"sw{i}", "switch", None, i))
    t.add_node(Node("h1", "host"))
    t.add_node(Node("h2", "host"))
    t.connect("sw1", 1, "h1", 1)
    t.connect("sw2", 2, "h2", 1)
    t.connect("sw1", 2, "sw2", 1, failable=True)
    t.connect("sw1", 3, "sw3", 1, failable=True)
    t.connect("sw2", 3, "sw3", 2)
    return t.validate()


GENERATORS = {
    "fattree": gen_fattree,
    "abfattree": gen_ab_fattree,
    "chain": gen_chain,
}
