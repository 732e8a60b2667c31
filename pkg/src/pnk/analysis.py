"""Equivalence, refinement order and quantitative queries on compiled programs."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from . import compile as C
from . import domain as D
from . import fdd as F
from . import syntax as S

EPS = 1e-9

EQUAL, LESS, GREATER, INCOMPARABLE = "equal", "less", "greater", "incomparable"
SYMBOL = {EQUAL: "==", LESS: "<", GREATER: ">", INCOMPARABLE: "<>"}


@dataclass
class Witness:
    input: dict  # generic packet; None marks a wildcard value
    output: dict | None  # None means drop
    p: object
    q: object

    def as_json(self) -> dict:
        return {"input": show_packet(self.input), "output": show_packet(self.output),
                "p": fmt_prob(self.p), "q": fmt_prob(self.q)}


@dataclass
class OrderResult:
    verdict: str
    witnesses: list[Witness] = field(default_factory=list)

    @property
    def symbol(self) -> str:
        return SYMBOL[self.verdict]

    def __str__(self) -> str:
        return self.verdict


@dataclass
class QueryReport:
    per_ingress: list[tuple[dict, object]]
    exact: bool
    histogram: dict | None = None  # hops -> mean mass over ingress
    per_ingress_hist: list[dict] | None = None
    saturated: bool = False

    @property
    def minimum(self):
        return min(p for _, p in self.per_ingress)

    @property
    def mean(self):
        ps = [p for _, p in self.per_ingress]
        return sum(ps, Fraction(0) if self.exact else 0.0) / len(ps)

    @property
    def delivered(self):
        return self.mean

    def cdf(self) -> dict:
        out, acc = {}, 0
        for h in sorted(self.histogram or {}):
            acc += self.histogram[h]
            out[h] = acc
        return out

    def within(self, hops: int):
        return sum((m for h, m in (self.histogram or {}).items() if h <= hops), 0)

    def expected_hops(self):
        """Mean hop count among delivered packets."""
        if not self.histogram:
            return None
        tot = sum(self.histogram.values())
        if tot == 0:
            return None
        return sum(h * m for h, m in self.histogram.items()) / tot

    def as_json(self) -> dict:
        out = {
            "per_ingress": [{"ingress": show_packet(pk), "p": fmt_prob(p)} for pk, p in self.per_ingress],
            "min": fmt_prob(self.minimum),
            "mean": fmt_prob(self.mean),
            "exact": self.exact,
        }
        if self.histogram is not None:
            out["histogram"] = {str(h): fmt_prob(m) for h, m in sorted(self.histogram.items())}
            out["cdf"] = {str(h): fmt_prob(m) for h, m in self.cdf().items()}
            eh = self.expected_hops()
            out["expected_hops"] = None if eh is None else fmt_prob(eh)
            out["saturated"] = self.saturated
        return out


def fmt_prob(p) -> dict | None:
    if p is None:
        return None
    if isinstance(p, (int, Fraction)):
        p = Fraction(p)
        return {"exact": f"{p.numerator}/{p.denominator}", "float": float(p)}
    return {"exact": None, "float": float(p)}


def show_packet(pk) -> dict | None:
    if pk is None:
        return None
    return {f: ("*" if v is None else v) for f, v in sorted(dict(pk).items())}


def _compile(p, cfg) -> int:
    return p if isinstance(p, int) else C.compile(p, cfg)


def _eps(x: int, y: int, eps):
    if eps is not None:
        return eps
    return None if F.is_exact(x) and F.is_exact(y) else EPS


def _witness(w) -> Witness:
    path, act, pa, pb = w
    pk = F.generic_packet(path)
    out = F.apply_action(act, pk)
    return Witness(pk, None if out is None else dict(out), pa, pb)


def compare_fdds(x: int, y: int, eps=None) -> OrderResult:
    """Entrywise comparison over non-drop outputs."""
    if x == y:
        return OrderResult(EQUAL)
    lt, gt = F.semantic_diff(x, y, _eps(x, y, eps), drop_matters=False)
    if lt is None and gt is None:
        return OrderResult(EQUAL)
    if gt is None:
        return OrderResult(LESS, [_witness(lt)])
    if lt is None:
        return OrderResult(GREATER, [_witness(gt)])
    return OrderResult(INCOMPARABLE, [_witness(lt), _witness(gt)])


def equivalent(p, q, cfg: C.CompileConfig | None = None, eps=None) -> bool:
    return equivalence(p, q, cfg, eps)[0]


def equivalence(p, q, cfg=None, eps=None) -> tuple[bool, list[Witness]]:
    x, y = _compile(p, cfg), _compile(q, cfg)
    if x == y:
        return True, []
    lt, gt = F.semantic_diff(x, y, _eps(x, y, eps))
    ws = [_witness(w) for w in (lt, gt) if w is not None]
    return not ws, ws


def compare_order(p, q, cfg: C.CompileConfig | None = None, eps=None) -> OrderResult:
    return compare_fdds(_compile(p, cfg), _compile(q, cfg), eps)


def matrix_order(x: int, y: int, eps=None) -> str:
    """Cross-check of ``compare_fdds`` through explicit matrices on the joint domain."""
    dom = D.infer_domain(x, y)
    _, A = C.fdd_to_matrix(x, dom)
    _, B = C.fdd_to_matrix(y, dom)
    e = _eps(x, y, eps) or 0
    le = ge = True
    for ra, rb in zip(A.rows, B.rows):
        for j in set(ra) | set(rb):
            if j == 0:
                continue
            a, b = ra.get(j, 0), rb.get(j, 0)
            if a > b + e:
                le = False
            if b > a + e:
                ge = False
    if le and ge:
        return EQUAL
    return LESS if le else GREATER if ge else INCOMPARABLE


def output_distribution(p, pk: Mapping, cfg=None) -> dict:
    """Output distribution on one packet: packet dict (as sorted tuple) or None."""
    return F.evaluate(_compile(p, cfg), pk)


def delivery_probability(model, ingress: Sequence[Mapping], egress: S.Pred, cfg=None) -> QueryReport:
    if not ingress:
        raise ValueError("empty ingress list")
    x = _compile(model, cfg)
    rows = []
    for pk in ingress:
        mass = 0
        for out, p in F.evaluate(x, pk).items():
            if out is not None and S.holds(egress, dict(out)):
                mass += p
        rows.append((dict(pk), mass))
    return QueryReport(rows, F.is_exact(x))


def hop_stats(model, ingress: Sequence[Mapping], egress: S.Pred, max_hops: int,
              hop_field: str = "hops", cfg=None) -> QueryReport:
    """Delivered-mass histogram over the hop counter at the egress."""
    if not ingress:
        raise ValueError("empty ingress list")
    x = _compile(model, cfg)
    exact = F.is_exact(x)
    rows, hists = [], []
    total: dict = {}
    saturated = False
    for pk in ingress:
        hist: dict = {}
        mass = 0
        for out, p in F.evaluate(x, pk).items():
            if out is None:
                continue
            o = dict(out)
            if not S.holds(egress, o):
                continue
            h = o.get(hop_field, 0)
            if h is None or h >= max_hops:
                saturated = True
                h = max_hops
            hist[h] = hist.get(h, 0) + p
            mass += p
        rows.append((dict(pk), mass))
        hists.append(hist)
        for h, m in hist.items():
            total[h] = total.get(h, 0) + m
    n = len(ingress)
    mean_hist = {h: m / n for h, m in sorted(total.items())}
    return QueryReport(rows, exact, mean_hist, hists, saturated)
