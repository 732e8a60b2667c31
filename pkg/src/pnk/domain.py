"""Symbolic packet classes (dynamic domain reduction).

Each field keeps the values some diagram mentions; every other value of
the field collapses into one wildcard class, written ``None``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import fdd as F

WILDCARD = None
DEFAULT_CAP = 10**7

Domain = dict  # field -> sorted tuple of values


class ResourceError(RuntimeError):
    """A configured size cap was exceeded."""


def infer_domain(*diagrams: int) -> Domain:
    vals: dict[str, set[int]] = {}
    for x in diagrams:
        for f, vs in F.tests_and_mods(x).items():
            vals.setdefault(f, set()).update(vs)
    return {f: tuple(sorted(vs)) for f, vs in sorted(vals.items())}


def merge_domains(*domains: Mapping) -> Domain:
    vals: dict[str, set[int]] = {}
    for d in domains:
        for f, vs in d.items():
            vals.setdefault(f, set()).update(vs)
    return {f: tuple(sorted(vs)) for f, vs in sorted(vals.items())}


def field_classes(domain: Mapping, f: str, ranges: Mapping | None = None) -> tuple:
    vals = tuple(domain.get(f, ()))
    if ranges and f in ranges:
        lo, hi = ranges[f]
        if set(range(lo, hi + 1)) <= set(vals):
            return vals  # wildcard class would be empty
    return vals + (WILDCARD,)


def classify_value(domain: Mapping, f: str, v) -> int | None:
    return v if v in domain.get(f, ()) else WILDCARD


@dataclass
class StateSpace:
    """Drop state at index 0, then one symbolic packet per class product."""

    fields: tuple
    states: list  # [None, (v1, ..., vk), ...]
    domain: Domain = field(default_factory=dict)
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {s: i for i, s in enumerate(self.states)}

    def __len__(self) -> int:
        return len(self.states)

    def packet(self, i: int) -> dict | None:
        s = self.states[i]
        return None if s is None else dict(zip(self.fields, s))

    def classify(self, pk: Mapping | None) -> int:
        """Index of the class containing a concrete (or symbolic) packet."""
        if pk is None:
            return 0
        key = tuple(classify_value(self.domain, f, pk.get(f, 0)) for f in self.fields)
        return self.index[key]

    def label(self, i: int) -> str:
        s = self.states[i]
        if s is None:
            return "drop"
        return ",".join(f"{f}={'*' if v is None else v}" for f, v in zip(self.fields, s)) or "*"


def state_count(domain: Mapping, fields: Sequence[str], ranges=None) -> int:
    return 1 + math.prod(len(field_classes(domain, f, ranges)) for f in fields)


def enumerate_states(domain: Mapping, fields: Sequence[str] | None = None,
                     cap: int = DEFAULT_CAP, ranges: Mapping | None = None) -> StateSpace:
    fields = tuple(sorted(domain) if fields is None else fields)
    n = state_count(domain, fields, ranges)
    if n > cap:
        raise ResourceError(f"state space of {n} classes exceeds cap {cap}")
    per_field = [field_classes(domain, f, ranges) for f in fields]
    states = [None] + list(itertools.product(*per_field))
    return StateSpace(fields, states, {f: tuple(domain.get(f, ())) for f in fields})


def symbolic_packet(pk: Mapping, domain: Mapping) -> dict:
    return {f: classify_value(domain, f, v) for f, v in pk.items()}
