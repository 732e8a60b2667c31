"""AST, concrete grammar, pretty-printer and desugaring for guarded programs.

Operator precedence: ``;`` binds tighter than ``+[r]``, and ``+[r]`` is
right-associative, so ``a; b +[1/2] c; d`` is ``(a; b) +[1/2] (c; d)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Union as TUnion


class ParseError(ValueError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.line, self.col = line, col
        where = f"{line}:{col}: " if line else ""
        super().__init__(where + msg)


class ProbabilityError(ParseError):
    """Choice weights outside [0, 1] or not summing to one."""


# ---------------------------------------------------------------- predicates

Pos = tuple  # (line, col); never part of equality


@dataclass(frozen=True)
class PFalse:
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class PTrue:
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Test:
    field: str
    value: int
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Or:
    left: "Pred"
    right: "Pred"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class And:
    left: "Pred"
    right: "Pred"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    arg: "Pred"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


Pred = TUnion[PFalse, PTrue, Test, Or, And, Neg]

# ------------------------------------------------------------------ programs


@dataclass(frozen=True)
class Filter:
    pred: Pred
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Assign:
    field: str
    value: int
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Seq:
    first: "Prog"
    second: "Prog"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Choice:
    branches: tuple  # ((Fraction, Prog), ...)
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class If:
    cond: Pred
    then: "Prog"
    orelse: "Prog"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class While:
    cond: Pred
    body: "Prog"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class DoWhile:
    body: "Prog"
    cond: Pred
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Case:
    branches: tuple  # ((Pred, Prog), ...)
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class VarIn:
    field: str
    value: int
    body: "Prog"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


# Not part of the surface language; the oracle accepts them.
@dataclass(frozen=True)
class Union:
    left: "Prog"
    right: "Prog"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Star:
    body: "Prog"
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


Prog = TUnion[Filter, Assign, Seq, Choice, If, While, DoWhile, Case, VarIn, Union, Star]

SKIP = Filter(PTrue())
DROP = Filter(PFalse())
PRED_TYPES = (PFalse, PTrue, Test, Or, And, Neg)


# ------------------------------------------------------------ smart builders

def seq(*progs: Prog) -> Prog:
    """Left-nested sequence, matching what the parser produces for ``a; b; c``."""
    if not progs:
        return SKIP
    out = progs[0]
    for p in progs[1:]:
        out = Seq(out, p)
    return out


def conj(*preds: Pred) -> Pred:
    if not preds:
        return PTrue()
    out = preds[0]
    for a in preds[1:]:
        out = And(out, a)
    return out


def disj(*preds: Pred) -> Pred:
    if not preds:
        return PFalse()
    out = preds[0]
    for a in preds[1:]:
        out = Or(out, a)
    return out


def uniform(progs) -> Prog:
    progs = list(progs)
    if not progs:
        return DROP
    if len(progs) == 1:
        return progs[0]
    w = Fraction(1, len(progs))
    return Choice(tuple((w, p) for p in progs))


def ite_chain(arms, default: Prog = DROP) -> Prog:
    """``if a1 then p1 else if a2 then p2 ... else default``."""
    out = default
    for a, p in reversed(list(arms)):
        out = If(a, p, out)
    return out


# ------------------------------------------------------------------- lexing

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+|//[^\n]*|\#[^\n]*)
  | (?P<num>\d+(?:\.\d+)?(?!\.\.)|\d+(?=\.\.))
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|->|\+\[|\.\.|[;,{}()\[\]|&!=/:])
""", re.VERBOSE)

KEYWORDS = {"drop", "skip", "true", "false", "if", "then", "else", "while",
            "do", "case", "var", "in", "choice", "fields"}


@dataclass
class Tok:
    kind: str  # num | ident | kw | op | eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Tok]:
    toks: list[Tok] = []
    i, line, line_start = 0, 1, 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m:
            raise ParseError(f"unexpected character {text[i]!r}", line, i - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            if kind == "ident" and s in KEYWORDS:
                kind = "kw"
            toks.append(Tok(kind, s, line, i - line_start + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = i + s.rindex("\n") + 1
        i = m.end()
    toks.append(Tok("eof", "", line, i - line_start + 1))
    return toks


# ------------------------------------------------------------------ parsing

class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("op", "kw")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Tok:
        if not self.at(text):
            self.fail(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def fail(self, msg: str, tok: Tok | None = None):
        t = tok or self.tok
        raise ParseError(msg, t.line, t.col)

    def pos(self) -> Pos:
        return (self.tok.line, self.tok.col)

    def ident(self) -> str:
        if self.tok.kind != "ident":
            self.fail(f"expected a field name, found {self.tok.text or 'end of input'!r}")
        s = self.tok.text
        self.i += 1
        return s

    def nat(self) -> int:
        t = self.tok
        if t.kind != "num" or "." in t.text:
            self.fail(f"expected a natural number, found {t.text or 'end of input'!r}")
        self.i += 1
        return int(t.text)

    def rat(self) -> Fraction:
        t = self.tok
        if t.kind != "num":
            self.fail(f"expected a probability, found {t.text or 'end of input'!r}")
        self.i += 1
        if "." in t.text:
            r = Fraction(t.text)
        elif self.accept("/"):
            den = self.nat()
            if den == 0:
                raise ProbabilityError("zero denominator", t.line, t.col)
            r = Fraction(int(t.text), den)
        else:
            r = Fraction(int(t.text))
        if not 0 <= r <= 1:
            raise ProbabilityError(f"probability {r} outside [0,1]", t.line, t.col)
        return r

    # header
    def header(self) -> dict[str, tuple[int, int]]:
        ranges: dict[str, tuple[int, int]] = {}
        if not self.accept("fields"):
            return ranges
        self.expect("{")
        while not self.at("}"):
            t = self.tok
            name = self.ident()
            self.expect(":")
            lo = self.nat()
            self.expect("..")
            hi = self.nat()
            if hi < lo:
                self.fail(f"empty range for {name}", t)
            if name in ranges:
                self.fail(f"field {name} declared twice", t)
            ranges[name] = (lo, hi)
            if not self.accept(","):
                break
        self.expect("}")
        return ranges

    # predicates: '|' < '&' < '!'
    def pred(self, allow_or: bool = True) -> Pred:
        left = self.pred_and()
        while allow_or and self.at("|"):
            p = self.pos()
            self.i += 1
            left = Or(left, self.pred_and(), pos=p)
        return left

    def pred_and(self) -> Pred:
        left = self.pred_not()
        while self.at("&"):
            p = self.pos()
            self.i += 1
            left = And(left, self.pred_not(), pos=p)
        return left

    def pred_not(self) -> Pred:
        p = self.pos()
        if self.accept("!"):
            return Neg(self.pred_not(), pos=p)
        if self.accept("true"):
            return PTrue(pos=p)
        if self.accept("false"):
            return PFalse(pos=p)
        if self.accept("("):
            a = self.pred()
            self.expect(")")
            return a
        name = self.ident()
        self.expect("=")
        return Test(name, self.nat(), pos=p)

    def _starts_pred(self) -> bool:
        t = self.tok
        if t.kind == "kw":
            return t.text in ("true", "false")
        if t.kind == "op":
            return t.text == "!"
        return t.kind == "ident" and self.peek().text == "="

    # programs
    def prog(self) -> Prog:
        p = self.pos()
        left = self.seq()
        if self.at("+["):
            self.i += 1
            r = self.rat()
            self.expect("]")
            right = self.prog()  # right-associative
            return Choice(((r, left), (1 - r, right)), pos=p)
        return left

    def seq(self) -> Prog:
        left = self.atom()
        while self.at(";"):
            p = self.pos()
            self.i += 1
            left = Seq(left, self.atom(), pos=p)
        return left

    def block(self) -> Prog:
        self.expect("{")
        body = self.prog()
        self.expect("}")
        return body

    def branch(self) -> Prog:
        return self.block() if self.at("{") else self.prog()

    def atom(self) -> Prog:
        t = self.tok
        p = (t.line, t.col)
        if self.accept("drop"):
            return Filter(PFalse(pos=p), pos=p)
        if self.accept("skip"):
            return Filter(PTrue(pos=p), pos=p)
        if self.accept("if"):
            cond = self.pred()
            self.expect("then")
            then = self.branch()
            self.expect("else")
            return If(cond, then, self.branch(), pos=p)
        if self.accept("while"):
            cond = self.pred()
            self.expect("do")
            return While(cond, self.block(), pos=p)
        if self.accept("do"):
            body = self.block()
            self.expect("while")
            return DoWhile(body, self.pred(allow_or=False), pos=p)
        if self.accept("var"):
            name = self.ident()
            self.expect(":=")
            v = self.nat()
            self.expect("in")
            return VarIn(name, v, self.block(), pos=p)
        if self.accept("choice"):
            return self.choice_block(p)
        if self.accept("case"):
            return self.case_block(p)
        if self.at("("):
            return self.paren(p)
        if t.kind == "ident" and self.peek().text == ":=":
            self.i += 2
            return Assign(t.text, self.nat(), pos=p)
        if self._starts_pred():
            return Filter(self.pred(allow_or=False), pos=p)
        self.fail(f"unexpected {t.text or 'end of input'!r}")

    def paren(self, p: Pos) -> Prog:
        # A parenthesised predicate is a filter; otherwise a grouped program.
        save = self.i
        try:
            return Filter(self.pred(allow_or=False), pos=p)
        except ParseError:
            self.i = save + 1
        body = self.prog()
        self.expect(")")
        return body

    def choice_block(self, p: Pos) -> Prog:
        start = self.expect("{")
        weighted: list[tuple[Fraction | None, Prog]] = []
        while not self.at("}"):
            if self.tok.kind == "num":
                r = self.rat()
                self.expect("->")
            else:
                r = None
            weighted.append((r, self.prog()))
            if not self.accept(","):
                break
        self.expect("}")
        if not weighted:
            self.fail("empty choice", start)
        given = [r for r, _ in weighted if r is not None]
        if given and len(given) != len(weighted):
            raise ProbabilityError("mix of weighted and unweighted choice arms", *p)
        if not given:
            w = Fraction(1, len(weighted))
            return Choice(tuple((w, q) for _, q in weighted), pos=p)
        total = sum(given, Fraction(0))
        if total != 1:
            raise ProbabilityError(f"choice probabilities sum to {total}, not 1", *p)
        return Choice(tuple(weighted), pos=p)

    def case_block(self, p: Pos) -> Prog:
        start = self.expect("{")
        arms = []
        while not self.at("}"):
            g = self.pred()
            self.expect("->")
            arms.append((g, self.prog()))
            if not self.accept("|"):
                break
        self.expect("}")
        if not arms:
            self.fail("empty case", start)
        return Case(tuple(arms), pos=p)


def parse_module(text: str) -> tuple[Prog, dict[str, tuple[int, int]]]:
    """Parse an optional ``fields { f: lo..hi, ... }`` header and a program."""
    ps = _Parser(text)
    ranges = ps.header()
    prog = ps.prog()
    if ps.tok.kind != "eof":
        ps.fail(f"trailing input {ps.tok.text!r}")
    return prog, ranges


def parse_program(text: str) -> Prog:
    return parse_module(text)[0]


def parse_pred(text: str) -> Pred:
    ps = _Parser(text)
    a = ps.pred()
    if ps.tok.kind != "eof":
        ps.fail(f"trailing input {ps.tok.text!r}")
    return a


# ----------------------------------------------------------- pretty printing

def _rat(r: Fraction) -> str:
    return f"{r.numerator}/{r.denominator}"


def pretty_pred(a: Pred, allow_or: bool = True) -> str:
    if isinstance(a, PTrue):
        return "true"
    if isinstance(a, PFalse):
        return "false"
    if isinstance(a, Test):
        return f"{a.field}={a.value}"
    if isinstance(a, Neg):
        inner = pretty_pred(a.arg)
        if isinstance(a.arg, (And, Or)):
            inner = f"({inner})"
        return "!" + inner
    if isinstance(a, And):
        lhs = pretty_pred(a.left)
        rhs = pretty_pred(a.right)
        if isinstance(a.left, Or):
            lhs = f"({lhs})"
        if isinstance(a.right, (Or, And)):
            rhs = f"({rhs})"
        return f"{lhs} & {rhs}"
    if isinstance(a, Or):
        rhs = pretty_pred(a.right)
        if isinstance(a.right, Or):
            rhs = f"({rhs})"
        s = f"{pretty_pred(a.left)} | {rhs}"
        return s if allow_or else f"({s})"
    raise TypeError(f"not a predicate: {a!r}")


def pretty(p: Prog, indent: int = 0) -> str:
    """Render ``p`` in the concrete syntax; ``parse_program(pretty(p)) == p``."""
    pad = "  " * indent
    inner = "  " * (indent + 1)

    def sub(q: Prog) -> str:
        return pretty(q, indent + 1)

    if isinstance(p, Filter):
        if isinstance(p.pred, PTrue):
            return "skip"
        if isinstance(p.pred, PFalse):
            return "drop"
        return pretty_pred(p.pred, allow_or=False)
    if isinstance(p, Assign):
        return f"{p.field}:={p.value}"
    if isinstance(p, Seq):
        lhs, rhs = pretty(p.first, indent), pretty(p.second, indent)
        if isinstance(p.first, Choice):
            lhs = f"({lhs})"
        if isinstance(p.second, (Seq, Choice)):
            rhs = f"({rhs})"
        return f"{lhs}; {rhs}"
    if isinstance(p, Choice):
        arms = ",\n".join(f"{inner}{_rat(r)} -> {sub(q)}" for r, q in p.branches)
        return "choice {\n" + arms + "\n" + pad + "}"
    if isinstance(p, If):
        return (f"if {pretty_pred(p.cond)} then {{\n{inner}{sub(p.then)}\n{pad}}} "
                f"else {{\n{inner}{sub(p.orelse)}\n{pad}}}")
    if isinstance(p, While):
        return f"while {pretty_pred(p.cond)} do {{\n{inner}{sub(p.body)}\n{pad}}}"
    if isinstance(p, DoWhile):
        return f"do {{\n{inner}{sub(p.body)}\n{pad}}} while {pretty_pred(p.cond, allow_or=False)}"
    if isinstance(p, Case):
        arms = " |\n".join(f"{inner}{pretty_pred(g)} -> {sub(q)}" for g, q in p.branches)
        return "case {\n" + arms + "\n" + pad + "}"
    if isinstance(p, VarIn):
        return f"var {p.field}:={p.value} in {{\n{inner}{sub(p.body)}\n{pad}}}"
    if isinstance(p, Union):
        return f"({pretty(p.left, indent)}) UNION ({pretty(p.right, indent)})"
    if isinstance(p, Star):
        return f"({pretty(p.body, indent)})*"
    raise TypeError(f"not a program: {p!r}")


def pretty_module(p: Prog, ranges: dict[str, tuple[int, int]] | None = None) -> str:
    if not ranges:
        return pretty(p) + "\n"
    decl = ", ".join(f"{f}: {lo}..{hi}" for f, (lo, hi) in sorted(ranges.items()))
    return f"fields {{ {decl} }}\n" + pretty(p) + "\n"


# --------------------------------------------------------------- desugaring

def desugar(p: Prog) -> Prog:
    """Rewrite ``var`` and ``do..while`` into the core; idempotent."""
    if isinstance(p, (Filter, Assign)):
        return p
    if isinstance(p, Seq):
        return Seq(desugar(p.first), desugar(p.second), pos=p.pos)
    if isinstance(p, Choice):
        return Choice(tuple((r, desugar(q)) for r, q in p.branches), pos=p.pos)
    if isinstance(p, If):
        return If(p.cond, desugar(p.then), desugar(p.orelse), pos=p.pos)
    if isinstance(p, While):
        return While(p.cond, desugar(p.body), pos=p.pos)
    if isinstance(p, DoWhile):
        body = desugar(p.body)
        return Seq(body, While(p.cond, body), pos=p.pos)
    if isinstance(p, Case):
        return Case(tuple((g, desugar(q)) for g, q in p.branches), pos=p.pos)
    if isinstance(p, VarIn):
        return Seq(Assign(p.field, p.value), Seq(desugar(p.body), Assign(p.field, 0)), pos=p.pos)
    if isinstance(p, Union):
        return Union(desugar(p.left), desugar(p.right), pos=p.pos)
    if isinstance(p, Star):
        return Star(desugar(p.body), pos=p.pos)
    raise TypeError(f"not a program: {p!r}")


def case_as_if(p: Case) -> Prog:
    return ite_chain(p.branches, DROP)


# ----------------------------------------------------------------- queries

def children(node) -> Iterator:
    if isinstance(node, (Or, And, Union)):
        yield node.left
        yield node.right
    elif isinstance(node, Neg):
        yield node.arg
    elif isinstance(node, Filter):
        yield node.pred
    elif isinstance(node, Seq):
        yield node.first
        yield node.second
    elif isinstance(node, Choice):
        for _, q in node.branches:
            yield q
    elif isinstance(node, If):
        yield node.cond
        yield node.then
        yield node.orelse
    elif isinstance(node, (While, DoWhile)):
        yield node.cond
        yield node.body
    elif isinstance(node, Case):
        for g, q in node.branches:
            yield g
            yield q
    elif isinstance(node, (VarIn, Star)):
        yield node.body


def walk(node) -> Iterator:
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(children(n))


def ast_size(node) -> int:
    return sum(1 for _ in walk(node))


def mentioned_values(node) -> dict[str, set[int]]:
    """Field -> values appearing in tests or assignments (var binds count too)."""
    out: dict[str, set[int]] = {}
    for n in walk(node):
        if isinstance(n, (Test, Assign, VarIn)):
            out.setdefault(n.field, set()).add(n.value)
        if isinstance(n, VarIn):
            out[n.field].add(0)
    return out


def holds(a: Pred, pk) -> bool:
    """Evaluate a predicate on a packet mapping; absent fields read as 0."""
    if isinstance(a, PTrue):
        return True
    if isinstance(a, PFalse):
        return False
    if isinstance(a, Test):
        return pk.get(a.field, 0) == a.value
    if isinstance(a, Neg):
        return not holds(a.arg, pk)
    if isinstance(a, And):
        return holds(a.left, pk) and holds(a.right, pk)
    if isinstance(a, Or):
        return holds(a.left, pk) or holds(a.right, pk)
    raise TypeError(f"not a predicate: {a!r}")


def fields_of(node) -> list[str]:
    return sorted(mentioned_values(node))
