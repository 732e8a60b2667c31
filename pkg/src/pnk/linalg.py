"""Sparse stochastic matrices and absorption probabilities ``A = (I - Q)^-1 R``.

The solver works one strongly connected component of the transient graph at
a time, in reverse topological order, so acyclic chains cost nothing beyond
a sweep.  Transient states that cannot reach any absorbing state are
"trapped"; their mass goes to the designated sink (the drop state).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

EXACT_SCC_LIMIT = 2000


class LinAlgError(ArithmeticError):
    pass


def _num(w, exact: bool):
    if exact:
        return w if isinstance(w, Fraction) else Fraction(w)
    return float(w)


class SparseMatrix:
    """``n x m`` matrix stored as one ``{col: weight}`` dict per row."""

    def __init__(self, n: int, m: int, rows: Sequence[dict] | None = None, exact: bool = True):
        self.n, self.m, self.exact = n, m, exact
        if rows is None:
            self.rows = [{} for _ in range(n)]
        else:
            if len(rows) != n:
                raise ValueError("row count mismatch")
            self.rows = [{j: _num(w, exact) for j, w in r.items() if w != 0} for r in rows]

    @classmethod
    def identity(cls, n: int, exact: bool = True) -> "SparseMatrix":
        one = Fraction(1) if exact else 1.0
        return cls(n, n, [{i: one} for i in range(n)], exact)

    @classmethod
    def from_dense(cls, dense, exact: bool = True) -> "SparseMatrix":
        dense = [list(r) for r in dense]
        m = len(dense[0]) if dense else 0
        return cls(len(dense), m, [{j: w for j, w in enumerate(r) if w} for r in dense], exact)

    def get(self, i: int, j: int):
        return self.rows[i].get(j, 0)

    def set(self, i: int, j: int, w):
        if w == 0:
            self.rows[i].pop(j, None)
        else:
            self.rows[i][j] = _num(w, self.exact)

    def nnz(self) -> int:
        return sum(len(r) for r in self.rows)

    def row_sums(self) -> list:
        return [sum(r.values(), Fraction(0) if self.exact else 0.0) for r in self.rows]

    def is_stochastic(self, tol: float = 2.0**-40) -> bool:
        for r in self.rows:
            if any(w < 0 for w in r.values()):
                return False
            s = sum(r.values(), Fraction(0) if self.exact else 0.0)
            if self.exact and s != 1 or not self.exact and abs(s - 1) > tol:
                return False
        return True

    def to_dense(self) -> list[list]:
        zero = Fraction(0) if self.exact else 0.0
        out = [[zero] * self.m for _ in range(self.n)]
        for i, r in enumerate(self.rows):
            for j, w in r.items():
                out[i][j] = w
        return out

    def to_numpy(self) -> np.ndarray:
        a = np.zeros((self.n, self.m))
        for i, r in enumerate(self.rows):
            for j, w in r.items():
                a[i, j] = float(w)
        return a

    def to_float(self) -> "SparseMatrix":
        return SparseMatrix(self.n, self.m, self.rows, exact=False)

    def matmul(self, other: "SparseMatrix") -> "SparseMatrix":
        if self.m != other.n:
            raise ValueError("dimension mismatch")
        exact = self.exact and other.exact
        rows = []
        for r in self.rows:
            acc: dict = {}
            for k, w in r.items():
                for j, u in other.rows[k].items():
                    acc[j] = acc.get(j, 0) + w * u
            rows.append(acc)
        return SparseMatrix(self.n, other.m, rows, exact)

    __matmul__ = matmul

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (self.n, self.m) == (other.n, other.m) and self.rows == other.rows

    def close_to(self, other: "SparseMatrix", eps: float = 1e-9) -> bool:
        if (self.n, self.m) != (other.n, other.m):
            return False
        for r, s in zip(self.rows, other.rows):
            for j in set(r) | set(s):
                if abs(float(r.get(j, 0)) - float(s.get(j, 0))) > eps:
                    return False
        return True

    def dump(self) -> str:
        """Header ``n m`` then one ``row col num/den`` line per nonzero."""
        lines = [f"{self.n} {self.m}"]
        for i, r in enumerate(self.rows):
            for j in sorted(r):
                w = r[j]
                if self.exact:
                    lines.append(f"{i} {j} {w.numerator}/{w.denominator}")
                else:
                    lines.append(f"{i} {j} {w!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> "SparseMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        n, m = map(int, lines[0].split())
        exact = all("/" in ln.split()[2] for ln in lines[1:])
        mat = cls(n, m, exact=exact)
        for ln in lines[1:]:
            i, j, w = ln.split()
            mat.rows[int(i)][int(j)] = Fraction(w) if exact else float(w)
        return mat

    def __repr__(self) -> str:
        return f"SparseMatrix({self.n}x{self.m}, nnz={self.nnz()}, exact={self.exact})"


@dataclass
class AbsorbingSystem:
    transient: list[int]
    absorbing: list[int]
    Q: SparseMatrix
    R: SparseMatrix

    @property
    def exact(self) -> bool:
        return self.Q.exact and self.R.exact


def partition_absorbing(T: SparseMatrix, absorbing: Iterable[int] | None = None) -> AbsorbingSystem:
    """Split a square stochastic matrix.

    By default a state is absorbing when ``T[s, s] == 1``; callers that know
    better (a loop whose body happens to be the identity) pass the set.
    """
    if T.n != T.m:
        raise ValueError("transition matrix must be square")
    if absorbing is None:
        absorbing = [i for i, r in enumerate(T.rows) if r.get(i, 0) == 1]
    else:
        absorbing = sorted(set(absorbing))
    aset = set(absorbing)
    transient = [i for i in range(T.n) if i not in aset]
    tpos = {s: k for k, s in enumerate(transient)}
    apos = {s: k for k, s in enumerate(absorbing)}
    qrows, rrows = [], []
    for s in transient:
        q, r = {}, {}
        for j, w in T.rows[s].items():
            if j in tpos:
                q[tpos[j]] = w
            else:
                r[apos[j]] = w
        qrows.append(q)
        rrows.append(r)
    Q = SparseMatrix(len(transient), len(transient), qrows, T.exact)
    R = SparseMatrix(len(transient), len(absorbing), rrows, T.exact)
    return AbsorbingSystem(transient, absorbing, Q, R)


def _sccs(nodes: Iterable[int], succ) -> list[list[int]]:
    """Iterative Tarjan; components come out successors-first."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(succ(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out


def trapped_states(sys: AbsorbingSystem) -> set[int]:
    """Transient positions with no path to an absorbing state (support only)."""
    t = len(sys.transient)
    pred: list[list[int]] = [[] for _ in range(t)]
    for i, r in enumerate(sys.Q.rows):
        for j in r:
            pred[j].append(i)
    good = [i for i in range(t) if sys.R.rows[i]]
    seen = set(good)
    while good:
        j = good.pop()
        for i in pred[j]:
            if i not in seen:
                seen.add(i)
                good.append(i)
    return set(range(t)) - seen


def _addto(acc: dict, row: dict, scale):
    for j, w in row.items():
        acc[j] = acc.get(j, 0) + scale * w


def _solve_exact(comp: list[int], qrows, rhs: list[dict]) -> list[dict]:
    """Solve ``(I - Q_CC) X = B`` by Gauss-Jordan with first-nonzero pivots."""
    pos = {s: k for k, s in enumerate(comp)}
    m = len(comp)
    M = []
    for s in comp:
        row = {k: -w for j, w in qrows[s].items() if (k := pos.get(j)) is not None}
        k = pos[s]
        row[k] = row.get(k, 0) + 1
        M.append({c: w for c, w in row.items() if w != 0})
    B = [dict(b) for b in rhs]
    for k in range(m):
        p = next((r for r in range(k, m) if M[r].get(k, 0) != 0), None)
        if p is None:
            raise LinAlgError("singular system among non-trapped states")
        M[k], M[p] = M[p], M[k]
        B[k], B[p] = B[p], B[k]
        piv = M[k][k]
        if piv != 1:
            M[k] = {c: w / piv for c, w in M[k].items()}
            B[k] = {c: w / piv for c, w in B[k].items()}
        for r in range(m):
            if r == k:
                continue
            fac = M[r].get(k, 0)
            if fac == 0:
                continue
            row = M[r]
            for c, w in M[k].items():
                nv = row.get(c, 0) - fac * w
                if nv == 0:
                    row.pop(c, None)
                else:
                    row[c] = nv
            brow = B[r]
            for c, w in B[k].items():
                nv = brow.get(c, 0) - fac * w
                if nv == 0:
                    brow.pop(c, None)
                else:
                    brow[c] = nv
    return B


def _solve_float(comp: list[int], qrows, rhs: list[dict]) -> list[dict]:
    pos = {s: k for k, s in enumerate(comp)}
    m = len(comp)
    cols = sorted({c for b in rhs for c in b})
    cpos = {c: k for k, c in enumerate(cols)}
    Bd = np.zeros((m, max(len(cols), 1)))
    for i, b in enumerate(rhs):
        for c, w in b.items():
            Bd[i, cpos[c]] = float(w)
    if m <= EXACT_SCC_LIMIT:
        Md = np.eye(m)
        for s in comp:
            for j, w in qrows[s].items():
                k = pos.get(j)
                if k is not None:
                    Md[pos[s], k] -= float(w)
        X = np.linalg.solve(Md, Bd)
    else:
        from scipy.sparse import csc_matrix, identity
        from scipy.sparse.linalg import spsolve
        data, ri, ci = [], [], []
        for s in comp:
            for j, w in qrows[s].items():
                k = pos.get(j)
                if k is not None:
                    ri.append(pos[s])
                    ci.append(k)
                    data.append(float(w))
        Qc = csc_matrix((data, (ri, ci)), shape=(m, m))
        X = spsolve((identity(m, format="csc") - Qc).tocsc(), Bd)
        X = np.asarray(X).reshape(m, -1)
    out = []
    for i in range(m):
        out.append({c: float(X[i, cpos[c]]) for c in cols if X[i, cpos[c]] != 0.0})
    return out


def absorbing_limit(sys: AbsorbingSystem, sink: int = 0, mode: str = "auto") -> SparseMatrix:
    """Absorption probabilities (transient x absorbing).

    ``sink`` is the original index of the absorbing state that receives the
    mass of trapped states.  ``mode`` is ``exact``, ``float`` or ``auto``
    (exact unless some component exceeds ``EXACT_SCC_LIMIT`` states).
    """
    t = len(sys.transient)
    exact_in = sys.exact
    trapped = trapped_states(sys)
    sink_col = None
    if sink in sys.absorbing:
        sink_col = sys.absorbing.index(sink)
    if trapped and sink_col is None:
        raise LinAlgError("trapped states but no sink state to absorb them")
    qrows, rrows = sys.Q.rows, sys.R.rows
    A: list[dict | None] = [None] * t
    one = Fraction(1) if exact_in and mode != "float" else 1.0
    for i in trapped:
        A[i] = {sink_col: one}
    live = [i for i in range(t) if i not in trapped]
    comps = _sccs(live, lambda i: [j for j in qrows[i] if j not in trapped])
    if mode == "auto":
        exact = exact_in and max((len(c) for c in comps), default=0) <= EXACT_SCC_LIMIT
    else:
        exact = mode == "exact"
        if exact and not exact_in:
            raise LinAlgError("exact solve requested on an inexact system")
    for comp in comps:
        members = set(comp)
        rhs = []
        for i in comp:
            b: dict = dict(rrows[i]) if exact else {c: float(w) for c, w in rrows[i].items()}
            for j, w in qrows[i].items():
                if j not in members:
                    _addto(b, A[j], w if exact else float(w))
            rhs.append(b)
        if len(comp) == 1:
            i = comp[0]
            q = qrows[i].get(i, 0)
            if q == 0:
                A[i] = rhs[0]
            else:
                d = (1 - q) if exact else 1.0 - float(q)
                A[i] = {c: w / d for c, w in rhs[0].items()}
        else:
            sol = (_solve_exact if exact else _solve_float)(comp, qrows, rhs)
            for i, row in zip(comp, sol):
                A[i] = row
    return SparseMatrix(t, len(sys.absorbing), A, exact)


def limit_matrix(T: SparseMatrix, sink: int = 0, mode: str = "auto",
                 absorbing: Iterable[int] | None = None) -> SparseMatrix:
    """Full ``n x n`` limit: absorbing rows stay unit, transient rows absorb."""
    sys = partition_absorbing(T, absorbing)
    A = absorbing_limit(sys, sink, mode)
    one = Fraction(1) if A.exact else 1.0
    rows: list[dict] = [{} for _ in range(T.n)]
    for s in sys.absorbing:
        rows[s] = {s: one}
    for k, s in enumerate(sys.transient):
        rows[s] = {sys.absorbing[c]: w for c, w in A.rows[k].items()}
    return SparseMatrix(T.n, T.n, rows, A.exact)


def power_step(T: SparseMatrix, v) -> list:
    """Row vector times matrix; ``v`` is a list or ``{index: weight}``."""
    items = v.items() if isinstance(v, dict) else enumerate(v)
    out = [0] * T.m
    for i, w in items:
        if w:
            for j, u in T.rows[i].items():
                out[j] += w * u
    return out


def power_iterate(T: SparseMatrix, v, steps: int) -> list:
    for _ in range(steps):
        v = power_step(T, v)
    return v
