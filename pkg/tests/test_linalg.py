import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pnk import linalg as L

H = Fraction(1, 2)


def test_partition_identity():
    sys = L.partition_absorbing(L.SparseMatrix.identity(3))
    assert sys.absorbing == [0, 1, 2] and sys.Q.n == 0


def test_partition_two_state():
    sys = L.partition_absorbing(L.SparseMatrix.from_dense([[1, 0], [H, H]]))
    assert sys.Q.to_dense() == [[H]] and sys.R.to_dense() == [[H]]


def test_geometric_limit():
    sys = L.partition_absorbing(L.SparseMatrix.from_dense([[1, 0], [H, H]]))
    assert L.absorbing_limit(sys).to_dense() == [[1]]


def test_q_zero():
    T = L.SparseMatrix.from_dense([[1, 0, 0], [0, 1, 0], [Fraction(1, 3), Fraction(2, 3), 0]])
    sys = L.partition_absorbing(T)
    assert L.absorbing_limit(sys) == sys.R


def test_trapped_goes_to_sink():
    T = L.SparseMatrix.from_dense([[1, 0], [0, 1]])
    lim = L.limit_matrix(T, sink=0, absorbing=[0])
    assert lim.to_dense() == [[1, 0], [1, 0]]


def test_trapped_needs_sink():
    sys = L.partition_absorbing(L.SparseMatrix.from_dense([[1, 0], [0, 1]]), absorbing=[0])
    with pytest.raises(L.LinAlgError):
        L.absorbing_limit(sys, sink=5)


def test_power_step():
    assert L.power_step(L.SparseMatrix.identity(3), [1, 2, 3]) == [1, 2, 3]
    T = L.SparseMatrix.from_dense([[1, 0], [H, H]])
    v = L.power_iterate(T, {1: Fraction(1)}, 50)
    assert v[0] >= 1 - Fraction(1, 2**50)


def test_dump_round_trip():
    T = L.SparseMatrix.from_dense([[1, 0], [H, H]])
    assert T.dump() == "2 2\n0 0 1/1\n1 0 1/2\n1 1 1/2\n"
    assert L.SparseMatrix.load(T.dump()) == T


def test_exact_on_float_rejected():
    sys = L.partition_absorbing(L.SparseMatrix.from_dense([[1, 0], [0.5, 0.5]], exact=False))
    with pytest.raises(L.LinAlgError):
        L.absorbing_limit(sys, mode="exact")


def _random_chain(seed: int, n: int) -> L.SparseMatrix:
    rng = random.Random(seed)
    rows = []
    for i in range(n):
        if i == 0 or rng.random() < 0.25:
            rows.append({i: Fraction(1)})
            continue
        k = rng.randint(1, min(3, n))
        cols = rng.sample(range(n), k)
        ws = [Fraction(rng.randint(1, 4)) for _ in cols]
        tot = sum(ws)
        rows.append({c: w / tot for c, w in zip(cols, ws)})
    return L.SparseMatrix(n, n, rows)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 6))
def test_limit_vs_power_and_float(seed, n):
    T = _random_chain(seed, n)
    sys = L.partition_absorbing(T)
    trapped = {sys.transient[i] for i in L.trapped_states(sys)}
    exact = L.limit_matrix(T, sink=0, mode="exact")
    assert exact.is_stochastic()
    flt = L.limit_matrix(T, sink=0, mode="float")
    assert exact.close_to(flt, 1e-9)
    Tf = T.to_float()
    for i in range(n):
        if i in trapped:
            continue
        v = L.power_iterate(Tf, {i: 1.0}, 1000)
        for j in sys.absorbing[1:]:
            assert abs(v[j] - float(exact.get(i, j))) <= 1e-9
        # the sink also collects whatever stays trapped, so it is never below iteration
        assert float(exact.get(i, 0)) >= v[0] - 1e-9


def test_trapped_depends_on_support_only():
    a = L.SparseMatrix.from_dense([[1, 0, 0], [0, H, H], [0, H, H]])
    b = L.SparseMatrix.from_dense([[1, 0, 0], [0, Fraction(1, 9), Fraction(8, 9)],
                                   [0, Fraction(3, 4), Fraction(1, 4)]])
    ta = L.trapped_states(L.partition_absorbing(a))
    tb = L.trapped_states(L.partition_absorbing(b))
    assert ta == tb == {0, 1}
