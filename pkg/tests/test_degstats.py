from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shredmat.core import BitMatrix, SampleParams, sample_matrix, shred
from shredmat.degstats import (
    GraphView,
    InstanceSignatures,
    SignatureTree,
    degree_statistic,
    multiset_collision_bound,
    signature_levels,
    signature_table,
)

from strategies import bipartite_adj, canon, matrices, naive_statistic


def true_positions(m: BitMatrix):
    """Map each row/column index of ``m`` to a slot of the same value in shred(m)."""
    inst = shred(m)
    rows, cols = inst.row_strings(), inst.col_strings()
    used_r, used_c = set(), set()
    row_slot, col_slot = [], []
    for r in m.to_strings():
        s = next(s for s, v in enumerate(rows) if v == r and s not in used_r)
        used_r.add(s)
        row_slot.append(s)
    for c in m.transpose().to_strings():
        t = next(t for t, v in enumerate(cols) if v == c and t not in used_c)
        used_c.add(t)
        col_slot.append(t)
    return inst, row_slot, col_slot


def test_complete_bipartite_depth_one():
    g = GraphView.value_view(shred(BitMatrix.from_strings(["11", "11"])))
    assert degree_statistic(g, ("row", 0), 1).decode() == (2, 2)


def test_small_example_depth_one():
    inst = shred(BitMatrix.from_strings(["11", "01"]))
    g = GraphView.value_view(inst)
    slot = inst.row_strings().index("11")
    assert sorted(degree_statistic(g, ("row", slot), 1).decode()) == [1, 2]


def test_degree_statistic_errors():
    g = GraphView.from_matrix(BitMatrix.from_strings(["10", "01"]))
    with pytest.raises(ValueError):
        degree_statistic(g, ("row", 5), 1)
    with pytest.raises(ValueError):
        degree_statistic(g, ("diag", 0), 1)
    with pytest.raises(ValueError):
        degree_statistic(g, ("row", 0), 4)
    with pytest.raises(ValueError):
        degree_statistic(g, ("row", 0), -1)


def test_payload_layout():
    g = GraphView.from_matrix(BitMatrix.from_strings(["11", "01"]))
    t0 = degree_statistic(g, ("row", 0), 0)
    assert t0.payload == (2).to_bytes(4, "big")
    t1 = degree_statistic(g, ("row", 0), 1)
    # two children, each length-prefixed, sorted by bytes
    assert t1.payload == b"".join(
        [(2).to_bytes(4, "big"), (4).to_bytes(4, "big"), (1).to_bytes(4, "big"), (4).to_bytes(4, "big"), (2).to_bytes(4, "big")]
    )
    assert t1.root_degree == 2 and len(t1.children()) == 2
    assert len(t1.digest) == 16


@given(matrices(1, 6), st.integers(0, 3))
@settings(max_examples=60, deadline=None)
def test_statistic_matches_naive_recursion(m, k):
    bits = m.to_bits().tolist()
    adj = bipartite_adj(bits)
    g = GraphView.from_matrix(m)
    for side in ("row", "col"):
        for v in range(m.n):
            tree = degree_statistic(g, (side, v), k)
            assert canon(tree.decode()) == canon(naive_statistic(adj, (side, v), k))


@given(matrices(1, 7), st.integers(0, 3))
@settings(max_examples=60, deadline=None)
def test_dp_levels_agree_with_ball_evaluation(m, k):
    g = GraphView.from_matrix(m)
    levels = signature_levels(g, k)
    for side in ("row", "col"):
        for v in range(m.n):
            assert levels[side][v] == degree_statistic(g, (side, v), k).payload


@given(matrices(1, 7), st.integers(1, 3))
@settings(max_examples=60, deadline=None)
def test_children_count_is_degree(m, k):
    g = GraphView.from_matrix(m)
    for v in range(m.n):
        t = degree_statistic(g, ("row", v), k)
        assert len(t.children()) == g.degree(("row", v)) == t.root_degree
        assert t.children() == sorted(t.children(), key=lambda c: c.payload)


@given(st.data(), st.integers(0, 3))
@settings(max_examples=50, deadline=None)
def test_relabeling_invariance(data, k):
    m = data.draw(matrices(1, 7))
    sigma = data.draw(st.permutations(range(m.n)))
    tau = data.draw(st.permutations(range(m.n)))
    moved = m.permute(sigma, tau)
    g, h = GraphView.from_matrix(m), GraphView.from_matrix(moved)
    for i in range(m.n):
        assert degree_statistic(h, ("row", i), k) == degree_statistic(g, ("row", sigma[i]), k)
        assert degree_statistic(h, ("col", i), k) == degree_statistic(g, ("col", tau[i]), k)


@given(matrices(1, 7), st.integers(0, 3))
@settings(max_examples=60, deadline=None)
def test_value_and_index_views_agree_on_true_pairs(m, k):
    inst, row_slot, col_slot = true_positions(m)
    g_r, g_c = GraphView.value_view(inst), GraphView.index_view(inst)
    for i in range(m.n):
        assert degree_statistic(g_r, ("row", row_slot[i]), k) == degree_statistic(g_c, ("row", i), k)
    for j in range(m.n):
        assert degree_statistic(g_c, ("col", col_slot[j]), k) == degree_statistic(g_r, ("col", j), k)


@given(matrices(1, 7), st.integers(0, 3))
@settings(max_examples=80, deadline=None)
def test_integer_ids_partition_like_payloads(m, k):
    # the matcher's exact ids must induce the same partition as byte payloads
    inst = shred(m)
    g_r, g_c = GraphView.value_view(inst), GraphView.index_view(inst)
    sigs = InstanceSignatures(g_r, g_c)
    lr, lc = signature_levels(g_r, k), signature_levels(g_c, k)
    payloads = lr["row"] + lr["col"] + lc["row"] + lc["col"]
    ids = np.concatenate([sigs.row_values(k), sigs.col_indices(k), sigs.row_indices(k), sigs.col_values(k)]).tolist()
    for a in range(len(ids)):
        for b in range(a + 1, len(ids)):
            assert (ids[a] == ids[b]) == (payloads[a] == payloads[b])


def test_signature_table_all_zero():
    g = GraphView.value_view(shred(BitMatrix.zeros(5)))
    table = signature_table(g, 2)
    assert len(table) == 1
    assert sorted(next(iter(table.buckets.values()))) == [("row", v) for v in range(5)]


def test_signature_table_identity_depth_zero():
    g = GraphView.value_view(shred(BitMatrix.from_strings(["10", "01"])))
    table = signature_table(g, 0)
    assert list(table.buckets.values()) == [[("row", 0), ("row", 1)]]


def test_signature_table_dense_singletons():
    g = GraphView.value_view(shred(sample_matrix(SampleParams(64, 0.5, 5))))
    table = signature_table(g, 1)
    assert len(table) == 64
    assert all(len(b) == 1 for b in table.buckets.values())


def test_forced_digest_collision_never_merges():
    m = BitMatrix.from_strings(["110", "011", "001"])
    g = GraphView.from_matrix(m)
    table = signature_table(g, 1, digest=lambda payload: b"same")
    assert len(table.buckets) == 1
    classes = sorted(sorted(v for _, v in c) for c in table.classes())
    exact = {}
    for v in range(3):
        exact.setdefault(degree_statistic(g, ("row", v), 1).payload, []).append(v)
    assert classes == sorted(sorted(c) for c in exact.values())
    assert len(classes) > 1


def test_signature_table_rejects_side():
    with pytest.raises(ValueError):
        signature_table(GraphView.from_matrix(BitMatrix.zeros(2)), 1, side="diag")


def test_tree_equality_is_payload_equality():
    assert SignatureTree(1, b"abc") == SignatureTree(1, b"abc")
    assert SignatureTree(1, b"abc") != SignatureTree(1, b"abd")


# collision bound


def _power_bound(d, p0):
    with mpmath.workdps(50):
        d, p0 = mpmath.mpf(d), mpmath.mpf(p0)
        return mpmath.sqrt(2 * mpmath.pi * d + 2) / (2 * mpmath.pi * p0 * d + 1) ** (1 / (2 * p0))


def _simple_bound(d, p0):
    with mpmath.workdps(50):
        return mpmath.factorial(d) * mpmath.mpf(p0) ** d


def test_collision_bound_unit():
    assert multiset_collision_bound(1, 1.0) == 1.0


def test_collision_bound_simple_form():
    assert multiset_collision_bound(2, 0.1) == pytest.approx(float(Fraction(2) * Fraction(1, 10) ** 2), rel=1e-12)


def test_collision_bound_uses_power_form_when_smaller():
    # d * p0 > 1 so only the first expression applies
    assert multiset_collision_bound(100, 0.1) == pytest.approx(float(_power_bound(100, 0.1)), rel=1e-12)


def test_collision_bound_monotone_spot():
    assert multiset_collision_bound(100, 0.1) <= multiset_collision_bound(100, 0.5)


@given(st.integers(1, 400), st.floats(1e-3, 1.0))
def test_collision_bound_range(d, p0):
    b = multiset_collision_bound(d, p0)
    assert 0.0 <= b <= 1.0
    expect = _power_bound(d, p0)
    if p0 * d <= 1:
        expect = min(expect, _simple_bound(d, p0))
    assert b == pytest.approx(float(min(expect, 1)), rel=1e-9)


@pytest.mark.parametrize("d,p0", [(0, 0.5), (3, 0.0), (3, -0.1), (3, 1.1), (3, float("nan"))])
def test_collision_bound_errors(d, p0):
    with pytest.raises(ValueError):
        multiset_collision_bound(d, p0)


def test_collision_bound_small_exact_check():
    # d = 2 draws from {0, 1} with probability 1/2 each: multisets {00, 01, 11} with
    # probabilities 1/4, 1/2, 1/4, so the collision probability is 3/8
    exact = Fraction(1, 16) + Fraction(1, 4) + Fraction(1, 16)
    assert float(exact) <= multiset_collision_bound(2, 0.5)
