import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shredmat.core import BitMatrix, SampleParams, ShreddedInstance, sample_matrix, shred
from shredmat.oracle import oracle_classify
from shredmat.reconstruct import (
    InvariantViolation,
    PartialAssignment,
    ReconstructConfig,
    ReconstructionResult,
    Tag,
    Workspace,
    detect_duplicate_lines,
    detect_isolated_ones,
    estimate_p,
    heavy_light,
    match_by_signatures,
    propagate_fingerprints,
    reconstruct,
    resolve_residual,
    verify_witness,
)

from strategies import all_matrices, matrices, naive_isolated


def check_result(m: BitMatrix, result: ReconstructionResult) -> None:
    inst = shred(m)
    if result.tag is Tag.UNIQUE:
        assert result.matrix == m
    elif result.tag is Tag.NONRECONSTRUCTIBLE:
        assert verify_witness(inst, result.witness)


def block_diag(a: BitMatrix, b_rows: list[str]) -> BitMatrix:
    """``a`` in the top-left, ``b_rows`` in the bottom-right, zeros elsewhere."""
    na = a.n
    nb = len(b_rows)
    top = [r + "0" * nb for r in a.to_strings()]
    bottom = ["0" * na + r for r in b_rows]
    return BitMatrix.from_strings(top + bottom)


# estimate_p / heavy-light


def test_estimate_p():
    assert estimate_p(shred(BitMatrix.zeros(4))) == 0
    assert estimate_p(shred(BitMatrix.from_strings(["11", "11"]))) == 1
    assert estimate_p(shred(BitMatrix.from_strings(["10", "01"]))) == 0.5


def test_heavy_light_threshold():
    inst = shred(BitMatrix.from_strings(["1110", "1000", "0000", "1100"]))
    hl = heavy_light(inst)
    assert hl.threshold == pytest.approx(0.5 * 4 * 6 / 16)
    assert hl.row_heavy.tolist() == (inst.row_degrees() >= hl.threshold).tolist()


# signature matching


def test_match_small_example_places_everything():
    a = match_by_signatures(shred(BitMatrix.from_strings(["11", "01"])), 1)
    assert a.is_total()
    assert set(a.sources()) == {"signature-1"}


@pytest.mark.parametrize("k", [1, 2, 3])
def test_match_all_zero_is_empty(k):
    assert match_by_signatures(shred(BitMatrix.zeros(5)), k).n_placed == 0


def test_match_dense_random_complete():
    m = sample_matrix(SampleParams(256, 0.5, 9))
    a = match_by_signatures(shred(m), 1)
    assert a.is_total() and a.n_placed == 512


def test_match_rejects_depth():
    with pytest.raises(ValueError):
        match_by_signatures(shred(BitMatrix.zeros(2)), 0)


@given(matrices(1, 7), st.integers(1, 3))
@settings(max_examples=80, deadline=None)
def test_matching_is_sound(m, k):
    inst = shred(m)
    a = match_by_signatures(inst, k)
    assert a.is_consistent(inst)
    # placed values equal the true lines at their indices
    rows, cols = inst.row_strings(), inst.col_strings()
    true_rows, true_cols = m.to_strings(), m.transpose().to_strings()
    for s, i in enumerate(a.row_index):
        if i >= 0:
            assert rows[s] == true_rows[i]
    for t, j in enumerate(a.col_index):
        if j >= 0:
            assert cols[t] == true_cols[j]


# fingerprints


def test_propagate_total_is_unchanged():
    inst = shred(BitMatrix.from_strings(["11", "01"]))
    a = match_by_signatures(inst, 1)
    b = propagate_fingerprints(inst, a)
    assert b.row_index == a.row_index and b.col_index == a.col_index


def test_propagate_staircase_from_one_placement():
    m = BitMatrix.from_strings(["110", "011", "001"])
    inst = shred(m)
    a = PartialAssignment(3)
    # place the value 110 at row 0 only
    a.place_row(inst.row_strings().index("110"), 0, "test")
    b = propagate_fingerprints(inst, a)
    assert b.is_total() and b.extends(a)
    assert b.is_consistent(inst)


def test_propagate_staircase_after_signatures():
    inst = shred(BitMatrix.from_strings(["110", "011", "001"]))
    b = propagate_fingerprints(inst, match_by_signatures(inst, 1))
    assert b.is_total()


def test_identical_rows_never_placed_by_fingerprints():
    m = BitMatrix.from_strings(["1100", "1100", "0011", "0001"])
    inst = shred(m)
    b = propagate_fingerprints(inst, match_by_signatures(inst, 2))
    dup = [s for s, r in enumerate(inst.row_strings()) if r == "1100"]
    assert not all(b.row_index[s] >= 0 for s in dup)


@given(matrices(1, 7))
@settings(max_examples=80, deadline=None)
def test_propagation_monotone_and_bounded(m):
    inst = shred(m)
    a = match_by_signatures(inst, 1)
    b = propagate_fingerprints(inst, a)
    assert b.extends(a)
    assert b.is_consistent(inst)
    assert b.n_placed <= 2 * m.n


# obstruction detectors


def test_isolated_ones_identity():
    m = BitMatrix.from_strings(["10", "01"])
    assert sorted(detect_isolated_ones(m)) == [(0, 0), (1, 1)]
    assert len(detect_isolated_ones(shred(m))) == 2


def test_isolated_ones_none():
    assert detect_isolated_ones(BitMatrix.from_strings(["11", "11"])) == []
    assert detect_isolated_ones(BitMatrix.from_strings(["11", "01"])) == []
    assert detect_isolated_ones(shred(BitMatrix.from_strings(["11", "01"]))) == []


def test_isolated_ones_type_error():
    with pytest.raises(TypeError):
        detect_isolated_ones("10")


@given(matrices(1, 8))
@settings(max_examples=100)
def test_isolated_ones_exact(m):
    bits = m.to_bits().tolist()
    expected = naive_isolated(bits)
    assert sorted(detect_isolated_ones(m)) == expected
    assert len(detect_isolated_ones(shred(m))) == len(expected)


def test_isolated_ones_instance_pairs_share_their_one():
    m = sample_matrix(SampleParams(300, 0.002, 4))
    inst = shred(m)
    pairs = detect_isolated_ones(inst)
    assert len(pairs) == len(detect_isolated_ones(m)) > 1
    for s, t in pairs:
        assert inst.row_degrees()[s] == 1 and inst.col_degrees()[t] == 1


@pytest.mark.parametrize(
    "rows,expected",
    [
        (["00", "00"], (True, True)),
        (["10", "01"], (False, False)),
        (["11", "11"], (True, True)),
        (["11", "00"], (False, True)),
    ],
)
def test_duplicate_lines(rows, expected):
    d = detect_duplicate_lines(shred(BitMatrix.from_strings(rows)))
    assert (d["duplicate_rows"], d["duplicate_cols"]) == expected


# residual resolution and the full pipeline


def test_all_zero_unique():
    r = reconstruct(shred(BitMatrix.zeros(6)))
    assert r.tag is Tag.UNIQUE and r.matrix == BitMatrix.zeros(6)


def test_identity_nonreconstructible():
    inst = shred(BitMatrix.from_strings(["10", "01"]))
    r = reconstruct(inst)
    assert r.tag is Tag.NONRECONSTRUCTIBLE
    assert verify_witness(inst, r.witness)
    assert {m.to_strings()[0] for m in r.witness} == {"10", "01"}


def test_two_zero_rows_unique():
    m = BitMatrix.from_strings(["110", "000", "000"])
    r = resolve_residual(shred(m), PartialAssignment(3))
    assert r.tag is Tag.UNIQUE and r.matrix == m


def test_two_isolated_ones_in_residual():
    base = sample_matrix(SampleParams(30, 0.3, 2))
    assert reconstruct(shred(base)).tag is Tag.UNIQUE
    m = block_diag(base, ["10", "01"])
    r = reconstruct(shred(m))
    assert r.tag is Tag.NONRECONSTRUCTIBLE
    assert verify_witness(shred(m), r.witness)
    assert r.stats["witness"] == "isolated-ones"


def test_swappable_path_component():
    # a path col - row - col - row - col: the two rows share their middle column and
    # can trade places; one zero row keeps the matrix square
    path = ["101", "011", "000"]
    small = BitMatrix.from_strings(path)
    assert oracle_classify(shred(small)).completion_count == 2
    base = sample_matrix(SampleParams(30, 0.3, 2))
    m = block_diag(base, path)
    inst = shred(m)
    assert detect_isolated_ones(inst) == []
    r = reconstruct(inst)
    assert r.tag is Tag.NONRECONSTRUCTIBLE
    assert verify_witness(inst, r.witness)


def test_swappable_path_with_shared_middle_column():
    # the middle column of the path may also touch other rows
    base = sample_matrix(SampleParams(30, 0.3, 2))
    top = [r + "000" for r in base.to_strings()]
    for i in (0, 5, 9):
        top[i] = top[i][:-1] + "1"
    m = BitMatrix.from_strings(top + ["0" * 30 + "101", "0" * 30 + "011", "0" * 33])
    inst = shred(m)
    r = reconstruct(inst)
    assert r.tag is Tag.NONRECONSTRUCTIBLE
    assert verify_witness(inst, r.witness)


def test_round_trip_above_threshold():
    n = 1024
    m = sample_matrix(SampleParams(n, 2 * math.log(n) / n, 11))
    r = reconstruct(shred(m))
    assert r.tag is Tag.UNIQUE and r.matrix == m


def test_exhaustive_two_by_two():
    bad = []
    for m in all_matrices(2):
        r = reconstruct(shred(m))
        check_result(m, r)
        assert r.tag is not Tag.AMBIGUOUS
        if r.tag is Tag.NONRECONSTRUCTIBLE:
            bad.append(m.to_strings())
    assert sorted(bad) == [["01", "10"], ["10", "01"]]


@given(matrices(1, 6), st.sampled_from([1, 2, 3]))
@settings(max_examples=150, deadline=None)
def test_agrees_with_oracle(m, depth):
    inst = shred(m)
    r = reconstruct(inst, ReconstructConfig(max_depth=depth))
    check_result(m, r)
    assert (r.tag is Tag.UNIQUE) == oracle_classify(inst).weakly_reconstructible
    assert r.tag is not Tag.AMBIGUOUS


@given(st.integers(8, 40), st.sampled_from([0.05, 0.1, 0.2, 0.5]), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_soundness_on_random_matrices(n, p, seed):
    m = sample_matrix(SampleParams(n, p, seed))
    check_result(m, reconstruct(shred(m)))


def test_cap_zero_reports_ambiguous_residual():
    # the 6-cycle has no fingerprint or swap shortcut, so it needs the search that cap 0 forbids
    m = BitMatrix.from_strings(["011", "101", "110"])
    r = reconstruct(shred(m), ReconstructConfig(residual_cap=0))
    assert r.tag is Tag.AMBIGUOUS
    assert r.residual.size == 6
    assert "reason" in r.residual.to_text(shred(m))
    full = reconstruct(shred(m))
    assert full.tag is Tag.NONRECONSTRUCTIBLE and verify_witness(shred(m), full.witness)


def test_inconsistent_instance_is_ambiguous():
    # column 11 needs both rows to have a one there, but one row is 00
    inst = ShreddedInstance.from_strings(["11", "00"], ["11", "00"])
    r = reconstruct(inst)
    assert r.tag is Tag.AMBIGUOUS


def test_heavy_lines_placed_in_phase_one():
    n = 2048
    p = math.log(n) / n
    ok = 0
    for seed in range(50):
        inst = shred(sample_matrix(SampleParams(n, p, seed)))
        ws = Workspace(inst)
        a = match_by_signatures(inst, 2, match_by_signatures(inst, 1, ws=ws), ws=ws)
        hl = heavy_light(inst)
        rows = all(a.row_index[s] >= 0 for s in np.nonzero(hl.row_heavy)[0])
        cols = all(a.col_index[t] >= 0 for t in np.nonzero(hl.col_heavy)[0])
        ok += rows and cols
    assert ok >= 0.95 * 50


def test_result_invariants_enforced():
    with pytest.raises(InvariantViolation):
        ReconstructionResult(Tag.UNIQUE)
    with pytest.raises(InvariantViolation):
        ReconstructionResult(Tag.NONRECONSTRUCTIBLE, matrix=BitMatrix.zeros(1))


def test_config_validation():
    with pytest.raises(ValueError):
        ReconstructConfig(max_depth=4)
    with pytest.raises(ValueError):
        ReconstructConfig(residual_cap=-1)


def test_double_placement_rejected():
    a = PartialAssignment(2)
    a.place_row(0, 1, "test")
    with pytest.raises(InvariantViolation):
        a.place_row(1, 1, "test")
