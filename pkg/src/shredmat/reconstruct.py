"""End-to-end reconstruction of a matrix from its shredded form.

Pipeline: estimate the density, match row/column values to indices by degree
statistics (depth 1, then 2, optionally 3), propagate placements through
fingerprints relative to the already placed lines, and hand whatever is left
to the residual solver in :mod:`shredmat.residual`.

Every placement is forced: a value is put at an index only when, under the
rule in effect, it is the sole value of its kind and the index is the sole
index of that kind.  Any matrix with the given shred therefore agrees with the
assignment, which is what makes ``Unique`` results sound.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .core import BitMatrix, ShreddedInstance, bit_positions, shred, unpack_bits
from .degstats import GraphView, InstanceSignatures

DEFAULT_RESIDUAL_CAP = 16
DEFAULT_SEARCH_BUDGET = 200_000


class InvariantViolation(RuntimeError):
    """An internal consistency check failed; indicates a bug, not bad input."""


class Tag(str, enum.Enum):
    UNIQUE = "Unique"
    NONRECONSTRUCTIBLE = "NonReconstructible"
    AMBIGUOUS = "Ambiguous"

    def __str__(self) -> str:
        return self.value


@dataclass
class ReconstructConfig:
    max_depth: int = 2
    residual_cap: int = DEFAULT_RESIDUAL_CAP
    search_budget: int = DEFAULT_SEARCH_BUDGET

    def __post_init__(self):
        if self.max_depth not in (1, 2, 3):
            raise ValueError("max_depth must be 1, 2 or 3")
        if self.residual_cap < 0:
            raise ValueError("residual_cap must be non-negative")


class PartialAssignment:
    """Injective partial maps from value slots to indices, for rows and columns.

    ``row_index[s]`` is the index of row value slot ``s`` (-1 if unplaced) and
    ``row_slot[i]`` the inverse; likewise for columns.  ``row_source[s]`` records
    the rule that placed the slot.
    """

    def __init__(self, n: int):
        self.n = n
        self.row_index = [-1] * n
        self.row_slot = [-1] * n
        self.col_index = [-1] * n
        self.col_slot = [-1] * n
        self.row_source: list[str | None] = [None] * n
        self.col_source: list[str | None] = [None] * n

    def copy(self) -> PartialAssignment:
        out = PartialAssignment(self.n)
        for name in ("row_index", "row_slot", "col_index", "col_slot", "row_source", "col_source"):
            setattr(out, name, list(getattr(self, name)))
        return out

    def place_row(self, slot: int, index: int, source: str) -> None:
        if self.row_index[slot] >= 0 or self.row_slot[index] >= 0:
            raise InvariantViolation(f"row slot {slot} or index {index} already placed")
        self.row_index[slot] = index
        self.row_slot[index] = slot
        self.row_source[slot] = source

    def place_col(self, slot: int, index: int, source: str) -> None:
        if self.col_index[slot] >= 0 or self.col_slot[index] >= 0:
            raise InvariantViolation(f"column slot {slot} or index {index} already placed")
        self.col_index[slot] = index
        self.col_slot[index] = slot
        self.col_source[slot] = source

    @property
    def rows_placed(self) -> int:
        return self.n - self.row_index.count(-1)

    @property
    def cols_placed(self) -> int:
        return self.n - self.col_index.count(-1)

    @property
    def n_placed(self) -> int:
        return self.rows_placed + self.cols_placed

    def is_total(self) -> bool:
        return self.n_placed == 2 * self.n

    def sources(self) -> Counter:
        return Counter(s for s in self.row_source + self.col_source if s is not None)

    def extends(self, other: PartialAssignment) -> bool:
        """True if every placement of ``other`` is also made here."""
        return all(
            b < 0 or a == b
            for mine, theirs in ((self.row_index, other.row_index), (self.col_index, other.col_index))
            for a, b in zip(mine, theirs)
        )

    def is_consistent(self, inst: ShreddedInstance) -> bool:
        """Placed rows and placed columns agree at every intersection."""
        rows = [(s, i) for s, i in enumerate(self.row_index) if i >= 0]
        cols = [(t, j) for t, j in enumerate(self.col_index) if j >= 0]
        if not rows or not cols:
            return True
        rbits = unpack_bits(inst.rows[[s for s, _ in rows]], inst.n)[:, [j for _, j in cols]]
        cbits = unpack_bits(inst.cols[[t for t, _ in cols]], inst.n)[:, [i for _, i in rows]]
        return bool(np.array_equal(rbits, cbits.T))

    def __eq__(self, other) -> bool:
        if not isinstance(other, PartialAssignment):
            return NotImplemented
        return self.row_index == other.row_index and self.col_index == other.col_index

    def __repr__(self) -> str:
        return f"PartialAssignment(n={self.n}, rows={self.rows_placed}, cols={self.cols_placed})"


@dataclass
class HeavyLightLabel:
    threshold: float
    row_heavy: np.ndarray  # per row value slot
    col_heavy: np.ndarray  # per column value slot


@dataclass
class ResidualReport:
    row_values: list[int]
    row_indices: list[int]
    col_values: list[int]
    col_indices: list[int]
    reason: str = ""

    @property
    def size(self) -> int:
        return len(self.row_values) + len(self.col_values)

    def to_text(self, inst: ShreddedInstance | None = None) -> str:
        lines = [f"reason: {self.reason}", f"unplaced lines: {self.size}"]
        rs = inst.row_strings() if inst is not None else None
        cs = inst.col_strings() if inst is not None else None
        lines.append("row values: " + " ".join(rs[s] if rs else str(s) for s in self.row_values))
        lines.append("row indices: " + " ".join(map(str, self.row_indices)))
        lines.append("column values: " + " ".join(cs[t] if cs else str(t) for t in self.col_values))
        lines.append("column indices: " + " ".join(map(str, self.col_indices)))
        return "\n".join(lines) + "\n"


@dataclass
class ReconstructionResult:
    tag: Tag
    matrix: BitMatrix | None = None
    witness: tuple[BitMatrix, BitMatrix] | None = None
    residual: ResidualReport | None = None
    assignment: PartialAssignment | None = None
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tag = Tag(self.tag)
        if (self.matrix is not None) != (self.tag is Tag.UNIQUE):
            raise InvariantViolation("matrix must be present exactly for Unique results")
        if (self.witness is not None) != (self.tag is Tag.NONRECONSTRUCTIBLE):
            raise InvariantViolation("witness must be present exactly for NonReconstructible results")
        if (self.residual is not None) != (self.tag is Tag.AMBIGUOUS):
            raise InvariantViolation("residual must be present exactly for Ambiguous results")


def verify_witness(inst: ShreddedInstance, witness: tuple[BitMatrix, BitMatrix]) -> bool:
    """Both matrices shred to ``inst`` and differ in at least one entry."""
    a, b = witness
    return a != b and shred(a) == inst and shred(b) == inst


# ---------------------------------------------------------------------------
# shared per-instance data


class Workspace:
    """Lazily built views, adjacency lists and signature levels of one instance."""

    def __init__(self, inst: ShreddedInstance):
        self.inst = inst
        self.n = inst.n
        self._g_r = self._g_c = None
        self._adj = None
        self._sigs: InstanceSignatures | None = None
        self._vids = None

    @property
    def g_r(self) -> GraphView:
        if self._g_r is None:
            self._g_r = GraphView.value_view(self.inst)
        return self._g_r

    @property
    def g_c(self) -> GraphView:
        if self._g_c is None:
            self._g_c = GraphView.index_view(self.inst)
        return self._g_c

    def adjacency(self):
        """``(rv, ci, ri, cv)``: row value -> column indices, column index -> row values,
        row index -> column values, column value -> row indices."""
        if self._adj is None:
            self._adj = (
                self.g_r.adjacency_lists("row"),
                self.g_r.adjacency_lists("col"),
                self.g_c.adjacency_lists("row"),
                self.g_c.adjacency_lists("col"),
            )
        return self._adj

    def signatures(self) -> InstanceSignatures:
        if self._sigs is None:
            self._sigs = InstanceSignatures(self.g_r, self.g_c)
        return self._sigs

    def value_ids(self) -> tuple[list[int], list[int]]:
        """Ids of distinct row values and column values, per slot."""
        if self._vids is None:
            out = []
            for words in (self.inst.rows, self.inst.cols):
                change = np.ones(len(words), dtype=np.int64)
                change[0] = 0
                if len(words) > 1:
                    change[1:] = np.any(words[1:] != words[:-1], axis=1)
                out.append(np.cumsum(change).tolist())
            self._vids = tuple(out)
        return self._vids


def _workspace(inst, ws) -> Workspace:
    if ws is None:
        return Workspace(inst)
    if ws.inst is not inst:
        raise ValueError("workspace belongs to a different instance")
    return ws


# ---------------------------------------------------------------------------
# operations


def estimate_p(inst: ShreddedInstance) -> float:
    return inst.total_ones() / (inst.n * inst.n)


def heavy_light(inst: ShreddedInstance, p_hat: float | None = None) -> HeavyLightLabel:
    """Heavy lines have at least ``n * p_hat / 2`` ones."""
    if p_hat is None:
        p_hat = estimate_p(inst)
    threshold = 0.5 * inst.n * p_hat
    return HeavyLightLabel(threshold, inst.row_degrees() >= threshold, inst.col_degrees() >= threshold)


def _unique_pairs(value_ids: np.ndarray, index_ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    size = int(max(value_ids.max(initial=-1), index_ids.max(initial=-1))) + 1
    cv = np.bincount(value_ids, minlength=size)
    ci = np.bincount(index_ids, minlength=size)
    good = (cv == 1) & (ci == 1)
    slots = np.nonzero(good[value_ids])[0]
    where = np.full(size, -1, dtype=np.int64)
    idx = np.nonzero(good[index_ids])[0]
    where[index_ids[idx]] = idx
    return slots, where[value_ids[slots]]


def match_by_signatures(
    inst: ShreddedInstance,
    k: int,
    partial: PartialAssignment | None = None,
    ws: Workspace | None = None,
) -> PartialAssignment:
    """Place every value whose depth-``k`` statistic is unique among values and
    equals the (unique) statistic of exactly one index.

    Ids come from exact ranks of the canonical statistics, so equal ids mean
    equal statistics.  When ``partial`` is given its placements are kept and
    only new, non-conflicting matches are added.
    """
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    ws = _workspace(inst, ws)
    sigs = ws.signatures()
    out = partial.copy() if partial is not None else PartialAssignment(inst.n)
    source = f"signature-{k}"
    for value_ids, index_ids, place, slot_map, index_map in (
        (sigs.row_values(k), sigs.row_indices(k), out.place_row, out.row_index, out.row_slot),
        (sigs.col_values(k), sigs.col_indices(k), out.place_col, out.col_index, out.col_slot),
    ):
        slots, indices = _unique_pairs(value_ids, index_ids)
        for s, i in zip(slots.tolist(), indices.tolist()):
            if slot_map[s] < 0 and index_map[i] < 0:
                place(s, i, source)
    return out


def _rows_fp1(rv, ri, p: PartialAssignment, slots, indices):
    col_slot, col_index = p.col_slot, p.col_index
    vf = {s: (len(rv[s]), tuple(j for j in rv[s] if col_slot[j] >= 0)) for s in slots}
    inf = {i: (len(ri[i]), tuple(sorted(col_index[t] for t in ri[i] if col_index[t] >= 0))) for i in indices}
    return vf, inf


def _rows_fp2(rv, ci, ri, cv, p: PartialAssignment, slots, indices):
    row_index, row_slot = p.row_index, p.row_slot
    vf = {
        s: tuple(sorted(tuple(sorted(row_index[u] for u in ci[j] if row_index[u] >= 0)) for j in rv[s]))
        for s in slots
    }
    inf = {i: tuple(sorted(tuple(u for u in cv[t] if row_slot[u] >= 0) for t in ri[i])) for i in indices}
    return vf, inf


def _cols_fp1(ci, cv, p: PartialAssignment, slots, indices):
    row_slot, row_index = p.row_slot, p.row_index
    vf = {t: (len(cv[t]), tuple(i for i in cv[t] if row_slot[i] >= 0)) for t in slots}
    inf = {j: (len(ci[j]), tuple(sorted(row_index[s] for s in ci[j] if row_index[s] >= 0))) for j in indices}
    return vf, inf


def _cols_fp2(rv, ci, ri, cv, p: PartialAssignment, slots, indices):
    col_index, col_slot = p.col_index, p.col_slot
    vf = {
        t: tuple(sorted(tuple(sorted(col_index[u] for u in ri[i] if col_index[u] >= 0)) for i in cv[t]))
        for t in slots
    }
    inf = {j: tuple(sorted(tuple(u for u in rv[s] if col_slot[u] >= 0) for s in ci[j])) for j in indices}
    return vf, inf


def _match_keys(vf: dict, inf: dict):
    """Unique-unique matches, plus the value/index sets left tied."""
    cv = Counter(vf.values())
    ci = Counter(inf.values())
    by_key = {key: i for i, key in inf.items() if ci[key] == 1}
    matches = [(s, by_key[key]) for s, key in vf.items() if cv[key] == 1 and key in by_key]
    matched_keys = {vf[s] for s, _ in matches}
    tied_v = [s for s, key in vf.items() if key not in matched_keys and key in ci]
    tied_i = [i for i, key in inf.items() if key not in matched_keys and key in cv]
    return matches, tied_v, tied_i


def _groups(vf: dict, inf: dict, vids: list[int]):
    """Classes whose values are all identical and whose sizes agree on both sides."""
    by_v: dict = {}
    for s, key in vf.items():
        by_v.setdefault(key, []).append(s)
    by_i: dict = {}
    for i, key in inf.items():
        by_i.setdefault(key, []).append(i)
    out = []
    for key, ss in by_v.items():
        ii = by_i.get(key)
        if ii and len(ii) == len(ss) and len(ss) > 1 and len({vids[s] for s in ss}) == 1:
            out.extend(zip(sorted(ss), sorted(ii)))
    return out


def propagate_fingerprints(
    inst: ShreddedInstance,
    partial: PartialAssignment,
    group_identical: bool = False,
    ws: Workspace | None = None,
) -> PartialAssignment:
    """Extend ``partial`` to a fixpoint using fingerprints relative to placed lines.

    An unplaced row value ``r`` is fingerprinted by its degree and the set of
    placed column indices it hits; ties are broken by the multiset, over its
    columns ``c``, of the placed rows meeting ``c``.  Unplaced row indices get
    the mirror fingerprint from the column values, and columns are symmetric.
    A placement happens when a fingerprint is unique among values, unique
    among indices, and the two agree.

    With ``group_identical`` a fingerprint class made of identical values is
    also placed when it has as many indices as values; which copy goes where
    does not change the matrix.
    """
    ws = _workspace(inst, ws)
    out = partial.copy()
    if out.is_total():
        return out
    rv, ci, ri, cv = ws.adjacency()
    row_vids, col_vids = ws.value_ids()
    n = inst.n
    for _ in range(2 * n + 1):
        r_slots = [s for s in range(n) if out.row_index[s] < 0]
        r_idx = [i for i in range(n) if out.row_slot[i] < 0]
        c_slots = [t for t in range(n) if out.col_index[t] < 0]
        c_idx = [j for j in range(n) if out.col_slot[j] < 0]
        row_moves, col_moves = [], []
        for slots, idx, fp1, fp2, moves, vids in (
            (r_slots, r_idx, lambda a, b: _rows_fp1(rv, ri, out, a, b),
             lambda a, b: _rows_fp2(rv, ci, ri, cv, out, a, b), row_moves, row_vids),
            (c_slots, c_idx, lambda a, b: _cols_fp1(ci, cv, out, a, b),
             lambda a, b: _cols_fp2(rv, ci, ri, cv, out, a, b), col_moves, col_vids),
        ):
            if not slots:
                continue
            vf, inf = fp1(slots, idx)
            matches, tied_v, tied_i = _match_keys(vf, inf)
            moves.extend((s, i, "fingerprint") for s, i in matches)
            if tied_v and tied_i:
                vf2, inf2 = fp2(tied_v, tied_i)
                vf2 = {s: (vf[s], vf2[s]) for s in tied_v}
                inf2 = {i: (inf[i], inf2[i]) for i in tied_i}
                matches2, _, _ = _match_keys(vf2, inf2)
                moves.extend((s, i, "fingerprint") for s, i in matches2)
                if group_identical:
                    moves.extend((s, i, "group") for s, i in _groups(vf2, inf2, vids))
        if not row_moves and not col_moves:
            break
        for s, i, src in row_moves:
            out.place_row(s, i, src)
        for t, j, src in col_moves:
            out.place_col(t, j, src)
    return out


def detect_isolated_ones(obj) -> list[tuple[int, int]]:
    """Isolated ones: a one whose row and column contain no other one.

    For a :class:`BitMatrix` returns the ``(i, j)`` positions.  For a
    :class:`ShreddedInstance` returns ``(row_slot, col_slot)`` pairs: row values
    of weight one whose column has weight one, and column values of weight one
    whose row has weight one.  Which of these pair up is not determined by the
    shred (that is the obstruction); they are paired in slot order.
    """
    if isinstance(obj, BitMatrix):
        rdeg = obj.row_degrees()
        cdeg = obj.col_degrees()
        line, pos = bit_positions(obj.row_words)
        keep = (rdeg[line] == 1) & (cdeg[pos] == 1)
        return list(zip(line[keep].tolist(), pos[keep].tolist()))
    if isinstance(obj, ShreddedInstance):
        rs, j = bit_positions(obj.rows)
        ts, i = bit_positions(obj.cols)
        col_deg = np.bincount(j, minlength=obj.n)  # degree of each column index
        row_deg = np.bincount(i, minlength=obj.n)  # degree of each row index
        rdeg = obj.row_degrees()
        cdeg = obj.col_degrees()
        row_slots = rs[(rdeg[rs] == 1) & (col_deg[j] == 1)].tolist()
        col_slots = ts[(cdeg[ts] == 1) & (row_deg[i] == 1)].tolist()
        if len(row_slots) != len(col_slots):
            raise ValueError("instance is inconsistent: isolated row and column values disagree")
        return list(zip(row_slots, col_slots))
    raise TypeError(f"expected BitMatrix or ShreddedInstance, got {type(obj).__name__}")


def detect_duplicate_lines(inst: ShreddedInstance) -> dict[str, bool]:
    def dup(words):
        return bool(len(words) > 1 and np.any(np.all(words[1:] == words[:-1], axis=1)))

    return {"duplicate_rows": dup(inst.rows), "duplicate_cols": dup(inst.cols)}


def matrix_from_slots(inst: ShreddedInstance, slot_at_index) -> BitMatrix:
    return BitMatrix(inst.n, inst.rows[np.asarray(slot_at_index, dtype=np.int64)])


def resolve_residual(
    inst: ShreddedInstance,
    partial: PartialAssignment,
    residual_cap: int = DEFAULT_RESIDUAL_CAP,
    search_budget: int = DEFAULT_SEARCH_BUDGET,
    ws: Workspace | None = None,
) -> ReconstructionResult:
    from .residual import solve_residual

    ws = _workspace(inst, ws)
    partial = propagate_fingerprints(inst, partial, group_identical=True, ws=ws)
    return solve_residual(ws, partial, residual_cap, search_budget)


def reconstruct(inst: ShreddedInstance, config: ReconstructConfig | None = None) -> ReconstructionResult:
    cfg = config or ReconstructConfig()
    ws = Workspace(inst)
    p_hat = estimate_p(inst)
    partial = match_by_signatures(inst, 1, ws=ws)
    depth = 1
    for k in range(2, cfg.max_depth + 1):
        if partial.is_total():
            break
        partial = match_by_signatures(inst, k, partial, ws=ws)
        depth = k
    phase1 = partial.n_placed
    if not partial.is_total():
        partial = propagate_fingerprints(inst, partial, ws=ws)
    phase2 = partial.n_placed
    result = resolve_residual(inst, partial, cfg.residual_cap, cfg.search_budget, ws=ws)
    result.stats.update(p_hat=p_hat, depth=depth, phase1_placed=phase1, phase2_placed=phase2)
    return result
