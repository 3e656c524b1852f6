"""Completion of the lines left unplaced after forced matching.

Unplaced row values and column indices form the value residual (a subgraph
of the value view); unplaced row indices and column values form the index
residual (a subgraph of the index view).  Each unplaced vertex is labelled with
the placed lines it touches, expressed as indices, so labels are comparable
across the two graphs.  Completions of the matrix are exactly the
label-preserving isomorphisms from the value residual onto the index residual, and those decompose over
connected components.

The solver pairs components up with an individualization-refinement search,
assembles one completion, and then looks for a second, different one:

* two or more isolated ones: swap two of their rows;
* two isomorphic components that both contain a row and a column: swap them;
* inside one component: force some row index to take a different row value
  and search again (only for components of at most ``residual_cap`` lines).

Swapping copies of an identical value, or isolated zero lines, never changes
the matrix and is ignored.
"""

from __future__ import annotations

from collections import Counter, deque

from .core import BitMatrix, shred
from .reconstruct import (
    InvariantViolation,
    PartialAssignment,
    ReconstructionResult,
    ResidualReport,
    Tag,
    Workspace,
    detect_isolated_ones,
    matrix_from_slots,
    verify_witness,
)

ROW, COL = 0, 1
SPACE_R, SPACE_C = 0, 1


class BudgetExceeded(Exception):
    pass


def refine(adj: list[list[int]], colors: list[int]) -> list[int]:
    """Colour refinement to the coarsest stable partition.

    Colours are re-ranked canonically each round, so equal colours on
    different vertices (or in different graphs refined together) denote equal
    iterated neighbourhood statistics.
    """
    n_classes = len(set(colors))
    while True:
        sigs = [(colors[v], tuple(sorted(colors[u] for u in adj[v]))) for v in range(len(adj))]
        ranks = {s: r for r, s in enumerate(sorted(set(sigs)))}
        new = [ranks[s] for s in sigs]
        if len(ranks) == n_classes:
            return new
        colors, n_classes = new, len(ranks)


class ResidualGraph:
    """Both residuals as one node-indexed graph with canonical colours."""

    def __init__(self, ws: Workspace, p: PartialAssignment):
        rv, ci, ri, cv = ws.adjacency()
        n = ws.n
        self.space: list[int] = []
        self.kind: list[int] = []
        self.ref: list[int] = []  # slot or index, depending on space/kind
        labels: list[tuple] = []
        node_of: dict[tuple[int, int, int], int] = {}

        def add(space, kind, ref, label):
            node_of[(space, kind, ref)] = len(self.space)
            self.space.append(space)
            self.kind.append(kind)
            self.ref.append(ref)
            labels.append((kind, label))

        for s in range(n):
            if p.row_index[s] < 0:
                add(SPACE_R, ROW, s, tuple(j for j in rv[s] if p.col_slot[j] >= 0))
        for j in range(n):
            if p.col_slot[j] < 0:
                add(SPACE_R, COL, j, tuple(sorted(p.row_index[u] for u in ci[j] if p.row_index[u] >= 0)))
        for i in range(n):
            if p.row_slot[i] < 0:
                add(SPACE_C, ROW, i, tuple(sorted(p.col_index[t] for t in ri[i] if p.col_index[t] >= 0)))
        for t in range(n):
            if p.col_index[t] < 0:
                add(SPACE_C, COL, t, tuple(u for u in cv[t] if p.row_slot[u] >= 0))

        self.adj: list[list[int]] = [[] for _ in self.space]
        for v, (space, kind, ref) in enumerate(zip(self.space, self.kind, self.ref)):
            if space == SPACE_R and kind == ROW:
                nbrs = [node_of.get((SPACE_R, COL, j)) for j in rv[ref]]
            elif space == SPACE_R:
                nbrs = [node_of.get((SPACE_R, ROW, s)) for s in ci[ref]]
            elif kind == ROW:
                nbrs = [node_of.get((SPACE_C, COL, t)) for t in ri[ref]]
            else:
                nbrs = [node_of.get((SPACE_C, ROW, i)) for i in cv[ref]]
            self.adj[v] = [u for u in nbrs if u is not None]

        ranks = {lab: r for r, lab in enumerate(sorted(set(labels)))}
        self.initial = [ranks[lab] for lab in labels]
        self.colors = refine(self.adj, self.initial)

    def __len__(self) -> int:
        return len(self.space)

    def components(self) -> list[list[int]]:
        seen = [False] * len(self)
        out = []
        for start in range(len(self)):
            if seen[start]:
                continue
            seen[start] = True
            comp, queue = [], deque([start])
            while queue:
                v = queue.popleft()
                comp.append(v)
                for u in self.adj[v]:
                    if not seen[u]:
                        seen[u] = True
                        queue.append(u)
            out.append(sorted(comp))
        return out

    def key(self, comp: list[int]) -> tuple:
        return tuple(sorted(self.colors[v] for v in comp))

    def rows_of(self, comp: list[int]) -> list[int]:
        return [v for v in comp if self.kind[v] == ROW]

    def has_row_and_col(self, comp: list[int]) -> bool:
        kinds = {self.kind[v] for v in comp}
        return len(kinds) == 2


class _Search:
    """Individualization-refinement search for an isomorphism between two components."""

    def __init__(self, g: ResidualGraph, a: list[int], b: list[int], budget: int):
        self.a_len = len(a)
        self.nodes = a + b
        local = {v: k for k, v in enumerate(self.nodes)}
        self.adj = [[local[u] for u in g.adj[v]] for v in self.nodes]
        self.start = [g.colors[v] for v in self.nodes]
        self.budget = budget
        self.calls = 0

    def run(self, forced: tuple[int, int] | None = None) -> dict[int, int] | None:
        colors = list(self.start)
        if forced is not None:
            x, y = forced
            colors[x] = colors[y] = max(colors) + 1
        found = self._search(colors)
        if found is None:
            return None
        return {self.nodes[x]: self.nodes[y] for x, y in found.items()}

    def _search(self, colors: list[int]):
        self.calls += 1
        if self.calls > self.budget:
            raise BudgetExceeded
        colors = refine(self.adj, colors)
        a = self.a_len
        ca = Counter(colors[:a])
        if ca != Counter(colors[a:]):
            return None
        target = None
        for c, k in sorted(ca.items()):
            if k > 1 and (target is None or k < ca[target]):
                target = c
        if target is None:
            image = {colors[y]: y for y in range(a, len(colors))}
            mapping = {x: image[colors[x]] for x in range(a)}
            for x, y in mapping.items():
                if sorted(mapping[u] for u in self.adj[x]) != sorted(self.adj[y]):
                    return None
            return mapping
        x = next(v for v in range(a) if colors[v] == target)
        fresh = max(colors) + 1
        for y in range(a, len(colors)):
            if colors[y] != target:
                continue
            trial = list(colors)
            trial[x] = trial[y] = fresh
            found = self._search(trial)
            if found is not None:
                return found
        return None


def find_isomorphism(g: ResidualGraph, a, b, budget: int, forced=None) -> dict[int, int] | None:
    """Label-preserving isomorphism from value-residual component ``a`` onto index-residual component ``b``.

    ``forced`` optionally pins a node of ``a`` to a node of ``b``.  Raises
    :class:`BudgetExceeded` when the search tree grows past ``budget`` nodes.
    """
    if len(a) != len(b):
        return None
    if len(a) == 1 and forced is None:
        return {a[0]: b[0]} if g.colors[a[0]] == g.colors[b[0]] else None
    search = _Search(g, list(a), list(b), budget)
    if forced is not None:
        x, y = forced
        forced = (search.nodes.index(x), search.nodes.index(y))
    return search.run(forced)


def _ambiguous(reason: str, p: PartialAssignment, stats) -> ReconstructionResult:
    report = ResidualReport(
        row_values=[s for s, i in enumerate(p.row_index) if i < 0],
        row_indices=[i for i, s in enumerate(p.row_slot) if s < 0],
        col_values=[t for t, j in enumerate(p.col_index) if j < 0],
        col_indices=[j for j, t in enumerate(p.col_slot) if t < 0],
        reason=reason,
    )
    return ReconstructionResult(Tag.AMBIGUOUS, residual=report, assignment=p, stats=stats)


def _witness(ws: Workspace, base: BitMatrix, slot_at_index: list[int], changes: dict[int, int]):
    alt = list(slot_at_index)
    for i, s in changes.items():
        alt[i] = s
    other = matrix_from_slots(ws.inst, alt)
    pair = (base, other)
    if not verify_witness(ws.inst, pair):
        raise InvariantViolation("constructed witness does not verify")
    return pair


def solve_residual(ws: Workspace, p: PartialAssignment, residual_cap: int, budget: int) -> ReconstructionResult:
    inst = ws.inst
    stats = {"residual_lines": 2 * inst.n - p.n_placed}

    if p.rows_placed == inst.n:
        base = matrix_from_slots(inst, p.row_slot)
    elif p.cols_placed == inst.n:
        base = BitMatrix(inst.n, inst.cols[p.col_slot]).transpose()
    else:
        base = None
    if base is not None:
        if shred(base) != inst:
            return _ambiguous("instance has no consistent completion", p, stats)
        return ReconstructionResult(Tag.UNIQUE, matrix=base, assignment=p, stats=stats)

    g = ResidualGraph(ws, p)
    groups: dict[tuple, tuple[list, list]] = {}
    for comp in g.components():
        groups.setdefault(g.key(comp), ([], []))[g.space[comp[0]]].append(comp)
    stats["residual_components"] = sum(len(r) for r, _ in groups.values())

    # pair every value-residual component with an isomorphic index-residual one
    pairs = []
    for r_comps, c_comps in groups.values():
        if len(r_comps) != len(c_comps):
            return _ambiguous("instance has no consistent completion", p, stats)
        remaining = list(c_comps)
        for a in r_comps:
            for b in remaining:
                try:
                    m = find_isomorphism(g, a, b, budget)
                except BudgetExceeded:
                    return _ambiguous("search budget exhausted while pairing components", p, stats)
                if m is not None:
                    pairs.append((a, b, m))
                    remaining.remove(b)
                    break
            else:
                return _ambiguous("instance has no consistent completion", p, stats)

    def place(target: PartialAssignment, a, m) -> None:
        for x in a:
            y = m[x]
            if g.kind[x] == ROW:
                target.place_row(g.ref[x], g.ref[y], "residual-search")
            else:
                target.place_col(g.ref[y], g.ref[x], "residual-search")

    full = p.copy()
    for a, b, m in pairs:
        place(full, a, m)
    slot_at_index = full.row_slot
    base = matrix_from_slots(inst, slot_at_index)
    if shred(base) != inst:
        return _ambiguous("instance has no consistent completion", p, stats)

    def nonrecon(changes, how):
        stats["witness"] = how
        pair = _witness(ws, base, slot_at_index, changes)
        return ReconstructionResult(Tag.NONRECONSTRUCTIBLE, witness=pair, assignment=full, stats=stats)

    isolated = detect_isolated_ones(base)
    stats["isolated_ones"] = len(isolated)
    if len(isolated) >= 2:
        (i1, _), (i2, _) = isolated[:2]
        return nonrecon({i1: slot_at_index[i2], i2: slot_at_index[i1]}, "isolated-ones")

    row_vids = ws.value_ids()[0]
    by_key: dict[tuple, list] = {}
    for a, b, m in pairs:
        by_key.setdefault(g.key(a), []).append((a, b, m))
    for members in by_key.values():
        if len(members) < 2 or not g.has_row_and_col(members[0][0]):
            continue
        (a1, b1, _), (a2, b2, _) = members[:2]
        try:
            m12 = find_isomorphism(g, a1, b2, budget)
            m21 = find_isomorphism(g, a2, b1, budget)
        except BudgetExceeded:
            continue
        if m12 is None or m21 is None:
            raise InvariantViolation("components with equal keys failed to swap")
        changes = {g.ref[y]: g.ref[x] for m in (m12, m21) for x, y in m.items() if g.kind[x] == ROW}
        return nonrecon(changes, "component-swap")

    unresolved = []
    for a, b, m in pairs:
        rows = g.rows_of(a)
        if len(rows) < 2:
            continue
        if len(a) > residual_cap:
            unresolved.append(a)
            continue
        inverse = {y: x for x, y in m.items()}
        try:
            for y in g.rows_of(b):
                tried = {row_vids[g.ref[inverse[y]]]}
                for x in rows:
                    vid = row_vids[g.ref[x]]
                    if g.colors[x] != g.colors[y] or vid in tried:
                        continue
                    tried.add(vid)
                    alt = find_isomorphism(g, a, b, budget, forced=(x, y))
                    if alt is not None:
                        changes = {g.ref[yy]: g.ref[xx] for xx, yy in alt.items() if g.kind[xx] == ROW}
                        return nonrecon(changes, "component-automorphism")
        except BudgetExceeded:
            unresolved.append(a)

    if unresolved:
        # components are independent, so the ones shown unique stay placed
        settled = p.copy()
        for a, b, m in pairs:
            if not any(a is u for u in unresolved):
                place(settled, a, m)
        return _ambiguous(f"components above the residual cap ({residual_cap} lines) or search budget", settled, stats)
    return ReconstructionResult(Tag.UNIQUE, matrix=base, assignment=full, stats=stats)
