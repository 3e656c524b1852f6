"""Degree statistics on the bipartite views of a shredded matrix.

A shredded instance yields two bipartite graphs isomorphic to the graph of the
matrix itself:

* the value view joins every row value (a slot in ``inst.rows``) to the
  column indices where it has a one;
* the index view joins every row index to the column values (slots in
  ``inst.cols``) that have a one at that index.

The depth-0 statistic of a vertex is its degree; the depth-``k + 1`` statistic
is the multiset of depth-``k`` statistics of its neighbours.  Because both views are isomorphic to the same
graph, a row value and its true row index always carry equal statistics.

Vertices are addressed as ``(side, index)`` with ``side`` in ``{"row", "col"}``.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import BitMatrix, ShreddedInstance, bit_positions

MAX_DEPTH = 3
SIDES = ("row", "col")

Vertex = tuple[str, int]


class GraphView:
    """Read-only bipartite adjacency with a row class and a column class.

    ``name`` is ``"values"`` (row values / column indices), ``"indices"`` (row
    indices / column values) or ``"matrix"`` (row and column indices of a known
    matrix).
    """

    def __init__(self, name: str, n: int, row_nodes: np.ndarray, col_nodes: np.ndarray):
        self.name = name
        self.n = n
        # edge list sorted by row node, and a CSR for each side
        self.edge_rows = np.asarray(row_nodes, dtype=np.int64)
        self.edge_cols = np.asarray(col_nodes, dtype=np.int64)
        self._csr = {}
        for side, src, dst in (("row", self.edge_rows, self.edge_cols), ("col", self.edge_cols, self.edge_rows)):
            order = np.argsort(src, kind="stable")
            ptr = np.zeros(n + 1, dtype=np.int64)
            np.cumsum(np.bincount(src, minlength=n), out=ptr[1:])
            self._csr[side] = (ptr, dst[order])

    @classmethod
    def value_view(cls, inst: ShreddedInstance) -> GraphView:
        slot, j = bit_positions(inst.rows)
        return cls("values", inst.n, slot, j)

    @classmethod
    def index_view(cls, inst: ShreddedInstance) -> GraphView:
        slot, i = bit_positions(inst.cols)
        return cls("indices", inst.n, i, slot)

    @classmethod
    def from_matrix(cls, m: BitMatrix) -> GraphView:
        i, j = bit_positions(m.row_words)
        return cls("matrix", m.n, i, j)

    def vertices(self, side: str) -> list[Vertex]:
        return [(side, v) for v in range(self.n)]

    def _check(self, vertex) -> tuple[str, int]:
        try:
            side, v = vertex
        except (TypeError, ValueError):
            raise ValueError(f"unknown vertex {vertex!r}") from None
        if side not in SIDES or not (0 <= int(v) < self.n):
            raise ValueError(f"unknown vertex {vertex!r} in {self.name}")
        return side, int(v)

    def neighbors(self, vertex) -> np.ndarray:
        side, v = self._check(vertex)
        ptr, adj = self._csr[side]
        return adj[ptr[v] : ptr[v + 1]]

    def degrees(self, side: str) -> np.ndarray:
        ptr, _ = self._csr[side]
        return np.diff(ptr)

    def degree(self, vertex) -> int:
        side, v = self._check(vertex)
        return int(self.degrees(side)[v])

    def adjacency_lists(self, side: str) -> list[list[int]]:
        ptr, adj = self._csr[side]
        flat = adj.tolist()
        bounds = ptr.tolist()
        return [flat[bounds[v] : bounds[v + 1]] for v in range(self.n)]

    def __repr__(self) -> str:
        return f"GraphView({self.name}, n={self.n}, edges={len(self.edge_rows)})"


def _other(side: str) -> str:
    return "col" if side == "row" else "row"


# ---------------------------------------------------------------------------
# canonical nested signatures


def _digest(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=16).digest()


@dataclass(frozen=True)
class SignatureTree:
    """Canonical encoding of the depth-``k`` statistic of one vertex.

    At depth 0 the payload is the degree as 4 big-endian bytes.  At depth
    ``k + 1`` it is the child count followed by the length-prefixed child
    payloads in byte order, so multiset equality is byte equality.
    """

    depth: int
    payload: bytes = field(repr=False)

    @property
    def digest(self) -> bytes:
        return _digest(self.payload)

    @property
    def root_degree(self) -> int:
        return int.from_bytes(self.payload[:4], "big")

    def children(self) -> list[SignatureTree]:
        if self.depth == 0:
            return []
        out, pos = [], 4
        for _ in range(self.root_degree):
            size = int.from_bytes(self.payload[pos : pos + 4], "big")
            out.append(SignatureTree(self.depth - 1, self.payload[pos + 4 : pos + 4 + size]))
            pos += 4 + size
        return out

    def decode(self):
        """Nested tuples of degrees, e.g. ``(1, 2)`` for a depth-1 statistic."""
        if self.depth == 0:
            return self.root_degree
        return tuple(c.decode() for c in self.children())

    def __repr__(self) -> str:
        return f"SignatureTree(depth={self.depth}, digest={self.digest.hex()[:12]})"


def _encode_children(children: list[bytes]) -> bytes:
    children = sorted(children)
    parts = [len(children).to_bytes(4, "big")]
    for c in children:
        parts.append(len(c).to_bytes(4, "big"))
        parts.append(c)
    return b"".join(parts)


def signature_levels(view: GraphView, k: int) -> dict[str, list[bytes]]:
    """Depth-``k`` payloads for every vertex of both sides, computed level by level."""
    if k < 0:
        raise ValueError("depth must be non-negative")
    level = {side: [int(d).to_bytes(4, "big") for d in view.degrees(side)] for side in SIDES}
    adj = {side: view.adjacency_lists(side) for side in SIDES}
    for _ in range(k):
        level = {
            side: [_encode_children([level[_other(side)][u] for u in nbrs]) for nbrs in adj[side]]
            for side in SIDES
        }
    return level


def degree_statistic(view: GraphView, vertex, k: int, max_depth: int = MAX_DEPTH) -> SignatureTree:
    if not 0 <= k <= max_depth:
        raise ValueError(f"depth {k} outside [0, {max_depth}]")
    side, v = view._check(vertex)
    # only the ball of radius k around v matters
    frontier = {side: {v}}
    balls = [frontier]
    for _ in range(k):
        nxt: dict[str, set[int]] = {}
        for s, vs in frontier.items():
            tgt = nxt.setdefault(_other(s), set())
            for u in vs:
                tgt.update(view.neighbors((s, u)).tolist())
        balls.append(nxt)
        frontier = nxt
    memo: dict[tuple[str, int], bytes] = {}
    for depth in range(k + 1):
        ring = balls[k - depth]
        new = {}
        for s, vs in ring.items():
            for u in vs:
                if depth == 0:
                    new[(s, u)] = view.degree((s, u)).to_bytes(4, "big")
                else:
                    new[(s, u)] = _encode_children(
                        [memo[(_other(s), w)] for w in view.neighbors((s, u)).tolist()]
                    )
        memo = new
    return SignatureTree(k, memo[(side, v)])


class SignatureTable:
    """Vertices of one side bucketed by signature digest, payloads retained.

    Digest equality only selects a bucket; :meth:`classes` splits every bucket
    by exact payload, so a digest collision never merges distinct statistics.
    """

    def __init__(self, side: str, trees: dict[int, SignatureTree], digest: Callable[[bytes], bytes]):
        self.side = side
        self.trees = trees
        self.buckets: dict[bytes, list[Vertex]] = {}
        for v, tree in trees.items():
            self.buckets.setdefault(digest(tree.payload), []).append((side, v))

    def classes(self) -> list[list[Vertex]]:
        out = []
        for members in self.buckets.values():
            by_payload: dict[bytes, list[Vertex]] = {}
            for vertex in members:
                by_payload.setdefault(self.trees[vertex[1]].payload, []).append(vertex)
            out.extend(by_payload.values())
        return out

    def __len__(self) -> int:
        return len(self.buckets)


def signature_table(view: GraphView, k: int, side: str = "row", digest=_digest) -> SignatureTable:
    if side not in SIDES:
        raise ValueError(f"side must be one of {SIDES}")
    payloads = signature_levels(view, k)[side]
    return SignatureTable(side, {v: SignatureTree(k, p) for v, p in enumerate(payloads)}, digest)


# ---------------------------------------------------------------------------
# exact colour ids for matching


def _row_ranks(table: np.ndarray) -> np.ndarray:
    """Dense ranks of the rows of a 2-D integer array in lexicographic order."""
    order = np.lexsort(table.T[::-1])
    ordered = table[order]
    step = np.empty(len(order), dtype=np.int32)
    step[:1] = 0
    step[1:] = np.any(ordered[1:] != ordered[:-1], axis=1)
    ranks = np.empty(len(order), dtype=np.int32)
    ranks[order] = np.cumsum(step, dtype=np.int32)
    return ranks


class Refiner:
    """Exact integer ids of the statistics at depth 0, 1, ... on an undirected graph, built level by level.

    ``edges_src``/``edges_dst`` list each edge in both directions.  Ids at each
    level are ranks of the distinct statistics over the whole vertex set, so
    two vertices share an id iff their statistics are equal; no hashing is
    involved.  Level ``t + 1`` is only computed once level ``t`` is complete.
    """

    def __init__(self, edges_src: np.ndarray, edges_dst: np.ndarray, degrees: np.ndarray):
        n_vertices = len(degrees)
        order = np.argsort(edges_src, kind="stable")
        self._src = edges_src[order]
        self._dst = edges_dst[order]
        ptr = np.zeros(n_vertices + 1, dtype=np.int64)
        np.cumsum(degrees, out=ptr[1:])
        self._slot = np.arange(len(self._src), dtype=np.int64) - ptr[self._src]
        self._shape = (n_vertices, max(int(degrees.max()) if n_vertices else 0, 1))
        self.levels = [np.unique(degrees, return_inverse=True)[1].astype(np.int32).ravel()]

    def level(self, k: int) -> np.ndarray:
        while len(self.levels) <= k:
            nb = self.levels[-1][self._dst]
            # sort neighbour ids within each vertex's segment
            perm = np.lexsort((nb, self._src))
            padded = np.full(self._shape, -1, dtype=np.int32)
            padded[self._src, self._slot] = nb[perm]
            self.levels.append(_row_ranks(padded))
        return self.levels[k]


def refine_ids(
    edges_src: np.ndarray, edges_dst: np.ndarray, degrees: np.ndarray, k: int
) -> list[np.ndarray]:
    refiner = Refiner(edges_src, edges_dst, degrees)
    refiner.level(k)
    return refiner.levels


class InstanceSignatures:
    """Colour ids of the depth-``k`` statistics for the four vertex classes of an instance.

    Arrays are indexed by slot (values) or position (indices); ids are
    comparable across all four classes and both views.
    """

    def __init__(self, g_r: GraphView, g_c: GraphView):
        n = self.n = g_r.n
        # vertex numbering: row values, col indices, row indices, col values
        src = np.concatenate([g_r.edge_rows, g_r.edge_cols + n, g_c.edge_rows + 2 * n, g_c.edge_cols + 3 * n])
        dst = np.concatenate([g_r.edge_cols + n, g_r.edge_rows, g_c.edge_cols + 3 * n, g_c.edge_rows + 2 * n])
        degrees = np.concatenate(
            [g_r.degrees("row"), g_r.degrees("col"), g_c.degrees("row"), g_c.degrees("col")]
        )
        self._refiner = Refiner(src, dst, degrees)

    def _part(self, k: int, block: int) -> np.ndarray:
        return self._refiner.level(k)[block * self.n : (block + 1) * self.n]

    def row_values(self, k: int) -> np.ndarray:
        return self._part(k, 0)

    def col_indices(self, k: int) -> np.ndarray:
        return self._part(k, 1)

    def row_indices(self, k: int) -> np.ndarray:
        return self._part(k, 2)

    def col_values(self, k: int) -> np.ndarray:
        return self._part(k, 3)


# ---------------------------------------------------------------------------
# multiset collision bound


def multiset_collision_bound(d: int, p0: float) -> float:
    """Upper bound on P([X_1..X_d] = M) for i.i.d. X_i with max point mass ``p0``.

    Returns the smaller of the Stirling-based bound
    ``sqrt(2 pi d + 2) / (2 pi p0 d + 1) ** (1 / (2 p0))`` and, when
    ``p0 * d <= 1``, the permutation-sum bound ``d! * p0 ** d``; capped at 1.
    """
    if d < 1:
        raise ValueError("d must be a positive integer")
    if not 0.0 < p0 <= 1.0:
        raise ValueError(f"p0 must lie in (0, 1], got {p0}")
    log_bound = 0.5 * math.log(2 * math.pi * d + 2) - math.log(2 * math.pi * p0 * d + 1) / (2 * p0)
    if p0 * d <= 1.0:
        log_bound = min(log_bound, math.lgamma(d + 1) + d * math.log(p0))
    return min(1.0, math.exp(log_bound))
