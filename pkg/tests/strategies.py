"""Hypothesis strategies and naive reference implementations shared by the tests."""

from __future__ import annotations

import numpy as np
from hypothesis import strategies as st

from shredmat import BitMatrix


@st.composite
def bit_lists(draw, min_n=1, max_n=6):
    n = draw(st.integers(min_n, max_n))
    flat = draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n))
    return [flat[i * n : (i + 1) * n] for i in range(n)]


@st.composite
def matrices(draw, min_n=1, max_n=6):
    return BitMatrix.from_bits(draw(bit_lists(min_n, max_n)))


@st.composite
def seeded_bits(draw, min_n=1, max_n=200):
    """Larger matrices, drawn from a numpy generator keyed by hypothesis data."""
    n = draw(st.integers(min_n, max_n))
    p = draw(st.sampled_from([0.0, 0.02, 0.1, 0.5, 0.9, 1.0]))
    seed = draw(st.integers(0, 2**32 - 1))
    return np.random.default_rng(seed).random((n, n)) < p


def naive_rows(bits) -> list[str]:
    return sorted("".join("1" if b else "0" for b in row) for row in bits)


def naive_cols(bits) -> list[str]:
    n = len(bits)
    return sorted("".join("1" if bits[i][j] else "0" for i in range(n)) for j in range(n))


def naive_isolated(bits) -> list[tuple[int, int]]:
    n = len(bits)
    out = []
    for i in range(n):
        for j in range(n):
            if bits[i][j] and sum(bits[i]) == 1 and sum(bits[r][j] for r in range(n)) == 1:
                out.append((i, j))
    return out


def naive_statistic(adj: dict, vertex, k: int):
    """Depth-k statistic by direct recursion on an adjacency dict; multisets as sorted tuples."""
    if k == 0:
        return len(adj[vertex])
    return tuple(sorted((naive_statistic(adj, u, k - 1) for u in adj[vertex]), key=repr))


def canon(x):
    if isinstance(x, tuple):
        return tuple(sorted((canon(c) for c in x), key=repr))
    return x


def bipartite_adj(bits) -> dict:
    n = len(bits)
    adj = {("row", i): [] for i in range(n)} | {("col", j): [] for j in range(n)}
    for i in range(n):
        for j in range(n):
            if bits[i][j]:
                adj[("row", i)].append(("col", j))
                adj[("col", j)].append(("row", i))
    return adj


def all_matrices(n: int):
    for code in range(1 << (n * n)):
        bits = np.array([(code >> (n * n - 1 - t)) & 1 for t in range(n * n)], dtype=bool).reshape(n, n)
        yield BitMatrix.from_bits(bits)
