"""Brute-force ground truth for small instances.

Rows are assigned to positions top to bottom, choosing among the distinct
remaining row values, and a partial assignment survives only while the
multiset of column prefixes it produces matches the prefixes of the given
columns.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Iterator

from .core import BitMatrix, ShreddedInstance

MAX_ORACLE_N = 8


class InconsistentInstance(ValueError):
    """No matrix has the given row and column multisets."""


@dataclass(frozen=True)
class OracleVerdict:
    completion_count: int
    weakly_reconstructible: bool
    strongly_reconstructible: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def completions(inst: ShreddedInstance) -> Iterator[BitMatrix]:
    """Every distinct matrix whose row and column multisets equal ``inst``'s."""
    n = inst.n
    if n > MAX_ORACLE_N:
        raise ValueError(f"oracle is limited to n <= {MAX_ORACLE_N}, got {n}")
    rows = [tuple(int(c) for c in s) for s in inst.row_strings()]
    cols = inst.col_strings()
    # prefix_counts[t] = multiset of the first t bits of every column value
    prefix_counts = [Counter(int(c[:t], 2) if t else 0 for c in cols) for t in range(n + 1)]
    remaining = Counter(rows)
    chosen: list[tuple[int, ...]] = []
    seen: set[bytes] = set()

    def extend(prefixes: list[int]):
        t = len(chosen)
        if t == n:
            m = BitMatrix.from_bits(chosen)
            key = m.row_words.tobytes()
            if key not in seen:
                seen.add(key)
                yield m
            return
        for value in sorted(remaining):
            if not remaining[value]:
                continue
            nxt = [(p << 1) | b for p, b in zip(prefixes, value)]
            if Counter(nxt) != prefix_counts[t + 1]:
                continue
            remaining[value] -= 1
            chosen.append(value)
            yield from extend(nxt)
            chosen.pop()
            remaining[value] += 1

    yield from extend([0] * n)


def oracle_classify(inst: ShreddedInstance) -> OracleVerdict:
    count = sum(1 for _ in completions(inst))
    if count == 0:
        raise InconsistentInstance("no matrix has these row and column multisets")
    rows, cols = inst.row_strings(), inst.col_strings()
    distinct = len(set(rows)) == len(rows) and len(set(cols)) == len(cols)
    weak = count == 1
    return OracleVerdict(count, weak, weak and distinct)
