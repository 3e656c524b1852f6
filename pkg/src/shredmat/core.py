"""Bit-packed binary matrices, random sampling, shredding and text file I/O.

Rows and columns are stored as 64-bit words, most significant bit first, so
column ``j`` of a row lives in word ``j // 64`` at bit ``63 - j % 64``.  With
this layout the lexicographic order of bit-strings coincides with the
lexicographic order of word tuples, which is what the canonical instance order
uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

WORD = 64
_SAMPLE_CHUNK = 1 << 22


class FormatError(ValueError):
    """A matrix or instance file does not follow the text format."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def n_words(n: int) -> int:
    return (n + WORD - 1) // WORD


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a 2-D boolean array row-wise into uint64 words (MSB first)."""
    bits = np.asarray(bits, dtype=bool)
    rows, n = bits.shape
    w = n_words(n)
    packed = np.zeros((rows, w * 8), dtype=np.uint8)
    if n:
        packed[:, : (n + 7) // 8] = np.packbits(bits, axis=1)
    return packed.view(">u8").astype(np.uint64)


def unpack_bits(words: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`."""
    raw = np.ascontiguousarray(words, dtype=">u8").view(np.uint8)
    return np.unpackbits(raw, axis=1, count=n).astype(bool)


def bit_positions(words: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(line, position)`` arrays of all set bits, sorted by line then position.

    Only nonzero words are expanded, so sparse inputs cost a word scan plus
    work proportional to the number of ones.
    """
    words = np.ascontiguousarray(words, dtype=np.uint64)
    line, word = np.nonzero(words)
    raw = words[line, word].astype(">u8").view(np.uint8).reshape(-1, 8)
    k, bit = np.nonzero(np.unpackbits(raw, axis=1))
    return line[k].astype(np.int64), word[k].astype(np.int64) * WORD + bit


def lex_order(words: np.ndarray) -> np.ndarray:
    """Indices sorting the rows of ``words`` lexicographically (first word most significant)."""
    if words.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return np.lexsort(words.T[::-1])


def _transpose_words(row_words: np.ndarray, n: int) -> np.ndarray:
    line, pos = bit_positions(row_words)
    bits = np.zeros((n, n), dtype=bool)
    bits[pos, line] = True
    return pack_bits(bits)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.uint64)
    a.flags.writeable = False
    return a


def _bitstring(word_row: np.ndarray, n: int) -> str:
    return "".join("1" if b else "0" for b in unpack_bits(word_row[None, :], n)[0])


class BitMatrix:
    """An immutable n x n binary matrix with an eagerly maintained transpose."""

    __slots__ = ("n", "row_words", "col_words")

    def __init__(self, n: int, row_words: np.ndarray, col_words: np.ndarray | None = None):
        if n < 1:
            raise ValueError("matrix side length must be positive")
        row_words = np.asarray(row_words, dtype=np.uint64)
        if row_words.shape != (n, n_words(n)):
            raise ValueError(f"expected word array of shape {(n, n_words(n))}, got {row_words.shape}")
        tail = n % WORD
        if tail and np.any(row_words[:, -1] & np.uint64((1 << (WORD - tail)) - 1)):
            raise ValueError("bits beyond column n must be zero")
        if col_words is None:
            col_words = _transpose_words(row_words, n)
        self.n = n
        self.row_words = _frozen(row_words)
        self.col_words = _frozen(col_words)

    @classmethod
    def from_bits(cls, bits) -> BitMatrix:
        bits = np.asarray(bits, dtype=bool)
        if bits.ndim != 2 or bits.shape[0] != bits.shape[1]:
            raise ValueError("matrix must be square")
        return cls(bits.shape[0], pack_bits(bits), pack_bits(bits.T))

    @classmethod
    def from_strings(cls, rows) -> BitMatrix:
        return cls.from_bits([[c == "1" for c in r] for r in rows])

    @classmethod
    def zeros(cls, n: int) -> BitMatrix:
        w = np.zeros((n, n_words(n)), dtype=np.uint64)
        return cls(n, w, w.copy())

    def to_bits(self) -> np.ndarray:
        return unpack_bits(self.row_words, self.n)

    def to_strings(self) -> list[str]:
        return ["".join("1" if b else "0" for b in row) for row in self.to_bits()]

    def __getitem__(self, ij) -> int:
        i, j = ij
        return int((int(self.row_words[i, j // WORD]) >> (WORD - 1 - j % WORD)) & 1)

    def transpose(self) -> BitMatrix:
        return BitMatrix(self.n, self.col_words, self.row_words)

    def permute(self, row_perm, col_perm) -> BitMatrix:
        """Matrix whose row ``i`` is row ``row_perm[i]`` and column ``j`` is column ``col_perm[j]``."""
        bits = self.to_bits()[np.asarray(row_perm)][:, np.asarray(col_perm)]
        return BitMatrix.from_bits(bits)

    def row_degrees(self) -> np.ndarray:
        return np.bitwise_count(self.row_words).sum(axis=1, dtype=np.int64)

    def col_degrees(self) -> np.ndarray:
        return np.bitwise_count(self.col_words).sum(axis=1, dtype=np.int64)

    def total_ones(self) -> int:
        return int(self.row_degrees().sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.row_words, other.row_words)

    def __hash__(self) -> int:
        return hash((self.n, self.row_words.tobytes()))

    def __repr__(self) -> str:
        if self.n <= 8:
            return f"BitMatrix({self.to_strings()})"
        return f"BitMatrix(n={self.n}, ones={self.total_ones()})"


class ShreddedInstance:
    """The row and column multisets of a matrix, each in canonical sorted order."""

    __slots__ = ("n", "rows", "cols")

    def __init__(self, n: int, rows: np.ndarray, cols: np.ndarray):
        if n < 1:
            raise ValueError("instance side length must be positive")
        rows = np.asarray(rows, dtype=np.uint64)
        cols = np.asarray(cols, dtype=np.uint64)
        shape = (n, n_words(n))
        if rows.shape != shape or cols.shape != shape:
            raise ValueError(f"rows and cols must each hold {n} vectors of length {n}")
        tail = n % WORD
        if tail:
            mask = np.uint64((1 << (WORD - tail)) - 1)
            if np.any(rows[:, -1] & mask) or np.any(cols[:, -1] & mask):
                raise ValueError("bits beyond position n must be zero")
        if int(np.bitwise_count(rows).sum()) != int(np.bitwise_count(cols).sum()):
            raise ValueError("rows and columns disagree on the total number of ones")
        self.n = n
        self.rows = _frozen(rows[lex_order(rows)])
        self.cols = _frozen(cols[lex_order(cols)])

    @classmethod
    def from_strings(cls, rows, cols) -> ShreddedInstance:
        rows, cols = list(rows), list(cols)
        n = len(rows)
        for s in rows + cols:
            if len(s) != n or set(s) - {"0", "1"}:
                raise ValueError(f"bad bit-string {s!r}")
        pr = pack_bits([[c == "1" for c in s] for s in rows]) if n else None
        pc = pack_bits([[c == "1" for c in s] for s in cols]) if n else None
        return cls(n, pr, pc)

    def row_strings(self) -> list[str]:
        return [_bitstring(r, self.n) for r in self.rows]

    def col_strings(self) -> list[str]:
        return [_bitstring(c, self.n) for c in self.cols]

    def row_degrees(self) -> np.ndarray:
        return np.bitwise_count(self.rows).sum(axis=1, dtype=np.int64)

    def col_degrees(self) -> np.ndarray:
        return np.bitwise_count(self.cols).sum(axis=1, dtype=np.int64)

    def total_ones(self) -> int:
        return int(self.row_degrees().sum())

    def transpose(self) -> ShreddedInstance:
        return ShreddedInstance(self.n, self.cols, self.rows)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ShreddedInstance):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
        )

    def __hash__(self) -> int:
        return hash((self.n, self.rows.tobytes(), self.cols.tobytes()))

    def __repr__(self) -> str:
        if self.n <= 8:
            return f"ShreddedInstance(rows={self.row_strings()}, cols={self.col_strings()})"
        return f"ShreddedInstance(n={self.n}, ones={self.total_ones()})"


@dataclass(frozen=True)
class SampleParams:
    n: int
    p: float
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")


def bernoulli_threshold(p: float) -> int:
    """Integer t with P(u < t) = t / 2**64 for a uniform 64-bit u; exact in ``p``."""
    return int(Fraction(p) * (1 << 64))


def sample_matrix(params: SampleParams) -> BitMatrix:
    """Draw an i.i.d. Bernoulli(p) matrix.

    Entries are generated row-major from a PCG64 stream seeded with
    ``params.seed``; entry ``(i, j)`` is one iff the corresponding raw 64-bit
    output is below ``floor(p * 2**64)``.
    """
    if not isinstance(params, SampleParams):
        params = SampleParams(*params)
    n = params.n
    if params.p <= 0.0:
        return BitMatrix.zeros(n)
    t = bernoulli_threshold(params.p)
    if t >= 1 << 64:
        return BitMatrix.from_bits(np.ones((n, n), dtype=bool))
    threshold = np.uint64(t)
    gen = np.random.PCG64(params.seed)
    bits = np.empty((n, n), dtype=bool)
    step = max(1, _SAMPLE_CHUNK // n)
    for start in range(0, n, step):
        stop = min(n, start + step)
        raw = gen.random_raw((stop - start) * n).reshape(stop - start, n)
        np.less(raw, threshold, out=bits[start:stop])
    row_words = pack_bits(bits)
    line, pos = bit_positions(row_words)
    bits[:] = False
    bits[pos, line] = True
    return BitMatrix(n, row_words, pack_bits(bits))


def shred(m: BitMatrix) -> ShreddedInstance:
    return ShreddedInstance(m.n, m.row_words, m.col_words)


# ---------------------------------------------------------------------------
# text formats


def _parse_header(line: str, lineno: int) -> int:
    try:
        n = int(line.strip())
    except ValueError:
        raise FormatError(f"expected matrix size, got {line.strip()!r}", lineno) from None
    if n < 1:
        raise FormatError(f"matrix size must be positive, got {n}", lineno)
    return n


def _parse_bits(line: str, n: int, lineno: int) -> list[bool]:
    if len(line) != n:
        raise FormatError(f"expected {n} characters, got {len(line)}", lineno)
    bad = set(line) - {"0", "1"}
    if bad:
        raise FormatError(f"invalid character {sorted(bad)[0]!r}", lineno)
    return [c == "1" for c in line]


def _read_lines(path) -> list[str]:
    text = Path(path).read_text()
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def parse_matrix(lines: list[str]) -> BitMatrix:
    if not lines:
        raise FormatError("empty file", 1)
    n = _parse_header(lines[0], 1)
    if len(lines) - 1 != n:
        raise FormatError(f"expected {n} rows, found {len(lines) - 1}", min(len(lines), n + 1) + 1)
    rows = [_parse_bits(lines[k], n, k + 1) for k in range(1, n + 1)]
    return BitMatrix.from_bits(rows)


def format_matrix(m: BitMatrix) -> str:
    return "\n".join([str(m.n), *m.to_strings()]) + "\n"


def read_matrix(path) -> BitMatrix:
    return parse_matrix(_read_lines(path))


def write_matrix(m: BitMatrix, path) -> None:
    Path(path).write_text(format_matrix(m))


def parse_instance(lines: list[str]) -> ShreddedInstance:
    if not lines:
        raise FormatError("empty file", 1)
    n = _parse_header(lines[0], 1)
    expected = 2 * n + 3
    if len(lines) != expected:
        raise FormatError(f"expected {expected} lines, found {len(lines)}", min(len(lines), expected) + 1)
    if lines[1] != "ROWS":
        raise FormatError(f"expected 'ROWS', got {lines[1]!r}", 2)
    if lines[n + 2] != "COLS":
        raise FormatError(f"expected 'COLS', got {lines[n + 2]!r}", n + 3)
    rows = [_parse_bits(lines[2 + k], n, 3 + k) for k in range(n)]
    cols = [_parse_bits(lines[n + 3 + k], n, n + 4 + k) for k in range(n)]
    try:
        return ShreddedInstance(n, pack_bits(rows), pack_bits(cols))
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def format_instance(inst: ShreddedInstance) -> str:
    out = [str(inst.n), "ROWS", *inst.row_strings(), "COLS", *inst.col_strings()]
    return "\n".join(out) + "\n"


def read_instance(path) -> ShreddedInstance:
    return parse_instance(_read_lines(path))


def write_instance(inst: ShreddedInstance, path) -> None:
    Path(path).write_text(format_instance(inst))
