from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from sanac.errors import SanacError
from sanac.quantizer.entropy import UsageHistogram


class HuffmanError(SanacError):
    pass


@dataclass(frozen=True)
class HuffmanTable:
    """Canonical prefix code: per symbol a code length and bit pattern (MSB first)."""

    lengths: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.lengths or any(n <= 0 for n in self.lengths):
            raise HuffmanError("Every symbol needs a positive code length")

    @property
    def size(self) -> int:
        return len(self.lengths)

    @property
    def max_length(self) -> int:
        return max(self.lengths)

    @cached_property
    def codes(self) -> tuple[int, ...]:
        return tuple(canonical_codes(self.lengths))

    @cached_property
    def decode_map(self) -> dict[tuple[int, int], int]:
        return {(n, c): sym for sym, (n, c) in enumerate(zip(self.lengths, self.codes))}

    def code(self, symbol: int) -> tuple[int, int]:
        """(bit pattern, length) of one symbol."""
        return self.codes[symbol], self.lengths[symbol]


def code_lengths(weights: np.ndarray) -> list[int]:
    """Huffman code lengths for non-negative weights.

    Ties merge the node holding the lowest symbol index first; zero-weight symbols
    end up in the deepest subtree, so they still receive (maximum-length) codes.
    """
    weights = np.asarray(weights, dtype=np.float64)
    n = weights.size
    if n == 0 or np.any(weights < 0) or not np.isfinite(weights).all():
        raise HuffmanError("Weights must be finite and non-negative")
    if weights.sum() <= 0:
        raise HuffmanError("Cannot build a Huffman code from an all-zero histogram")
    if n == 1:
        return [1]

    # heap entries: (weight, lowest symbol in subtree, symbols in subtree)
    heap = [(float(w), sym, (sym,)) for sym, w in enumerate(weights)]
    heapq.heapify(heap)
    lengths = [0] * n
    while len(heap) > 1:
        w1, s1, syms1 = heapq.heappop(heap)
        w2, s2, syms2 = heapq.heappop(heap)
        for sym in syms1 + syms2:
            lengths[sym] += 1
        heapq.heappush(heap, (w1 + w2, min(s1, s2), syms1 + syms2))
    return lengths


def canonical_codes(lengths: tuple[int, ...] | list[int]) -> list[int]:
    """Assign codes in (length, symbol) order, consecutive within a length."""
    codes = [0] * len(lengths)
    code = 0
    prev_len = 0
    for length, sym in sorted((n, s) for s, n in enumerate(lengths)):
        code <<= length - prev_len
        codes[sym] = code
        code += 1
        prev_len = length
    return codes


def build_huffman(hist: UsageHistogram | np.ndarray) -> HuffmanTable:
    q = hist.q if isinstance(hist, UsageHistogram) else np.asarray(hist, dtype=np.float64)
    return HuffmanTable(lengths=tuple(code_lengths(q)))


def table_from_counts(counts: np.ndarray) -> HuffmanTable:
    return HuffmanTable(lengths=tuple(code_lengths(np.asarray(counts, dtype=np.float64))))


def kraft_sum(table: HuffmanTable) -> float:
    return math.fsum(2.0 ** -n for n in table.lengths)


def is_prefix_free(table: HuffmanTable) -> bool:
    words = sorted(
        format(c, f"0{n}b") for c, n in zip(table.codes, table.lengths)
    )
    return all(not b.startswith(a) for a, b in zip(words, words[1:]))


def expected_length(table: HuffmanTable, hist: UsageHistogram | np.ndarray) -> float:
    q = hist.q if isinstance(hist, UsageHistogram) else np.asarray(hist, dtype=np.float64)
    return float(np.dot(q, np.asarray(table.lengths, dtype=np.float64)))
