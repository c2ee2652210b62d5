"""Canonical Huffman coding of index grids, plus the fixed-length fallback.

Codes are canonical: present symbols sorted by (length, symbol id) receive consecutive
code values, so a table is fully described by its (symbol, length) pairs. Bits are packed
MSB-first; trailing padding bits are zero.
"""
from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from holocodec.errors import CodingError, CorruptStreamError
from holocodec.vq.codebook import IndexGrid

logger = logging.getLogger("holocodec")

MAX_SYMBOL = 0xFFFF
MAX_CODE_LENGTH = 0xFF


def _flat(grid) -> np.ndarray:
    data = grid.data if isinstance(grid, IndexGrid) else grid
    if isinstance(data, torch.Tensor):
        data = data.detach().cpu().numpy()
    return np.asarray(data, dtype=np.int64).reshape(-1)


def histogram(grid) -> dict[int, int]:
    symbols, counts = np.unique(_flat(grid), return_counts=True)
    return {int(s): int(c) for s, c in zip(symbols, counts)}


def entropy_bits(hist: dict[int, int]) -> float:
    """Shannon entropy of *hist* in bits per symbol."""
    total = sum(hist.values())
    if total <= 0:
        return 0.0
    return -sum(c / total * math.log2(c / total) for c in hist.values() if c > 0)


# ── Table ────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class HuffmanTable:
    """Present symbols and their code lengths; codes follow canonically."""

    lengths: tuple[tuple[int, int], ...]
    _codes: dict = field(init=False, repr=False, compare=False)
    _decode: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        pairs = tuple(sorted(((int(s), int(n)) for s, n in self.lengths), key=lambda p: (p[1], p[0])))
        if not pairs:
            raise CodingError("Huffman table must contain at least one symbol")
        symbols = [s for s, _ in pairs]
        if len(set(symbols)) != len(symbols):
            raise CodingError("duplicate symbol in Huffman table")
        if any(not 0 <= s <= MAX_SYMBOL for s in symbols):
            raise CodingError("symbol outside 16-bit range")
        if any(not 1 <= n <= MAX_CODE_LENGTH for _, n in pairs):
            raise CodingError("code lengths must lie in [1, 255]")
        max_len = pairs[-1][1]
        if sum(1 << (max_len - n) for _, n in pairs) > (1 << max_len):
            raise CodingError("code lengths violate the Kraft inequality")
        object.__setattr__(self, "lengths", pairs)

        codes: dict[int, tuple[int, int]] = {}
        first_code, first_index, count = {}, {}, {}
        code, prev = 0, pairs[0][1]
        for i, (sym, n) in enumerate(pairs):
            code <<= n - prev
            prev = n
            if n not in first_code:
                first_code[n], first_index[n], count[n] = code, i, 0
            count[n] += 1
            codes[sym] = (code, n)
            code += 1
        object.__setattr__(self, "_codes", codes)
        object.__setattr__(self, "_decode", (first_code, first_index, count, symbols, max_len))

    @property
    def symbols(self) -> list[int]:
        return [s for s, _ in self.lengths]

    @property
    def max_length(self) -> int:
        return self.lengths[-1][1]

    def code(self, symbol: int) -> tuple[int, int]:
        """(code value, length) for *symbol*."""
        try:
            return self._codes[int(symbol)]
        except KeyError:
            raise CodingError(f"symbol {symbol} is not in the Huffman table") from None

    def kraft_sum(self) -> float:
        return sum(2.0**-n for _, n in self.lengths)

    def mean_length(self, hist: dict[int, int]) -> float:
        total = sum(hist.values())
        return sum(c * self.code(s)[1] for s, c in hist.items() if c) / total

    def bit_length(self, hist: dict[int, int]) -> int:
        return sum(c * self.code(s)[1] for s, c in hist.items() if c)


def build_huffman(hist: dict[int, int]) -> HuffmanTable:
    """Optimal prefix code over the symbols with non-zero count.

    Ties in the merge order break on insertion order (leaves by ascending symbol, merged
    nodes after them), so the table is a pure function of the histogram. A single symbol
    gets a 1-bit code.
    """
    present = sorted((int(s), int(c)) for s, c in hist.items() if c > 0)
    if any(c < 0 for c in hist.values()):
        raise CodingError("histogram counts must be non-negative")
    if not present:
        raise CodingError("cannot build a Huffman table from an empty histogram")
    if len(present) == 1:
        return HuffmanTable(((present[0][0], 1),))

    heap: list[tuple[int, int, list[int]]] = []
    for order, (sym, c) in enumerate(present):
        heap.append((c, order, [sym]))
    heapq.heapify(heap)
    depth = {sym: 0 for sym, _ in present}
    order = len(present)
    while len(heap) > 1:
        c1, _, left = heapq.heappop(heap)
        c2, _, right = heapq.heappop(heap)
        for sym in left + right:
            depth[sym] += 1
        heapq.heappush(heap, (c1 + c2, order, left + right))
        order += 1
    return HuffmanTable(tuple(depth.items()))


# ── Huffman payloads ─────────────────────────────────────────────────────────

def encode_indices(grid, table: HuffmanTable) -> tuple[bytes, int]:
    """Row-major Huffman payload; returns (packed bytes, bit length)."""
    flat = _flat(grid)
    if flat.size == 0:
        return b"", 0
    symbols, inverse = np.unique(flat, return_inverse=True)
    patterns = []
    for s in symbols:
        code, n = table.code(int(s))
        patterns.append(np.array([(code >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.uint8))
    bits = np.concatenate([patterns[i] for i in inverse.reshape(-1)])
    return np.packbits(bits).tobytes(), int(bits.size)


def decode_indices(data: bytes, bit_length: int, table: HuffmanTable, count: int, shape=None) -> IndexGrid:
    """Decode exactly *count* symbols from the first *bit_length* bits of *data*."""
    if bit_length > 8 * len(data):
        raise CorruptStreamError("payload shorter than its declared bit length", bit_offset=8 * len(data))
    first_code, first_index, per_length, symbols, max_len = table._decode
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:bit_length].tolist()
    out = np.empty(count, dtype=np.int64)
    pos = 0
    for i in range(count):
        code, n, start = 0, 0, pos
        while True:
            if pos >= bit_length:
                raise CorruptStreamError(f"premature end of payload after {i} of {count} symbols", bit_offset=start)
            code = (code << 1) | bits[pos]
            pos += 1
            n += 1
            if n in first_code and 0 <= code - first_code[n] < per_length[n]:
                out[i] = symbols[first_index[n] + code - first_code[n]]
                break
            if n >= max_len:
                raise CorruptStreamError("invalid Huffman prefix", bit_offset=start)
    grid = torch.from_numpy(out)
    return IndexGrid(grid.reshape(shape) if shape is not None else grid)


# ── Fixed-length payloads ────────────────────────────────────────────────────

def encode_fixed(grid, bits_per_symbol: int) -> tuple[bytes, int]:
    """Every index written with *bits_per_symbol* bits, MSB first."""
    flat = _flat(grid)
    if bits_per_symbol == 0 or flat.size == 0:
        if bits_per_symbol == 0 and flat.size and flat.max() > 0:
            raise CodingError("non-zero index in a zero-bit stream")
        return b"", 0
    if flat.min() < 0 or flat.max() >= (1 << bits_per_symbol):
        raise CodingError(f"index does not fit in {bits_per_symbol} bits")
    shifts = np.arange(bits_per_symbol - 1, -1, -1, dtype=np.int64)
    bits = ((flat[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)
    return np.packbits(bits).tobytes(), int(bits.size)


def decode_fixed(data: bytes, bit_length: int, bits_per_symbol: int, count: int, shape=None) -> IndexGrid:
    need = count * bits_per_symbol
    if bit_length != need:
        raise CorruptStreamError(f"fixed-length payload declares {bit_length} bits, expected {need}")
    if need > 8 * len(data):
        raise CorruptStreamError("fixed-length payload truncated", bit_offset=8 * len(data))
    if bits_per_symbol == 0:
        out = np.zeros(count, dtype=np.int64)
    else:
        bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))[:need].astype(np.int64)
        weights = 1 << np.arange(bits_per_symbol - 1, -1, -1, dtype=np.int64)
        out = bits.reshape(count, bits_per_symbol) @ weights
    grid = torch.from_numpy(out)
    return IndexGrid(grid.reshape(shape) if shape is not None else grid)
