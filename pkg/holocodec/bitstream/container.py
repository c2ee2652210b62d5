"""The `.ravq` stream: header + per-level index payloads + CRC-32.

Layout (little-endian):
    [4B] "RAVQ" [1B] version [1B] channel [1B] profile id
    [1B] log2 K̃ bottom [1B] log2 K̃ top
    [8 x 2B] bottom h,w  top h,w  frame H,W  roi h,w
    [3 x 4B] float32 wavelength (nm), pitch (µm), distance (mm)
    [1B] flags (bit 0: Huffman)
    per level, bottom first:
        [2B] n present symbols, n x ([2B] symbol, [1B] code length)
        [4B] payload bit length, ceil(bits / 8) bytes of MSB-first bits
    [4B] CRC-32 of everything above

A multi-channel file ("RAVM") lists (channel, offset, length) entries followed by the
concatenated single-channel streams and a CRC-32.
"""
from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import torch

from holocodec.bitstream.huffman import (
    HuffmanTable,
    build_huffman,
    decode_fixed,
    decode_indices,
    encode_fixed,
    encode_indices,
    histogram,
)
from holocodec.config import FORMAT_VERSION, MULTI_MAGIC, STREAM_MAGIC
from holocodec.errors import ChecksumError, CodingError, CorruptStreamError, DomainError, ShapeError
from holocodec.optics.propagation import OpticsConfig
from holocodec.utils import crc32
from holocodec.vq.codebook import IndexGrid

logger = logging.getLogger("holocodec")

_HEADER = struct.Struct("<4sBBBBB8H3fB")
_SYMCOUNT = struct.Struct("<H")
_PAIR = struct.Struct("<HB")
_BITLEN = struct.Struct("<I")
_CRC = struct.Struct("<I")
_MULTI_HEAD = struct.Struct("<4sBB")
_MULTI_ENTRY = struct.Struct("<BII")

FLAG_HUFFMAN = 0x01
MAX_LOG2_SIZE = 16
MAX_LEVEL_CELLS = 1 << 22


def _f32(x: float) -> float:
    return float(np.float32(x))


@dataclass(eq=False)
class HoloBitstream:
    channel: int
    profile_id: int
    log2_sizes: tuple[int, int]
    bottom: IndexGrid
    top: IndexGrid
    frame: tuple[int, int]
    roi: tuple[int, int]
    wavelength_nm: float
    pitch_um: float
    distance_mm: float
    huffman: bool = True
    version: int = FORMAT_VERSION

    def __post_init__(self):
        self.log2_sizes = (int(self.log2_sizes[0]), int(self.log2_sizes[1]))
        self.frame = (int(self.frame[0]), int(self.frame[1]))
        self.roi = (int(self.roi[0]), int(self.roi[1]))
        self.wavelength_nm = _f32(self.wavelength_nm)
        self.pitch_um = _f32(self.pitch_um)
        self.distance_mm = _f32(self.distance_mm)
        optics = (self.wavelength_nm, self.pitch_um, self.distance_mm)
        if not all(math.isfinite(v) for v in optics) or min(optics[:2]) <= 0:
            raise CodingError("wavelength and pitch must be positive and all optics fields finite")
        for name in ("bottom", "top"):
            grid = getattr(self, name)
            if not isinstance(grid, IndexGrid):
                grid = IndexGrid(grid)
            if grid.data.ndim == 3 and grid.data.shape[0] == 1:
                grid = IndexGrid(grid.data[0])
            if grid.data.ndim != 2:
                raise ShapeError(f"{name} index grid must be h×w, got {tuple(grid.data.shape)}")
            setattr(self, name, grid)
        if any(not 0 <= n <= MAX_LOG2_SIZE for n in self.log2_sizes):
            raise CodingError(f"codebook size ids must lie in [0, {MAX_LOG2_SIZE}]")
        for grid, n in ((self.bottom, self.log2_sizes[0]), (self.top, self.log2_sizes[1])):
            if grid.cells and (int(grid.data.min()) < 0 or int(grid.data.max()) >= (1 << n)):
                raise CodingError(f"index outside codebook of size {1 << n}")
        dims = (*self.bottom.data.shape, *self.top.data.shape, *self.frame, *self.roi)
        if any(not 0 <= d <= 0xFFFF for d in dims):
            raise ShapeError("geometry does not fit 16-bit fields")
        if min(*self.frame, *self.roi) < 1:
            raise ShapeError(f"frame {self.frame} and roi {self.roi} must be at least 1×1")
        for v in (self.channel, self.profile_id, self.version):
            if not 0 <= v <= 0xFF:
                raise CodingError("header byte field out of range")

    # ── Accessors ─────────────────────────────────────────────────────────────

    @property
    def sizes(self) -> tuple[int, int]:
        return (1 << self.log2_sizes[0], 1 << self.log2_sizes[1])

    @property
    def size_id(self) -> int:
        """Registry size id: the bottom-level codebook size."""
        return self.sizes[0]

    @property
    def pixels(self) -> int:
        return self.frame[0] * self.frame[1]

    def optics(self, pad_factor: float) -> OpticsConfig:
        return OpticsConfig(
            wavelength=self.wavelength_nm * 1e-9,
            pixel_pitch=self.pitch_um * 1e-6,
            distance=self.distance_mm * 1e-3,
            pad_factor=pad_factor,
            roi=self.roi,
        )

    def header_fields(self) -> tuple:
        return (
            self.version, self.channel, self.profile_id, *self.log2_sizes,
            *self.bottom.data.shape, *self.top.data.shape, *self.frame, *self.roi,
            self.wavelength_nm, self.pitch_um, self.distance_mm, bool(self.huffman),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, HoloBitstream):
            return NotImplemented
        return (
            self.header_fields() == other.header_fields()
            and torch.equal(self.bottom.data, other.bottom.data)
            and torch.equal(self.top.data, other.top.data)
        )

    # ── Serialization ─────────────────────────────────────────────────────────

    def serialize(self) -> bytes:
        head = _HEADER.pack(
            STREAM_MAGIC, self.version, self.channel, self.profile_id, *self.log2_sizes,
            *self.bottom.data.shape, *self.top.data.shape, *self.frame, *self.roi,
            self.wavelength_nm, self.pitch_um, self.distance_mm,
            FLAG_HUFFMAN if self.huffman else 0,
        )
        parts = [head]
        for grid, n in ((self.bottom, self.log2_sizes[0]), (self.top, self.log2_sizes[1])):
            parts.append(_encode_level(grid, n, self.huffman))
        body = b"".join(parts)
        return body + _CRC.pack(crc32(body))

    @classmethod
    def parse(cls, buf: bytes) -> HoloBitstream:
        buf = bytes(buf)
        if len(buf) < _HEADER.size + _CRC.size:
            raise CorruptStreamError("stream shorter than its header", bit_offset=8 * len(buf))
        (stored,) = _CRC.unpack_from(buf, len(buf) - _CRC.size)
        if crc32(buf[: -_CRC.size]) != stored:
            raise ChecksumError("stream checksum mismatch", bit_offset=8 * (len(buf) - _CRC.size))
        fields = _HEADER.unpack_from(buf, 0)
        magic, version, channel, profile_id, lb, lt = fields[:6]
        bh, bw, th, tw, fh, fw, rh, rw = fields[6:14]
        wavelength, pitch, distance, flags = fields[14:]
        if magic != STREAM_MAGIC:
            raise CorruptStreamError("bad stream magic", bit_offset=0)
        if version != FORMAT_VERSION:
            raise CorruptStreamError(f"unsupported stream version {version}", bit_offset=32)
        if flags & ~FLAG_HUFFMAN:
            raise CorruptStreamError("unknown flag bits set", bit_offset=8 * (_HEADER.size - 1))
        if lb > MAX_LOG2_SIZE or lt > MAX_LOG2_SIZE:
            raise CorruptStreamError("codebook size id out of range", bit_offset=56)
        huffman = bool(flags & FLAG_HUFFMAN)
        end = len(buf) - _CRC.size
        offset = _HEADER.size
        bottom, offset = _decode_level(buf, offset, end, (bh, bw), lb, huffman)
        top, offset = _decode_level(buf, offset, end, (th, tw), lt, huffman)
        if offset != end:
            raise CorruptStreamError("trailing bytes after the last level", bit_offset=8 * offset)
        try:
            return cls(channel, profile_id, (lb, lt), bottom, top, (fh, fw), (rh, rw),
                       wavelength, pitch, distance, huffman, version)
        except (CodingError, ShapeError) as e:
            raise CorruptStreamError(f"structurally invalid stream: {e}") from e

    # ── Rate accounting ───────────────────────────────────────────────────────

    def bits(self) -> int:
        return 8 * len(self.serialize())

    def bpp(self, pixels: int | None = None) -> float:
        return bpp(self, pixels)

    def bpp_fixed(self) -> float:
        return bpp_fixed(self)


def _encode_level(grid: IndexGrid, log2_size: int, huffman: bool) -> bytes:
    if huffman and grid.cells:
        table = build_huffman(histogram(grid))
        data, nbits = encode_indices(grid, table)
        pairs = b"".join(_PAIR.pack(s, n) for s, n in table.lengths)
        return _SYMCOUNT.pack(len(table.lengths)) + pairs + _BITLEN.pack(nbits) + data
    data, nbits = encode_fixed(grid, log2_size)
    return _SYMCOUNT.pack(0) + _BITLEN.pack(nbits) + data


def _need(buf_end: int, offset: int, size: int) -> None:
    if offset + size > buf_end:
        raise CorruptStreamError("level payload truncated", bit_offset=8 * offset)


def _decode_level(buf: bytes, offset: int, end: int, shape: tuple[int, int], log2_size: int, huffman: bool):
    count = shape[0] * shape[1]
    if count > MAX_LEVEL_CELLS:
        raise CorruptStreamError(f"level grid of {count} cells exceeds the format limit", bit_offset=8 * offset)
    _need(end, offset, _SYMCOUNT.size)
    (n_symbols,) = _SYMCOUNT.unpack_from(buf, offset)
    offset += _SYMCOUNT.size
    _need(end, offset, n_symbols * _PAIR.size + _BITLEN.size)
    pairs = [_PAIR.unpack_from(buf, offset + i * _PAIR.size) for i in range(n_symbols)]
    offset += n_symbols * _PAIR.size
    (nbits,) = _BITLEN.unpack_from(buf, offset)
    offset += _BITLEN.size
    nbytes = (nbits + 7) // 8
    _need(end, offset, nbytes)
    data = buf[offset : offset + nbytes]
    start_bit = 8 * offset
    offset += nbytes
    if any(s >= (1 << log2_size) for s, _ in pairs):
        raise CorruptStreamError("symbol outside the codebook", bit_offset=start_bit)
    coded = huffman and count > 0
    if coded and count > nbits:
        raise CorruptStreamError("payload too short for its symbol count", bit_offset=start_bit)
    if coded and not pairs:
        raise CorruptStreamError("missing Huffman table", bit_offset=start_bit)
    if not coded and pairs:
        raise CorruptStreamError("unexpected Huffman table in fixed-length level", bit_offset=start_bit)
    try:
        if coded:
            grid = decode_indices(data, nbits, HuffmanTable(tuple(pairs)), count, shape)
        else:
            grid = decode_fixed(data, nbits, log2_size, count, shape)
    except CodingError as e:
        raise CorruptStreamError(f"invalid Huffman table: {e}", bit_offset=start_bit) from e
    except CorruptStreamError as e:
        # payload decoders report offsets relative to the payload start
        offset_bits = None if e.bit_offset is None else start_bit + e.bit_offset
        raise CorruptStreamError(e.reason, bit_offset=offset_bits) from e
    return grid, offset


# ── Rate ─────────────────────────────────────────────────────────────────────

def bpp(stream: HoloBitstream, pixels: int | None = None) -> float:
    """Serialized bits per reference pixel (default: the full frame)."""
    n = stream.pixels if pixels is None else pixels
    if n <= 0:
        raise DomainError("reference pixel count must be positive")
    return stream.bits() / n


def fixed_length_bpp(
    bottom_shape: tuple[int, int],
    top_shape: tuple[int, int],
    log2_sizes: tuple[int, int],
    frame: tuple[int, int],
) -> float:
    """Σ_levels cells·log2 K̃ / (H·W), computed exactly."""
    pixels = frame[0] * frame[1]
    if pixels <= 0:
        raise DomainError("reference pixel count must be positive")
    bits = bottom_shape[0] * bottom_shape[1] * log2_sizes[0] + top_shape[0] * top_shape[1] * log2_sizes[1]
    return float(Fraction(bits, pixels))


def bpp_fixed(stream: HoloBitstream) -> float:
    return fixed_length_bpp(tuple(stream.bottom.data.shape), tuple(stream.top.data.shape),
                            stream.log2_sizes, stream.frame)


# ── Multi-channel container ──────────────────────────────────────────────────

def pack_multichannel(streams: dict[int, bytes]) -> bytes:
    """Concatenate per-channel streams under a table of (channel, offset, length)."""
    if not streams or len(streams) > 0xFF:
        raise CodingError("a multi-channel file holds between 1 and 255 streams")
    channels = sorted(streams)
    head = _MULTI_HEAD.pack(MULTI_MAGIC, FORMAT_VERSION, len(channels))
    offset = len(head) + len(channels) * _MULTI_ENTRY.size
    entries = []
    for ch in channels:
        entries.append(_MULTI_ENTRY.pack(ch, offset, len(streams[ch])))
        offset += len(streams[ch])
    body = head + b"".join(entries) + b"".join(streams[ch] for ch in channels)
    return body + _CRC.pack(crc32(body))


def unpack_multichannel(buf: bytes) -> dict[int, bytes]:
    buf = bytes(buf)
    if len(buf) < _MULTI_HEAD.size + _CRC.size:
        raise CorruptStreamError("multi-channel file truncated", bit_offset=8 * len(buf))
    (stored,) = _CRC.unpack_from(buf, len(buf) - _CRC.size)
    if crc32(buf[: -_CRC.size]) != stored:
        raise ChecksumError("multi-channel checksum mismatch", bit_offset=8 * (len(buf) - _CRC.size))
    magic, version, n = _MULTI_HEAD.unpack_from(buf, 0)
    if magic != MULTI_MAGIC or version != FORMAT_VERSION:
        raise CorruptStreamError("bad multi-channel header", bit_offset=0)
    end = len(buf) - _CRC.size
    out: dict[int, bytes] = {}
    for i in range(n):
        pos = _MULTI_HEAD.size + i * _MULTI_ENTRY.size
        _need(end, pos, _MULTI_ENTRY.size)
        ch, offset, length = _MULTI_ENTRY.unpack_from(buf, pos)
        if offset + length > end or ch in out:
            raise CorruptStreamError(f"invalid entry for channel {ch}", bit_offset=8 * pos)
        out[ch] = buf[offset : offset + length]
    return out


def is_multichannel(buf: bytes) -> bool:
    return bytes(buf[:4]) == MULTI_MAGIC
