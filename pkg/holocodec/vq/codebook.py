"""Codebook type, latent/index grids and the RVQC codebook file format.

RVQC record (all little-endian):
    [4B] magic "RVQC"  [1B] version  [4B] K  [2B] D  [1B] channel id
    [K*D*4B] float32 codevectors, row-major
    [4B] CRC-32 over header and codevectors
A registry file holds two records back to back: bottom level, then top level.
"""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch

from holocodec.config import CODEBOOK_MAGIC, DEFAULT_CHANNEL, EMA_DECAY, FORMAT_VERSION, LAPLACE_EPS
from holocodec.errors import ChecksumError, CorruptStreamError, DomainError, ShapeError
from holocodec.utils import as_tensor, crc32

logger = logging.getLogger("holocodec")

_HEADER = struct.Struct("<4sBIHB")
_CRC = struct.Struct("<I")


# ── Types ────────────────────────────────────────────────────────────────────

@dataclass
class Codebook:
    """K×D codevectors plus EMA accumulators."""

    vectors: torch.Tensor
    ema_counts: torch.Tensor
    ema_sums: torch.Tensor
    decay: float = EMA_DECAY
    laplace_eps: float = LAPLACE_EPS
    channel: int = DEFAULT_CHANNEL

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[0] < 1 or self.vectors.shape[1] < 1:
            raise ShapeError(f"codebook must be K×D with K, D >= 1, got {tuple(self.vectors.shape)}")
        k, d = self.vectors.shape
        if tuple(self.ema_counts.shape) != (k,) or tuple(self.ema_sums.shape) != (k, d):
            raise ShapeError("EMA accumulators do not match the codebook shape")
        if not bool(torch.isfinite(self.vectors.detach()).all()):
            raise DomainError("codebook vectors must be finite")
        if not bool(torch.isfinite(self.ema_counts).all()) or bool((self.ema_counts < 0).any()):
            raise DomainError("EMA counts must be finite and non-negative")
        if not 0 <= self.decay < 1:
            raise DomainError(f"decay must lie in [0, 1), got {self.decay}")
        if not self.laplace_eps > 0:
            raise DomainError("laplace_eps must be positive")

    @classmethod
    def from_vectors(cls, vectors, counts=None, **kwargs) -> Codebook:
        """Codebook whose accumulators reproduce *vectors* exactly (count 1 each)."""
        v = as_tensor(vectors)
        c = torch.ones(v.shape[0], dtype=v.dtype) if counts is None else as_tensor(counts).to(v.dtype).clone()
        return cls(vectors=v, ema_counts=c, ema_sums=v.detach() * c[:, None], **kwargs)

    @classmethod
    def from_latents(cls, latents: torch.Tensor, size: int, generator: torch.Generator, **kwargs) -> Codebook:
        """Sample *size* codevectors from a batch of encoder outputs (rows of *latents*)."""
        flat = latents.detach().reshape(-1, latents.shape[-1])
        replace_rows = flat.shape[0] < size
        if replace_rows:
            rows = torch.randint(flat.shape[0], (size,), generator=generator)
        else:
            rows = torch.randperm(flat.shape[0], generator=generator)[:size]
        return cls.from_vectors(flat[rows].clone(), **kwargs)

    @property
    def size(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def smoothed_counts(self) -> torch.Tensor:
        total = self.ema_counts.sum()
        k = self.size
        return (self.ema_counts + self.laplace_eps) / (total + k * self.laplace_eps) * total

    def detached(self) -> Codebook:
        return replace(self, vectors=self.vectors.detach().clone(),
                       ema_counts=self.ema_counts.clone(), ema_sums=self.ema_sums.clone())

    def to(self, dtype: torch.dtype) -> Codebook:
        return replace(self, vectors=self.vectors.to(dtype), ema_counts=self.ema_counts.to(dtype),
                       ema_sums=self.ema_sums.to(dtype))

    def state(self) -> dict:
        return {
            "vectors": self.vectors.detach().clone(),
            "ema_counts": self.ema_counts.clone(),
            "ema_sums": self.ema_sums.clone(),
            "decay": self.decay,
            "laplace_eps": self.laplace_eps,
            "channel": self.channel,
        }

    @classmethod
    def from_state(cls, state: dict) -> Codebook:
        return cls(**state)


@dataclass
class LatentGrid:
    """(..., h, w, D) continuous vectors."""

    data: torch.Tensor

    def __post_init__(self):
        self.data = as_tensor(self.data)
        if self.data.ndim < 3:
            raise ShapeError(f"latent grid must be (..., h, w, D), got {tuple(self.data.shape)}")
        if not bool(torch.isfinite(self.data.detach()).all()):
            raise DomainError("latent grid must be finite")

    @property
    def dim(self) -> int:
        return int(self.data.shape[-1])


@dataclass
class IndexGrid:
    """(..., h, w) codevector indices."""

    data: torch.Tensor

    def __post_init__(self):
        self.data = as_tensor(self.data).to(torch.long)

    @property
    def cells(self) -> int:
        return int(self.data.numel())


# ── File format ──────────────────────────────────────────────────────────────

def encode_codebook(book: Codebook, channel: int | None = None) -> bytes:
    k, d = book.size, book.dim
    if k >= 2**32 or d >= 2**16:
        raise ShapeError(f"codebook {k}x{d} exceeds the file format limits")
    ch = book.channel if channel is None else channel
    head = _HEADER.pack(CODEBOOK_MAGIC, FORMAT_VERSION, k, d, ch)
    body = book.vectors.detach().cpu().numpy().astype("<f4").tobytes()
    return head + body + _CRC.pack(crc32(head + body))


def decode_codebook(buf: bytes, offset: int = 0) -> tuple[Codebook, int]:
    """Parse one record starting at *offset*; return the codebook and the next offset."""
    if len(buf) - offset < _HEADER.size + _CRC.size:
        raise CorruptStreamError("codebook record truncated", bit_offset=8 * len(buf))
    magic, version, k, d, channel = _HEADER.unpack_from(buf, offset)
    if magic != CODEBOOK_MAGIC:
        raise CorruptStreamError("bad codebook magic", bit_offset=8 * offset)
    if version != FORMAT_VERSION:
        raise CorruptStreamError(f"unsupported codebook version {version}", bit_offset=8 * (offset + 4))
    end = offset + _HEADER.size + 4 * k * d
    if k < 1 or d < 1 or end + _CRC.size > len(buf):
        raise CorruptStreamError("codebook record truncated", bit_offset=8 * len(buf))
    (stored,) = _CRC.unpack_from(buf, end)
    if crc32(bytes(buf[offset:end])) != stored:
        raise ChecksumError("codebook checksum mismatch", bit_offset=8 * end)
    vectors = np.frombuffer(bytes(buf[offset + _HEADER.size : end]), dtype="<f4").reshape(k, d)
    if not np.isfinite(vectors).all():
        raise CorruptStreamError("codebook contains non-finite values")
    book = Codebook.from_vectors(torch.from_numpy(vectors.astype(np.float32)), channel=channel)
    return book, end + _CRC.size


def save_codebooks(path: str | Path, books: list[Codebook], channel: int | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(encode_codebook(b, channel) for b in books))
    logger.debug("Wrote %d codebook record(s) to %s", len(books), path)
    return path


def load_codebooks(path: str | Path) -> list[Codebook]:
    buf = Path(path).read_bytes()
    books, offset = [], 0
    while offset < len(buf):
        book, offset = decode_codebook(buf, offset)
        books.append(book)
    if not books:
        raise CorruptStreamError(f"no codebook records in {path}")
    return books
