"""Nearest-codevector quantization, EMA codebook learning and the VQ loss terms."""
from __future__ import annotations

import logging

import numpy as np
import torch

from holocodec.config import COMMITMENT_BETA, DEAD_CODE_THRESHOLD, QUANTIZE_CHUNK_ELEMENTS, RESEED_RESERVOIR
from holocodec.errors import CorruptStreamError, ShapeError
from holocodec.vq.codebook import Codebook, IndexGrid, LatentGrid

logger = logging.getLogger("holocodec")


def _tensor(x) -> torch.Tensor:
    return x.data if isinstance(x, (LatentGrid, IndexGrid)) else x


def nearest_codevectors(latents: torch.Tensor, vectors: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Exhaustive L2 scan over (..., D) latents; ties go to the lowest index.

    The gathered vectors keep their autograd link to *vectors*.
    """
    d = latents.shape[-1]
    if vectors.ndim != 2 or vectors.shape[1] != d:
        raise ShapeError(f"latent dim {d} does not match codebook {tuple(vectors.shape)}")
    flat = latents.detach().reshape(-1, d)
    book = vectors.detach().to(flat.dtype)
    rows = max(1, QUANTIZE_CHUNK_ELEMENTS // (book.shape[0] * d))
    parts = []
    for start in range(0, flat.shape[0], rows):
        chunk = flat[start : start + rows]
        dist = ((chunk[:, None, :] - book[None, :, :]) ** 2).sum(-1)
        parts.append(torch.argmin(dist, dim=1))
    indices = torch.cat(parts) if parts else torch.zeros(0, dtype=torch.long)
    quantized = vectors.index_select(0, indices).to(latents.dtype)
    return indices.reshape(latents.shape[:-1]), quantized.reshape(latents.shape)


def quantize(latents: LatentGrid, book: Codebook) -> tuple[IndexGrid, LatentGrid]:
    z = _tensor(latents)
    if z.shape[-1] != book.dim:
        raise ShapeError(f"latent dim {z.shape[-1]} does not match codebook dim {book.dim}")
    indices, quantized = nearest_codevectors(z, book.vectors)
    return IndexGrid(indices), LatentGrid(quantized)


def ema_update(book: Codebook, latents: LatentGrid, indices: IndexGrid) -> Codebook:
    """One EMA step; codevectors with no assignment in this batch keep their value."""
    z = _tensor(latents).detach()
    idx = _tensor(indices).reshape(-1).to(torch.long)
    if z.shape[-1] != book.dim:
        raise ShapeError(f"latent dim {z.shape[-1]} does not match codebook dim {book.dim}")
    z = z.reshape(-1, book.dim).to(book.vectors.dtype)
    if z.shape[0] != idx.shape[0]:
        raise ShapeError(f"{idx.shape[0]} indices for {z.shape[0]} latent vectors")
    if idx.numel() and (int(idx.min()) < 0 or int(idx.max()) >= book.size):
        raise ShapeError("index outside the codebook")

    gamma = book.decay
    dtype = book.vectors.dtype
    hits = torch.bincount(idx, minlength=book.size).to(dtype)
    batch_sums = torch.zeros_like(book.ema_sums).index_add_(0, idx, z)

    counts = gamma * book.ema_counts + (1 - gamma) * hits
    sums = gamma * book.ema_sums + (1 - gamma) * batch_sums
    total = counts.sum()
    smoothed = (counts + book.laplace_eps) / (total + book.size * book.laplace_eps) * total
    vectors = book.vectors.detach()
    updated = torch.where((hits > 0)[:, None], sums / smoothed[:, None], vectors)
    return Codebook(updated, counts, sums, decay=book.decay, laplace_eps=book.laplace_eps, channel=book.channel)


class LatentReservoir:
    """Uniform sample of at most *capacity* latent rows out of everything passed to `add`."""

    def __init__(self, dim: int, generator: torch.Generator, capacity: int = RESEED_RESERVOIR):
        if capacity < 1:
            raise ShapeError("reservoir capacity must be >= 1")
        self.dim = dim
        self.capacity = capacity
        self.generator = generator
        self.seen = 0
        self._rows: torch.Tensor | None = None
        self._filled = 0

    def add(self, latents) -> None:
        flat = _tensor(latents).detach().reshape(-1, self.dim)
        if self._rows is None:
            self._rows = torch.empty(self.capacity, self.dim, dtype=flat.dtype)
        take = min(self.capacity - self._filled, flat.shape[0])
        self._rows[self._filled : self._filled + take] = flat[:take]
        self._filled += take
        rest = flat[take:]
        if rest.shape[0]:
            positions = self.seen + take + torch.arange(rest.shape[0], dtype=torch.float64)
            draws = (torch.rand(rest.shape[0], generator=self.generator, dtype=torch.float64) * (positions + 1)).long()
            for i in torch.nonzero(draws < self.capacity).flatten().tolist():
                self._rows[int(draws[i])] = rest[i]
        self.seen += flat.shape[0]

    @property
    def rows(self) -> torch.Tensor:
        if self._rows is None:
            return torch.empty(0, self.dim)
        return self._rows[: self._filled]

    def __len__(self) -> int:
        return self._filled


def reseed_dead_codevectors(
    book: Codebook,
    latents: torch.Tensor,
    generator: torch.Generator,
    threshold: float = DEAD_CODE_THRESHOLD,
) -> tuple[Codebook, int]:
    """Replace codevectors whose smoothed count fell below *threshold* with random encoder outputs."""
    dead = book.smoothed_counts() < threshold
    n_dead = int(dead.sum())
    flat = latents.detach().reshape(-1, book.dim).to(book.vectors.dtype)
    if n_dead == 0 or flat.shape[0] == 0:
        return book, 0
    rows = torch.randint(flat.shape[0], (n_dead,), generator=generator)
    vectors = book.vectors.detach().clone()
    counts = book.ema_counts.clone()
    sums = book.ema_sums.clone()
    vectors[dead] = flat[rows]
    counts[dead] = 1.0
    sums[dead] = flat[rows]
    return Codebook(vectors, counts, sums, decay=book.decay, laplace_eps=book.laplace_eps, channel=book.channel), n_dead


def vq_losses(encoder_out, quantized, beta: float = COMMITMENT_BETA) -> tuple[torch.Tensor, torch.Tensor]:
    """(codebook loss, commitment loss) with stop-gradients placed as in the VQ objective.

    Squared norms are summed over the vector dimension and averaged over vectors.
    """
    z, q = _tensor(encoder_out), _tensor(quantized)
    if z.shape != q.shape:
        raise ShapeError(f"shape mismatch {tuple(z.shape)} vs {tuple(q.shape)}")
    codebook_loss = ((z.detach() - q) ** 2).sum(-1).mean()
    commitment_loss = beta * ((q.detach() - z) ** 2).sum(-1).mean()
    return codebook_loss, commitment_loss


def straight_through(encoder_out, quantized) -> torch.Tensor:
    """Forward value of *quantized*, identity Jacobian towards *encoder_out*."""
    z, q = _tensor(encoder_out), _tensor(quantized)
    if z.shape != q.shape:
        raise ShapeError(f"shape mismatch {tuple(z.shape)} vs {tuple(q.shape)}")
    return q + (z - z.detach())


def utilization(streams, size: int) -> float:
    """Fraction of the *size* codevectors selected at least once across *streams*."""
    if size < 1:
        raise ShapeError("codebook size must be >= 1")
    seen: set[int] = set()
    for s in streams:
        data = _tensor(s)
        arr = (data.cpu().numpy() if isinstance(data, torch.Tensor) else np.asarray(data)).reshape(-1)
        if arr.size == 0:
            continue
        if int(arr.min()) < 0 or int(arr.max()) >= size:
            raise CorruptStreamError(f"index outside codebook of size {size}")
        seen.update(np.unique(arr).tolist())
    return len(seen) / size
