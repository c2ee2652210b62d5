"""Sequence-to-sequence codebook adapter: resizes a K-entry codebook to K̃ entries.

The encoder LSTM reads the source codevectors, ordered by descending EMA count, into a
summary state. The decoder LSTM then runs for exactly K̃ steps; step t is anchored on the
t-th codevector of that ordering and emits anchor + learned correction. The correction
head starts at zero, so an untrained adapter returns the K̃ most used codevectors.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Iterable, Protocol

import torch
from torch import nn

from holocodec.config import ADAPTER_HIDDEN, ADAPTER_MIN_FRACTION, GRAD_CLIP_NORM
from holocodec.errors import NumericFailureError, RangeError, SequencingError, ShapeError
from holocodec.utils import is_power_of_two
from holocodec.vq.codebook import Codebook, save_codebooks

logger = logging.getLogger("holocodec")


class AdapterModel(nn.Module):
    def __init__(
        self,
        dim: int,
        k_min: int,
        k_max: int,
        encoder_hidden: int = ADAPTER_HIDDEN,
        decoder_hidden: int = ADAPTER_HIDDEN,
    ):
        super().__init__()
        if k_min < 1 or k_max < k_min:
            raise RangeError(f"invalid adapter range [{k_min}, {k_max}]")
        self.dim = dim
        self.k_min = k_min
        self.k_max = k_max
        self.encoder_hidden = encoder_hidden
        self.decoder_hidden = decoder_hidden
        self.encoder = nn.LSTM(dim, encoder_hidden, batch_first=True)
        self.bridge_h = nn.Linear(encoder_hidden, decoder_hidden)
        self.bridge_c = nn.Linear(encoder_hidden, decoder_hidden)
        self.decoder = nn.LSTMCell(2 * dim + 1, decoder_hidden)
        self.head = nn.Linear(decoder_hidden, dim)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)
        self.loss_trace: list[float] = []

    @classmethod
    def for_codebook(cls, size: int, dim: int, **kwargs) -> AdapterModel:
        """Adapter with the default desk range [K/8, K]."""
        return cls(dim, max(1, size // ADAPTER_MIN_FRACTION), size, **kwargs)

    def config(self) -> dict:
        return {
            "dim": self.dim,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "encoder_hidden": self.encoder_hidden,
            "decoder_hidden": self.decoder_hidden,
        }

    def check_size(self, target: int) -> None:
        if not self.k_min <= target <= self.k_max:
            raise RangeError(f"target size {target} outside supported range [{self.k_min}, {self.k_max}]")

    def forward(self, ordered: torch.Tensor, target: int) -> torch.Tensor:
        """(K, D) ordered source codevectors -> (target, D) codevectors."""
        dtype = next(self.parameters()).dtype
        seq = ordered.to(dtype)
        _, (h, c) = self.encoder(seq[None])
        h_dec = torch.tanh(self.bridge_h(h[0]))
        c_dec = self.bridge_c(c[0])
        prev = torch.zeros(1, self.dim, dtype=dtype)
        outputs = []
        k = seq.shape[0]
        for t in range(target):
            anchor = seq[t % k][None]
            position = torch.full((1, 1), t / target, dtype=dtype)
            h_dec, c_dec = self.decoder(torch.cat([anchor, prev, position], dim=1), (h_dec, c_dec))
            prev = anchor + self.head(h_dec)
            outputs.append(prev)
        return torch.cat(outputs, dim=0)

    def generate(self, book: Codebook, target: int) -> Codebook:
        """Differentiable adaptation; gradients reach the adapter parameters."""
        self.check_size(target)
        if book.dim != self.dim:
            raise ShapeError(f"codebook dim {book.dim} does not match adapter dim {self.dim}")
        order = torch.argsort(-book.ema_counts.detach(), stable=True)
        ordered = book.vectors.detach()[order]
        vectors = self(ordered, target)
        counts = book.ema_counts.detach()[order][torch.arange(target) % book.size]
        return Codebook(vectors, counts.to(vectors.dtype).clone(), vectors.detach() * counts[:, None].to(vectors.dtype),
                        decay=book.decay, laplace_eps=book.laplace_eps, channel=book.channel)


class AdapterPair(nn.Module):
    """One adapter per codebook level."""

    def __init__(self, bottom: AdapterModel, top: AdapterModel):
        super().__init__()
        self.bottom = bottom
        self.top = top
        self.loss_trace: list[float] = []

    @classmethod
    def for_books(cls, bottom: Codebook, top: Codebook, **kwargs) -> AdapterPair:
        return cls(AdapterModel.for_codebook(bottom.size, bottom.dim, **kwargs),
                   AdapterModel.for_codebook(top.size, top.dim, **kwargs))

    def top_size(self, bottom_size: int) -> int:
        """Top-level size paired with a bottom-level size id."""
        return max(1, bottom_size * self.top.k_max // self.bottom.k_max)

    def generate(self, books: tuple[Codebook, Codebook], bottom_size: int) -> tuple[Codebook, Codebook]:
        return (self.bottom.generate(books[0], bottom_size), self.top.generate(books[1], self.top_size(bottom_size)))


def adapt(book: Codebook, target: int, model: AdapterModel) -> Codebook:
    """Deterministic inference-time resize of *book* to *target* entries; *book* is not modified."""
    with torch.no_grad():
        out = model.generate(book, target)
    return Codebook.from_vectors(out.vectors.detach().to(book.vectors.dtype), counts=out.ema_counts,
                                 decay=book.decay, laplace_eps=book.laplace_eps, channel=book.channel)


def supported_sizes(model: AdapterModel) -> list[int]:
    """Inference sizes: powers of two inside the adapter range."""
    return [k for k in range(model.k_min, model.k_max + 1) if is_power_of_two(k)]


# ── Training (second stage) ──────────────────────────────────────────────────

class CodecContext(Protocol):
    """What train_adapter needs from the codec side."""

    stage1_complete: bool
    source_books: tuple[Codebook, Codebook]
    generator: torch.Generator
    learning_rate: float

    def batches(self, epoch: int) -> Iterable[Any]: ...

    def framework_loss(self, batch: Any, books: tuple[Codebook, Codebook]) -> tuple[torch.Tensor, dict]: ...

    def codec_parameters(self) -> Iterable[nn.Parameter]: ...


def train_adapter(model: AdapterPair, context: CodecContext, sizes: list[int], epochs: int) -> AdapterPair:
    """Optimise the adapted-codebook objective over randomly drawn bottom-level sizes."""
    if not context.stage1_complete:
        raise SequencingError("adapter training requires a completed first stage")
    if epochs <= 0:
        return model
    if not sizes:
        raise RangeError("no codebook sizes to train on")

    params = list(model.parameters()) + list(context.codec_parameters())
    optimizer = torch.optim.Adam(params, lr=context.learning_rate)
    source = tuple(b.detached() for b in context.source_books)
    step = 0
    for epoch in range(epochs):
        losses = []
        for batch in context.batches(epoch):
            k = int(sizes[int(torch.randint(len(sizes), (1,), generator=context.generator))])
            model.bottom.check_size(k)
            model.top.check_size(model.top_size(k))
            books = model.generate(source, k)
            loss, _ = context.framework_loss(batch, books)
            if not bool(torch.isfinite(loss)):
                raise NumericFailureError("adapter training loss became non-finite", iteration=step)
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(params, GRAD_CLIP_NORM)
            optimizer.step()
            losses.append(float(loss))
            step += 1
        mean = sum(losses) / max(1, len(losses))
        model.loss_trace.append(mean)
        logger.info("Adapter epoch %d/%d: loss %.6f", epoch + 1, epochs, mean)
    return model


def export_books(
    model: AdapterPair,
    books: tuple[Codebook, Codebook],
    channel: int,
    out_dir: str | Path,
) -> list[Path]:
    """Write books/<channel>/<K>.rvqc for every supported power-of-two size."""
    paths = []
    for k in supported_sizes(model.bottom):
        bottom = adapt(books[0], k, model.bottom)
        top = adapt(books[1], model.top_size(k), model.top)
        path = Path(out_dir) / str(channel) / f"{k}.rvqc"
        paths.append(save_codebooks(path, [bottom, top], channel=channel))
    logger.info("Exported %d codebook pair(s) for channel %d to %s", len(paths), channel, out_dir)
    return paths
