"""Two-stage training: codec + EMA codebooks first, then the codebook adapter jointly with the codec."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import torch

from holocodec.adapt.adapter import AdapterPair, train_adapter
from holocodec.codec.losses import LossWeights, reconstruction_loss
from holocodec.codec.model import CodecProfile, HoloCodec, QuantizedLevels
from holocodec.config import (
    BATCH_SIZE,
    COMMITMENT_BETA,
    GRAD_CLIP_NORM,
    LEARNING_RATE,
    STAGE1_EPOCHS,
    STAGE2_EPOCHS,
)
from holocodec.data import Batch, HologramSample, collate, iter_batches
from holocodec.errors import DomainError, InvalidConfigError, NumericFailureError
from holocodec.optics.propagation import OpticsConfig
from holocodec.utils import seed_everything
from holocodec.vq.codebook import Codebook
from holocodec.vq.quantizer import LatentReservoir, ema_update, reseed_dead_codevectors, utilization, vq_losses

logger = logging.getLogger("holocodec")


@dataclass(frozen=True)
class TrainSchedule:
    stage1_epochs: int = STAGE1_EPOCHS
    stage2_epochs: int = STAGE2_EPOCHS
    learning_rate: float = LEARNING_RATE
    batch_size: int = BATCH_SIZE
    seed: int = 0
    beta: float = COMMITMENT_BETA
    brightness_match: bool = True
    stage2_sizes: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.stage1_epochs < 0 or self.stage2_epochs < 0:
            raise InvalidConfigError("epoch counts must be non-negative")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise InvalidConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.batch_size < 1:
            raise InvalidConfigError("batch_size must be >= 1")
        if self.beta < 0:
            raise InvalidConfigError("beta must be non-negative")

    def to_dict(self) -> dict:
        return {
            "stage1_epochs": self.stage1_epochs,
            "stage2_epochs": self.stage2_epochs,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "beta": self.beta,
            "brightness_match": self.brightness_match,
            "stage2_sizes": list(self.stage2_sizes) if self.stage2_sizes else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> TrainSchedule:
        d = dict(data)
        if d.get("stage2_sizes"):
            d["stage2_sizes"] = tuple(d["stage2_sizes"])
        return cls(**d)


@dataclass
class TrainResult:
    model: HoloCodec
    books: tuple[Codebook, Codebook]
    adapters: AdapterPair | None = None
    stage1_trace: list[float] = field(default_factory=list)
    stage2_trace: list[float] = field(default_factory=list)
    utilization_trace: list[tuple[float, float]] = field(default_factory=list)
    stage1_epochs_done: int = 0


# ── Objective ────────────────────────────────────────────────────────────────

def framework_loss(
    model: HoloCodec,
    batch: Batch,
    books: tuple[Codebook, Codebook],
    optics: OpticsConfig,
    weights: LossWeights,
    beta: float = COMMITMENT_BETA,
    bypass: bool = False,
    brightness_match: bool = True,
) -> tuple[torch.Tensor, dict]:
    """VQ loss of both levels plus the reconstruction loss of the decoded phase.

    With EMA codebooks the codebook term carries no gradient; with adapted codebooks it
    trains the adapter.
    """
    bottom, top = model.encode(batch.inputs)
    levels: QuantizedLevels = model.hierarchical_quantize(bottom, top, books, bypass=bypass)
    phase = model.decode(levels.fused)
    recon = reconstruction_loss(phase, batch.targets, optics, weights, brightness_match=brightness_match)
    cb_top, cm_top = vq_losses(levels.top_latent, levels.top_quantized, beta)
    cb_bottom, cm_bottom = vq_losses(levels.bottom_latent, levels.bottom_quantized, beta)
    latent = cb_top + cm_top + cb_bottom + cm_bottom
    stats = {
        "reconstruction": float(recon.detach()),
        "codebook": float((cb_top + cb_bottom).detach()),
        "commitment": float((cm_top + cm_bottom).detach()),
        "levels": levels,
    }
    return latent + recon, stats


def init_books(
    model: HoloCodec,
    samples: list[HologramSample],
    profile: CodecProfile,
    generator: torch.Generator,
    batch_size: int = BATCH_SIZE,
) -> tuple[Codebook, Codebook]:
    """Seed both codebooks with encoder outputs of the first batch."""
    batch = collate(samples[:batch_size], model.dtype)
    k_bottom, k_top = profile.codebook_sizes
    with torch.no_grad():
        bottom, top = model.encode(batch.inputs)
        top_book = Codebook.from_latents(top.permute(0, 2, 3, 1), k_top, generator)
        provisional = Codebook.from_latents(bottom.permute(0, 2, 3, 1), k_bottom, generator)
        levels = model.hierarchical_quantize(bottom, top, (provisional, top_book))
        bottom_book = Codebook.from_latents(levels.bottom_latent, k_bottom, generator)
    return bottom_book, top_book


def _check_finite(loss: torch.Tensor, step: int) -> None:
    if not bool(torch.isfinite(loss)):
        raise NumericFailureError("training loss became non-finite", iteration=step)


# ── Stage 2 context ──────────────────────────────────────────────────────────

@dataclass
class AdapterStage:
    """Codec side of adapter training."""

    model: HoloCodec
    samples: list[HologramSample]
    schedule: TrainSchedule
    optics: OpticsConfig
    weights: LossWeights
    source_books: tuple[Codebook, Codebook]
    generator: torch.Generator
    stage1_complete: bool = True

    @property
    def learning_rate(self) -> float:
        return self.schedule.learning_rate

    def batches(self, epoch: int):
        return iter_batches(self.samples, self.schedule.batch_size, self.generator, self.model.dtype)

    def framework_loss(self, batch: Batch, books: tuple[Codebook, Codebook]):
        return framework_loss(self.model, batch, books, self.optics, self.weights, self.schedule.beta,
                              brightness_match=self.schedule.brightness_match)

    def codec_parameters(self):
        return self.model.parameters()


# ── Driver ───────────────────────────────────────────────────────────────────

def train_stage1(
    model: HoloCodec,
    books: tuple[Codebook, Codebook],
    samples: list[HologramSample],
    schedule: TrainSchedule,
    optics: OpticsConfig,
    weights: LossWeights,
    generator: torch.Generator,
    result: TrainResult,
) -> tuple[Codebook, Codebook]:
    optimizer = torch.optim.Adam(model.parameters(), lr=schedule.learning_rate)
    step = 0
    for epoch in range(schedule.stage1_epochs):
        model.train()
        losses, bottom_streams, top_streams = [], [], []
        reservoirs = (LatentReservoir(books[0].dim, generator), LatentReservoir(books[1].dim, generator))
        for batch in iter_batches(samples, schedule.batch_size, generator, model.dtype):
            loss, stats = framework_loss(model, batch, books, optics, weights, schedule.beta,
                                         brightness_match=schedule.brightness_match)
            _check_finite(loss, step)
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), GRAD_CLIP_NORM)
            optimizer.step()

            levels = stats["levels"]
            books = (
                ema_update(books[0], levels.bottom_latent, levels.bottom_indices),
                ema_update(books[1], levels.top_latent, levels.top_indices),
            )
            reservoirs[0].add(levels.bottom_latent)
            reservoirs[1].add(levels.top_latent)
            bottom_streams.append(levels.bottom_indices)
            top_streams.append(levels.top_indices)
            losses.append(float(loss.detach()))
            step += 1

        use = (utilization(bottom_streams, books[0].size), utilization(top_streams, books[1].size))
        bottom_book, n_bottom = reseed_dead_codevectors(books[0], reservoirs[0].rows, generator)
        top_book, n_top = reseed_dead_codevectors(books[1], reservoirs[1].rows, generator)
        books = (bottom_book, top_book)

        mean = sum(losses) / len(losses)
        result.stage1_trace.append(mean)
        result.utilization_trace.append(use)
        result.stage1_epochs_done = epoch + 1
        logger.info(
            "Stage 1 epoch %d/%d: loss %.6f, utilization bottom %.2f top %.2f, reseeded %d/%d",
            epoch + 1, schedule.stage1_epochs, mean, use[0], use[1], n_bottom, n_top,
        )
    return books


def train(
    samples: list[HologramSample],
    profile: CodecProfile,
    schedule: TrainSchedule,
    optics: OpticsConfig,
    weights: LossWeights,
    model: HoloCodec | None = None,
    books: tuple[Codebook, Codebook] | None = None,
    adapters: AdapterPair | None = None,
    dtype: torch.dtype = torch.float32,
    adapter_kwargs: dict | None = None,
) -> TrainResult:
    """Stage 1 for W epochs with EMA codebooks, then stage 2 with adapted codebooks."""
    if not samples:
        raise DomainError("empty dataset")
    generator = seed_everything(schedule.seed)
    if model is None:
        model = HoloCodec(profile).to(dtype)
    if books is None:
        books = init_books(model, samples, profile, generator, schedule.batch_size)
    result = TrainResult(model=model, books=books, adapters=adapters)

    books = train_stage1(model, books, samples, schedule, optics, weights, generator, result)
    result.books = tuple(b.detached() for b in books)

    if schedule.stage2_epochs > 0:
        result.adapters = train_stage2(
            model, result.books, samples, schedule, optics, weights, adapters, generator, adapter_kwargs=adapter_kwargs
        )
        result.stage2_trace = list(result.adapters.loss_trace)
    model.eval()
    return result


def train_stage2(
    model: HoloCodec,
    books: tuple[Codebook, Codebook],
    samples: list[HologramSample],
    schedule: TrainSchedule,
    optics: OpticsConfig,
    weights: LossWeights,
    adapters: AdapterPair | None = None,
    generator: torch.Generator | None = None,
    stage1_complete: bool = True,
    adapter_kwargs: dict | None = None,
) -> AdapterPair:
    """Adapter training over sizes drawn from the schedule (default: the whole adapter range)."""
    if not samples:
        raise DomainError("empty dataset")
    if generator is None:
        generator = seed_everything(schedule.seed)
    if adapters is None:
        adapters = AdapterPair.for_books(*books, **(adapter_kwargs or {})).to(model.dtype)
    sizes = list(schedule.stage2_sizes or range(adapters.bottom.k_min, adapters.bottom.k_max + 1))
    stage = AdapterStage(model, samples, schedule, optics, weights, books, generator, stage1_complete)
    model.train()
    train_adapter(adapters, stage, sizes, schedule.stage2_epochs)
    model.eval()
    return adapters
