"""Hierarchical VQ encoder/decoder operating on complex holograms.

Inputs are three real channels (A_h, P_h, A_t): hologram amplitude, hologram phase
and the target amplitude. The top latent is quantized first, decoded back to the
bottom resolution and concatenated with the bottom latent before the bottom level is
quantized. Both quantized levels are fused for the phase decoder.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace

import torch
from torch import nn

from holocodec.config import DEFAULT_PROFILE, PROFILES
from holocodec.errors import InvalidConfigError, ShapeError
from holocodec.optics.propagation import AmplitudeMap, ComplexField, PhaseMap
from holocodec.utils import is_power_of_two, wrap_phase
from holocodec.vq.codebook import Codebook, IndexGrid, LatentGrid
from holocodec.vq.quantizer import nearest_codevectors, straight_through

logger = logging.getLogger("holocodec")

IN_CHANNELS = 3


@dataclass(frozen=True)
class CodecProfile:
    name: str = DEFAULT_PROFILE
    factors: tuple[int, int] = (4, 8)
    residual_blocks: int = 2
    residual_channels: int = 32
    latent_dim: int = 32
    deformable_conv: bool = False
    codebook_sizes: tuple[int, int] = (64, 64)
    profile_id: int = 0
    upsample: str = "transpose"

    def __post_init__(self):
        fb, ft = self.factors
        if ft != 2 * fb or fb < 2 or not is_power_of_two(fb):
            raise InvalidConfigError(f"factors must be (2^n, 2^(n+1)) with n >= 1, got {self.factors}")
        if self.residual_blocks < 1 or self.residual_channels < 1 or self.latent_dim < 1:
            raise InvalidConfigError("residual_blocks, residual_channels and latent_dim must be >= 1")
        if min(self.codebook_sizes) < 1:
            raise InvalidConfigError(f"codebook sizes must be >= 1, got {self.codebook_sizes}")
        if not 0 <= self.profile_id < 256:
            raise InvalidConfigError("profile_id must fit in a byte")
        if self.upsample != "transpose":
            raise InvalidConfigError(f"unsupported upsample operator {self.upsample!r}")

    @classmethod
    def from_name(cls, name: str, **overrides) -> CodecProfile:
        if name not in PROFILES:
            raise InvalidConfigError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
        return cls(name=name, **{**PROFILES[name], **overrides})

    def with_sizes(self, bottom: int, top: int) -> CodecProfile:
        return replace(self, codebook_sizes=(bottom, top))

    def latent_shapes(self, frame: tuple[int, int]) -> tuple[tuple[int, int], tuple[int, int]]:
        """((h_b, w_b), (h_t, w_t)) for an H×W frame; raises ShapeError if indivisible."""
        fb, ft = self.factors
        h, w = frame
        if h < ft or w < ft:
            raise ShapeError(f"frame {frame} is smaller than the top factor {ft}")
        if h % ft or w % ft:
            raise ShapeError(f"frame {frame} is not divisible by the top factor {ft}")
        return (h // fb, w // fb), (h // ft, w // ft)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["factors"] = list(self.factors)
        d["codebook_sizes"] = list(self.codebook_sizes)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> CodecProfile:
        d = dict(data)
        d["factors"] = tuple(d["factors"])
        d["codebook_sizes"] = tuple(d["codebook_sizes"])
        return cls(**d)


# ── Building blocks ──────────────────────────────────────────────────────────

class _DeformConv(nn.Module):
    """3x3 deformable convolution with offsets predicted by a zero-initialised conv."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        from torchvision.ops import DeformConv2d

        self.offset = nn.Conv2d(c_in, 18, 3, padding=1)
        nn.init.zeros_(self.offset.weight)
        nn.init.zeros_(self.offset.bias)
        self.conv = DeformConv2d(c_in, c_out, 3, padding=1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.conv(x, self.offset(x))


class ResBlock(nn.Module):
    def __init__(self, channels: int, res_channels: int, deformable: bool = False):
        super().__init__()
        first = _DeformConv(channels, res_channels) if deformable else nn.Conv2d(channels, res_channels, 3, padding=1)
        self.body = nn.Sequential(nn.ReLU(), first, nn.ReLU(), nn.Conv2d(res_channels, channels, 1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.body(x)


def res_stack(channels: int, res_channels: int, blocks: int, deformable: bool) -> nn.Sequential:
    return nn.Sequential(*[ResBlock(channels, res_channels, deformable) for _ in range(blocks)], nn.ReLU())


def _downsampler(c_in: int, channels: int, steps: int) -> list[nn.Module]:
    layers: list[nn.Module] = []
    for _ in range(steps):
        layers += [nn.Conv2d(c_in, channels, 4, stride=2, padding=1), nn.ReLU()]
        c_in = channels
    return layers


def _upsampler(channels: int, c_out: int, steps: int) -> list[nn.Module]:
    layers: list[nn.Module] = []
    for i in range(steps):
        last = i == steps - 1
        layers.append(nn.ConvTranspose2d(channels, c_out if last else channels, 4, stride=2, padding=1))
        if not last:
            layers.append(nn.ReLU())
    return layers


@dataclass
class QuantizedLevels:
    """Everything one hierarchical quantization pass produces (channels-last latents)."""

    top_indices: torch.Tensor
    bottom_indices: torch.Tensor
    top_latent: torch.Tensor
    top_quantized: torch.Tensor
    bottom_latent: torch.Tensor
    bottom_quantized: torch.Tensor
    fused: torch.Tensor
    extras: dict = field(default_factory=dict)


# ── Model ────────────────────────────────────────────────────────────────────

class HoloCodec(nn.Module):
    def __init__(self, profile: CodecProfile):
        super().__init__()
        self.profile = profile
        c, r, d = profile.residual_channels, profile.residual_blocks, profile.latent_dim
        deform = profile.deformable_conv
        steps = int(math.log2(profile.factors[0]))

        self.encoder_bottom = nn.Sequential(
            *_downsampler(IN_CHANNELS, c, steps),
            nn.Conv2d(c, c, 3, padding=1),
            res_stack(c, c, r, deform),
        )
        self.encoder_top = nn.Sequential(
            *_downsampler(c, c, 1),
            nn.Conv2d(c, c, 3, padding=1),
            res_stack(c, c, r, deform),
        )
        self.pre_quant_bottom = nn.Conv2d(c, d, 1)
        self.pre_quant_top = nn.Conv2d(c, d, 1)
        self.decoder_top = nn.Sequential(
            nn.Conv2d(d, c, 3, padding=1),
            res_stack(c, c, r, deform),
            *_upsampler(c, d, 1),
        )
        self.condition_bottom = nn.Conv2d(2 * d, d, 1)
        self.upsample_top = nn.ConvTranspose2d(d, d, 4, stride=2, padding=1)
        self.decoder = nn.Sequential(
            nn.Conv2d(2 * d, c, 3, padding=1),
            res_stack(c, c, r, deform),
            *_upsampler(c, 1, steps),
        )

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    def encode(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """(B, 3, H, W) -> bottom (B, D, H/f_b, W/f_b), top (B, D, H/f_t, W/f_t)."""
        if x.ndim != 4 or x.shape[1] != IN_CHANNELS:
            raise ShapeError(f"expected (B, {IN_CHANNELS}, H, W) input, got {tuple(x.shape)}")
        self.profile.latent_shapes(tuple(x.shape[-2:]))
        features = self.encoder_bottom(x.to(self.dtype))
        top = self.pre_quant_top(self.encoder_top(features))
        return self.pre_quant_bottom(features), top

    def _check_book(self, book: Codebook) -> None:
        if book.dim != self.profile.latent_dim:
            raise ShapeError(f"codebook dim {book.dim} does not match latent dim {self.profile.latent_dim}")

    def hierarchical_quantize(
        self,
        bottom: torch.Tensor,
        top: torch.Tensor,
        books: tuple[Codebook, Codebook],
        bypass: bool = False,
    ) -> QuantizedLevels:
        """Quantize top, decode it, condition bottom on it, quantize bottom, fuse.

        *bypass* skips both nearest-codevector lookups (the unquantized autoencoder path).
        """
        bottom_book, top_book = books
        self._check_book(bottom_book)
        self._check_book(top_book)
        if tuple(bottom.shape[-2:]) != (2 * top.shape[-2], 2 * top.shape[-1]):
            raise ShapeError(f"bottom {tuple(bottom.shape)} and top {tuple(top.shape)} grids are inconsistent")

        z_top = top.permute(0, 2, 3, 1)
        if bypass:
            idx_top, q_top = torch.zeros(z_top.shape[:-1], dtype=torch.long), z_top
        else:
            idx_top, q_top = nearest_codevectors(z_top, top_book.vectors)
        st_top = straight_through(z_top, q_top).permute(0, 3, 1, 2)

        decoded_top = self.decoder_top(st_top)
        z_bottom = self.condition_bottom(torch.cat([bottom, decoded_top], dim=1)).permute(0, 2, 3, 1)
        if bypass:
            idx_bottom, q_bottom = torch.zeros(z_bottom.shape[:-1], dtype=torch.long), z_bottom
        else:
            idx_bottom, q_bottom = nearest_codevectors(z_bottom, bottom_book.vectors)
        st_bottom = straight_through(z_bottom, q_bottom).permute(0, 3, 1, 2)

        return QuantizedLevels(
            top_indices=idx_top,
            bottom_indices=idx_bottom,
            top_latent=z_top,
            top_quantized=q_top,
            bottom_latent=z_bottom,
            bottom_quantized=q_bottom,
            fused=self.fuse(st_bottom, st_top),
        )

    def fuse(self, q_bottom: torch.Tensor, q_top: torch.Tensor) -> torch.Tensor:
        """Concatenate the quantized bottom with the upsampled quantized top (NCHW)."""
        return torch.cat([q_bottom, self.upsample_top(q_top)], dim=1)

    def embed(self, indices: torch.Tensor, book: Codebook) -> torch.Tensor:
        """(B, h, w) indices -> (B, D, h, w) codevectors."""
        self._check_book(book)
        if indices.numel() and (int(indices.min()) < 0 or int(indices.max()) >= book.size):
            raise ShapeError(f"index outside codebook of size {book.size}")
        vectors = book.vectors.to(self.dtype)[indices.to(torch.long)]
        return vectors.permute(0, 3, 1, 2)

    def decode(self, fused: torch.Tensor) -> torch.Tensor:
        """(B, 2D, h_b, w_b) -> (B, H, W) float64 phase in (−π, π]."""
        if fused.ndim != 4 or fused.shape[1] != 2 * self.profile.latent_dim:
            raise ShapeError(f"fused latents must be (B, {2 * self.profile.latent_dim}, h, w), got {tuple(fused.shape)}")
        raw = self.decoder(fused)[:, 0]
        return wrap_phase(math.pi * torch.tanh(raw.to(torch.float64)))

    def forward(self, x: torch.Tensor, books: tuple[Codebook, Codebook], bypass: bool = False):
        bottom, top = self.encode(x)
        levels = self.hierarchical_quantize(bottom, top, books, bypass=bypass)
        return self.decode(levels.fused), levels


# ── Functional surface ───────────────────────────────────────────────────────

def codec_inputs(hologram: ComplexField, target: AmplitudeMap | torch.Tensor) -> torch.Tensor:
    """Stack (A_h, P_h, A_t) into a (3, H, W) float tensor."""
    amp = target.data if isinstance(target, AmplitudeMap) else torch.as_tensor(target)
    if tuple(amp.shape) != tuple(hologram.data.shape):
        raise ShapeError(f"target {tuple(amp.shape)} does not match hologram {tuple(hologram.data.shape)}")
    return torch.stack([hologram.amplitude, hologram.phase, amp.to(torch.float64)])


def _batched(x: torch.Tensor) -> torch.Tensor:
    return x[None] if x.ndim == 3 else x


def encode(inputs: torch.Tensor, model: HoloCodec) -> tuple[LatentGrid, LatentGrid]:
    """Inference-mode encode; returns channels-last bottom and top grids."""
    model.eval()
    with torch.no_grad():
        bottom, top = model.encode(_batched(inputs))
    return LatentGrid(bottom.permute(0, 2, 3, 1)), LatentGrid(top.permute(0, 2, 3, 1))


def hierarchical_quantize(
    bottom: LatentGrid,
    top: LatentGrid,
    books: tuple[Codebook, Codebook],
    model: HoloCodec,
) -> tuple[IndexGrid, IndexGrid, torch.Tensor]:
    """(bottom indices, top indices, fused latents) for channels-last grids."""
    model.eval()
    with torch.no_grad():
        levels = model.hierarchical_quantize(
            bottom.data.permute(0, 3, 1, 2).to(model.dtype), top.data.permute(0, 3, 1, 2).to(model.dtype), books
        )
    return IndexGrid(levels.bottom_indices), IndexGrid(levels.top_indices), levels.fused


def fuse_indices(
    bottom: IndexGrid,
    top: IndexGrid,
    books: tuple[Codebook, Codebook],
    model: HoloCodec,
) -> torch.Tensor:
    """Receiver side: rebuild fused latents from the two index grids."""
    b = bottom.data[None] if bottom.data.ndim == 2 else bottom.data
    t = top.data[None] if top.data.ndim == 2 else top.data
    if tuple(b.shape[-2:]) != (2 * t.shape[-2], 2 * t.shape[-1]):
        raise ShapeError(f"bottom {tuple(b.shape)} and top {tuple(t.shape)} index grids are inconsistent")
    with torch.no_grad():
        return model.fuse(model.embed(b, books[0]), model.embed(t, books[1]))


def decode(fused: torch.Tensor, model: HoloCodec) -> PhaseMap:
    """Fused latents of one sample -> hologram-plane PhaseMap."""
    model.eval()
    with torch.no_grad():
        phase = model.decode(_batched(fused))
    if phase.shape[0] != 1:
        raise ShapeError("decode expects a single sample")
    return PhaseMap(phase[0])
