"""Shared helpers: phase wrapping, centred pad/crop, seeding, checksums."""
from __future__ import annotations

import math
import random
import zlib
from typing import Any

import numpy as np
import torch


# ---------------------------------------------------------------------------
# Tensor conversion
# ---------------------------------------------------------------------------

def as_tensor(x: Any, dtype: torch.dtype | None = None) -> torch.Tensor:
    """Return *x* as a torch tensor without copying when it already is one."""
    if isinstance(x, torch.Tensor):
        return x if dtype is None else x.to(dtype)
    t = torch.from_numpy(np.ascontiguousarray(x))
    return t if dtype is None else t.to(dtype)


def to_numpy(x: Any) -> np.ndarray:
    if isinstance(x, torch.Tensor):
        return x.detach().cpu().numpy()
    return np.asarray(x)


# ---------------------------------------------------------------------------
# Phase helpers
# ---------------------------------------------------------------------------

def wrap_phase(phase: torch.Tensor) -> torch.Tensor:
    """Wrap radians onto (-pi, pi]."""
    out = math.pi - torch.remainder(math.pi - phase, 2 * math.pi)
    # remainder can round up to exactly 2*pi for tiny negative inputs
    out = torch.where(out <= -math.pi, out + 2 * math.pi, out)
    return torch.where((phase > -math.pi) & (phase <= math.pi), phase, out)


def random_phase(shape: tuple[int, ...], generator: torch.Generator, dtype=torch.float64) -> torch.Tensor:
    """Uniform phase on (-pi, pi]."""
    u = torch.rand(shape, generator=generator, dtype=dtype)
    return math.pi - 2 * math.pi * u


# ---------------------------------------------------------------------------
# Centred pad / crop over the last two axes
# ---------------------------------------------------------------------------

def pad_to(x: torch.Tensor, shape: tuple[int, int]) -> torch.Tensor:
    h, w = x.shape[-2:]
    ph, pw = shape[0] - h, shape[1] - w
    if ph < 0 or pw < 0:
        raise ValueError(f"cannot pad {tuple(x.shape[-2:])} to {shape}")
    if ph == 0 and pw == 0:
        return x
    top, left = ph // 2, pw // 2
    return torch.nn.functional.pad(x, (left, pw - left, top, ph - top))


def crop_center(x: torch.Tensor, shape: tuple[int, int]) -> torch.Tensor:
    h, w = x.shape[-2:]
    ch, cw = shape
    if ch > h or cw > w:
        raise ValueError(f"cannot crop {tuple(x.shape[-2:])} to {shape}")
    top, left = (h - ch) // 2, (w - cw) // 2
    return x[..., top : top + ch, left : left + cw]


# ---------------------------------------------------------------------------
# Determinism
# ---------------------------------------------------------------------------

def seed_everything(seed: int) -> torch.Generator:
    """Seed python, numpy and torch; return a dedicated torch generator."""
    random.seed(seed)
    np.random.seed(seed % (2**32))
    torch.manual_seed(seed)
    gen = torch.Generator()
    gen.manual_seed(seed)
    return gen


# ---------------------------------------------------------------------------
# Checksums / misc
# ---------------------------------------------------------------------------

def crc32(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def ceil_log2(n: int) -> int:
    """Bits needed for a fixed-length index into *n* entries."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (n - 1).bit_length()
