"""Tests for holocodec.utils: shared helpers."""
from __future__ import annotations

import math
import zlib

import numpy as np
import pytest
import torch

from holocodec.utils import (
    as_tensor,
    ceil_log2,
    crc32,
    crop_center,
    is_power_of_two,
    pad_to,
    random_phase,
    seed_everything,
    to_numpy,
    wrap_phase,
)


# ---------------------------------------------------------------------------
# Tensor conversion
# ---------------------------------------------------------------------------

class TestConversion:
    def test_tensor_passes_through(self):
        t = torch.zeros(3)
        assert as_tensor(t) is t

    def test_numpy_input(self):
        t = as_tensor(np.arange(4), dtype=torch.float64)
        assert t.dtype == torch.float64 and t.tolist() == [0, 1, 2, 3]

    def test_to_numpy(self):
        x = torch.ones(2, requires_grad=True)
        assert to_numpy(x * 2).tolist() == [2.0, 2.0]


# ---------------------------------------------------------------------------
# Phase helpers
# ---------------------------------------------------------------------------

class TestWrapPhase:
    def test_range(self):
        x = torch.linspace(-20, 20, 10001, dtype=torch.float64)
        w = wrap_phase(x)
        assert bool((w > -math.pi).all()) and bool((w <= math.pi).all())
        assert torch.allclose(torch.cos(w), torch.cos(x), atol=1e-9)

    def test_boundaries(self):
        w = wrap_phase(torch.tensor([-math.pi, math.pi, 3 * math.pi, -1e-18], dtype=torch.float64))
        assert w[0].item() == pytest.approx(math.pi)
        assert w[1].item() == math.pi
        assert w[2].item() == pytest.approx(math.pi)
        assert w[3].item() == -1e-18

    def test_in_range_values_unchanged(self):
        x = torch.tensor([0.5, -3.0, 3.1], dtype=torch.float64)
        assert torch.equal(wrap_phase(x), x)

    def test_random_phase(self):
        p = random_phase((64, 64), torch.Generator().manual_seed(0))
        assert bool((p > -math.pi).all()) and bool((p <= math.pi).all())
        assert torch.equal(p, random_phase((64, 64), torch.Generator().manual_seed(0)))


# ---------------------------------------------------------------------------
# Pad / crop
# ---------------------------------------------------------------------------

class TestPadCrop:
    def test_crop_undoes_pad(self):
        x = torch.arange(15.0).reshape(3, 5)
        padded = pad_to(x, (8, 9))
        assert padded.shape == (8, 9)
        assert padded.sum() == x.sum()
        assert torch.equal(crop_center(padded, (3, 5)), x)

    def test_same_shape(self):
        x = torch.zeros(2, 4, 4)
        assert pad_to(x, (4, 4)) is x

    def test_errors(self):
        with pytest.raises(ValueError):
            pad_to(torch.zeros(4, 4), (2, 8))
        with pytest.raises(ValueError):
            crop_center(torch.zeros(4, 4), (5, 4))


# ---------------------------------------------------------------------------
# Determinism / checksums
# ---------------------------------------------------------------------------

class TestMisc:
    def test_seed_everything(self):
        a = torch.rand(3, generator=seed_everything(7))
        b = torch.rand(3, generator=seed_everything(7))
        assert torch.equal(a, b)

    def test_crc32_is_unsigned(self):
        assert crc32(b"holocodec") == zlib.crc32(b"holocodec") & 0xFFFFFFFF
        assert crc32(b"") == 0

    def test_powers_of_two(self):
        assert [n for n in range(20) if is_power_of_two(n)] == [1, 2, 4, 8, 16]

    def test_ceil_log2(self):
        assert [ceil_log2(n) for n in (1, 2, 3, 4, 5, 4096)] == [0, 1, 2, 2, 3, 12]
        with pytest.raises(ValueError):
            ceil_log2(0)
