"""Tests for holocodec.codec.model: profiles, shapes and the straight-through gradient."""
from __future__ import annotations

import math

import pytest
import torch

from holocodec.codec.losses import LossWeights
from holocodec.codec.model import (
    CodecProfile,
    HoloCodec,
    codec_inputs,
    decode,
    encode,
    fuse_indices,
    hierarchical_quantize,
)
from holocodec.codec.training import framework_loss
from holocodec.data import Batch
from holocodec.errors import InvalidConfigError, ShapeError
from holocodec.optics.propagation import ComplexField, OpticsConfig
from holocodec.vq.codebook import Codebook


def _books(profile, gen):
    d = profile.latent_dim
    return tuple(Codebook.from_vectors(torch.randn(k, d, generator=gen, dtype=torch.float64))
                 for k in profile.codebook_sizes)


def _field(sample):
    return ComplexField(sample.hologram, OpticsConfig(wavelength=520e-9))


class TestProfile:
    def test_named_profiles(self):
        low = CodecProfile.from_name("low")
        assert low.codebook_sizes == (4096, 4096)
        assert CodecProfile.from_name("ultra-low").factors == (8, 16)

    def test_unknown_name(self):
        with pytest.raises(InvalidConfigError):
            CodecProfile.from_name("medium")

    def test_latent_shapes(self):
        assert CodecProfile().latent_shapes((64, 128)) == ((16, 32), (8, 16))
        with pytest.raises(ShapeError):
            CodecProfile().latent_shapes((60, 128))
        with pytest.raises(ShapeError):
            CodecProfile().latent_shapes((0, 0))
        with pytest.raises(ShapeError):
            CodecProfile().latent_shapes((4, 128))

    def test_bad_factors(self):
        with pytest.raises(InvalidConfigError):
            CodecProfile(factors=(4, 6))

    def test_dict_round_trip(self, micro_profile):
        assert CodecProfile.from_dict(micro_profile.to_dict()) == micro_profile


class TestHoloCodec:
    def test_shapes_and_phase_range(self, micro_profile):
        torch.manual_seed(0)
        model = HoloCodec(micro_profile).to(torch.float64)
        books = _books(micro_profile, torch.Generator().manual_seed(0))
        x = torch.randn(2, 3, 32, 64, dtype=torch.float64)
        phase, levels = model(x, books)
        assert phase.shape == (2, 32, 64) and phase.dtype == torch.float64
        assert bool(((phase > -math.pi) & (phase <= math.pi)).all())
        assert levels.bottom_indices.shape == (2, 8, 16)
        assert levels.top_indices.shape == (2, 4, 8)
        assert levels.fused.shape == (2, 2 * micro_profile.latent_dim, 8, 16)

    def test_rejects_wrong_input(self, micro_profile):
        model = HoloCodec(micro_profile)
        with pytest.raises(ShapeError):
            model.encode(torch.zeros(1, 2, 32, 64))
        with pytest.raises(ShapeError):
            model.encode(torch.zeros(1, 3, 30, 64))

    def test_book_dim_checked(self, micro_profile):
        model = HoloCodec(micro_profile)
        bottom, top = model.encode(torch.zeros(1, 3, 32, 64))
        wrong = Codebook.from_vectors(torch.zeros(4, micro_profile.latent_dim + 1))
        with pytest.raises(ShapeError):
            model.hierarchical_quantize(bottom, top, (wrong, wrong))

    def test_index_path_matches_training_path(self, micro_profile, samples):
        torch.manual_seed(1)
        model = HoloCodec(micro_profile).to(torch.float64)
        books = _books(micro_profile, torch.Generator().manual_seed(1))
        inputs = codec_inputs(_field(samples[0]), samples[0].target)
        bottom, top = encode(inputs, model)
        b_idx, t_idx, fused = hierarchical_quantize(bottom, top, books, model)
        rebuilt = fuse_indices(b_idx, t_idx, books, model)
        assert torch.equal(rebuilt, fused)
        assert torch.equal(decode(rebuilt[0], model).data, decode(fused[0], model).data)

    def test_embed_range_checked(self, micro_profile):
        model = HoloCodec(micro_profile)
        book = Codebook.from_vectors(torch.zeros(4, micro_profile.latent_dim))
        with pytest.raises(ShapeError):
            model.embed(torch.full((1, 2, 2), 4), book)


class TestGradient:
    def test_straight_through_matches_finite_differences(self, optics):
        torch.manual_seed(0)
        profile = CodecProfile(residual_blocks=1, residual_channels=4, latent_dim=4, codebook_sizes=(8, 8))
        model = HoloCodec(profile).to(torch.float64)
        gen = torch.Generator().manual_seed(0)
        batch = Batch(
            names=["x"],
            inputs=torch.rand(1, 3, 8, 16, generator=gen, dtype=torch.float64),
            targets=torch.rand(1, 8, 16, generator=gen, dtype=torch.float64),
        )
        weights = LossWeights(w_mse=1.0, w_msssim=0.0, w_wfft=0.025)

        # Codebooks holding the current latents make quantization the identity at this point
        with torch.no_grad():
            bottom, top = model.encode(batch.inputs)
            top_book = Codebook.from_vectors(top.permute(0, 2, 3, 1).reshape(-1, 4).clone())
            levels = model.hierarchical_quantize(bottom, top, (top_book, top_book), bypass=True)
            bottom_book = Codebook.from_vectors(levels.bottom_latent.reshape(-1, 4).clone())
        books = (bottom_book, top_book)

        def bypass_loss():
            return framework_loss(model, batch, books, optics, weights, bypass=True)[0]

        loss, _ = framework_loss(model, batch, books, optics, weights)
        assert loss.item() == pytest.approx(bypass_loss().item(), rel=1e-12)
        model.zero_grad()
        loss.backward()

        h = 1e-6
        worst = 0.0
        checked = 0
        with torch.no_grad():
            for _, param in model.named_parameters():
                grad = param.grad.reshape(-1)
                flat = param.data.reshape(-1)
                for i in torch.argsort(grad.abs(), descending=True)[:3].tolist():
                    analytic = grad[i].item()
                    if abs(analytic) < 1e-6:
                        continue
                    orig = flat[i].item()
                    flat[i] = orig + h
                    up = bypass_loss().item()
                    flat[i] = orig - h
                    down = bypass_loss().item()
                    flat[i] = orig
                    numeric = (up - down) / (2 * h)
                    worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric)))
                    checked += 1
        assert checked > 10
        assert worst < 1e-4
