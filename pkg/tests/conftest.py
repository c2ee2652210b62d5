"""Shared test fixtures for holocodec."""
from __future__ import annotations

import os

import pytest
import torch

# Keep the dataset cache out of the working tree
os.environ.setdefault("HOLOCODEC_CACHE", os.path.join(os.path.dirname(__file__), ".cache"))

FRAME = (32, 64)


@pytest.fixture()
def optics():
    """Green channel, 2 mm propagation, no ROI (the whole frame is scored)."""
    from holocodec.optics.propagation import OpticsConfig

    return OpticsConfig(wavelength=520e-9, pixel_pitch=6.4e-6, distance=2e-3, pad_factor=2, roi=None)


@pytest.fixture()
def micro_profile():
    from holocodec.codec.model import CodecProfile

    return CodecProfile(name="desk", residual_blocks=1, residual_channels=8, latent_dim=4, codebook_sizes=(16, 16))


@pytest.fixture()
def weights():
    from holocodec.codec.losses import LossWeights

    return LossWeights(msssim_levels=2)


@pytest.fixture()
def samples(optics):
    """Four synthetic holograms on the 32x64 test frame."""
    from holocodec.data import build_dataset, synthetic_corpus

    return build_dataset(synthetic_corpus(4, FRAME, seed=0), optics, "random", seed=0, channel=1, use_cache=False)


@pytest.fixture()
def schedule():
    from holocodec.codec.training import TrainSchedule

    return TrainSchedule(stage1_epochs=2, stage2_epochs=1, batch_size=2, seed=0, stage2_sizes=(4, 8, 16))


@pytest.fixture()
def bundle(samples, micro_profile, schedule, optics, weights):
    """A micro codec after both training stages."""
    from holocodec.codec.checkpoint import CodecBundle
    from holocodec.codec.training import train

    torch.manual_seed(0)
    result = train(samples, micro_profile, schedule, optics, weights)
    return CodecBundle.from_result(result, micro_profile, optics, schedule, weights, channel=1)


@pytest.fixture()
def books_dir(tmp_path, bundle):
    """books/<channel>/<K>.rvqc exported from the trained adapters."""
    from holocodec.adapt.adapter import export_books

    root = tmp_path / "books"
    export_books(bundle.adapters, bundle.books, bundle.channel, root)
    return root


@pytest.fixture()
def registry(books_dir):
    from holocodec.transport.registry import CodebookRegistry

    return CodebookRegistry.load(books_dir)
