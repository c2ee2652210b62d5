"""Tests for holocodec.data: image I/O, hologram generation, cache and batching."""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
import torch
from PIL import Image

from holocodec.data import (
    build_dataset,
    cache_key,
    cached_sample,
    collate,
    fit_to_frame,
    iter_batches,
    load_image_dir,
    load_intensity_png,
    load_phase,
    make_sample,
    save_amplitude_png,
    save_phase_png,
    synthetic_corpus,
)
from holocodec.errors import DomainError, InvalidConfigError, ShapeError
from holocodec.optics.propagation import ComplexField, propagate


class TestImageIO:
    def test_8bit_gray(self, tmp_path):
        path = tmp_path / "g.png"
        Image.fromarray(np.array([[0, 255], [51, 102]], dtype=np.uint8)).save(path)
        assert np.allclose(load_intensity_png(path), [[0, 1], [0.2, 0.4]])

    def test_16bit_gray(self, tmp_path):
        path = tmp_path / "g16.png"
        Image.fromarray(np.array([[0, 65535]], dtype=np.uint16)).save(path)
        assert np.allclose(load_intensity_png(path, channel=2), [[0, 1]])

    def test_rgb_channel(self, tmp_path):
        path = tmp_path / "rgb.png"
        rgb = np.zeros((2, 3, 3), dtype=np.uint8)
        rgb[..., 0], rgb[..., 1], rgb[..., 2] = 255, 0, 51
        Image.fromarray(rgb).save(path)
        assert load_intensity_png(path).shape == (2, 3, 3)
        assert np.allclose(load_intensity_png(path, channel=0), 1.0)
        assert np.allclose(load_intensity_png(path, channel=2), 0.2)
        with pytest.raises(InvalidConfigError):
            load_intensity_png(path, channel=3)

    def test_phase_png_quantization(self, tmp_path):
        phase = (torch.rand(8, 8, generator=torch.Generator().manual_seed(0), dtype=torch.float64) * 2 - 1) * 3.1
        back = load_phase(save_phase_png(tmp_path / "p.png", phase))
        assert torch.allclose(back, phase, atol=2 * math.pi / 65535)

    def test_phase_npy_exact(self, tmp_path):
        phase = np.linspace(-3, 3, 12).reshape(3, 4)
        np.save(tmp_path / "p.npy", phase)
        assert torch.equal(load_phase(tmp_path / "p.npy"), torch.from_numpy(phase))

    def test_amplitude_preview(self, tmp_path):
        path = save_amplitude_png(tmp_path / "a.png", torch.tensor([[0.0, 2.0]]))
        with Image.open(path) as img:
            assert np.asarray(img).tolist() == [[0, 255]]

    def test_image_dir(self, tmp_path):
        with pytest.raises(DomainError):
            load_image_dir(tmp_path)
        for name in ("b", "a"):
            Image.fromarray(np.zeros((2, 2), dtype=np.uint8)).save(tmp_path / f"{name}.png")
        assert [n for n, _ in load_image_dir(tmp_path)] == ["a", "b"]
        assert load_image_dir(tmp_path / "a.png")[0][0] == "a"

    def test_fit_to_frame(self):
        img = np.arange(36, dtype=np.float64).reshape(6, 6)
        assert fit_to_frame(img, (2, 4)).tolist() == [[13, 14, 15, 16], [19, 20, 21, 22]]
        with pytest.raises(ShapeError):
            fit_to_frame(img, (8, 4))


class TestSamples:
    def test_synthetic_corpus_is_seeded(self):
        a, b = synthetic_corpus(2, (16, 16), seed=3), synthetic_corpus(2, (16, 16), seed=3)
        assert [n for n, _ in a] == ["synthetic-000", "synthetic-001"]
        assert all(np.array_equal(x, y) for (_, x), (_, y) in zip(a, b))
        assert all(0 <= img.min() and img.max() <= 1 for _, img in a)

    def test_hologram_propagates_to_target(self, optics):
        unpadded = replace(optics, pad_factor=1)
        _, img = synthetic_corpus(1, (32, 64), seed=0)[0]
        sample = make_sample("x", img, unpadded, "random", seed=1)
        back = propagate(ComplexField(sample.hologram, unpadded), -unpadded.distance)
        assert torch.allclose(back.data.abs(), sample.target, atol=1e-9)
        assert sample.inputs().shape == (3, 32, 64)

    def test_unknown_initializer(self, optics):
        with pytest.raises(InvalidConfigError):
            make_sample("x", np.ones((8, 8)), optics, "magic")


class TestCache:
    def test_hit_returns_same_sample(self, tmp_path, optics):
        _, img = synthetic_corpus(1, (32, 64), seed=0)[0]
        first = cached_sample("x", img, optics, seed=2, channel=1, directory=tmp_path)
        assert len(list(tmp_path.glob("*.npz"))) == 1
        second = cached_sample("x", img, optics, seed=2, channel=1, directory=tmp_path)
        assert torch.equal(first.hologram, second.hologram)

    def test_key_depends_on_settings(self, optics):
        img = np.zeros((4, 4))
        assert cache_key(img, optics, "random", 0, 1) != cache_key(img, optics, "random", 1, 1)
        assert cache_key(img, optics, "random", 0, 1) != cache_key(img, optics, "zeros", 0, 1)

    def test_unreadable_entry_is_rebuilt(self, tmp_path, optics):
        _, img = synthetic_corpus(1, (32, 64), seed=0)[0]
        path = tmp_path / f"{cache_key(img, optics, 'random', 0, 1)}.npz"
        path.write_bytes(b"garbage")
        sample = cached_sample("x", img, optics, channel=1, directory=tmp_path)
        assert sample.hologram.shape == (32, 64)

    def test_build_dataset_seeds_each_image(self, optics, tmp_path):
        images = synthetic_corpus(2, (32, 64), seed=0)
        cached = build_dataset(images, optics, seed=5, channel=1, directory=tmp_path)
        fresh = build_dataset(images, optics, seed=5, channel=1, use_cache=False)
        assert all(torch.equal(a.hologram, b.hologram) for a, b in zip(cached, fresh))


class TestBatching:
    def test_collate(self, samples):
        batch = collate(samples[:3])
        assert batch.inputs.shape == (3, 3, 32, 64) and batch.inputs.dtype == torch.float32
        assert batch.targets.dtype == torch.float64

    def test_iter_batches_covers_every_sample(self, samples):
        names = [n for b in iter_batches(samples, 3, torch.Generator().manual_seed(0)) for n in b.names]
        assert sorted(names) == sorted(s.name for s in samples)

    def test_bad_batch_size(self, samples):
        with pytest.raises(InvalidConfigError):
            list(iter_batches(samples, 0))
