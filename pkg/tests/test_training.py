"""Tests for holocodec.codec.training, checkpoint and pipeline."""
from __future__ import annotations

import pytest
import torch

from holocodec.adapt import export_books
from holocodec.bitstream.container import HoloBitstream
from holocodec.codec.checkpoint import CodecBundle, load_checkpoint, save_checkpoint
from holocodec.codec.losses import LossWeights
from holocodec.codec.model import CodecProfile, HoloCodec
from holocodec.codec.pipeline import compress_sample, decompress_stream
from holocodec.codec.training import TrainSchedule, init_books, train, train_stage2
from holocodec.data import build_dataset, synthetic_corpus
from holocodec.errors import CheckpointVersionError, DomainError, InvalidConfigError, SequencingError, ShapeError
from holocodec.evaluation.metrics import evaluate_phase
from holocodec.optics.propagation import OpticsConfig
from holocodec.transport.registry import CodebookRegistry
from holocodec.utils import seed_everything


class TestSchedule:
    @pytest.mark.parametrize("kwargs", [{"stage1_epochs": -1}, {"learning_rate": 0}, {"batch_size": 0}, {"beta": -0.1}])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidConfigError):
            TrainSchedule(**kwargs)

    def test_dict_round_trip(self):
        s = TrainSchedule(stage2_sizes=(8, 16), seed=4)
        assert TrainSchedule.from_dict(s.to_dict()) == s


class TestTrain:
    def test_traces_and_books(self, bundle, schedule, micro_profile):
        assert len(bundle.stage1_trace) == schedule.stage1_epochs
        assert len(bundle.stage2_trace) == schedule.stage2_epochs
        assert bundle.stage1_complete
        assert [b.size for b in bundle.books] == list(micro_profile.codebook_sizes)
        assert bundle.adapters is not None

    def test_seeded_runs_match(self, samples, micro_profile, optics, weights):
        schedule = TrainSchedule(stage1_epochs=1, stage2_epochs=0, batch_size=2, seed=3)
        runs = []
        for _ in range(2):
            torch.manual_seed(0)
            runs.append(train(samples, micro_profile, schedule, optics, weights))
        assert runs[0].stage1_trace == runs[1].stage1_trace
        assert torch.equal(runs[0].books[0].vectors, runs[1].books[0].vectors)

    def test_empty_dataset(self, micro_profile, schedule, optics, weights):
        with pytest.raises(DomainError):
            train([], micro_profile, schedule, optics, weights)

    def test_stage2_needs_stage1(self, bundle, samples, schedule, optics, weights):
        with pytest.raises(SequencingError):
            train_stage2(bundle.model, bundle.books, samples, schedule, optics, weights, stage1_complete=False)


class TestCheckpoint:
    def test_round_trip(self, tmp_path, bundle, samples):
        path = save_checkpoint(tmp_path / "codec.pt", bundle)
        loaded = load_checkpoint(path)
        assert loaded.profile == bundle.profile
        assert loaded.optics == bundle.optics
        assert loaded.schedule == bundle.schedule
        assert loaded.stage1_trace == bundle.stage1_trace
        assert loaded.stage1_complete
        x = samples[0].inputs()[None]
        with torch.no_grad():
            a, _ = bundle.model(x, bundle.books)
            b, _ = loaded.model(x, loaded.books)
        assert torch.equal(a, b)
        for name, tensor in bundle.adapters.state_dict().items():
            assert torch.equal(loaded.adapters.state_dict()[name], tensor)

    def test_version_mismatch(self, tmp_path, bundle):
        path = save_checkpoint(tmp_path / "codec.pt", bundle)
        payload = torch.load(path, weights_only=True)
        payload["version"] = 999
        torch.save(payload, path)
        with pytest.raises(CheckpointVersionError):
            load_checkpoint(path)

    def test_foreign_file(self, tmp_path):
        path = tmp_path / "other.pt"
        torch.save({"weights": [1, 2]}, path)
        with pytest.raises(CheckpointVersionError):
            load_checkpoint(path)


class TestPipeline:
    def test_stream_decodes_like_local_model(self, bundle, registry, samples):
        books = registry.get(1, 8)
        stream = compress_sample(samples[1].inputs(), bundle.model, books, bundle.optics, 1)
        parsed = HoloBitstream.parse(stream.serialize())
        assert parsed == stream
        assert parsed.sizes == (8, 8)
        with torch.no_grad():
            bottom, top = bundle.model.encode(samples[1].inputs()[None])
            levels = bundle.model.hierarchical_quantize(bottom, top, books)
            local = bundle.model.decode(levels.fused)[0]
        assert torch.equal(decompress_stream(parsed, bundle.model, books).data, local)

    def test_deterministic(self, bundle, registry, samples):
        books = registry.get(1, 16)
        a = compress_sample(samples[0].inputs(), bundle.model, books, bundle.optics, 1).serialize()
        b = compress_sample(samples[0].inputs(), bundle.model, books, bundle.optics, 1).serialize()
        assert a == b

    def test_fixed_length_when_huffman_off(self, bundle, registry, samples):
        stream = compress_sample(samples[0].inputs(), bundle.model, registry.get(1, 4), bundle.optics, 1, huffman=False)
        assert not stream.huffman
        assert stream.bpp_fixed() == (128 * 2 + 32 * 2) / 2048

    def test_codebook_mismatch(self, bundle, registry, samples):
        stream = compress_sample(samples[0].inputs(), bundle.model, registry.get(1, 8), bundle.optics, 1)
        with pytest.raises(ShapeError):
            decompress_stream(stream, bundle.model, registry.get(1, 16))


# ── Desk-scale runs ──────────────────────────────────────────────────────────

def _desk_setup(n_train=32, n_test=4):
    optics = OpticsConfig(wavelength=520e-9, distance=2e-3, roi=(48, 96))
    images = synthetic_corpus(n_train + n_test, (64, 128), seed=11)
    data = build_dataset(images, optics, "random", seed=0, channel=1, use_cache=False)
    profile = CodecProfile(residual_blocks=1, residual_channels=16, latent_dim=8, codebook_sizes=(64, 64))
    return optics, data[:n_train], data[n_train:], profile


def _mean_psnr(model, books, samples, optics, levels=3):
    scores = []
    with torch.no_grad():
        for s in samples:
            phase, _ = model(s.inputs()[None], books)
            scores.append(evaluate_phase(phase[0], s.target, optics, levels)["psnr"])
    return sum(scores) / len(scores)


@pytest.mark.slow
def test_desk_training_beats_untrained_baseline():
    optics, train_set, test_set, profile = _desk_setup()
    weights = LossWeights(msssim_levels=3)
    schedule = TrainSchedule(stage1_epochs=50, stage2_epochs=0, learning_rate=1e-3, batch_size=4, seed=0)

    torch.manual_seed(0)
    model = HoloCodec(profile)
    books = init_books(model, train_set, profile, seed_everything(schedule.seed), schedule.batch_size)
    baseline = _mean_psnr(model, books, test_set, optics)

    result = train(train_set, profile, schedule, optics, weights, model=model, books=books)
    assert result.stage1_trace[-1] < result.stage1_trace[0]
    assert _mean_psnr(result.model, result.books, test_set, optics) >= baseline + 5.0


@pytest.mark.slow
def test_adapted_sizes_trade_rate_for_quality(tmp_path):
    from holocodec.evaluation.sweep import rd_sweep, summary_rows

    optics, train_set, test_set, profile = _desk_setup()
    weights = LossWeights(msssim_levels=3)
    schedule = TrainSchedule(stage1_epochs=50, stage2_epochs=10, learning_rate=1e-3, batch_size=4, seed=0)
    torch.manual_seed(0)
    result = train(train_set, profile, schedule, optics, weights)
    bundle = CodecBundle.from_result(result, profile, optics, schedule, weights, channel=1)
    export_books(bundle.adapters, bundle.books, 1, tmp_path)
    registry = CodebookRegistry.load(tmp_path)
    sizes = [8, 16, 32, 64]
    assert registry.sizes(1) == sizes

    _, rows = rd_sweep(bundle, registry, test_set, sizes)
    assert len(rows) == len(sizes) * len(test_set)
    means = sorted(summary_rows(rows), key=lambda r: r.K)
    assert all(b.bpp_entropy > a.bpp_entropy for a, b in zip(means, means[1:]))
    assert all(b.psnr >= a.psnr - 0.2 for a, b in zip(means, means[1:]))
