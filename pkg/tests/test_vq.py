"""Tests for holocodec.vq: nearest-codevector search, EMA learning, codebook files."""
from __future__ import annotations

import numpy as np
import pytest
import torch

from holocodec.errors import ChecksumError, CorruptStreamError, DomainError, ShapeError
from holocodec.vq.codebook import (
    Codebook,
    IndexGrid,
    LatentGrid,
    decode_codebook,
    encode_codebook,
    load_codebooks,
    save_codebooks,
)
from holocodec.vq.quantizer import (
    LatentReservoir,
    ema_update,
    nearest_codevectors,
    quantize,
    reseed_dead_codevectors,
    straight_through,
    utilization,
    vq_losses,
)


def _book(k=8, d=4, seed=0):
    gen = torch.Generator().manual_seed(seed)
    return Codebook.from_vectors(torch.randn(k, d, generator=gen, dtype=torch.float64))


# ---------------------------------------------------------------------------
# Codebook
# ---------------------------------------------------------------------------

class TestCodebook:
    def test_from_vectors(self):
        book = _book(5, 3)
        assert (book.size, book.dim) == (5, 3)
        assert torch.equal(book.ema_sums / book.ema_counts[:, None], book.vectors)

    def test_rejects_non_finite(self):
        v = torch.zeros(2, 2)
        v[0, 0] = float("inf")
        with pytest.raises(DomainError):
            Codebook.from_vectors(v)

    def test_rejects_bad_decay(self):
        with pytest.raises(DomainError):
            Codebook.from_vectors(torch.zeros(2, 2), decay=1.0)

    def test_rejects_empty(self):
        with pytest.raises(ShapeError):
            Codebook.from_vectors(torch.zeros(0, 4))

    def test_from_latents_samples_rows(self):
        latents = torch.arange(40, dtype=torch.float64).reshape(10, 4)
        book = Codebook.from_latents(latents, 6, torch.Generator().manual_seed(0))
        rows = {tuple(r.tolist()) for r in latents}
        assert book.size == 6
        assert all(tuple(v.tolist()) in rows for v in book.vectors)

    def test_state_round_trip(self):
        book = _book()
        again = Codebook.from_state(book.state())
        assert torch.equal(again.vectors, book.vectors) and again.decay == book.decay


# ---------------------------------------------------------------------------
# Nearest codevector
# ---------------------------------------------------------------------------

class TestNearest:
    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(0)
        mismatches = 0
        for _ in range(1000):
            k = int(rng.integers(1, 65))
            d = int(rng.integers(1, 9))
            n = int(rng.integers(1, 50))
            z = rng.normal(size=(n, d))
            c = rng.normal(size=(k, d))
            oracle = np.argmin(((z[:, None, :] - c[None, :, :]) ** 2).sum(-1), axis=1)
            idx, _ = nearest_codevectors(torch.from_numpy(z), torch.from_numpy(c))
            mismatches += int((idx.numpy() != oracle).sum())
        assert mismatches == 0

    def test_ties_go_to_lowest_index(self):
        vectors = torch.tensor([[1.0, 0.0], [-1.0, 0.0], [1.0, 0.0]])
        idx, _ = nearest_codevectors(torch.tensor([[0.0, 0.0], [1.0, 0.0]]), vectors)
        assert idx.tolist() == [0, 0]

    def test_quantize_returns_codevectors(self):
        book = _book(16, 4)
        z = LatentGrid(torch.randn(2, 3, 5, 4, dtype=torch.float64))
        indices, q = quantize(z, book)
        assert indices.data.shape == (2, 3, 5)
        assert torch.equal(q.data, book.vectors[indices.data])

    def test_quantize_is_idempotent(self):
        book = _book(16, 4)
        indices, q = quantize(LatentGrid(torch.randn(2, 3, 5, 4, dtype=torch.float64)), book)
        again, q2 = quantize(q, book)
        assert torch.equal(again.data, indices.data)
        assert torch.equal(q2.data, q.data)

    def test_dim_mismatch(self):
        with pytest.raises(ShapeError):
            quantize(LatentGrid(torch.zeros(1, 2, 2, 3)), _book(4, 4))

    def test_gradient_reaches_codebook(self):
        vectors = torch.randn(4, 2, requires_grad=True)
        _, q = nearest_codevectors(torch.randn(5, 2), vectors)
        q.sum().backward()
        assert vectors.grad is not None and float(vectors.grad.abs().sum()) > 0


# ---------------------------------------------------------------------------
# EMA
# ---------------------------------------------------------------------------

class TestEMA:
    def test_converges_to_cluster_means(self):
        gen = torch.Generator().manual_seed(0)
        means = torch.tensor([[-5.0, 3.0], [4.0, -2.0]], dtype=torch.float64)
        book = Codebook.from_vectors(torch.tensor([[-1.0, 1.0], [1.0, -1.0]], dtype=torch.float64), decay=0.95)
        for _ in range(500):
            labels = torch.randint(2, (2048,), generator=gen)
            z = means[labels] + 0.3 * torch.randn(2048, 2, generator=gen, dtype=torch.float64)
            indices, _ = quantize(LatentGrid(z[None, None]), book)
            book = ema_update(book, LatentGrid(z[None, None]), indices)
        assert torch.max(torch.abs(book.vectors - means)).item() < 1e-2

    def test_unassigned_vector_kept(self):
        book = Codebook.from_vectors(torch.tensor([[0.0], [100.0]], dtype=torch.float64))
        z = torch.tensor([[[[1.0]]]], dtype=torch.float64)
        updated = ema_update(book, LatentGrid(z), IndexGrid(torch.zeros(1, 1, 1)))
        assert updated.vectors[1].item() == 100.0
        assert updated.ema_counts[1].item() == pytest.approx(0.95)

    def test_zero_decay_jumps_to_batch_mean(self):
        vectors = torch.tensor([[-1.0, 0.0], [1.0, 0.0], [50.0, 50.0]], dtype=torch.float64)
        book = Codebook.from_vectors(vectors, decay=0.0)
        z = torch.tensor([[-2.0, 1.0], [-4.0, 3.0], [3.0, -1.0], [5.0, 1.0], [4.0, 0.0]], dtype=torch.float64)
        indices, _ = quantize(LatentGrid(z[None, None]), book)
        assert indices.data.reshape(-1).tolist() == [0, 0, 1, 1, 1]
        updated = ema_update(book, LatentGrid(z[None, None]), indices)
        # Laplace smoothing perturbs the counts by ~eps/n
        assert torch.allclose(updated.vectors[0], torch.tensor([-3.0, 2.0], dtype=torch.float64), rtol=1e-5)
        assert torch.allclose(updated.vectors[1], torch.tensor([4.0, 0.0], dtype=torch.float64), rtol=1e-5, atol=1e-9)
        assert updated.vectors[2].tolist() == [50.0, 50.0]

    def test_stationary_stream(self):
        mu = torch.tensor([2.0, -1.0], dtype=torch.float64)
        book = Codebook.from_vectors(torch.zeros(1, 2, dtype=torch.float64))
        z = LatentGrid(mu.expand(1, 4, 4, 2).clone())
        for _ in range(200):
            indices, _ = quantize(z, book)
            book = ema_update(book, z, indices)
        assert torch.linalg.norm(book.vectors[0] - mu).item() < 1e-3

    def test_source_unmodified(self):
        book = _book()
        before = book.vectors.clone()
        z = LatentGrid(torch.randn(1, 2, 2, 4, dtype=torch.float64))
        indices, _ = quantize(z, book)
        ema_update(book, z, indices)
        assert torch.equal(book.vectors, before)

    def test_index_out_of_range(self):
        with pytest.raises(ShapeError):
            ema_update(_book(4, 4), LatentGrid(torch.zeros(1, 1, 1, 4)), IndexGrid(torch.tensor([[[9]]])))

    def test_reseed_dead(self):
        book = Codebook.from_vectors(torch.zeros(4, 2, dtype=torch.float64), counts=torch.tensor([5.0, 0.0, 5.0, 0.0]))
        latents = torch.full((10, 2), 7.0, dtype=torch.float64)
        reseeded, n = reseed_dead_codevectors(book, latents, torch.Generator().manual_seed(0))
        assert n == 2
        assert reseeded.vectors[1].tolist() == [7.0, 7.0]
        assert reseeded.vectors[0].tolist() == [0.0, 0.0]


class TestReservoir:
    def test_keeps_everything_under_capacity(self):
        res = LatentReservoir(2, torch.Generator().manual_seed(0), capacity=50)
        for i in range(4):
            res.add(torch.full((1, 2, 5, 2), float(i)))
        assert len(res) == 40 and res.seen == 40
        assert sorted(set(res.rows[:, 0].tolist())) == [0.0, 1.0, 2.0, 3.0]

    def test_sample_spans_the_whole_stream(self):
        res = LatentReservoir(1, torch.Generator().manual_seed(0), capacity=100)
        for i in range(100):
            res.add(torch.full((100, 1), float(i)))
        assert len(res) == 100 and res.seen == 10_000
        assert abs(res.rows.mean().item() - 49.5) < 12
        assert res.rows.min().item() < 25 and res.rows.max().item() > 75

    def test_reseed_draws_from_every_batch(self):
        book = Codebook.from_vectors(torch.zeros(64, 2, dtype=torch.float64), counts=torch.zeros(64))
        res = LatentReservoir(2, torch.Generator().manual_seed(0))
        res.add(torch.full((32, 2), 1.0, dtype=torch.float64))
        res.add(torch.full((32, 2), 2.0, dtype=torch.float64))
        reseeded, n = reseed_dead_codevectors(book, res.rows, torch.Generator().manual_seed(1))
        assert n == 64
        assert set(reseeded.vectors[:, 0].tolist()) == {1.0, 2.0}

    def test_bad_capacity(self):
        with pytest.raises(ShapeError):
            LatentReservoir(2, torch.Generator(), capacity=0)


# ---------------------------------------------------------------------------
# Loss terms
# ---------------------------------------------------------------------------

class TestLossTerms:
    def test_straight_through_gradient_is_identity(self):
        z = torch.randn(3, 4, requires_grad=True)
        q = torch.randn(3, 4)
        out = straight_through(z, q)
        assert torch.allclose(out, q)
        out.sum().backward()
        assert torch.equal(z.grad, torch.ones_like(z))

    def test_vq_losses_stop_gradients(self):
        z = torch.randn(6, 4, requires_grad=True)
        q = torch.randn(6, 4, requires_grad=True)
        codebook_loss, commitment = vq_losses(z, q, beta=0.25)
        assert commitment.item() == pytest.approx(0.25 * codebook_loss.item())
        (gz,) = torch.autograd.grad(codebook_loss, z, allow_unused=True, retain_graph=True)
        assert gz is None
        (gq,) = torch.autograd.grad(commitment, q, allow_unused=True)
        assert gq is None

    def test_vq_losses_single_vector(self):
        codebook_loss, commitment = vq_losses(torch.tensor([[1.0, 0.0]]), torch.tensor([[0.0, 0.0]]), beta=0.25)
        assert (codebook_loss.item(), commitment.item()) == (1.0, 0.25)

    def test_utilization(self):
        streams = [torch.tensor([0, 1, 1]), np.array([[3, 3]])]
        assert utilization(streams, 8) == pytest.approx(3 / 8)

    def test_utilization_rejects_out_of_range(self):
        with pytest.raises(CorruptStreamError):
            utilization([torch.tensor([8])], 8)


# ---------------------------------------------------------------------------
# RVQC files
# ---------------------------------------------------------------------------

class TestCodebookFile:
    def test_save_and_load(self, tmp_path):
        books = [_book(8, 4, seed=1), _book(4, 4, seed=2)]
        path = save_codebooks(tmp_path / "1" / "8.rvqc", books, channel=1)
        loaded = load_codebooks(path)
        assert [b.size for b in loaded] == [8, 4]
        assert all(b.channel == 1 for b in loaded)
        assert torch.equal(loaded[0].vectors, books[0].vectors.to(torch.float32))

    def test_record_offsets(self):
        buf = encode_codebook(_book(3, 2)) + encode_codebook(_book(5, 2))
        first, offset = decode_codebook(buf)
        second, end = decode_codebook(buf, offset)
        assert (first.size, second.size, end) == (3, 5, len(buf))

    def test_flipped_byte_fails_checksum(self):
        buf = bytearray(encode_codebook(_book()))
        buf[20] ^= 0x40
        with pytest.raises(ChecksumError):
            decode_codebook(bytes(buf))

    def test_checksum_covers_header(self):
        buf = bytearray(encode_codebook(_book(), channel=1))
        buf[11] = 2
        with pytest.raises(ChecksumError):
            decode_codebook(bytes(buf))

    def test_truncated(self):
        buf = encode_codebook(_book())
        with pytest.raises(CorruptStreamError):
            decode_codebook(buf[:-6])

    def test_bad_magic(self):
        buf = b"XXXX" + encode_codebook(_book())[4:]
        with pytest.raises(CorruptStreamError):
            decode_codebook(buf)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.rvqc"
        path.write_bytes(b"")
        with pytest.raises(CorruptStreamError):
            load_codebooks(path)
