"""Tests for holocodec.evaluation: metrics, BD deltas, RD sweeps and CSV files."""
from __future__ import annotations

import math

import numpy as np
import pytest
import torch
from scipy.integrate import trapezoid

from holocodec.errors import DomainError, RangeError, RegistryMissError, ShapeError, UndefinedOverlapError
from holocodec.evaluation.bd import RDCurve, bd_psnr, bd_rate
from holocodec.evaluation.metrics import capped, evaluate_phase, psnr
from holocodec.evaluation.sweep import (
    SweepRow,
    curve_from_rows,
    plot_rd_curves,
    rd_sweep,
    read_curve_csv,
    read_sweep_csv,
    summary_rows,
    write_curve_csv,
    write_sweep_csv,
)
from holocodec.optics.propagation import AmplitudeMap
from holocodec.optics.retrieval import RetrievalSettings, gerchberg_saxton

ANCHOR = RDCurve(((0.1, 28.0), (0.2, 31.0), (0.4, 33.5), (0.8, 35.0)))


def _dense_mean(x: np.ndarray, y: np.ndarray, lo: float, hi: float) -> float:
    poly = np.polyfit(x, y, min(3, len(x) - 1))
    grid = np.linspace(lo, hi, 20001)
    return trapezoid(np.polyval(poly, grid), grid) / (hi - lo)


def _random_curve(rng, shift: float = 0.0) -> RDCurve:
    rates = np.array([0.1, 0.2, 0.4, 0.8, 1.2]) * np.exp(rng.uniform(-0.1, 0.1, size=5))
    quality = 30 + 4 * np.log(rates) + shift + rng.normal(0, 0.3, size=rates.size)
    return RDCurve(tuple(zip(rates.tolist(), np.sort(quality).tolist())))


class TestRDCurve:
    def test_points_are_sorted(self):
        curve = RDCurve(((0.4, 33.0), (0.1, 28.0), (0.2, 31.0)))
        assert curve.rates.tolist() == [0.1, 0.2, 0.4]
        assert len(curve) == 3

    @pytest.mark.parametrize("points", [(), ((0.1, 1.0), (0.1, 2.0)), ((0.0, 1.0),), ((0.1, math.nan),)])
    def test_invalid(self, points):
        with pytest.raises(DomainError):
            RDCurve(points)


class TestBD:
    def test_identical_curves(self):
        assert bd_rate(ANCHOR, ANCHOR) == 0.0
        assert bd_psnr(ANCHOR, ANCHOR) == 0.0

    def test_doubled_rate(self):
        doubled = RDCurve(tuple((2 * r, q) for r, q in ANCHOR.points))
        assert bd_rate(ANCHOR, doubled) == pytest.approx(100.0, abs=1e-6)
        assert bd_rate(doubled, ANCHOR) == pytest.approx(-50.0, abs=1e-6)

    def test_constant_quality_gain(self):
        better = RDCurve(tuple((r, q + 1.5) for r, q in ANCHOR.points))
        assert bd_psnr(ANCHOR, better) == pytest.approx(1.5, abs=1e-9)

    def test_matches_dense_integration(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = _random_curve(rng)
            t = _random_curve(rng, shift=float(rng.uniform(-1, 1)))
            lo, hi = max(a.qualities.min(), t.qualities.min()), min(a.qualities.max(), t.qualities.max())
            diff = _dense_mean(t.qualities, np.log(t.rates), lo, hi) - _dense_mean(a.qualities, np.log(a.rates), lo, hi)
            assert bd_rate(a, t) == pytest.approx((math.exp(diff) - 1) * 100, rel=1e-3, abs=1e-3)
            ra, rt = np.log(a.rates), np.log(t.rates)
            lo, hi = max(ra.min(), rt.min()), min(ra.max(), rt.max())
            expected = _dense_mean(rt, t.qualities, lo, hi) - _dense_mean(ra, a.qualities, lo, hi)
            assert bd_psnr(a, t) == pytest.approx(expected, rel=1e-3, abs=1e-3)

    def test_three_points_use_quadratic(self):
        short = RDCurve(ANCHOR.points[:3])
        shifted = RDCurve(tuple((r, q + 0.5) for r, q in short.points))
        assert bd_psnr(short, shifted) == pytest.approx(0.5, abs=1e-9)

    def test_too_few_points(self):
        with pytest.raises(RangeError):
            bd_rate(ANCHOR, RDCurve(((0.1, 28.0), (0.2, 30.0))))

    def test_disjoint_curves(self):
        far = RDCurve(((5.0, 50.0), (6.0, 51.0), (7.0, 52.0)))
        with pytest.raises(UndefinedOverlapError):
            bd_rate(ANCHOR, far)
        with pytest.raises(UndefinedOverlapError):
            bd_psnr(ANCHOR, far)


class TestMetrics:
    def test_psnr_known_value(self):
        a = torch.zeros(4, 4, dtype=torch.float64)
        b = torch.full((4, 4), 2.0, dtype=torch.float64)
        assert psnr(a, b) == pytest.approx(0.0)
        assert psnr(a, b, peak=20.0) == pytest.approx(20.0)

    def test_identical_inputs(self):
        x = torch.rand(8, 8)
        assert psnr(x, x) == math.inf
        assert capped(psnr(x, x)) == 100.0

    def test_errors(self):
        with pytest.raises(ShapeError):
            psnr(torch.zeros(2, 2), torch.zeros(3, 3))
        with pytest.raises(DomainError):
            psnr(torch.ones(2, 2), torch.zeros(2, 2))

    def test_evaluate_phase(self, samples, optics):
        target = AmplitudeMap(samples[0].target)
        retrieved = gerchberg_saxton(target, optics, RetrievalSettings(iterations=30, seed=0))
        gen = torch.Generator().manual_seed(0)
        noise = (torch.rand(target.shape, generator=gen, dtype=torch.float64) * 2 - 1) * math.pi * 0.999
        good = evaluate_phase(retrieved, samples[0].target, optics, msssim_levels=2)
        bad = evaluate_phase(noise, samples[0].target, optics, msssim_levels=2)
        assert set(good) == {"psnr", "ssim", "msssim"}
        assert good["psnr"] > bad["psnr"]
        assert good["ssim"] <= 1.0

    def test_evaluate_phase_shape(self, samples, optics):
        with pytest.raises(ShapeError):
            evaluate_phase(torch.zeros(32, 64), torch.zeros(30, 30), optics)


class TestSweep:
    def test_rows_and_curve(self, bundle, registry, samples):
        curve, rows = rd_sweep(bundle, registry, samples[:2], [4, 16], huffman=False)
        assert len(rows) == 4 and len(curve) == 2
        assert {r.K for r in rows} == {4, 16}
        assert all(0 < r.psnr <= 100 for r in rows)
        means = summary_rows(rows)
        assert [m.K for m in means] == [4, 16]
        assert curve_from_rows(rows, 1).points == curve.points

    def test_unknown_size(self, bundle, registry, samples):
        with pytest.raises(RegistryMissError):
            rd_sweep(bundle, registry, samples, [3])

    def test_empty_corpus(self, bundle, registry):
        with pytest.raises(DomainError):
            rd_sweep(bundle, registry, [], [4])


class TestCSV:
    def _rows(self):
        return [
            SweepRow("a.png", ch, k, 0.01 * k, 0.008 * k, 20.0 + k, 0.5, 0.6)
            for ch in (0, 1, 2) for k in (8, 16)
        ] + [SweepRow("b.png", 0, 8, 0.08, 0.07, math.inf, 1.0, 1.0)]

    def test_sweep_round_trip(self, tmp_path):
        path = write_sweep_csv(tmp_path / "rd.csv", self._rows())
        header = path.read_text().splitlines()[0]
        assert header == "image,channel,K,bpp_fixed,bpp_entropy,psnr,ssim,msssim"
        back = read_sweep_csv(path)
        per_image = [r for r in back if r.image != "mean"]
        assert len(per_image) == 7
        assert max(r.psnr for r in back) == 100.0
        assert {r.channel for r in back if r.image == "mean"} == {0, 1, 2, "rgb"}

    def test_rejects_foreign_csv(self, tmp_path):
        path = tmp_path / "other.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DomainError):
            read_sweep_csv(path)

    def test_curve_round_trip(self, tmp_path):
        path = write_curve_csv(tmp_path / "curve.csv", ANCHOR)
        assert read_curve_csv(path) == ANCHOR

    def test_curve_from_unknown_channel(self):
        with pytest.raises(DomainError):
            curve_from_rows(self._rows(), 5)

    def test_plot(self, tmp_path):
        path = plot_rd_curves({"anchor": ANCHOR}, tmp_path / "rd.png")
        assert path.stat().st_size > 0
