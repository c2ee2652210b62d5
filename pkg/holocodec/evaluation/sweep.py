"""Rate-distortion sweep over codebook sizes, CSV emission and RD plots."""
from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

from holocodec.bitstream.container import HoloBitstream
from holocodec.codec.checkpoint import CodecBundle
from holocodec.codec.pipeline import compress_sample, decompress_stream
from holocodec.config import CSV_FIELDS, PSNR_CAP_DB
from holocodec.data import HologramSample
from holocodec.errors import DomainError
from holocodec.evaluation.bd import RDCurve
from holocodec.evaluation.metrics import capped, evaluate_phase
from holocodec.transport.registry import CodebookRegistry

logger = logging.getLogger("holocodec")

MEAN_ROW = "mean"
RGB_CHANNEL = "rgb"


@dataclass
class SweepRow:
    image: str
    channel: int | str
    K: int
    bpp_fixed: float
    bpp_entropy: float
    psnr: float
    ssim: float
    msssim: float


def rd_sweep(
    bundle: CodecBundle,
    registry: CodebookRegistry,
    samples: list[HologramSample],
    sizes: list[int],
    huffman: bool = True,
) -> tuple[RDCurve, list[SweepRow]]:
    """Compress and decode every sample at every size id; returns the mean-PSNR curve and per-image rows."""
    if not samples:
        raise DomainError("empty corpus")
    channel = bundle.channel
    pairs = {k: registry.get(channel, k) for k in sizes}
    rows: list[SweepRow] = []
    points = []
    for k in sorted(pairs):
        size_rows = []
        for sample in samples:
            stream = compress_sample(sample.inputs(), bundle.model, pairs[k], bundle.optics, channel, huffman)
            wire = stream.serialize()
            phase = decompress_stream(HoloBitstream.parse(wire), bundle.model, pairs[k])
            q = evaluate_phase(phase, sample.target, bundle.optics, bundle.weights.msssim_levels)
            size_rows.append(SweepRow(sample.name, channel, k, stream.bpp_fixed(), 8 * len(wire) / stream.pixels,
                                      capped(q["psnr"]), q["ssim"], q["msssim"]))
        mean = _mean_row(size_rows, MEAN_ROW, channel, k)
        logger.info("K=%d: %.4f bpp, %.2f dB PSNR over %d image(s)", k, mean.bpp_entropy, mean.psnr, len(size_rows))
        rows.extend(size_rows)
        points.append((mean.bpp_entropy, mean.psnr))
    return RDCurve(tuple(points)), rows


def _mean_row(rows: list[SweepRow], image: str, channel, k: int) -> SweepRow:
    n = len(rows)
    return SweepRow(
        image=image,
        channel=channel,
        K=k,
        bpp_fixed=sum(r.bpp_fixed for r in rows) / n,
        bpp_entropy=sum(r.bpp_entropy for r in rows) / n,
        psnr=sum(r.psnr for r in rows) / n,
        ssim=sum(r.ssim for r in rows) / n,
        msssim=sum(r.msssim for r in rows) / n,
    )


def summary_rows(rows: list[SweepRow]) -> list[SweepRow]:
    """Per-(channel, K) mean rows, plus RGB-mean rows when several channels are present."""
    per_image = [r for r in rows if r.image != MEAN_ROW]
    groups: dict[tuple, list[SweepRow]] = {}
    for r in per_image:
        groups.setdefault((r.channel, r.K), []).append(r)
    out = [_mean_row(g, MEAN_ROW, ch, k) for (ch, k), g in sorted(groups.items(), key=lambda kv: (str(kv[0][0]), kv[0][1]))]
    channels = {r.channel for r in per_image}
    if len(channels) > 1:
        by_k: dict[int, list[SweepRow]] = {}
        for r in out:
            by_k.setdefault(r.K, []).append(r)
        out += [_mean_row(g, MEAN_ROW, RGB_CHANNEL, k) for k, g in sorted(by_k.items()) if len(g) == len(channels)]
    return out


# ── CSV ──────────────────────────────────────────────────────────────────────

def write_sweep_csv(path: str | Path, rows: list[SweepRow], summary: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = [r for r in rows if r.image != MEAN_ROW]
    if summary:
        body += summary_rows(body)
    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for r in body:
            d = asdict(r)
            d["psnr"] = capped(d["psnr"], PSNR_CAP_DB)
            writer.writerow({k: repr(float(v)) if isinstance(v, float) else v for k, v in d.items()})
    logger.info("Wrote %d row(s) to %s", len(body), path)
    return path


def read_sweep_csv(path: str | Path) -> list[SweepRow]:
    with Path(path).open(newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != CSV_FIELDS:
            raise DomainError(f"{path} does not follow the sweep schema {CSV_FIELDS}")
        rows = []
        for d in reader:
            channel = d["channel"]
            rows.append(SweepRow(
                image=d["image"],
                channel=int(channel) if channel.isdigit() else channel,
                K=int(d["K"]),
                bpp_fixed=float(d["bpp_fixed"]),
                bpp_entropy=float(d["bpp_entropy"]),
                psnr=float(d["psnr"]),
                ssim=float(d["ssim"]),
                msssim=float(d["msssim"]),
            ))
    return rows


def curve_from_rows(rows: list[SweepRow], channel: int | str, metric: str = "psnr") -> RDCurve:
    """Mean (bpp_entropy, metric) per K for one channel (or "rgb")."""
    means = [r for r in summary_rows(rows) if r.channel == channel]
    if not means:
        raise DomainError(f"no rows for channel {channel}")
    return RDCurve(tuple((r.bpp_entropy, getattr(r, metric)) for r in means))


def write_curve_csv(path: str | Path, curve: RDCurve) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["bpp", "quality"])
        for r, q in curve.points:
            writer.writerow([repr(r), repr(q)])
    return path


def read_curve_csv(path: str | Path) -> RDCurve:
    with Path(path).open(newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["bpp", "quality"]:
            raise DomainError(f"{path} is not an RD curve file")
        return RDCurve(tuple((float(r), float(q)) for r, q in reader))


# ── Plots ────────────────────────────────────────────────────────────────────

def plot_rd_curves(curves: dict[str, RDCurve], path: str | Path, ylabel: str = "PSNR (dB)") -> Path:
    """Quality vs. Bpp, one line per curve; PNG or SVG by file suffix."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    for name, curve in curves.items():
        ax.plot(curve.rates, curve.qualities, marker="o", label=name)
    ax.set_xlabel("Bpp")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    if curves:
        ax.legend()
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path
