"""Command-line entry point.

Usage:
    python -m holocodec propagate image.png --out-dir out/
    python -m holocodec propagate out/phase.npy --reconstruct --out-dir out/
    python -m holocodec gs image.png --iterations 100 --seed 0
    python -m holocodec sgd image.png --iterations 100 --step-size 0.1 --seed 0
    python -m holocodec train --synthetic 32 --stage1-epochs 50 --out runs/green.pt --seed 0
    python -m holocodec adapt runs/green.pt --images data/ --stage2-epochs 10 --seed 0
    python -m holocodec export-books runs/green.pt --books books/
    python -m holocodec compress image.png -c runs/green.pt --size 64 --out image.ravq
    python -m holocodec decompress image.ravq -c runs/green.pt --out-dir out/
    python -m holocodec send data/ -c runs/green.pt --size 64 --host 127.0.0.1 --port 5050
    python -m holocodec recv -c runs/green.pt --port 5050 --out-dir received/
    python -m holocodec evaluate data/ -c runs/green.pt --size 64
    python -m holocodec rd-curve data/ -c runs/green.pt --csv rd.csv --plot rd.png

Every subcommand accepts --config FILE (JSON RunConfig); flags override file values.
Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 invalid configuration.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
import torch

from holocodec.adapt.adapter import export_books
from holocodec.adapt.clustering import export_cluster_books
from holocodec.bitstream.container import HoloBitstream, is_multichannel, pack_multichannel, unpack_multichannel
from holocodec.codec.checkpoint import CodecBundle, load_checkpoint, save_checkpoint
from holocodec.codec.pipeline import compress_sample, decompress_stream
from holocodec.codec.training import train, train_stage2
from holocodec.data import (
    build_dataset,
    fit_to_frame,
    load_image_dir,
    load_intensity_png,
    load_phase,
    save_amplitude_png,
    save_phase_png,
    synthetic_corpus,
)
from holocodec.errors import HoloCodecError, InvalidConfigError, SequencingError
from holocodec.evaluation.bd import bd_psnr, bd_rate
from holocodec.evaluation.metrics import capped, evaluate_phase
from holocodec.evaluation.sweep import (
    RGB_CHANNEL,
    curve_from_rows,
    plot_rd_curves,
    rd_sweep,
    read_curve_csv,
    write_curve_csv,
    write_sweep_csv,
)
from holocodec.optics.propagation import PhaseMap, amplitude_from_intensity, reconstruct_amplitude
from holocodec.optics.retrieval import gerchberg_saxton, sgd_phase_retrieval
from holocodec.settings import DEFAULTS, RunConfig
from holocodec.transport.registry import CodebookRegistry
from holocodec.transport.session import FileChannel, connect, listen, receive, send, serve_once
from holocodec.utils import seed_everything

logger = logging.getLogger("holocodec")

USAGE_EXIT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _report("UsageError", USAGE_EXIT, message)
        sys.exit(USAGE_EXIT)


def _report(name: str, code: int, message: str) -> None:
    print(json.dumps({"error": name, "exit_code": code, "message": message}), file=sys.stderr)


def _emit(record: dict) -> None:
    print(json.dumps(record, default=float))


# ── Flags backed by the run config ───────────────────────────────────────────

_CONFIG_FLAGS: dict[str, tuple[str, str]] = {}


def _config_flag(parser, flag: str, block: str, key: str, help: str, **kwargs) -> None:
    """A flag that overrides config value block.key; absent flags leave the config alone."""
    dest = flag.lstrip("-").replace("-", "_")
    _CONFIG_FLAGS[dest] = (block, key)
    default = DEFAULTS[block] if block == "seed" else DEFAULTS[block][key]
    parser.add_argument(flag, dest=dest, default=argparse.SUPPRESS, help=f"{help} (default: {default})", **kwargs)


def _pair(text: str) -> list[int]:
    try:
        h, w = text.lower().split("x")
        return [int(h), int(w)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected HxW, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _optics_flags(p) -> None:
    _config_flag(p, "--channel", "optics", "channel", "colour channel id: 0 red, 1 green, 2 blue", type=int)
    _config_flag(p, "--distance", "optics", "distance", "propagation distance in meters", type=float)
    _config_flag(p, "--pad-factor", "optics", "pad_factor", "zero-padding factor for propagation", type=float)
    _config_flag(p, "--frame", "optics", "frame", "hologram frame HxW", type=_pair)
    _config_flag(p, "--initializer", "optics", "initializer", "object-phase initializer: random, zeros, gs, sgd")


def _corpus_flags(p, positional: bool = True) -> None:
    if positional:
        p.add_argument("images", nargs="?", help="PNG image or directory of PNG images")
    else:
        p.add_argument("--images", help="PNG image or directory of PNG images")
    p.add_argument("--synthetic", type=int, help="use N synthetic images instead of PNG input")
    p.add_argument("--no-cache", action="store_true", help="regenerate holograms instead of using the dataset cache")


def _codec_flags(p, multiple: bool = True) -> None:
    if multiple:
        p.add_argument("-c", "--checkpoint", action="append", required=True,
                       help="codec checkpoint; repeat once per colour channel")
    _config_flag(p, "--books", "paths", "books", "codebook registry directory")


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    given: dict[str, dict] = {}
    for dest, (block, key) in _CONFIG_FLAGS.items():
        if hasattr(args, dest):
            given.setdefault(block, {})[key] = getattr(args, dest)
    for block, values in given.items():
        cfg.override(block, **values)
    return cfg


def _seed(args, cfg: RunConfig) -> int:
    if cfg.seed is None:
        if args.strict:
            raise InvalidConfigError(f"'{args.command}' is randomized; pass --seed or set seed in the config")
        logger.warning("No seed given; using 0")
        return 0
    return cfg.seed


# ── Inputs ───────────────────────────────────────────────────────────────────

def _images(args, cfg: RunConfig, channel: int, seed: int) -> list[tuple[str, np.ndarray]]:
    if args.synthetic:
        return synthetic_corpus(args.synthetic, cfg.frame, seed)
    if not args.images:
        raise InvalidConfigError("give a PNG image or directory, or --synthetic N")
    out = []
    for name, path in load_image_dir(args.images):
        intensity = load_intensity_png(path, channel)
        out.append((name, fit_to_frame(intensity, cfg.frame)))
    return out


def _samples(args, cfg: RunConfig, optics, channel: int, seed: int):
    images = _images(args, cfg, channel, seed)
    return build_dataset(images, optics, cfg.initializer, seed, channel, use_cache=not args.no_cache,
                         directory=cfg.cache_dir)


def _bundles(args) -> dict[int, CodecBundle]:
    bundles: dict[int, CodecBundle] = {}
    for path in args.checkpoint:
        bundle = load_checkpoint(path)
        if bundle.channel in bundles:
            raise InvalidConfigError(f"two checkpoints for channel {bundle.channel}")
        bundles[bundle.channel] = bundle
    return bundles


def _single(bundles: dict[int, CodecBundle]) -> CodecBundle:
    if len(bundles) != 1:
        raise InvalidConfigError("this command takes exactly one checkpoint")
    return next(iter(bundles.values()))


# ── Commands ─────────────────────────────────────────────────────────────────

def cmd_propagate(args, cfg: RunConfig):
    """Image -> complex hologram at +d, or (--reconstruct) phase map -> amplitude at -d."""
    optics = cfg.optics()
    out_dir = Path(args.out_dir)
    if args.reconstruct:
        phase = load_phase(args.input)
        recon = reconstruct_amplitude(PhaseMap(phase), optics)
        path = save_amplitude_png(out_dir / f"{Path(args.input).stem}_recon.png", recon.data)
        _emit({"input": args.input, "reconstruction": str(path)})
        return
    seed = _seed(args, cfg)
    intensity = fit_to_frame(load_intensity_png(args.input, cfg.channel), cfg.frame)
    name = Path(args.input).stem
    (sample,) = build_dataset([(name, intensity)], optics, cfg.initializer, seed, cfg.channel, use_cache=False)
    out_dir.mkdir(parents=True, exist_ok=True)
    np.save(out_dir / f"{name}_hologram.npy", sample.hologram.numpy())
    save_amplitude_png(out_dir / f"{name}_amplitude.png", sample.hologram.abs())
    save_phase_png(out_dir / f"{name}_phase.png", torch.angle(sample.hologram))
    _emit({"input": args.input, "hologram": str(out_dir / f"{name}_hologram.npy")})


def _retrieve(args, cfg: RunConfig, solver) -> None:
    seed = _seed(args, cfg)
    channel = cfg.channel
    optics = cfg.optics()
    out_dir = Path(args.out_dir)
    for i, (name, intensity) in enumerate(_images(args, cfg, channel, seed)):
        target = amplitude_from_intensity(intensity)
        trace: list[float] = []
        phase = solver(target, optics, cfg.retrieval(seed + i), trace)
        quality = evaluate_phase(phase, target.data, optics, cfg.weights().msssim_levels)
        out_dir.mkdir(parents=True, exist_ok=True)
        np.save(out_dir / f"{name}_{args.command}.npy", phase.data.numpy())
        save_phase_png(out_dir / f"{name}_{args.command}.png", phase.data)
        _emit({
            "image": name,
            "method": args.command,
            "iterations": len(trace),
            "final_loss": trace[-1] if trace else None,
            "psnr": capped(quality["psnr"]),
            "ssim": quality["ssim"],
            "msssim": quality["msssim"],
        })


def cmd_gs(args, cfg: RunConfig):
    _retrieve(args, cfg, gerchberg_saxton)


def cmd_sgd(args, cfg: RunConfig):
    _retrieve(args, cfg, sgd_phase_retrieval)


def cmd_train(args, cfg: RunConfig):
    seed = _seed(args, cfg)
    seed_everything(seed)
    channel = cfg.channel
    optics = cfg.optics()
    samples = _samples(args, cfg, optics, channel, seed)
    profile, schedule, weights = cfg.profile(), cfg.schedule(), cfg.weights()
    dtype = torch.float64 if cfg.float64 else torch.float32
    result = train(samples, profile, schedule, optics, weights, dtype=dtype, adapter_kwargs=cfg.adapter_kwargs())
    bundle = CodecBundle.from_result(result, profile, optics, schedule, weights, channel)
    save_checkpoint(args.out, bundle)
    _emit({
        "checkpoint": args.out,
        "channel": channel,
        "stage1_epochs": result.stage1_epochs_done,
        "initial_loss": result.stage1_trace[0] if result.stage1_trace else None,
        "final_loss": result.stage1_trace[-1] if result.stage1_trace else None,
        "adapters": result.adapters is not None,
    })


def cmd_adapt(args, cfg: RunConfig):
    """Second training stage on an existing checkpoint."""
    seed = _seed(args, cfg)
    bundle = load_checkpoint(args.checkpoint)
    samples = _samples(args, cfg, bundle.optics, bundle.channel, seed)
    file_schedule = cfg.schedule()
    schedule = replace(bundle.schedule, stage2_epochs=file_schedule.stage2_epochs,
                       stage2_sizes=file_schedule.stage2_sizes, seed=seed)
    adapters = train_stage2(
        bundle.model, bundle.books, samples, schedule, bundle.optics, bundle.weights,
        adapters=bundle.adapters, stage1_complete=bundle.stage1_complete, adapter_kwargs=cfg.adapter_kwargs(),
    )
    bundle.adapters = adapters
    bundle.stage2_trace = list(adapters.loss_trace)
    out = args.out or args.checkpoint
    save_checkpoint(out, bundle)
    _emit({"checkpoint": out, "stage2_epochs": schedule.stage2_epochs, "final_loss": adapters.loss_trace[-1]
           if adapters.loss_trace else None})


def cmd_export_books(args, cfg: RunConfig):
    bundle = load_checkpoint(args.checkpoint)
    if args.method == "adapter":
        if bundle.adapters is None:
            raise SequencingError("checkpoint has no trained adapters; run 'adapt' first or use --method kmeans")
        paths = export_books(bundle.adapters, bundle.books, bundle.channel, cfg.books_dir)
    else:
        paths = export_cluster_books(bundle.books, bundle.channel, cfg.books_dir, seed=_seed(args, cfg))
    _emit({"channel": bundle.channel, "books": [str(p) for p in paths]})


def _channel_inputs(path: str, cfg: RunConfig, bundles: dict[int, CodecBundle], seed: int, no_cache: bool):
    inputs = {}
    name = Path(path).stem
    for ch, bundle in sorted(bundles.items()):
        intensity = fit_to_frame(load_intensity_png(path, ch), cfg.frame)
        (sample,) = build_dataset([(name, intensity)], bundle.optics, cfg.initializer, seed, ch,
                                  use_cache=not no_cache, directory=cfg.cache_dir)
        inputs[ch] = sample.inputs()
    return inputs


def cmd_compress(args, cfg: RunConfig):
    seed = _seed(args, cfg)
    bundles = _bundles(args)
    registry = CodebookRegistry.load(cfg.books_dir)
    inputs = _channel_inputs(args.input, cfg, bundles, seed, args.no_cache)
    streams = {}
    for ch, bundle in bundles.items():
        stream = compress_sample(inputs[ch], bundle.model, registry.get(ch, args.size), bundle.optics, ch,
                                 huffman=not args.no_huffman)
        streams[ch] = stream
    if len(streams) == 1:
        data = next(iter(streams.values())).serialize()
    else:
        data = pack_multichannel({ch: s.serialize() for ch, s in streams.items()})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(data)
    pixels = next(iter(streams.values())).pixels
    _emit({
        "out": str(out),
        "bytes": len(data),
        "bpp": 8 * len(data) / pixels,
        "bpp_fixed": {ch: s.bpp_fixed() for ch, s in streams.items()},
    })


def cmd_decompress(args, cfg: RunConfig):
    bundles = _bundles(args)
    registry = CodebookRegistry.load(cfg.books_dir)
    data = Path(args.input).read_bytes()
    buffers = list(unpack_multichannel(data).values()) if is_multichannel(data) else [data]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    for buf in buffers:
        stream = HoloBitstream.parse(buf)
        bundle = bundles.get(stream.channel)
        if bundle is None:
            raise InvalidConfigError(f"no checkpoint given for channel {stream.channel}")
        phase = decompress_stream(stream, bundle.model, registry.get(stream.channel, stream.size_id))
        base = out_dir / f"{stem}_ch{stream.channel}"
        np.save(f"{base}_phase.npy", phase.data.numpy())
        save_phase_png(f"{base}_phase.png", phase.data)
        record = {"channel": stream.channel, "size": stream.size_id, "phase": f"{base}_phase.npy"}
        if args.reconstruct:
            recon = reconstruct_amplitude(phase, bundle.optics)
            record["reconstruction"] = str(save_amplitude_png(f"{base}_recon.png", recon.data))
        _emit(record)


def cmd_send(args, cfg: RunConfig):
    seed = _seed(args, cfg)
    bundles = _bundles(args)
    registry = CodebookRegistry.load(cfg.books_dir)
    paths = [p for _, p in load_image_dir(args.images)]
    channel = FileChannel.open(args.file, "wb") if args.file else connect(args.host, args.port)
    total = 0
    try:
        for path in paths:
            inputs = _channel_inputs(str(path), cfg, bundles, seed, args.no_cache)
            total += send(inputs, args.size, registry, bundles, channel, huffman=not args.no_huffman)
    finally:
        channel.close()
    _emit({"images": len(paths), "size": args.size, "bytes": total})


def cmd_recv(args, cfg: RunConfig):
    bundles = _bundles(args)
    registry = CodebookRegistry.load(cfg.books_dir)
    if args.file:
        channel = FileChannel.open(args.file, "rb")
        try:
            frames = receive(channel, registry, bundles, limit=args.limit)
        finally:
            channel.close()
    else:
        server = listen(args.host, args.port)
        logger.info("Listening on %s:%d", args.host, args.port)
        try:
            frames = serve_once(server, registry, bundles)
        finally:
            server.close()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, item in enumerate(frames):
        record = {"frame": i, "bytes": item.nbytes, "channel": item.channel, "size": item.size_id}
        if item.ok:
            path = out_dir / f"frame{i:04d}_ch{item.channel}_phase.npy"
            np.save(path, item.phase.data.numpy())
            record["phase"] = str(path)
        else:
            record["error"] = item.error
        _emit(record)


def cmd_evaluate(args, cfg: RunConfig):
    seed = _seed(args, cfg)
    bundle = _single(_bundles(args))
    registry = CodebookRegistry.load(cfg.books_dir)
    samples = _samples(args, cfg, bundle.optics, bundle.channel, seed)
    _, rows = rd_sweep(bundle, registry, samples, [args.size], huffman=not args.no_huffman)
    for row in rows:
        _emit(asdict(row))


def cmd_rd_curve(args, cfg: RunConfig):
    seed = _seed(args, cfg)
    bundles = _bundles(args)
    registry = CodebookRegistry.load(cfg.books_dir)
    rows = []
    for ch, bundle in sorted(bundles.items()):
        sizes = args.sizes or registry.sizes(ch)
        samples = _samples(args, cfg, bundle.optics, ch, seed)
        _, channel_rows = rd_sweep(bundle, registry, samples, sizes, huffman=not args.no_huffman)
        rows.extend(channel_rows)
    write_sweep_csv(args.csv, rows)

    name = RGB_CHANNEL if len(bundles) > 1 else next(iter(bundles))
    curve = curve_from_rows(rows, name, args.metric)
    record = {"csv": args.csv, "points": [list(p) for p in curve.points]}
    if args.curve_out:
        record["curve"] = str(write_curve_csv(args.curve_out, curve))
    curves = {f"channel {name}": curve}
    if args.anchor:
        anchor = read_curve_csv(args.anchor)
        curves[f"anchor ({Path(args.anchor).stem})"] = anchor
        record["bd_rate"] = bd_rate(anchor, curve)
        record["bd_quality"] = bd_psnr(anchor, curve)
    if args.plot:
        record["plot"] = str(plot_rd_curves(curves, args.plot, ylabel=args.metric.upper()))
    _emit(record)


# ── Parser ───────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    common = _Parser(add_help=False, formatter_class=fmt)
    common.add_argument("--config", help="JSON run config; flags override its values")
    _config_flag(common, "--seed", "seed", "seed", "seed for every random choice", type=int)
    common.add_argument("--strict", action="store_true", help="refuse randomized runs without a seed")
    common.add_argument("--threads", type=int, help="cap torch intra-op threads")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = _Parser(prog="holocodec", description="Rate-adaptive hologram compression.", formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name: str, func, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, description=help, parents=[common], formatter_class=fmt)
        p.set_defaults(func=func)
        return p

    # propagate
    p = add("propagate", cmd_propagate, "Image to complex hologram, or phase map back to the target plane")
    p.add_argument("input", help="intensity PNG, or phase map (.npy/.png) with --reconstruct")
    p.add_argument("--reconstruct", action="store_true", help="treat input as a hologram phase map")
    p.add_argument("--out-dir", default="out", help="output directory")
    _optics_flags(p)

    # gs / sgd
    for name, func, help in (("gs", cmd_gs, "Gerchberg-Saxton phase retrieval baseline"),
                             ("sgd", cmd_sgd, "Gradient-descent phase retrieval baseline")):
        p = add(name, func, help)
        _corpus_flags(p)
        p.add_argument("--out-dir", default="out", help="output directory")
        _optics_flags(p)
        _config_flag(p, "--iterations", "retrieval", "iterations", "iteration count", type=int)
        _config_flag(p, "--init", "retrieval", "init", "initial phase: random or zeros")
        _config_flag(p, "--msssim-levels", "loss", "msssim_levels", "MS-SSIM scales in reported quality", type=int)
        if name == "sgd":
            _config_flag(p, "--step-size", "retrieval", "step_size", "descent step size", type=float)

    # train
    p = add("train", cmd_train, "Train a codec (stage 1, then stage 2 when --stage2-epochs > 0)")
    _corpus_flags(p, positional=False)
    p.add_argument("--out", required=True, help="checkpoint path")
    _optics_flags(p)
    _config_flag(p, "--profile", "profile", "name", "architecture profile: desk, low, ultra-low")
    _config_flag(p, "--codebook-sizes", "profile", "codebook_sizes", "bottom,top codebook sizes", type=_int_list)
    _config_flag(p, "--stage1-epochs", "schedule", "stage1_epochs", "stage-1 epochs", type=int)
    _config_flag(p, "--stage2-epochs", "schedule", "stage2_epochs", "stage-2 (adapter) epochs", type=int)
    _config_flag(p, "--lr", "schedule", "learning_rate", "learning rate", type=float)
    _config_flag(p, "--batch-size", "schedule", "batch_size", "batch size", type=int)
    _config_flag(p, "--float64", "schedule", "float64", "train in 64-bit floats", action="store_const", const=True)
    _config_flag(p, "--msssim-levels", "loss", "msssim_levels", "MS-SSIM scales in the loss", type=int)

    # adapt
    p = add("adapt", cmd_adapt, "Stage-2 adapter training on a stage-1 checkpoint")
    p.add_argument("checkpoint", help="stage-1 checkpoint")
    _corpus_flags(p, positional=False)
    p.add_argument("--out", help="output checkpoint (default: overwrite input)")
    _config_flag(p, "--initializer", "optics", "initializer", "object-phase initializer: random, zeros, gs, sgd")
    _config_flag(p, "--frame", "optics", "frame", "hologram frame HxW", type=_pair)
    _config_flag(p, "--stage2-epochs", "schedule", "stage2_epochs", "adapter epochs", type=int)
    _config_flag(p, "--stage2-sizes", "schedule", "stage2_sizes", "codebook sizes to train on", type=_int_list)

    # export-books
    p = add("export-books", cmd_export_books, "Write books/<channel>/<K>.rvqc for every supported size")
    p.add_argument("checkpoint", help="codec checkpoint")
    p.add_argument("--method", choices=("adapter", "kmeans"), default="adapter", help="codebook resizing method")
    _codec_flags(p, multiple=False)

    # compress / decompress
    p = add("compress", cmd_compress, "Compress one image into a .ravq stream")
    p.add_argument("input", help="PNG image (RGB images feed one checkpoint per channel)")
    p.add_argument("--size", type=int, required=True, help="codebook size id K")
    p.add_argument("--out", required=True, help="output .ravq path")
    p.add_argument("--no-huffman", action="store_true", help="fixed-length index payloads")
    p.add_argument("--no-cache", action="store_true", help="regenerate holograms instead of using the dataset cache")
    _codec_flags(p)
    _config_flag(p, "--frame", "optics", "frame", "hologram frame HxW", type=_pair)
    _config_flag(p, "--initializer", "optics", "initializer", "object-phase initializer: random, zeros, gs, sgd")

    p = add("decompress", cmd_decompress, "Decode a .ravq stream to phase maps")
    p.add_argument("input", help=".ravq stream")
    p.add_argument("--out-dir", default="out", help="output directory")
    p.add_argument("--reconstruct", action="store_true", help="also write the reconstructed amplitude")
    _codec_flags(p)

    # send / recv
    p = add("send", cmd_send, "Compress images and send them as length-prefixed frames")
    p.add_argument("images", help="PNG image or directory of PNG images")
    p.add_argument("--size", type=int, required=True, help="codebook size id K")
    p.add_argument("--host", default="127.0.0.1", help="receiver host")
    p.add_argument("--port", type=int, default=5050, help="receiver port")
    p.add_argument("--file", help="append frames to this file instead of a socket")
    p.add_argument("--no-huffman", action="store_true", help="fixed-length index payloads")
    p.add_argument("--no-cache", action="store_true", help="regenerate holograms instead of using the dataset cache")
    _codec_flags(p)
    _config_flag(p, "--frame", "optics", "frame", "hologram frame HxW", type=_pair)
    _config_flag(p, "--initializer", "optics", "initializer", "object-phase initializer: random, zeros, gs, sgd")

    p = add("recv", cmd_recv, "Receive frames and decode them to phase maps")
    p.add_argument("--host", default="127.0.0.1", help="listen address")
    p.add_argument("--port", type=int, default=5050, help="listen port")
    p.add_argument("--file", help="read frames from this file instead of a socket")
    p.add_argument("--limit", type=int, help="stop after N frames (file mode)")
    p.add_argument("--out-dir", default="received", help="output directory")
    _codec_flags(p)

    # evaluate / rd-curve
    p = add("evaluate", cmd_evaluate, "Per-image rate and quality at one codebook size")
    _corpus_flags(p)
    p.add_argument("--size", type=int, required=True, help="codebook size id K")
    p.add_argument("--no-huffman", action="store_true", help="fixed-length index payloads")
    _codec_flags(p)
    _config_flag(p, "--frame", "optics", "frame", "hologram frame HxW", type=_pair)
    _config_flag(p, "--initializer", "optics", "initializer", "object-phase initializer: random, zeros, gs, sgd")

    p = add("rd-curve", cmd_rd_curve, "Rate-distortion sweep over codebook sizes")
    _corpus_flags(p)
    p.add_argument("--sizes", type=_int_list, help="codebook size ids (default: every size in the registry)")
    p.add_argument("--csv", default="rd.csv", help="per-image CSV output")
    p.add_argument("--curve-out", help="write the mean (bpp, quality) curve here")
    p.add_argument("--metric", choices=("psnr", "ssim", "msssim"), default="psnr", help="quality axis")
    p.add_argument("--anchor", help="anchor curve CSV for BD-rate / BD-quality")
    p.add_argument("--plot", help="PNG or SVG plot path")
    p.add_argument("--no-huffman", action="store_true", help="fixed-length index payloads")
    _codec_flags(p)
    _config_flag(p, "--frame", "optics", "frame", "hologram frame HxW", type=_pair)
    _config_flag(p, "--initializer", "optics", "initializer", "object-phase initializer: random, zeros, gs, sgd")

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.verbose:
        logger.setLevel(logging.DEBUG)
    if args.threads:
        torch.set_num_threads(args.threads)
    try:
        cfg = _config(args)
        args.func(args, cfg)
    except HoloCodecError as e:
        logger.debug("%s failed", args.command, exc_info=True)
        _report(type(e).__name__, e.exit_code, str(e))
        return e.exit_code
    except (OSError, ValueError, RuntimeError) as e:
        logger.debug("%s failed", args.command, exc_info=True)
        _report(type(e).__name__, 1, str(e))
        return 1
    return 0


def main() -> None:
    sys.exit(run())
