"""Dataset ingestion: PNG loading, complex-hologram generation, on-disk cache, batching."""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from scipy import ndimage

from holocodec.config import (
    CACHE_ENV_VAR,
    DATA_INITIALIZERS,
    DEFAULT_CACHE_DIR,
    DEFAULT_CHANNEL,
    INITIALIZER_ITERATIONS,
)
from holocodec.errors import DomainError, InvalidConfigError, ShapeError
from holocodec.optics.propagation import (
    AmplitudeMap,
    ComplexField,
    OpticsConfig,
    amplitude_from_intensity,
    object_to_hologram,
    propagate,
)
from holocodec.optics.retrieval import RetrievalSettings, gerchberg_saxton, sgd_phase_retrieval
from holocodec.utils import crop_center, random_phase, wrap_phase

logger = logging.getLogger("holocodec")


# ── Image I/O ────────────────────────────────────────────────────────────────

def load_intensity_png(path: str | Path, channel: int | None = None) -> np.ndarray:
    """Read an 8/16-bit grayscale or RGB PNG as float64 intensity in [0, 1].

    RGB images return (H, W, 3) unless *channel* selects one plane; grayscale images
    return (H, W) for any channel.
    """
    with Image.open(path) as img:
        mode = img.mode
        if mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(img, dtype=np.float64) / 65535.0
        elif mode == "L":
            arr = np.asarray(img, dtype=np.float64) / 255.0
        else:
            arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    arr = np.clip(arr, 0.0, 1.0)
    if arr.ndim == 3 and channel is not None:
        if channel not in (0, 1, 2):
            raise InvalidConfigError(f"channel must be 0, 1 or 2, got {channel}")
        arr = arr[..., channel]
    return arr


def save_phase_png(path: str | Path, phase) -> Path:
    """Write a phase map as a 16-bit PNG, (−π, π] mapped linearly onto [0, 65535]."""
    p = phase.detach().cpu().numpy() if isinstance(phase, torch.Tensor) else np.asarray(phase)
    levels = np.round((p + math.pi) / (2 * math.pi) * 65535.0).clip(0, 65535).astype(np.uint16)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(levels).save(path)
    return path


def load_phase(path: str | Path) -> torch.Tensor:
    """Phase map from a `.npy` array (exact) or a 16-bit PNG written by save_phase_png."""
    path = Path(path)
    if path.suffix == ".npy":
        return torch.from_numpy(np.load(path)).to(torch.float64)
    with Image.open(path) as img:
        levels = np.asarray(img, dtype=np.float64)
    if levels.ndim != 2:
        raise ShapeError(f"{path} is not a single-plane phase image")
    return wrap_phase(torch.from_numpy(levels / 65535.0 * 2 * math.pi - math.pi))


def save_amplitude_png(path: str | Path, amplitude) -> Path:
    """8-bit preview of an amplitude map, normalised by its maximum."""
    a = amplitude.detach().cpu().numpy() if isinstance(amplitude, torch.Tensor) else np.asarray(amplitude)
    peak = float(a.max()) or 1.0
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.round(a / peak * 255.0).clip(0, 255).astype(np.uint8)).save(path)
    return path


def fit_to_frame(intensity: np.ndarray, frame: tuple[int, int]) -> np.ndarray:
    """Centre-crop (H, W) intensity to *frame*; smaller images are rejected."""
    h, w = intensity.shape[:2]
    if h < frame[0] or w < frame[1]:
        raise ShapeError(f"image {h}x{w} is smaller than the {frame[0]}x{frame[1]} frame")
    return crop_center(torch.from_numpy(np.ascontiguousarray(intensity)), frame).numpy()


def load_image_dir(path: str | Path) -> list[tuple[str, Path]]:
    root = Path(path)
    if root.is_file():
        return [(root.stem, root)]
    files = sorted(root.glob("*.png"))
    if not files:
        raise DomainError(f"no PNG images found in {root}")
    return [(f.stem, f) for f in files]


# ── Synthetic corpus ─────────────────────────────────────────────────────────

def synthetic_intensity(shape: tuple[int, int], rng: np.random.Generator, smoothness: float = 3.0) -> np.ndarray:
    """Smooth random blobs normalised onto [0, 1]."""
    noise = ndimage.gaussian_filter(rng.random(shape), sigma=smoothness, mode="wrap")
    lo, hi = float(noise.min()), float(noise.max())
    return (noise - lo) / (hi - lo) if hi > lo else np.zeros(shape)


def synthetic_corpus(n: int, shape: tuple[int, int], seed: int = 0) -> list[tuple[str, np.ndarray]]:
    rng = np.random.default_rng(seed)
    return [(f"synthetic-{i:03d}", synthetic_intensity(shape, rng)) for i in range(n)]


# ── Complex-hologram generation ──────────────────────────────────────────────

@dataclass
class HologramSample:
    """One training/evaluation item: target amplitude and its complex hologram."""

    name: str
    channel: int
    target: torch.Tensor
    hologram: torch.Tensor

    def inputs(self) -> torch.Tensor:
        """(3, H, W) encoder input: hologram amplitude, hologram phase, target amplitude."""
        return torch.stack([self.hologram.abs(), torch.angle(self.hologram), self.target])


def object_phase(target: AmplitudeMap, config: OpticsConfig, initializer: str, seed: int) -> torch.Tensor:
    """Object-plane phase P_t for the complex target A_t·e^{iP_t}."""
    if initializer not in DATA_INITIALIZERS:
        raise InvalidConfigError(f"initializer must be one of {DATA_INITIALIZERS}, got {initializer!r}")
    shape = target.shape
    if initializer == "zeros":
        return torch.zeros(shape, dtype=torch.float64)
    if initializer == "random":
        gen = torch.Generator()
        gen.manual_seed(seed)
        return random_phase(shape, gen)
    settings = RetrievalSettings(iterations=INITIALIZER_ITERATIONS, init="random", seed=seed)
    solver = gerchberg_saxton if initializer == "gs" else sgd_phase_retrieval
    holo_phase = solver(target, config, settings).data
    field = ComplexField(torch.polar(torch.ones_like(holo_phase), holo_phase), config)
    return torch.angle(propagate(field, -config.distance).data)


def make_sample(
    name: str,
    intensity: np.ndarray,
    config: OpticsConfig,
    initializer: str = "random",
    seed: int = 0,
    channel: int = DEFAULT_CHANNEL,
) -> HologramSample:
    target = amplitude_from_intensity(intensity)
    hologram = object_to_hologram(target, object_phase(target, config, initializer, seed), config)
    return HologramSample(name=name, channel=channel, target=target.data, hologram=hologram.data)


# ── Cache ────────────────────────────────────────────────────────────────────

def cache_dir() -> Path:
    return Path(os.getenv(CACHE_ENV_VAR) or DEFAULT_CACHE_DIR)


def cache_key(intensity: np.ndarray, config: OpticsConfig, initializer: str, seed: int, channel: int) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(intensity, dtype=np.float64).tobytes())
    h.update(str(intensity.shape).encode())
    meta = {"optics": config.to_dict(), "initializer": initializer, "seed": seed, "channel": channel}
    h.update(json.dumps(meta, sort_keys=True).encode())
    return h.hexdigest()


def cached_sample(
    name: str,
    intensity: np.ndarray,
    config: OpticsConfig,
    initializer: str = "random",
    seed: int = 0,
    channel: int = DEFAULT_CHANNEL,
    directory: Path | None = None,
) -> HologramSample:
    """make_sample backed by an .npz cache keyed by image content and generation settings."""
    root = directory or cache_dir()
    path = root / f"{cache_key(intensity, config, initializer, seed, channel)}.npz"
    if path.exists():
        try:
            with np.load(path) as data:
                return HologramSample(name, channel, torch.from_numpy(data["target"]), torch.from_numpy(data["hologram"]))
        except (OSError, KeyError, ValueError) as e:
            logger.warning("Discarding unreadable cache entry %s: %s", path.name, e)
    sample = make_sample(name, intensity, config, initializer, seed, channel)
    root.mkdir(parents=True, exist_ok=True)
    np.savez(path, target=sample.target.numpy(), hologram=sample.hologram.numpy())
    logger.debug("Cached hologram for %s at %s", name, path.name)
    return sample


def build_dataset(
    images: list[tuple[str, np.ndarray]],
    config: OpticsConfig,
    initializer: str = "random",
    seed: int = 0,
    channel: int = DEFAULT_CHANNEL,
    use_cache: bool = True,
    directory: Path | None = None,
) -> list[HologramSample]:
    """Complex holograms for every (name, intensity) pair; sample i is seeded with seed + i."""
    if use_cache:
        samples = [cached_sample(name, img, config, initializer, seed + i, channel, directory)
                   for i, (name, img) in enumerate(images)]
    else:
        samples = [make_sample(name, img, config, initializer, seed + i, channel) for i, (name, img) in enumerate(images)]
    logger.info("Prepared %d hologram(s) (%s initializer, channel %d)", len(samples), initializer, channel)
    return samples


# ── Batching ─────────────────────────────────────────────────────────────────

@dataclass
class Batch:
    names: list[str]
    inputs: torch.Tensor
    targets: torch.Tensor


def collate(samples: list[HologramSample], dtype: torch.dtype = torch.float32) -> Batch:
    return Batch(
        names=[s.name for s in samples],
        inputs=torch.stack([s.inputs() for s in samples]).to(dtype),
        targets=torch.stack([s.target for s in samples]).to(torch.float64),
    )


def iter_batches(
    samples: list[HologramSample],
    batch_size: int,
    generator: torch.Generator | None = None,
    dtype: torch.dtype = torch.float32,
):
    """Yield batches; order is a seeded permutation when *generator* is given."""
    if batch_size < 1:
        raise InvalidConfigError("batch_size must be >= 1")
    order = torch.randperm(len(samples), generator=generator).tolist() if generator is not None else range(len(samples))
    order = list(order)
    for start in range(0, len(order), batch_size):
        yield collate([samples[i] for i in order[start : start + batch_size]], dtype)
