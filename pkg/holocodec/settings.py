"""Run configuration: a JSON key/value tree overlaid on the documented defaults.

Blocks: optics, profile, schedule, loss, retrieval, adapter, paths, plus a top-level seed.
Unknown blocks or keys are rejected. Command-line flags are applied on top with
`RunConfig.override`; a value of None leaves the file (or default) value in place.
"""
from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from holocodec.codec.losses import LossWeights
from holocodec.codec.model import CodecProfile
from holocodec.codec.training import TrainSchedule
from holocodec.config import (
    ADAPTER_HIDDEN,
    BATCH_SIZE,
    COMMITMENT_BETA,
    DATA_INITIALIZERS,
    DEFAULT_BOOKS_DIR,
    DEFAULT_CHANNEL,
    DEFAULT_PROFILE,
    DESK_DISTANCE,
    DESK_FRAME,
    DESK_MSSSIM_LEVELS,
    DESK_ROI,
    LEARNING_RATE,
    LOSS_WEIGHTS,
    PAD_FACTOR,
    PIXEL_PITCH,
    RETRIEVAL_ITERATIONS,
    SGD_STEP_SIZE,
    STAGE1_EPOCHS,
    STAGE2_EPOCHS,
    WAVELENGTHS,
)
from holocodec.errors import InvalidConfigError
from holocodec.optics.propagation import OpticsConfig
from holocodec.optics.retrieval import RetrievalSettings

logger = logging.getLogger("holocodec")

# Desk-scale defaults; full-scale runs override optics and profile from a config file.
DEFAULTS: dict = {
    "optics": {
        "channel": DEFAULT_CHANNEL,
        "wavelength": None,  # None: the channel's wavelength
        "pixel_pitch": PIXEL_PITCH,
        "distance": DESK_DISTANCE,
        "pad_factor": PAD_FACTOR,
        "frame": list(DESK_FRAME),
        "roi": list(DESK_ROI),
        "initializer": "random",
    },
    "profile": {
        "name": DEFAULT_PROFILE,
        "codebook_sizes": None,
        "residual_blocks": None,
        "residual_channels": None,
        "latent_dim": None,
        "deformable_conv": None,
    },
    "schedule": {
        "stage1_epochs": STAGE1_EPOCHS,
        "stage2_epochs": STAGE2_EPOCHS,
        "learning_rate": LEARNING_RATE,
        "batch_size": BATCH_SIZE,
        "beta": COMMITMENT_BETA,
        "brightness_match": True,
        "stage2_sizes": None,
        "float64": False,
    },
    "loss": {
        "w_mse": LOSS_WEIGHTS[0],
        "w_msssim": LOSS_WEIGHTS[1],
        "w_wfft": LOSS_WEIGHTS[2],
        "msssim_levels": DESK_MSSSIM_LEVELS,
    },
    "retrieval": {
        "iterations": RETRIEVAL_ITERATIONS,
        "step_size": SGD_STEP_SIZE,
        "init": "random",
    },
    "adapter": {
        "encoder_hidden": ADAPTER_HIDDEN,
        "decoder_hidden": ADAPTER_HIDDEN,
    },
    "paths": {
        "books": str(DEFAULT_BOOKS_DIR),
        "cache": None,
    },
    "seed": None,
}


def _merge(base: dict, update: dict, where: str) -> None:
    for key, value in update.items():
        if key not in base:
            raise InvalidConfigError(f"unknown config key {where}{key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise InvalidConfigError(f"config key {where}{key!r} must be an object")
            _merge(base[key], value, f"{where}{key}.")
        else:
            base[key] = value


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        if not isinstance(data, dict):
            raise InvalidConfigError("config root must be an object")
        cfg = cls()
        _merge(cfg.values, data, "")
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path | None) -> RunConfig:
        if path is None:
            return cls()
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise InvalidConfigError(f"config file {path} not found") from None
        except json.JSONDecodeError as e:
            raise InvalidConfigError(f"{path} is not valid JSON: {e}") from None
        logger.debug("Loaded run config from %s", path)
        return cls.from_dict(data)

    def override(self, block: str, **values) -> RunConfig:
        """Apply command-line values onto *block*; None means "not given"."""
        given = {k: v for k, v in values.items() if v is not None}
        if block == "seed":
            if "seed" in given:
                self.values["seed"] = given["seed"]
        elif given:
            _merge(self.values, {block: given}, "")
        self.validate()
        return self

    def validate(self) -> None:
        try:
            _ = self.frame
            if self.initializer not in DATA_INITIALIZERS:
                raise InvalidConfigError(f"optics.initializer must be one of {DATA_INITIALIZERS}")
            self.optics()
            self.profile()
            self.schedule()
            self.weights()
            self.retrieval()
        except InvalidConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise InvalidConfigError(f"invalid config value: {e}") from None
        seed = self.values["seed"]
        if seed is not None and (not isinstance(seed, int) or isinstance(seed, bool) or seed < 0):
            raise InvalidConfigError(f"seed must be a non-negative integer, got {seed!r}")

    def to_dict(self) -> dict:
        return copy.deepcopy(self.values)

    # ── Components ──────────────────────────────────────────────────────────

    @property
    def seed(self) -> int | None:
        return self.values["seed"]

    @property
    def channel(self) -> int:
        return int(self.values["optics"]["channel"])

    @property
    def frame(self) -> tuple[int, int]:
        frame = self.values["optics"]["frame"]
        if not (isinstance(frame, (list, tuple)) and len(frame) == 2 and min(frame) >= 1):
            raise InvalidConfigError(f"optics.frame must be two positive sizes, got {frame!r}")
        return (int(frame[0]), int(frame[1]))

    @property
    def initializer(self) -> str:
        return self.values["optics"]["initializer"]

    @property
    def books_dir(self) -> Path:
        return Path(self.values["paths"]["books"])

    @property
    def cache_dir(self) -> Path | None:
        cache = self.values["paths"]["cache"]
        return Path(cache) if cache else None

    def optics(self, channel: int | None = None) -> OpticsConfig:
        o = self.values["optics"]
        ch = self.channel if channel is None else channel
        if ch not in WAVELENGTHS:
            raise InvalidConfigError(f"unknown channel id {ch}")
        wavelength = o["wavelength"] if o["wavelength"] is not None and channel is None else WAVELENGTHS[ch]
        roi = o["roi"]
        return OpticsConfig(
            wavelength=float(wavelength),
            pixel_pitch=float(o["pixel_pitch"]),
            distance=float(o["distance"]),
            pad_factor=float(o["pad_factor"]),
            roi=tuple(roi) if roi else None,
        )

    def profile(self) -> CodecProfile:
        p = self.values["profile"]
        overrides = {k: v for k, v in p.items() if k != "name" and v is not None}
        if "codebook_sizes" in overrides:
            overrides["codebook_sizes"] = tuple(overrides["codebook_sizes"])
        return CodecProfile.from_name(p["name"], **overrides)

    def schedule(self) -> TrainSchedule:
        s = {k: v for k, v in self.values["schedule"].items() if k != "float64"}
        return TrainSchedule.from_dict({**s, "seed": self.seed or 0})

    @property
    def float64(self) -> bool:
        return bool(self.values["schedule"]["float64"])

    def weights(self) -> LossWeights:
        return LossWeights(**self.values["loss"])

    def retrieval(self, seed: int | None = None) -> RetrievalSettings:
        r = self.values["retrieval"]
        return RetrievalSettings(
            iterations=r["iterations"],
            step_size=float(r["step_size"]),
            init=r["init"],
            seed=(self.seed or 0) if seed is None else seed,
        )

    def adapter_kwargs(self) -> dict:
        return dict(self.values["adapter"])
