"""Self-describing checkpoint: profile, schedule, optics, parameters, codebooks, adapters."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch

from holocodec.adapt.adapter import AdapterModel, AdapterPair
from holocodec.codec.losses import LossWeights
from holocodec.codec.model import CodecProfile, HoloCodec
from holocodec.codec.training import TrainResult, TrainSchedule
from holocodec.config import CHECKPOINT_FORMAT, CHECKPOINT_VERSION, DEFAULT_CHANNEL
from holocodec.errors import CheckpointVersionError
from holocodec.optics.propagation import OpticsConfig
from holocodec.vq.codebook import Codebook

logger = logging.getLogger("holocodec")

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass
class CodecBundle:
    """Everything needed to compress, decompress or continue training one channel."""

    model: HoloCodec
    books: tuple[Codebook, Codebook]
    profile: CodecProfile
    optics: OpticsConfig
    schedule: TrainSchedule = field(default_factory=TrainSchedule)
    weights: LossWeights = field(default_factory=LossWeights)
    channel: int = DEFAULT_CHANNEL
    adapters: AdapterPair | None = None
    stage1_trace: list[float] = field(default_factory=list)
    stage2_trace: list[float] = field(default_factory=list)
    stage1_epochs_done: int = 0

    @property
    def stage1_complete(self) -> bool:
        return self.stage1_epochs_done >= self.schedule.stage1_epochs

    @classmethod
    def from_result(cls, result: TrainResult, profile, optics, schedule, weights, channel) -> CodecBundle:
        return cls(
            model=result.model, books=result.books, profile=profile, optics=optics, schedule=schedule,
            weights=weights, channel=channel, adapters=result.adapters, stage1_trace=list(result.stage1_trace),
            stage2_trace=list(result.stage2_trace), stage1_epochs_done=result.stage1_epochs_done,
        )


def save_checkpoint(path: str | Path, bundle: CodecBundle) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dtype = str(bundle.model.dtype).removeprefix("torch.")
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "dtype": dtype,
        "channel": bundle.channel,
        "profile": bundle.profile.to_dict(),
        "optics": bundle.optics.to_dict(),
        "schedule": bundle.schedule.to_dict(),
        "weights": asdict(bundle.weights),
        "model": bundle.model.state_dict(),
        "books": [b.state() for b in bundle.books],
        "adapters": None,
        "stage1_trace": list(bundle.stage1_trace),
        "stage2_trace": list(bundle.stage2_trace),
        "stage1_epochs_done": bundle.stage1_epochs_done,
    }
    if bundle.adapters is not None:
        payload["adapters"] = {
            "bottom": bundle.adapters.bottom.config(),
            "top": bundle.adapters.top.config(),
            "state": bundle.adapters.state_dict(),
        }
    torch.save(payload, path)
    logger.info("Saved checkpoint to %s", path)
    return path


def load_checkpoint(path: str | Path) -> CodecBundle:
    payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointVersionError(f"{path} is not a codec checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint version {payload.get('version')} is not supported (expected {CHECKPOINT_VERSION})"
        )
    dtype = _DTYPES[payload["dtype"]]
    profile = CodecProfile.from_dict(payload["profile"])
    model = HoloCodec(profile).to(dtype)
    model.load_state_dict(payload["model"])
    model.eval()

    adapters = None
    if payload["adapters"] is not None:
        a = payload["adapters"]
        adapters = AdapterPair(AdapterModel(**a["bottom"]), AdapterModel(**a["top"])).to(dtype)
        adapters.load_state_dict(a["state"])
        adapters.eval()

    return CodecBundle(
        model=model,
        books=tuple(Codebook.from_state(s) for s in payload["books"]),
        profile=profile,
        optics=OpticsConfig.from_dict(payload["optics"]),
        schedule=TrainSchedule.from_dict(payload["schedule"]),
        weights=LossWeights(**payload["weights"]),
        channel=int(payload["channel"]),
        adapters=adapters,
        stage1_trace=list(payload["stage1_trace"]),
        stage2_trace=list(payload["stage2_trace"]),
        stage1_epochs_done=int(payload["stage1_epochs_done"]),
    )
