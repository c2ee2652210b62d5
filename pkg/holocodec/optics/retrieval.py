"""Iterative phase-only hologram baselines: Gerchberg-Saxton and gradient descent.

Both operate on a frame-sized target amplitude; errors and losses are evaluated on the
ROI crop of it. GS runs on the zero-padded grid with a support constraint (unit amplitude
inside the frame, zero outside) so each iteration is a pair of projections joined by a
unitary propagation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import torch

from holocodec.config import RETRIEVAL_INITS, RETRIEVAL_ITERATIONS, SGD_STEP_SIZE
from holocodec.errors import InvalidConfigError, NumericFailureError, ShapeError
from holocodec.optics.propagation import (
    AmplitudeMap,
    OpticsConfig,
    PhaseMap,
    asm_kernel,
    reconstruction,
    spectral_propagate,
)
from holocodec.utils import as_tensor, crop_center, pad_to, random_phase, wrap_phase

logger = logging.getLogger("holocodec")


@dataclass(frozen=True)
class RetrievalSettings:
    iterations: int = RETRIEVAL_ITERATIONS
    step_size: float = SGD_STEP_SIZE
    init: str = "random"
    initial_phase: PhaseMap | None = None
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.iterations, int) or self.iterations < 0:
            raise InvalidConfigError(f"iterations must be a non-negative integer, got {self.iterations}")
        if not (self.step_size > 0 and math.isfinite(self.step_size)):
            raise InvalidConfigError(f"step_size must be positive, got {self.step_size}")
        if self.init not in RETRIEVAL_INITS:
            raise InvalidConfigError(f"init must be one of {RETRIEVAL_INITS}, got {self.init!r}")
        if self.init == "provided" and self.initial_phase is None:
            raise InvalidConfigError("init='provided' requires initial_phase")


def initial_phase(shape: tuple[int, int], settings: RetrievalSettings) -> torch.Tensor:
    if settings.init == "provided":
        phase = as_tensor(settings.initial_phase.data).to(torch.float64)
        if tuple(phase.shape) != tuple(shape):
            raise ShapeError(f"initial phase {tuple(phase.shape)} does not match target {tuple(shape)}")
        return phase.clone()
    if settings.init == "zeros":
        return torch.zeros(shape, dtype=torch.float64)
    gen = torch.Generator()
    gen.manual_seed(settings.seed)
    return random_phase(shape, gen)


def _target(target: AmplitudeMap | torch.Tensor) -> torch.Tensor:
    t = target.data if isinstance(target, AmplitudeMap) else as_tensor(target)
    if t.ndim != 2:
        raise ShapeError(f"target must be H×W, got {tuple(t.shape)}")
    if bool((t < 0).any()):
        raise InvalidConfigError("target amplitude must be non-negative")
    return t.to(torch.float64)


# ── Gerchberg-Saxton ─────────────────────────────────────────────────────────

def gerchberg_saxton(
    target: AmplitudeMap,
    config: OpticsConfig,
    settings: RetrievalSettings,
    trace: list[float] | None = None,
) -> PhaseMap:
    """Alternating projections between hologram and object planes.

    *trace*, when given, receives the relative object-plane amplitude error on the ROI
    measured at the start of every iteration and once after the last one.
    """
    t = _target(target)
    frame = tuple(t.shape)
    roi = config.roi_for(frame)
    padded = config.padded_shape(frame)
    to_object = asm_kernel(padded, config, -config.distance)
    to_hologram = asm_kernel(padded, config, config.distance)

    roi_mask = pad_to(pad_to(torch.ones(roi, dtype=torch.bool), frame), padded)
    roi_target = pad_to(pad_to(crop_center(t, roi), frame), padded)
    norm = float(torch.linalg.vector_norm(crop_center(t, roi))) or 1.0

    phase = initial_phase(frame, settings)
    for it in range(settings.iterations + 1):
        holo = pad_to(torch.polar(torch.ones_like(phase), phase), padded)
        obj = spectral_propagate(holo, to_object)
        if trace is not None:
            err = torch.linalg.vector_norm(torch.where(roi_mask, obj.abs() - roi_target, 0.0))
            trace.append(float(err) / norm)
        if it == settings.iterations:
            break
        obj = torch.where(roi_mask, torch.polar(roi_target, torch.angle(obj)), obj)
        back = spectral_propagate(obj, to_hologram)
        phase = torch.angle(crop_center(back, frame))

    logger.debug("GS finished: %d iterations on %s frame", settings.iterations, frame)
    return PhaseMap(wrap_phase(phase))


# ── Gradient descent ─────────────────────────────────────────────────────────

def retrieval_objective(phase: torch.Tensor, target: torch.Tensor, config: OpticsConfig) -> torch.Tensor:
    """Mean squared error between |f_p^{-d}(φ, 1)| and the target on the ROI."""
    recon = reconstruction(phase, config)
    return torch.mean((recon - crop_center(target, tuple(recon.shape[-2:]))) ** 2)


def sgd_phase_retrieval(
    target: AmplitudeMap,
    config: OpticsConfig,
    settings: RetrievalSettings,
    trace: list[float] | None = None,
) -> PhaseMap:
    """Plain first-order descent on the reconstruction MSE."""
    t = _target(target)
    phase = initial_phase(tuple(t.shape), settings).requires_grad_(True)
    for it in range(settings.iterations):
        loss = retrieval_objective(phase, t, config)
        if not bool(torch.isfinite(loss)):
            raise NumericFailureError("phase retrieval loss became non-finite", iteration=it)
        (grad,) = torch.autograd.grad(loss, phase)
        with torch.no_grad():
            phase -= settings.step_size * grad
        if trace is not None:
            trace.append(float(loss))
    if not bool(torch.isfinite(phase).all()):
        raise NumericFailureError("phase became non-finite", iteration=settings.iterations)
    return PhaseMap(wrap_phase(phase.detach()))
