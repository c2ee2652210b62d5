"""Band-limited angular-spectrum propagation between object and hologram planes.

Frequency layout is DC-centred: bin k of an N-point axis sits at
f = (k - N // 2) / (N * pixel_pitch), i.e. the layout produced by fftshift.
All kernels and spectra in this module use that layout.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import torch

from holocodec.config import GAMMA, PAD_FACTOR, PIXEL_PITCH, PROPAGATION_DISTANCE, WAVELENGTHS
from holocodec.errors import DomainError, InvalidConfigError, InvalidFieldError, ShapeError
from holocodec.utils import as_tensor, crop_center, pad_to

logger = logging.getLogger("holocodec")

_FFT_DIMS = (-2, -1)


# ── Types ────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class OpticsConfig:
    """Physical parameters of one colour channel. Lengths in meters."""

    wavelength: float
    pixel_pitch: float = PIXEL_PITCH
    distance: float = PROPAGATION_DISTANCE
    pad_factor: float = PAD_FACTOR
    roi: tuple[int, int] | None = None

    def __post_init__(self):
        if not (self.wavelength > 0 and math.isfinite(self.wavelength)):
            raise InvalidConfigError(f"wavelength must be positive, got {self.wavelength}")
        if not (self.pixel_pitch > 0 and math.isfinite(self.pixel_pitch)):
            raise InvalidConfigError(f"pixel_pitch must be positive, got {self.pixel_pitch}")
        if not math.isfinite(self.distance):
            raise InvalidConfigError("distance must be finite")
        if not self.pad_factor >= 1:
            raise InvalidConfigError(f"pad_factor must be >= 1, got {self.pad_factor}")
        if self.roi is not None:
            if len(self.roi) != 2 or min(self.roi) < 1:
                raise InvalidConfigError(f"roi must be two positive sizes, got {self.roi}")
            object.__setattr__(self, "roi", (int(self.roi[0]), int(self.roi[1])))

    @classmethod
    def for_channel(cls, channel: int, **kwargs) -> OpticsConfig:
        if channel not in WAVELENGTHS:
            raise InvalidConfigError(f"unknown channel id {channel}")
        return cls(wavelength=WAVELENGTHS[channel], **kwargs)

    def padded_shape(self, shape: tuple[int, int]) -> tuple[int, int]:
        return (math.ceil(shape[0] * self.pad_factor), math.ceil(shape[1] * self.pad_factor))

    def roi_for(self, frame: tuple[int, int]) -> tuple[int, int]:
        """ROI inside *frame*; the whole frame when no ROI is configured."""
        if self.roi is None:
            return (int(frame[0]), int(frame[1]))
        if self.roi[0] > frame[0] or self.roi[1] > frame[1]:
            raise ShapeError(f"roi {self.roi} does not fit frame {tuple(frame)}")
        return self.roi

    def with_distance(self, distance: float) -> OpticsConfig:
        return replace(self, distance=distance)

    def to_dict(self) -> dict:
        return {
            "wavelength": self.wavelength,
            "pixel_pitch": self.pixel_pitch,
            "distance": self.distance,
            "pad_factor": self.pad_factor,
            "roi": list(self.roi) if self.roi else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> OpticsConfig:
        roi = data.get("roi")
        return cls(
            wavelength=float(data["wavelength"]),
            pixel_pitch=float(data.get("pixel_pitch", PIXEL_PITCH)),
            distance=float(data.get("distance", PROPAGATION_DISTANCE)),
            pad_factor=float(data.get("pad_factor", PAD_FACTOR)),
            roi=tuple(roi) if roi else None,
        )


@dataclass
class ComplexField:
    """H×W complex samples (amplitude·e^{iφ}) on a plane described by *config*."""

    data: torch.Tensor
    config: OpticsConfig

    def __post_init__(self):
        self.data = as_tensor(self.data)
        if not self.data.is_complex():
            self.data = self.data.to(torch.complex128)
        if self.data.ndim < 2 or min(self.data.shape[-2:]) < 1:
            raise InvalidFieldError(f"field must be at least 1x1, got shape {tuple(self.data.shape)}")
        _check_finite(self.data, "field")

    @property
    def amplitude(self) -> torch.Tensor:
        return self.data.abs()

    @property
    def phase(self) -> torch.Tensor:
        return torch.angle(self.data)


@dataclass
class PhaseMap:
    """Real phase in radians, every value in (-pi, pi]."""

    data: torch.Tensor

    def __post_init__(self):
        self.data = as_tensor(self.data)
        _check_finite(self.data, "phase")
        if self.data.numel() and (self.data.max() > math.pi or self.data.min() <= -math.pi):
            raise DomainError("phase values must lie in (-pi, pi]")


@dataclass
class AmplitudeMap:
    """Real, finite, non-negative amplitude."""

    data: torch.Tensor

    def __post_init__(self):
        self.data = as_tensor(self.data)
        _check_finite(self.data, "amplitude")
        if self.data.numel() and self.data.min() < 0:
            raise DomainError("amplitude values must be non-negative")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)


def _check_finite(x: torch.Tensor, what: str) -> None:
    if not bool(torch.isfinite(x).all()):
        raise InvalidFieldError(f"{what} contains non-finite samples")


def _data(x) -> torch.Tensor:
    if isinstance(x, (ComplexField, PhaseMap, AmplitudeMap)):
        return x.data
    return as_tensor(x)


# ── Kernel ───────────────────────────────────────────────────────────────────

def frequency_grid(shape: tuple[int, int], pixel_pitch: float) -> tuple[torch.Tensor, torch.Tensor]:
    """DC-centred (f_y, f_x) grids in cycles/meter."""
    h, w = shape
    fy = (torch.arange(h, dtype=torch.float64) - h // 2) / (h * pixel_pitch)
    fx = (torch.arange(w, dtype=torch.float64) - w // 2) / (w * pixel_pitch)
    return torch.meshgrid(fy, fx, indexing="ij")


@lru_cache(maxsize=32)
def _cached_kernel(shape: tuple[int, int], wavelength: float, pixel_pitch: float, distance: float) -> torch.Tensor:
    fy, fx = frequency_grid(shape, pixel_pitch)
    in_band = fx**2 + fy**2 < 1.0 / wavelength**2
    arg = torch.clamp(1.0 - (wavelength * fx) ** 2 - (wavelength * fy) ** 2, min=0.0)
    phase = 2 * math.pi * distance / wavelength * torch.sqrt(arg)
    kernel = torch.polar(torch.ones_like(phase), phase)
    return torch.where(in_band, kernel, torch.zeros_like(kernel))


def asm_kernel(shape: tuple[int, int], config: OpticsConfig, distance: float) -> torch.Tensor:
    """Band-limited ASM transfer function on a DC-centred h×w grid (complex128)."""
    if len(shape) != 2 or min(shape) < 1:
        raise ShapeError(f"kernel shape must be two positive sizes, got {shape}")
    if not (config.wavelength > 0 and config.pixel_pitch > 0):
        raise InvalidConfigError("wavelength and pixel_pitch must be positive")
    return _cached_kernel((int(shape[0]), int(shape[1])), float(config.wavelength),
                          float(config.pixel_pitch), float(distance))


# ── Propagation ──────────────────────────────────────────────────────────────

def spectral_propagate(x: torch.Tensor, kernel: torch.Tensor) -> torch.Tensor:
    """Multiply the centred spectrum of *x* by *kernel*; no padding or cropping."""
    spectrum = torch.fft.fftshift(torch.fft.fft2(x), dim=_FFT_DIMS)
    out = torch.fft.ifftshift(spectrum * kernel.to(spectrum.dtype), dim=_FFT_DIMS)
    return torch.fft.ifft2(out)


def propagate_tensor(x: torch.Tensor, config: OpticsConfig, distance: float) -> torch.Tensor:
    """Differentiable propagation of a (..., H, W) complex tensor; pads then crops back."""
    frame = tuple(x.shape[-2:])
    padded = config.padded_shape(frame)
    kernel = asm_kernel(padded, config, distance)
    return crop_center(spectral_propagate(pad_to(x, padded), kernel), frame)


def propagate(field: ComplexField, distance: float) -> ComplexField:
    """Propagate *field* by *distance* meters (positive: object -> hologram)."""
    data = _data(field)
    config = field.config
    _check_finite(data, "field")
    if not math.isfinite(distance):
        raise InvalidConfigError("distance must be finite")
    return ComplexField(propagate_tensor(data.to(torch.complex128), config, distance), config)


def reconstruction(phase: torch.Tensor, config: OpticsConfig) -> torch.Tensor:
    """|f_p^{-d}(φ, 1)| cropped to the ROI; differentiable, accepts (..., H, W)."""
    frame = tuple(phase.shape[-2:])
    field = torch.complex(torch.cos(phase), torch.sin(phase))
    recon = propagate_tensor(field, config, -config.distance).abs()
    return crop_center(recon, config.roi_for(frame))


def reconstruct_amplitude(phase: PhaseMap | torch.Tensor, config: OpticsConfig) -> AmplitudeMap:
    data = _data(phase)
    _check_finite(data, "phase")
    return AmplitudeMap(reconstruction(data.to(torch.float64), config))


# ── Preprocessing ────────────────────────────────────────────────────────────

def amplitude_from_intensity(image, gamma: float = GAMMA) -> AmplitudeMap:
    """Inverse gamma followed by a square root: sqrt(image ** gamma)."""
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    img = as_tensor(np.asarray(image, dtype=np.float64) if not isinstance(image, torch.Tensor) else image)
    img = img.to(torch.float64)
    if not bool(torch.isfinite(img).all()) or (img.numel() and (img.min() < 0 or img.max() > 1)):
        raise DomainError("intensity values must lie in [0, 1]")
    return AmplitudeMap(torch.sqrt(img**gamma))


def object_to_hologram(target: AmplitudeMap, object_phase: torch.Tensor, config: OpticsConfig) -> ComplexField:
    """Complex object field (A_t, P_t) propagated by +d to the hologram plane."""
    field = ComplexField(torch.polar(_data(target).to(torch.float64), object_phase.to(torch.float64)), config)
    return propagate(field, config.distance)
