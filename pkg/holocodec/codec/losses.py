"""Reconstruction losses: MSE, MS-SSIM and a fixed-weight Watson-style DFT distance.

SSIM follows the usual windowed definition: 11-tap Gaussian (sigma 1.5), 'valid'
filtering, K1 = 0.01, K2 = 0.03. MS-SSIM uses the first L standard scale weights,
renormalised, with 2x2 average pooling between scales and contrast terms clamped at 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from holocodec.config import (
    LOSS_WEIGHTS,
    MSSSIM_LEVELS,
    MSSSIM_WEIGHTS,
    SSIM_K1,
    SSIM_K2,
    SSIM_SIGMA,
    SSIM_WINDOW,
    WATSON_CUTOFF,
)
from holocodec.errors import ImageTooSmallError, InvalidConfigError, ShapeError
from holocodec.optics.propagation import OpticsConfig, reconstruction
from holocodec.utils import crop_center

_CLAMP = 1e-8


@dataclass(frozen=True)
class LossWeights:
    w_mse: float = LOSS_WEIGHTS[0]
    w_msssim: float = LOSS_WEIGHTS[1]
    w_wfft: float = LOSS_WEIGHTS[2]
    msssim_levels: int = MSSSIM_LEVELS

    def __post_init__(self):
        ws = (self.w_mse, self.w_msssim, self.w_wfft)
        if any(w < 0 or not math.isfinite(w) for w in ws) or not any(w > 0 for w in ws):
            raise InvalidConfigError(f"loss weights must be non-negative with one positive, got {ws}")
        if not 1 <= self.msssim_levels <= len(MSSSIM_WEIGHTS):
            raise InvalidConfigError(f"msssim_levels must lie in [1, {len(MSSSIM_WEIGHTS)}]")


# ── SSIM family ──────────────────────────────────────────────────────────────

def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA, dtype=torch.float64) -> torch.Tensor:
    coords = torch.arange(size, dtype=dtype) - (size - 1) / 2
    g = torch.exp(-(coords**2) / (2 * sigma**2))
    return g / g.sum()


def _as_batch(x: torch.Tensor) -> torch.Tensor:
    """(H, W) or (B, H, W) -> (B, 1, H, W)."""
    if x.ndim == 2:
        return x[None, None]
    if x.ndim == 3:
        return x[:, None]
    raise ShapeError(f"expected (H, W) or (B, H, W), got {tuple(x.shape)}")


def _filter(x: torch.Tensor, window: torch.Tensor) -> torch.Tensor:
    k = window.numel()
    x = F.conv2d(x, window.view(1, 1, 1, k))
    return F.conv2d(x, window.view(1, 1, k, 1))


def _ssim_parts(a: torch.Tensor, b: torch.Tensor, data_range: torch.Tensor, window: torch.Tensor):
    """Per-image mean SSIM and mean contrast-structure term for (B, 1, H, W) inputs."""
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    c1, c2 = c1.view(-1, 1, 1, 1), c2.view(-1, 1, 1, 1)
    mu_a, mu_b = _filter(a, window), _filter(b, window)
    s_aa = _filter(a * a, window) - mu_a * mu_a
    s_bb = _filter(b * b, window) - mu_b * mu_b
    s_ab = _filter(a * b, window) - mu_a * mu_b
    cs = (2 * s_ab + c2) / (s_aa + s_bb + c2)
    lum = (2 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    return (lum * cs).mean(dim=(1, 2, 3)), cs.mean(dim=(1, 2, 3))


def _data_range(b: torch.Tensor, data_range) -> torch.Tensor:
    if data_range is None:
        return b.detach().amax(dim=(1, 2, 3)).clamp(min=_CLAMP)
    return torch.as_tensor(data_range, dtype=b.dtype).expand(b.shape[0]).clone()


def ssim(a: torch.Tensor, b: torch.Tensor, data_range=None) -> torch.Tensor:
    """Mean SSIM per image; *data_range* defaults to the max of *b*."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    a4, b4 = _as_batch(a), _as_batch(b)
    if min(a4.shape[-2:]) < SSIM_WINDOW:
        raise ImageTooSmallError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels")
    window = gaussian_window(dtype=a4.dtype)
    value, _ = _ssim_parts(a4, b4, _data_range(b4, data_range), window)
    return value if a.ndim == 3 else value[0]


def min_msssim_side(levels: int) -> int:
    return (SSIM_WINDOW - 1) * 2 ** (levels - 1) + 1


def ms_ssim(a: torch.Tensor, b: torch.Tensor, data_range=None, levels: int = MSSSIM_LEVELS) -> torch.Tensor:
    """Multi-scale SSIM per image over *levels* scales."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    if not 1 <= levels <= len(MSSSIM_WEIGHTS):
        raise InvalidConfigError(f"levels must lie in [1, {len(MSSSIM_WEIGHTS)}]")
    a4, b4 = _as_batch(a), _as_batch(b)
    need = min_msssim_side(levels)
    if min(a4.shape[-2:]) < need:
        raise ImageTooSmallError(f"{levels}-level MS-SSIM needs at least {need}x{need} pixels, got {tuple(a4.shape[-2:])}")
    weights = torch.tensor(MSSSIM_WEIGHTS[:levels], dtype=a4.dtype)
    weights = weights / weights.sum()
    window = gaussian_window(dtype=a4.dtype)
    rng = _data_range(b4, data_range)
    value = torch.ones(a4.shape[0], dtype=a4.dtype)
    for level in range(levels):
        s, cs = _ssim_parts(a4, b4, rng, window)
        if level == levels - 1:
            value = value * torch.clamp(s, min=_CLAMP) ** weights[level]
        else:
            value = value * torch.clamp(cs, min=_CLAMP) ** weights[level]
            a4, b4 = F.avg_pool2d(a4, 2), F.avg_pool2d(b4, 2)
    return value if a.ndim == 3 else value[0]


# ── Frequency-domain distance ────────────────────────────────────────────────

def watson_weights(shape: tuple[int, int], dtype=torch.float64) -> torch.Tensor:
    """Radially decreasing frequency weight 1 / (1 + (rho / cutoff)^2), rho in cycles/pixel."""
    fy = torch.fft.fftfreq(shape[0], dtype=dtype)
    fx = torch.fft.fftfreq(shape[1], dtype=dtype)
    gy, gx = torch.meshgrid(fy, fx, indexing="ij")
    rho = torch.sqrt(gx**2 + gy**2)
    return 1.0 / (1.0 + (rho / WATSON_CUTOFF) ** 2)


def watson_dft_loss(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Mean of w(f)·|DFT(a) - DFT(b)|² with an orthonormal DFT; zero iff a == b."""
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {tuple(a.shape)} vs {tuple(b.shape)}")
    diff = torch.fft.fft2(a - b, norm="ortho")
    w = watson_weights(tuple(a.shape[-2:]), dtype=a.real.dtype if a.is_complex() else a.dtype)
    return torch.mean(w * diff.abs() ** 2)


# ── Composite reconstruction loss ────────────────────────────────────────────

def brightness_scale(recon: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Least-squares factor s minimising |s·recon - target|² per image."""
    num = (recon * target).mean(dim=(-2, -1), keepdim=True)
    den = (recon * recon).mean(dim=(-2, -1), keepdim=True)
    return num / den.clamp(min=_CLAMP)


def _roi_target(target: torch.Tensor, roi: tuple[int, int], frame: tuple[int, int]) -> torch.Tensor:
    shape = tuple(target.shape[-2:])
    if shape == tuple(roi):
        return target
    if shape == tuple(frame):
        return crop_center(target, roi)
    raise ShapeError(f"target {shape} matches neither roi {roi} nor frame {frame}")


def amplitude_loss(recon: torch.Tensor, target: torch.Tensor, w: LossWeights) -> torch.Tensor:
    total = w.w_mse * torch.mean((recon - target) ** 2)
    if w.w_msssim > 0:
        total = total + w.w_msssim * (1 - ms_ssim(recon, target, levels=w.msssim_levels).mean())
    if w.w_wfft > 0:
        total = total + w.w_wfft * watson_dft_loss(recon, target)
    return total


def reconstruction_loss(
    phase: torch.Tensor,
    target: torch.Tensor,
    config: OpticsConfig,
    w: LossWeights,
    brightness_match: bool = True,
) -> torch.Tensor:
    """Composite loss between |f_p^{-d}(φ, 1)| and the target amplitude on the ROI."""
    frame = tuple(phase.shape[-2:])
    roi = config.roi_for(frame)
    recon = reconstruction(phase, config)
    t = _roi_target(target.to(recon.dtype), roi, frame)
    if brightness_match:
        recon = brightness_scale(recon, t) * recon
    return amplitude_loss(recon, t, w)
