"""Quality of a phase-only hologram: reconstruct on the ROI and compare with the target."""
from __future__ import annotations

import math

import numpy as np
import torch

from holocodec.codec.losses import brightness_scale, ms_ssim as _ms_ssim, ssim as _ssim
from holocodec.config import MSSSIM_LEVELS, PSNR_CAP_DB
from holocodec.errors import DomainError, ShapeError
from holocodec.optics.propagation import AmplitudeMap, OpticsConfig, PhaseMap, reconstruction
from holocodec.utils import crop_center


def _array(x) -> torch.Tensor:
    data = x.data if isinstance(x, (AmplitudeMap, PhaseMap)) else x
    if isinstance(data, np.ndarray):
        data = torch.from_numpy(data)
    return torch.as_tensor(data).to(torch.float64)


def psnr(a, b, peak: float | None = None) -> float:
    """10·log10(peak² / MSE); +inf for identical inputs. *peak* defaults to max(b)."""
    x, y = _array(a), _array(b)
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch {tuple(x.shape)} vs {tuple(y.shape)}")
    if peak is None:
        peak = float(y.max())
    if not peak > 0:
        raise DomainError(f"peak must be positive, got {peak}")
    mse = float(torch.mean((x - y) ** 2))
    if mse == 0:
        return math.inf
    return 10 * math.log10(peak**2 / mse)


def capped(value: float, cap: float = PSNR_CAP_DB) -> float:
    return min(value, cap)


def ssim(a, b, data_range: float | None = None) -> float:
    return float(_ssim(_array(a), _array(b), data_range))


def ms_ssim(a, b, data_range: float | None = None, levels: int = MSSSIM_LEVELS) -> float:
    return float(_ms_ssim(_array(a), _array(b), data_range, levels=levels))


def evaluate_phase(
    phase: PhaseMap | torch.Tensor,
    target,
    optics: OpticsConfig,
    msssim_levels: int = MSSSIM_LEVELS,
    brightness_match: bool = True,
) -> dict[str, float]:
    """PSNR / SSIM / MS-SSIM of |f_p^{-d}(φ, 1)| against the target amplitude on the ROI.

    Peak and data range are the maximum of the ROI target.
    """
    p = _array(phase)
    frame = tuple(p.shape[-2:])
    roi = optics.roi_for(frame)
    t = _array(target)
    if tuple(t.shape) == frame:
        t = crop_center(t, roi)
    elif tuple(t.shape) != roi:
        raise ShapeError(f"target {tuple(t.shape)} matches neither roi {roi} nor frame {frame}")
    with torch.no_grad():
        recon = reconstruction(p, optics)
        if brightness_match:
            recon = brightness_scale(recon, t) * recon
    peak = float(t.max()) or 1.0
    return {
        "psnr": psnr(recon, t, peak),
        "ssim": ssim(recon, t, peak),
        "msssim": ms_ssim(recon, t, peak, levels=msssim_levels),
    }
