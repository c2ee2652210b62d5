"""Rate-distortion curves and Bjøntegaard delta metrics."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from holocodec.config import BD_MIN_POINTS, BD_OVERLAP_WARN
from holocodec.errors import DomainError, RangeError, UndefinedOverlapError

logger = logging.getLogger("holocodec")


@dataclass(frozen=True)
class RDCurve:
    """(bpp, quality) points sorted by strictly increasing bpp."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple(sorted((float(r), float(q)) for r, q in self.points))
        if not pts:
            raise DomainError("an RD curve needs at least one point")
        for r, q in pts:
            if not (r > 0 and math.isfinite(r) and math.isfinite(q)):
                raise DomainError(f"invalid RD point ({r}, {q})")
        if any(a[0] == b[0] for a, b in zip(pts, pts[1:])):
            raise DomainError("RD curve rates must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @property
    def rates(self) -> np.ndarray:
        return np.array([r for r, _ in self.points])

    @property
    def qualities(self) -> np.ndarray:
        return np.array([q for _, q in self.points])

    def __len__(self) -> int:
        return len(self.points)


def _check(curve: RDCurve, name: str) -> None:
    if len(curve) < BD_MIN_POINTS:
        raise RangeError(f"{name} curve has {len(curve)} point(s); BD metrics need at least {BD_MIN_POINTS}")


def _fit(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cubic least-squares fit, or the interpolating polynomial for fewer than four points."""
    return np.polyfit(x, y, min(3, len(x) - 1))


def _overlap(a: np.ndarray, b: np.ndarray, what: str) -> tuple[float, float]:
    lo, hi = max(a.min(), b.min()), min(a.max(), b.max())
    if not hi > lo:
        raise UndefinedOverlapError(f"curves do not overlap in {what}")
    for span in (a.max() - a.min(), b.max() - b.min()):
        if span > 0 and (hi - lo) / span < BD_OVERLAP_WARN:
            logger.warning("BD %s overlap covers only %.0f%% of a curve's span", what, 100 * (hi - lo) / span)
            break
    return float(lo), float(hi)


def _mean_on(poly: np.ndarray, lo: float, hi: float) -> float:
    integral = np.polyint(poly)
    return float((np.polyval(integral, hi) - np.polyval(integral, lo)) / (hi - lo))


def bd_rate(anchor: RDCurve, test: RDCurve) -> float:
    """Average rate difference at equal quality, percent; negative means *test* needs fewer bits."""
    _check(anchor, "anchor")
    _check(test, "test")
    if anchor == test:
        return 0.0
    qa, qt = anchor.qualities, test.qualities
    lo, hi = _overlap(qa, qt, "quality")
    diff = _mean_on(_fit(qt, np.log(test.rates)), lo, hi) - _mean_on(_fit(qa, np.log(anchor.rates)), lo, hi)
    return float((math.exp(diff) - 1) * 100)


def bd_psnr(anchor: RDCurve, test: RDCurve) -> float:
    """Average quality difference at equal rate, in the quality unit (dB for PSNR)."""
    _check(anchor, "anchor")
    _check(test, "test")
    if anchor == test:
        return 0.0
    ra, rt = np.log(anchor.rates), np.log(test.rates)
    lo, hi = _overlap(ra, rt, "rate")
    return _mean_on(_fit(rt, test.qualities), lo, hi) - _mean_on(_fit(ra, anchor.qualities), lo, hi)
