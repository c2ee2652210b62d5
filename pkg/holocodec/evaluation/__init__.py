"""Quality metrics, Bjøntegaard deltas and rate-distortion sweeps."""
from holocodec.evaluation.bd import RDCurve, bd_psnr, bd_rate
from holocodec.evaluation.metrics import evaluate_phase, ms_ssim, psnr, ssim
from holocodec.evaluation.sweep import (
    SweepRow,
    curve_from_rows,
    plot_rd_curves,
    rd_sweep,
    read_curve_csv,
    read_sweep_csv,
    write_curve_csv,
    write_sweep_csv,
)

__all__ = [
    "RDCurve",
    "SweepRow",
    "bd_psnr",
    "bd_rate",
    "curve_from_rows",
    "evaluate_phase",
    "ms_ssim",
    "plot_rd_curves",
    "psnr",
    "rd_sweep",
    "read_curve_csv",
    "read_sweep_csv",
    "ssim",
    "write_curve_csv",
    "write_sweep_csv",
]
