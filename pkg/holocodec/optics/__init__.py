"""Wave optics: ASM propagation, intensity preprocessing and phase-retrieval baselines."""
from holocodec.optics.propagation import (
    AmplitudeMap,
    ComplexField,
    OpticsConfig,
    PhaseMap,
    amplitude_from_intensity,
    asm_kernel,
    object_to_hologram,
    propagate,
    reconstruct_amplitude,
    reconstruction,
)
from holocodec.optics.retrieval import RetrievalSettings, gerchberg_saxton, sgd_phase_retrieval

__all__ = [
    "AmplitudeMap",
    "ComplexField",
    "OpticsConfig",
    "PhaseMap",
    "RetrievalSettings",
    "amplitude_from_intensity",
    "asm_kernel",
    "gerchberg_saxton",
    "object_to_hologram",
    "propagate",
    "reconstruct_amplitude",
    "reconstruction",
    "sgd_phase_retrieval",
]
