"""Vector quantization: codebooks, nearest-codevector search, EMA learning, VQ losses."""
from holocodec.vq.codebook import (
    Codebook,
    IndexGrid,
    LatentGrid,
    decode_codebook,
    encode_codebook,
    load_codebooks,
    save_codebooks,
)
from holocodec.vq.quantizer import (
    ema_update,
    nearest_codevectors,
    quantize,
    reseed_dead_codevectors,
    straight_through,
    utilization,
    vq_losses,
)

__all__ = [
    "Codebook",
    "IndexGrid",
    "LatentGrid",
    "decode_codebook",
    "ema_update",
    "encode_codebook",
    "load_codebooks",
    "nearest_codevectors",
    "quantize",
    "reseed_dead_codevectors",
    "save_codebooks",
    "straight_through",
    "utilization",
    "vq_losses",
]
