"""Sender and receiver halves of the codec: sample -> `.ravq` stream -> phase map."""
from __future__ import annotations

import logging
from dataclasses import replace

import torch

from holocodec.bitstream.container import HoloBitstream
from holocodec.codec.model import HoloCodec, decode, fuse_indices
from holocodec.errors import ShapeError
from holocodec.optics.propagation import OpticsConfig, PhaseMap
from holocodec.utils import ceil_log2, is_power_of_two
from holocodec.vq.codebook import Codebook, IndexGrid

logger = logging.getLogger("holocodec")


def _log2_size(book: Codebook) -> int:
    if not is_power_of_two(book.size):
        raise ShapeError(f"stream codebooks must have power-of-two sizes, got {book.size}")
    return ceil_log2(book.size)


def compress_sample(
    inputs: torch.Tensor,
    model: HoloCodec,
    books: tuple[Codebook, Codebook],
    optics: OpticsConfig,
    channel: int,
    huffman: bool = True,
) -> HoloBitstream:
    """Encode one (3, H, W) input with the given (bottom, top) codebooks.

    With *huffman* on, the fixed-length stream is returned instead whenever it is smaller.
    """
    if inputs.ndim != 3:
        raise ShapeError(f"expected one (3, H, W) sample, got {tuple(inputs.shape)}")
    frame = tuple(inputs.shape[-2:])
    model.eval()
    with torch.no_grad():
        bottom, top = model.encode(inputs[None])
        levels = model.hierarchical_quantize(bottom, top, books)
    stream = HoloBitstream(
        channel=channel,
        profile_id=model.profile.profile_id,
        log2_sizes=(_log2_size(books[0]), _log2_size(books[1])),
        bottom=IndexGrid(levels.bottom_indices[0]),
        top=IndexGrid(levels.top_indices[0]),
        frame=frame,
        roi=optics.roi_for(frame),
        wavelength_nm=optics.wavelength * 1e9,
        pitch_um=optics.pixel_pitch * 1e6,
        distance_mm=optics.distance * 1e3,
        huffman=huffman,
    )
    if huffman:
        fixed = replace(stream, huffman=False)
        if len(fixed.serialize()) < len(stream.serialize()):
            logger.debug("Huffman payload larger than fixed-length; using fixed-length coding")
            stream = fixed
    return stream


def decompress_stream(stream: HoloBitstream, model: HoloCodec, books: tuple[Codebook, Codebook]) -> PhaseMap:
    """Receiver: indices -> codevectors -> fused latents -> phase map."""
    if (books[0].size, books[1].size) != stream.sizes:
        raise ShapeError(f"stream expects codebooks {stream.sizes}, got {(books[0].size, books[1].size)}")
    if stream.profile_id != model.profile.profile_id:
        raise ShapeError(f"stream profile {stream.profile_id} does not match model profile {model.profile.profile_id}")
    (hb, wb), (ht, wt) = model.profile.latent_shapes(stream.frame)
    if tuple(stream.bottom.data.shape) != (hb, wb) or tuple(stream.top.data.shape) != (ht, wt):
        raise ShapeError("stream latent geometry does not match the model profile")
    fused = fuse_indices(stream.bottom, stream.top, books, model)
    return decode(fused, model)
