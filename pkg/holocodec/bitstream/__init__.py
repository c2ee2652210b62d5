"""Entropy coding of index grids and the `.ravq` container."""
from holocodec.bitstream.container import (
    HoloBitstream,
    bpp,
    bpp_fixed,
    fixed_length_bpp,
    is_multichannel,
    pack_multichannel,
    unpack_multichannel,
)
from holocodec.bitstream.huffman import (
    HuffmanTable,
    build_huffman,
    decode_fixed,
    decode_indices,
    encode_fixed,
    encode_indices,
    entropy_bits,
    histogram,
)

__all__ = [
    "HoloBitstream",
    "HuffmanTable",
    "bpp",
    "bpp_fixed",
    "build_huffman",
    "decode_fixed",
    "decode_indices",
    "encode_fixed",
    "encode_indices",
    "entropy_bits",
    "fixed_length_bpp",
    "histogram",
    "is_multichannel",
    "pack_multichannel",
    "unpack_multichannel",
]
