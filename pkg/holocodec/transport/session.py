"""Length-prefixed frame exchange between sender and receiver.

Frame: [4B little-endian payload length][payload = one `.ravq` stream]. Only headers
and index payloads cross the wire; both ends look codebooks up in their own registry.
"""
from __future__ import annotations

import logging
import socket
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator, Protocol

import torch
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from holocodec.bitstream.container import HoloBitstream
from holocodec.codec.checkpoint import CodecBundle
from holocodec.codec.pipeline import compress_sample, decompress_stream
from holocodec.config import CONNECT_ATTEMPTS, MAX_FRAME_BYTES
from holocodec.errors import CorruptStreamError, HoloCodecError, ProtocolError, RegistryMissError, TransportError
from holocodec.optics.propagation import PhaseMap
from holocodec.transport.registry import CodebookRegistry

logger = logging.getLogger("holocodec")

_LENGTH = struct.Struct("<I")
_CHUNK = 1 << 16


class ByteChannel(Protocol):
    def write(self, data: bytes) -> int: ...

    def read(self, n: int) -> bytes: ...

    def close(self) -> None: ...


class SocketChannel:
    """Reliable byte stream over a connected socket."""

    def __init__(self, sock: socket.socket):
        self.sock = sock

    def write(self, data: bytes) -> int:
        return self.sock.send(data)

    def read(self, n: int) -> bytes:
        return self.sock.recv(n)

    def close(self) -> None:
        self.sock.close()


class FileChannel:
    """Frames appended to / read back from a file (offline transfer)."""

    def __init__(self, handle: BinaryIO):
        self.handle = handle

    @classmethod
    def open(cls, path: str | Path, mode: str) -> FileChannel:
        if mode not in ("rb", "wb", "ab"):
            raise ValueError(f"unsupported mode {mode!r}")
        return cls(open(path, mode))

    def write(self, data: bytes) -> int:
        return self.handle.write(data)

    def read(self, n: int) -> bytes:
        return self.handle.read(n)

    def close(self) -> None:
        self.handle.close()


# ── Frames ───────────────────────────────────────────────────────────────────

def write_frame(channel: ByteChannel, payload: bytes) -> int:
    """Write one frame; returns the bytes put on the wire (prefix included)."""
    if len(payload) > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {len(payload)} bytes exceeds the {MAX_FRAME_BYTES} byte limit")
    data = memoryview(_LENGTH.pack(len(payload)) + payload)
    written = 0
    try:
        while written < len(data):
            n = channel.write(data[written : written + _CHUNK])
            if not n:
                raise TransportError("connection accepted no more bytes", written=written)
            written += n
    except OSError as e:
        raise TransportError(f"write failed: {e}", written=written) from e
    return written


def _read_exact(channel: ByteChannel, n: int) -> bytes:
    parts, got = [], 0
    while got < n:
        chunk = channel.read(min(_CHUNK, n - got))
        if not chunk:
            break
        parts.append(chunk)
        got += len(chunk)
    return b"".join(parts)


def read_frame(channel: ByteChannel) -> bytes | None:
    """Next frame payload, or None on a clean end of stream between frames."""
    prefix = _read_exact(channel, _LENGTH.size)
    if not prefix:
        return None
    if len(prefix) < _LENGTH.size:
        raise ProtocolError("truncated frame length prefix")
    (length,) = _LENGTH.unpack(prefix)
    if length > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame length {length} exceeds the {MAX_FRAME_BYTES} byte limit")
    payload = _read_exact(channel, length)
    if len(payload) < length:
        raise ProtocolError(f"truncated frame: expected {length} bytes, got {len(payload)}")
    return payload


# ── Connections ──────────────────────────────────────────────────────────────

@retry(
    stop=stop_after_attempt(CONNECT_ATTEMPTS),
    wait=wait_exponential(multiplier=1, min=2, max=10),
    retry=retry_if_exception_type(OSError),
    reraise=True,
)
def connect(host: str, port: int, timeout: float = 30.0) -> SocketChannel:
    sock = socket.create_connection((host, port), timeout=timeout)
    logger.info("Connected to %s:%d", host, port)
    return SocketChannel(sock)


def listen(host: str, port: int) -> socket.socket:
    server = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server.bind((host, port))
    server.listen(1)
    return server


# ── Sender / receiver ────────────────────────────────────────────────────────

def send(
    inputs: dict[int, torch.Tensor],
    qos: int,
    registry: CodebookRegistry,
    codecs: dict[int, CodecBundle],
    channel: ByteChannel,
    huffman: bool = True,
) -> int:
    """Compress every colour channel of one image with size id *qos*; one frame per channel.

    Returns the total bytes written. All codebooks are looked up before anything is sent.
    """
    books = {ch: registry.get(ch, qos) for ch in sorted(inputs)}
    for ch in books:
        if ch not in codecs:
            raise RegistryMissError(f"no codec loaded for channel {ch}")
    total = 0
    for ch, pair in books.items():
        bundle = codecs[ch]
        stream = compress_sample(inputs[ch], bundle.model, pair, bundle.optics, ch, huffman=huffman)
        try:
            total += write_frame(channel, stream.serialize())
        except TransportError as e:
            raise TransportError(f"sending channel {ch} failed", written=total + e.written) from e
        logger.debug("Sent channel %d at size %d: %d bytes so far", ch, qos, total)
    return total


@dataclass
class Received:
    """Outcome of one frame; exactly one of *phase* and *error* is set."""

    nbytes: int
    channel: int | None = None
    size_id: int | None = None
    phase: PhaseMap | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.phase is not None


def decode_frame(payload: bytes, registry: CodebookRegistry, codecs: dict[int, CodecBundle]) -> Received:
    """Parse, validate and decode one frame payload; failures become a rejected Received."""
    nbytes = _LENGTH.size + len(payload)
    try:
        stream = HoloBitstream.parse(payload)
    except CorruptStreamError as e:
        logger.warning("Rejected frame (%d bytes): %s", nbytes, e)
        return Received(nbytes, error=str(e))
    try:
        bundle = codecs.get(stream.channel)
        if bundle is None:
            raise RegistryMissError(f"no codec loaded for channel {stream.channel}")
        books = registry.get(stream.channel, stream.size_id)
        phase = decompress_stream(stream, bundle.model, books)
    except (HoloCodecError, ValueError, RuntimeError) as e:
        logger.warning("Rejected frame for channel %d: %s", stream.channel, e)
        return Received(nbytes, stream.channel, stream.size_id, error=str(e))
    return Received(nbytes, stream.channel, stream.size_id, phase=phase)


def receive_frames(
    channel: ByteChannel,
    registry: CodebookRegistry,
    codecs: dict[int, CodecBundle],
) -> Iterator[Received]:
    """Decode frames until the peer closes; a bad frame is reported and skipped."""
    while True:
        payload = read_frame(channel)
        if payload is None:
            return
        yield decode_frame(payload, registry, codecs)


def receive(
    channel: ByteChannel,
    registry: CodebookRegistry,
    codecs: dict[int, CodecBundle],
    limit: int | None = None,
) -> list[Received]:
    out = []
    for item in receive_frames(channel, registry, codecs):
        out.append(item)
        if limit is not None and len(out) >= limit:
            break
    return out


def serve_once(
    server: socket.socket,
    registry: CodebookRegistry,
    codecs: dict[int, CodecBundle],
) -> list[Received]:
    """Accept one connection and receive until the sender closes it."""
    conn, addr = server.accept()
    logger.info("Accepted connection from %s:%d", *addr[:2])
    channel = SocketChannel(conn)
    try:
        return receive(channel, registry, codecs)
    finally:
        channel.close()
