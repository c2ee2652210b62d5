"""Sender/receiver demo: codebook registry and length-prefixed frames."""
from holocodec.transport.registry import CodebookRegistry
from holocodec.transport.session import (
    FileChannel,
    Received,
    SocketChannel,
    connect,
    decode_frame,
    listen,
    read_frame,
    receive,
    send,
    serve_once,
    write_frame,
)

__all__ = [
    "CodebookRegistry",
    "FileChannel",
    "Received",
    "SocketChannel",
    "connect",
    "decode_frame",
    "listen",
    "read_frame",
    "receive",
    "send",
    "serve_once",
    "write_frame",
]
