"""
Binary tensor container used for checkpoints and datasets.

Layout (all integers little-endian)::

    b"IALT" | version u32 | entry count u32
    per entry: name length u16 | utf-8 name | dtype u8 (0=f32, 1=f64)
               | rank u8 | dims u64 * rank | row-major IEEE-754 payload
    CRC32 of every preceding byte, u32

Entries keep their insertion order so that writing the same mapping twice
produces identical bytes.
"""

from __future__ import annotations

import math
import os
import struct
import zlib
from typing import Mapping

import numpy as np

from .errors import ChecksumMismatch, FormatVersionMismatch, IoError

MAGIC = b"IALT"
VERSION = 1
_DTYPE_CODES = {np.dtype("<f4"): 0, np.dtype("<f8"): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def encode(tensors: Mapping[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        dt = arr.dtype.newbyteorder("<")
        if dt not in _DTYPE_CODES:
            raise TypeError(f"{name}: unsupported dtype {arr.dtype}")
        if arr.ndim > 255:
            raise ValueError(f"{name}: rank {arr.ndim} too large")
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise ValueError(f"entry name too long: {name[:40]}...")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<BB", _DTYPE_CODES[dt], arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=dt).tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


class _Reader:
    def __init__(self, buf: bytes, end: int):
        self.buf, self.pos, self.end = buf, 0, end

    def take(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise IoError(f"container truncated: need {n} bytes at offset {self.pos}")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode(buf: bytes) -> dict[str, np.ndarray]:
    """Parse a container, validating magic, version, structure and CRC.

    Nothing is returned unless the whole buffer is valid.
    """
    if len(buf) < 4:
        raise IoError("container truncated before magic")
    if buf[:4] != MAGIC:
        raise FormatVersionMismatch(f"bad magic {buf[:4]!r}")
    if len(buf) < 16:
        raise IoError("container truncated in header")
    rd = _Reader(buf, len(buf) - 4)
    rd.take(4)
    version, count = rd.unpack("<II")
    if version != VERSION:
        raise FormatVersionMismatch(f"unsupported container version {version}")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = rd.unpack("<H")
        try:
            name = rd.take(nlen).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ChecksumMismatch(f"corrupt entry name: {exc}") from None
        code, rank = rd.unpack("<BB")
        if code not in _CODE_DTYPES:
            raise ChecksumMismatch(f"{name}: unknown dtype code {code}")
        dims = rd.unpack(f"<{rank}Q")
        dt = _CODE_DTYPES[code]
        nbytes = math.prod(dims) * dt.itemsize
        payload = rd.take(nbytes)
        out[name] = np.frombuffer(payload, dtype=dt).reshape(dims).astype(dt.newbyteorder("="))
    if rd.pos != rd.end:
        raise IoError(f"{rd.end - rd.pos} unexpected bytes before checksum")
    (crc,) = struct.unpack("<I", buf[-4:])
    if crc != zlib.crc32(buf[:-4]) & 0xFFFFFFFF:
        raise ChecksumMismatch("CRC32 mismatch")
    return out


def write(path, tensors: Mapping[str, np.ndarray]) -> None:
    data = encode(tensors)
    tmp = f"{os.fspath(path)}.tmp"
    try:
        with open(tmp, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read(path) -> dict[str, np.ndarray]:
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return decode(buf)
