"""
Binary parameter files.

Layout (little-endian): the magic `SPTR`, a `u32` format version and a
`u32` tensor count, then for each tensor a `u32` name length, the UTF-8
name, a `u32` rank, one `u32` per dimension and the float32 values in
row-major order. The file ends with the CRC32 of everything before it.
"""

import struct
import zlib
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from spectrans.autodiff.layers import Module
from spectrans.autodiff.tensor import Tensor
from spectrans.core.errors import FormatError

MAGIC = b"SPTR"
VERSION = 1
PARAMS_SUFFIX = ".sptr"


def encode_params(params: Mapping[str, np.ndarray | Tensor]) -> bytes:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for name, value in params.items():
        arr = value.values if isinstance(value, Tensor) else value
        arr = np.asarray(arr, dtype="<f4")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        chunks.append(arr.tobytes())
    body = b"".join(chunks)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("truncated_params", "Unexpected end of file.")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def decode_params(data: bytes) -> dict[str, np.ndarray]:
    """
    Raises:
        FormatError: bad magic or version, truncated content or checksum
            mismatch.
    """
    if len(data) < len(MAGIC) + 12 or data[:4] != MAGIC:
        raise FormatError("bad_magic", "Not a parameter file.")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise FormatError("checksum_mismatch", "Parameter file is corrupted.")
    r = _Reader(body)
    r.take(4)
    version, count = r.u32(), r.u32()
    if version != VERSION:
        raise FormatError("unsupported_version", str(version))
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.take(r.u32()).decode("utf-8")
        shape = tuple(r.u32() for _ in range(r.u32()))
        n = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(r.take(4 * n), dtype="<f4").reshape(shape)
        out[name] = arr.astype(np.float64)
    if r.pos != len(body):
        raise FormatError("trailing_data", "Unexpected bytes after tensors.")
    return out


def save_params(params: Mapping[str, np.ndarray | Tensor], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_params(params))


def load_params(path: Path) -> dict[str, np.ndarray]:
    return decode_params(path.read_bytes())


def save_module(module: Module, path: Path) -> None:
    save_params(module.parameters(), path)


def load_module(module: Module, path: Path) -> None:
    """
    Load parameters into a module whose architecture was already built.
    Nothing is modified if the file does not match the architecture.
    """
    module.load_state(load_params(path))
