"""Binary tensor container: little-endian float32 payload with a fixed header.

Layout (all little-endian):

    offset 0   magic   4 bytes  b"FVLM"
    offset 4   version u32      1
    offset 8   dtype   u8       1 (float32)
    offset 9   rank    u8       1 or 2
    offset 10  pad     2 bytes  zeros
    offset 12  dims    rank x u64
    ...        payload prod(dims) x f32, row-major

Round-trips are bit-exact on the payload. Rank 1 maps to a raw-tagged score
vector, rank 2 to a feature matrix.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .core import RAW, ScoreVector, as_features, as_scores

MAGIC = b"FVLM"
VERSION = 1
DTYPE_F32 = 1

# refuse absurd allocations before touching the payload
MAX_ELEMENTS = 1 << 28


class TensorFormatError(ValueError):
    """Malformed tensor file; carries the byte offset of the defect."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


def write_tensor(array, path: str | Path) -> None:
    """Serialize a 1-D or 2-D array as float32; values must be finite."""
    if isinstance(array, ScoreVector):
        array = array.values
    arr = np.asarray(array, dtype=np.float64)
    if arr.ndim == 1:
        as_scores(arr)
    elif arr.ndim == 2:
        as_features(arr)
    else:
        raise TensorFormatError(f"unsupported rank {arr.ndim}", 9)
    payload = np.ascontiguousarray(arr, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<BB", DTYPE_F32, arr.ndim))
        fh.write(b"\x00\x00")
        for dim in arr.shape:
            fh.write(struct.pack("<Q", dim))
        fh.write(payload.tobytes())


def read_tensor(path: str | Path):
    """Read a tensor file; rank 1 -> ScoreVector (raw), rank 2 -> ndarray.

    The float32 payload is promoted exactly to float64 for computation.
    """
    blob = Path(path).read_bytes()
    if len(blob) < 12:
        raise TensorFormatError("file shorter than the fixed header", len(blob))
    if blob[0:4] != MAGIC:
        raise TensorFormatError(f"bad magic {blob[0:4]!r}", 0)
    (version,) = struct.unpack_from("<I", blob, 4)
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}", 4)
    dtype, rank = struct.unpack_from("<BB", blob, 8)
    if dtype != DTYPE_F32:
        raise TensorFormatError(f"unsupported dtype code {dtype}", 8)
    if rank not in (1, 2):
        raise TensorFormatError(f"unsupported rank {rank}", 9)
    if blob[10:12] != b"\x00\x00":
        raise TensorFormatError("nonzero pad bytes", 10)
    dims_end = 12 + 8 * rank
    if len(blob) < dims_end:
        raise TensorFormatError("truncated dimension list", len(blob))
    dims = struct.unpack_from(f"<{rank}Q", blob, 12)
    count = 1
    for d in dims:
        count *= d
    if count > MAX_ELEMENTS:
        raise TensorFormatError(f"element count {count} exceeds limit", 12)
    expected = dims_end + 4 * count
    if len(blob) != expected:
        raise TensorFormatError(
            f"payload length {len(blob) - dims_end} != expected {4 * count}", dims_end
        )
    flat = np.frombuffer(blob, dtype="<f4", offset=dims_end, count=count)
    arr = flat.astype(np.float64).reshape(dims)
    if rank == 1:
        return ScoreVector(arr, RAW)
    return as_features(arr)
