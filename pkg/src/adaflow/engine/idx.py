"""IDX container format (the MNIST image/label files).

Layout: two zero bytes, a dtype code, the dimension count, then each
dimension as a big-endian uint32, then row-major payload.  Image files use
magic 0x00000803 (ubyte, 3 dims), label files 0x00000801 (ubyte, 1 dim).
"""

from __future__ import annotations

import struct

import numpy as np

from ..errors import MalformedWire

_DTYPES = {
    0x08: np.dtype(">u1"),
    0x09: np.dtype(">i1"),
    0x0B: np.dtype(">i2"),
    0x0C: np.dtype(">i4"),
    0x0D: np.dtype(">f4"),
    0x0E: np.dtype(">f8"),
}
_CODES = {v.newbyteorder("="): k for k, v in _DTYPES.items()}


def load_idx(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[0] != 0 or blob[1] != 0:
        raise MalformedWire(f"{path}: not an IDX file")
    code, ndim = blob[2], blob[3]
    if code not in _DTYPES:
        raise MalformedWire(f"{path}: unknown IDX dtype 0x{code:02x}")
    header = 4 + 4 * ndim
    if len(blob) < header:
        raise MalformedWire(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", blob[4:header])
    dtype = _DTYPES[code]
    count = int(np.prod(dims)) if dims else 1
    if len(blob) - header != count * dtype.itemsize:
        raise MalformedWire(
            f"{path}: payload {len(blob) - header} bytes, expected "
            f"{count * dtype.itemsize}"
        )
    arr = np.frombuffer(blob, dtype=dtype, offset=header).reshape(dims)
    return arr.astype(dtype.newbyteorder("="))


def save_idx(path: str, arr: np.ndarray) -> None:
    dtype = np.dtype(arr.dtype).newbyteorder("=")
    if dtype not in _CODES:
        raise ValueError(f"dtype {arr.dtype} not representable in IDX")
    with open(path, "wb") as fh:
        fh.write(bytes([0, 0, _CODES[dtype], arr.ndim]))
        fh.write(struct.pack(f">{arr.ndim}I", *arr.shape))
        fh.write(arr.astype(dtype.newbyteorder(">")).tobytes())


def load_dataset(images_path: str, labels_path: str) -> tuple[np.ndarray, np.ndarray]:
    images = load_idx(images_path)
    labels = load_idx(labels_path)
    if images.ndim != 3:
        raise MalformedWire(f"{images_path}: expected 3-D image file")
    if labels.ndim != 1 or len(labels) != len(images):
        raise MalformedWire(
            f"{labels_path}: {len(labels)} labels for {len(images)} images"
        )
    return images, labels
