"""Digit image datasets.

Prefers real MNIST IDX files when a directory containing them is given;
otherwise generates "synthdigits", a deterministic procedurally rendered
28x28 digit set (pixel-font glyphs with affine jitter, stroke dilation and
noise).  Either way the output is uint8 images in [0, 255] and uint8
labels, written in the IDX container format.
"""

from __future__ import annotations

import os
import struct

import numpy as np

# 7x5 pixel font, one bitmap per digit
_GLYPHS = {
    0: ["01110", "10001", "10011", "10101", "11001", "10001", "01110"],
    1: ["00100", "01100", "00100", "00100", "00100", "00100", "01110"],
    2: ["01110", "10001", "00001", "00110", "01000", "10000", "11111"],
    3: ["11110", "00001", "00001", "01110", "00001", "00001", "11110"],
    4: ["00010", "00110", "01010", "10010", "11111", "00010", "00010"],
    5: ["11111", "10000", "11110", "00001", "00001", "10001", "01110"],
    6: ["00110", "01000", "10000", "11110", "10001", "10001", "01110"],
    7: ["11111", "00001", "00010", "00100", "01000", "01000", "01000"],
    8: ["01110", "10001", "10001", "01110", "10001", "10001", "01110"],
    9: ["01110", "10001", "10001", "01111", "00001", "00010", "01100"],
}


def _glyph_array(digit: int) -> np.ndarray:
    return np.array([[int(c) for c in row] for row in _GLYPHS[digit]], np.float64)


def _render(digit: int, rng: np.random.Generator) -> np.ndarray:
    glyph = _glyph_array(digit)
    if rng.random() < 0.5:  # stroke dilation
        padded = np.pad(glyph, 1)
        glyph = np.maximum(
            glyph, 0.6 * np.maximum(padded[1:-1, :-2], padded[1:-1, 2:])[:, :]
        )

    # target box then inverse-map 28x28 pixels through a small affine jitter
    scale = rng.uniform(2.0, 3.1)
    angle = rng.uniform(-0.35, 0.35)
    shear = rng.uniform(-0.25, 0.25)
    cx = 14 + rng.uniform(-3.0, 3.0)
    cy = 14 + rng.uniform(-3.0, 3.0)
    gh, gw = glyph.shape
    cos, sin = np.cos(angle), np.sin(angle)
    ys, xs = np.mgrid[0:28, 0:28]
    u = (xs - cx) / scale
    v = (ys - cy) / scale
    gx = cos * u + sin * v + shear * v + (gw - 1) / 2
    gy = -sin * u + cos * v + (gh - 1) / 2

    x0 = np.floor(gx).astype(int)
    y0 = np.floor(gy).astype(int)
    fx = gx - x0
    fy = gy - y0

    def sample(yy, xx):
        ok = (yy >= 0) & (yy < gh) & (xx >= 0) & (xx < gw)
        out = np.zeros_like(gx)
        out[ok] = glyph[yy[ok], xx[ok]]
        return out

    img = (
        sample(y0, x0) * (1 - fy) * (1 - fx)
        + sample(y0, x0 + 1) * (1 - fy) * fx
        + sample(y0 + 1, x0) * fy * (1 - fx)
        + sample(y0 + 1, x0 + 1) * fy * fx
    )
    img *= rng.uniform(0.55, 1.0)
    if rng.random() < 0.3:  # occluding dash
        y = rng.integers(4, 24)
        x = rng.integers(0, 20)
        img[y : y + rng.integers(1, 3), x : x + rng.integers(4, 9)] = rng.uniform(0, 0.8)
    img += rng.normal(0, 0.10, img.shape)
    salt = rng.random(img.shape) < 0.01
    img[salt] = rng.uniform(0.5, 1.0)
    return (np.clip(img, 0, 1) * 255).astype(np.uint8)


def synth_digits(count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, size=count).astype(np.uint8)
    images = np.stack([_render(int(d), rng) for d in labels])
    return images, labels


# --- IDX container ----------------------------------------------------------


def write_idx(path: str, arr: np.ndarray) -> None:
    codes = {np.dtype(np.uint8): 0x08, np.dtype(np.int8): 0x09,
             np.dtype(np.int32): 0x0C, np.dtype(np.float32): 0x0D}
    with open(path, "wb") as fh:
        fh.write(bytes([0, 0, codes[arr.dtype], arr.ndim]))
        fh.write(struct.pack(f">{arr.ndim}I", *arr.shape))
        fh.write(arr.astype(arr.dtype.newbyteorder(">")).tobytes())


def read_idx(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    code, ndim = blob[2], blob[3]
    dims = struct.unpack(f">{ndim}I", blob[4 : 4 + 4 * ndim])
    dtypes = {0x08: ">u1", 0x09: ">i1", 0x0B: ">i2", 0x0C: ">i4", 0x0D: ">f4"}
    arr = np.frombuffer(blob, dtype=dtypes[code], offset=4 + 4 * ndim)
    return arr.reshape(dims).astype(np.dtype(dtypes[code]).newbyteorder("="))


def load_mnist_dir(path: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """train images/labels, test images/labels from standard MNIST file names."""
    names = {
        "train_images": ("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
        "train_labels": ("train-labels-idx1-ubyte", "train-labels.idx1-ubyte"),
        "test_images": ("t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
        "test_labels": ("t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"),
    }
    found = {}
    for key, candidates in names.items():
        for cand in candidates:
            full = os.path.join(path, cand)
            if os.path.exists(full):
                found[key] = read_idx(full)
                break
        else:
            raise FileNotFoundError(f"{path}: missing {candidates[0]}")
    return (found["train_images"], found["train_labels"],
            found["test_images"], found["test_labels"])


def get_dataset(mnist_dir: str | None, train_count: int, test_count: int,
                seed: int):
    """(name, train_images, train_labels, test_images, test_labels)."""
    if mnist_dir:
        tr_i, tr_l, te_i, te_l = load_mnist_dir(mnist_dir)
        return ("mnist", tr_i[:train_count], tr_l[:train_count],
                te_i[:test_count], te_l[:test_count])
    tr_i, tr_l = synth_digits(train_count, seed)
    te_i, te_l = synth_digits(test_count, seed + 1)
    return "synthdigits", tr_i, tr_l, te_i, te_l
