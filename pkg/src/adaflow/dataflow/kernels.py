"""Semantic kernels of the streaming actors.

Every kernel is deterministic and integer-exact.  The per-pixel
line-buffer step is the binding definition of window timing; feed_row is
its order-equivalent vectorized form used by the execution engine (same
token stream, coarser firings).
"""

from __future__ import annotations

from collections import deque

import numpy as np

from ..fixedpoint import MULTIPLIER_BITS, QuantParams, QuantizedMultiplier

# int64 products a*m stay exact below this bit budget
_SAFE_BITS = 62


class LineBufferKernel:
    """Raster pixel stream (channel-interleaved) -> sliding windows.

    full mode: one window token per output position, elements ordered
    (dy, dx, c).  per_channel mode: one window token per (position,
    channel), elements ordered (dy, dx); tokens ordered x-major then c.
    """

    def __init__(self, in_shape: tuple[int, int, int], kh: int, kw: int,
                 stride: int = 1, per_channel: bool = False):
        self.channels, self.height, self.width = in_shape
        self.kh, self.kw, self.stride = kh, kw, stride
        self.per_channel = per_channel
        self.reset()

    def reset(self) -> None:
        self.rows: deque[np.ndarray] = deque(maxlen=self.kh)
        self.cur = np.zeros((self.width, self.channels), dtype=np.int64)
        self.x = 0
        self.y = 0
        self.c = 0

    @property
    def out_hw(self) -> tuple[int, int]:
        oh = (self.height - self.kh) // self.stride + 1
        ow = (self.width - self.kw) // self.stride + 1
        return oh, ow

    @property
    def buffered_tokens(self) -> int:
        """Pixels currently held (live storage for the high-water counter):
        kh-1 cached rows plus the partial current row."""
        rows = min(len(self.rows), self.kh - 1)
        return rows * self.width * self.channels + self.x * self.channels + self.c

    def _aligned(self, y: int, x: int) -> bool:
        return (
            y >= self.kh - 1 and x >= self.kw - 1
            and (y - (self.kh - 1)) % self.stride == 0
            and (x - (self.kw - 1)) % self.stride == 0
        )

    def step(self, pixel: int) -> np.ndarray | None:
        """Consume one scalar; emit the window it completes, if any."""
        self.cur[self.x, self.c] = pixel
        y, x, c = self.y, self.x, self.c

        win = None
        if self._aligned(y, x):
            x0 = x - self.kw + 1
            prev = list(self.rows)[-(self.kh - 1):] if self.kh > 1 else []
            stack = np.stack(prev + [self.cur], axis=0)  # (kh, W, C)
            if self.per_channel:
                win = stack[:, x0 : x + 1, c].reshape(-1)
            elif c == self.channels - 1:
                win = stack[:, x0 : x + 1, :].reshape(-1)

        self.c += 1
        if self.c == self.channels:
            self.c = 0
            self.x += 1
            if self.x == self.width:
                self.x = 0
                self.y += 1
                self.rows.append(self.cur)
                self.cur = np.zeros((self.width, self.channels), dtype=np.int64)
        return win

    def feed_row(self, row: np.ndarray) -> np.ndarray | None:
        """Consume one full row (width*channels scalars); emit that row's
        windows as a (count, arity) burst, or None while priming."""
        assert self.x == 0 and self.c == 0, "feed_row on a partial row"
        row2 = np.asarray(row, dtype=np.int64).reshape(self.width, self.channels)
        self.rows.append(row2)
        y = self.y
        self.y += 1
        if not (y >= self.kh - 1 and (y - (self.kh - 1)) % self.stride == 0):
            return None
        stack = np.stack(list(self.rows)[-self.kh:], axis=0)  # (kh, W, C)
        _, ow = self.out_hw
        idx = np.arange(ow) * self.stride
        # windows[(j, dy, dx, c)] = stack[dy, j*stride + dx, c]
        wins = np.stack([stack[:, i : i + self.kw, :] for i in idx], axis=0)
        if self.per_channel:
            wins = wins.transpose(0, 3, 1, 2)  # (ow, C, kh, kw)
            return wins.reshape(ow * self.channels, self.kh * self.kw)
        return wins.reshape(ow, self.kh * self.kw * self.channels)


def conv_fire(window: np.ndarray, weights: np.ndarray, bias: np.ndarray,
              wide: bool = False) -> np.ndarray:
    """acc[oc] = bias[oc] + sum_i window[i] * weights[oc, i], lossless.

    window: (S,) or a (k, S) burst; weights: (OC, S); bias: (OC,).
    Returns (OC,) or (k*OC,) accumulators, window-major.
    """
    wins = window.reshape(1, -1) if window.ndim == 1 else window
    if wide:
        acc = wins.astype(object) @ weights.astype(object).T + bias.astype(object)
    else:
        acc = wins @ weights.T + bias
    return acc.reshape(-1)


def maxpool_fire(windows: np.ndarray) -> np.ndarray:
    """windows: (k, arity) -> (k,) maxima."""
    return windows.max(axis=1)


class DenseKernel:
    """Per-class accumulation over a flattened feature stream."""

    def __init__(self, in_features: int, out_features: int, wide: bool = False):
        self.in_features = in_features
        self.out_features = out_features
        self.wide = wide
        self.reset()

    def reset(self) -> None:
        dtype = object if self.wide else np.int64
        self.acc = np.zeros(self.out_features, dtype=dtype)
        self.consumed = 0

    def consume(self, x: np.ndarray, columns: np.ndarray) -> None:
        """x: (k,) inputs; columns: (k, out_features) weight column tokens."""
        if self.wide:
            self.acc = self.acc + x.astype(object) @ columns.astype(object)
        else:
            self.acc = self.acc + x @ columns
        self.consumed += len(x)

    def finalize(self, bias: np.ndarray) -> np.ndarray:
        assert self.consumed == self.in_features
        return self.acc + (bias.astype(object) if self.wide else bias)


class RequantKernel:
    """Accumulator stream -> quantized codes (or identity passthrough).

    real value of an input token = (token - in_zero_point) * in_scale; the
    output is quantize(real, out) computed on the integer multiplier path,
    with an optional fused ReLU (lower bound at the output zero point).
    """

    def __init__(self, in_scale: float, out: QuantParams | None,
                 relu: bool = False, in_zero_point: int = 0,
                 acc_bits: int = 40):
        self.out = out
        self.relu = relu
        self.in_zero_point = in_zero_point
        self.mult = None if out is None else QuantizedMultiplier.from_real(
            in_scale / out.scale
        )
        self.wide = acc_bits + MULTIPLIER_BITS >= _SAFE_BITS

    def apply(self, acc: np.ndarray) -> np.ndarray:
        if self.out is None:
            if self.relu:
                return np.maximum(acc, 0)
            return acc
        x = acc - self.in_zero_point
        scaled = _mult_round_array(x, self.mult, self.out.rounding, self.wide)
        code = scaled + self.out.zero_point
        lo = max(self.out.qmin, self.out.zero_point) if self.relu else self.out.qmin
        clipped = np.clip(code, lo, self.out.qmax)
        # output codes always fit int64; drop any wide-path object dtype
        return np.asarray(clipped, dtype=np.int64) if clipped.dtype == object else clipped


def _mult_round_array(x: np.ndarray, mult: QuantizedMultiplier, rounding: str,
                      wide: bool) -> np.ndarray:
    """Vectorized twin of QuantizedMultiplier.apply (validated against it)."""
    if wide:
        return np.array([mult.apply(int(v), rounding) for v in x], dtype=object)
    prod = x.astype(np.int64) * mult.mantissa
    s = mult.shift
    if s <= 0:
        return prod << (-s)
    fl = prod >> s
    rem = prod - (fl << s)
    half = 1 << (s - 1)
    if rounding == "floor":
        return fl
    if rounding == "half_up":
        up = (rem > half) | ((rem == half) & (prod >= 0))
    else:  # half_even
        up = (rem > half) | ((rem == half) & ((fl & 1) == 1))
    return fl + up.astype(np.int64)
