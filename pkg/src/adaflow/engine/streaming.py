"""Streaming execution of an ActorNetwork.

Actors fire in burst granularity (one row-equivalent per firing) but the
token streams are identical to scalar-at-a-time execution; determinism of
dataflow firing makes results schedule-independent, which the test suite
asserts by running both schedulers.

Weight/bias replay channels carry compact repeat chunks (the stored matrix
plus a count) mirroring on-chip ROM ports; token accounting is unchanged.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ..errors import CapacityViolation, Deadlock
from .. import dataflow as df
from ..dataflow.structure import Actor, ActorNetwork
from ..dataflow.validate import validate_network

_SAFE_BITS = 62


@dataclass
class _Repeat:
    """count identical tokens, each the given payload (matrix or vector)."""

    payload: np.ndarray
    count: int


class Fifo:
    def __init__(self, channel, capacity: int):
        self.channel = channel
        self.capacity = capacity
        self.chunks: deque = deque()
        self.tokens = 0
        self.high_water = 0
        self.total = 0

    @property
    def free(self) -> int:
        return self.capacity - self.tokens

    def push(self, chunk) -> None:
        n = chunk.count if isinstance(chunk, _Repeat) else len(chunk)
        if n == 0:
            return
        if self.tokens + n > self.capacity:
            raise CapacityViolation(
                f"{self.channel.id}: push of {n} exceeds capacity "
                f"{self.capacity} (holding {self.tokens})"
            )
        self.chunks.append(chunk)
        self.tokens += n
        self.total += n
        self.high_water = max(self.high_water, self.tokens)

    def pop_array(self, k: int) -> np.ndarray:
        """Pop k tokens as a materialized array (scalar or fixed-arity)."""
        out = []
        need = k
        while need:
            head = self.chunks[0]
            if isinstance(head, _Repeat):
                take = min(need, head.count)
                out.append(np.broadcast_to(
                    head.payload.reshape(1, -1), (take, head.payload.size)
                ))
                head.count -= take
                if head.count == 0:
                    self.chunks.popleft()
            else:
                take = min(need, len(head))
                out.append(head[:take])
                if take == len(head):
                    self.chunks.popleft()
                else:
                    self.chunks[0] = head[take:]
            need -= take
        self.tokens -= k
        return np.concatenate(out) if len(out) != 1 else np.asarray(out[0])

    def pop_repeat(self, k: int) -> list[tuple[np.ndarray, int]]:
        """Pop k tokens as (payload, count) runs (for ROM replay channels)."""
        runs: list[tuple[np.ndarray, int]] = []
        need = k
        while need:
            head = self.chunks[0]
            if not isinstance(head, _Repeat):
                arr = head[:need] if len(head) > need else head
                for row in arr:
                    runs.append((np.asarray(row), 1))
                if len(head) > need:
                    self.chunks[0] = head[need:]
                    taken = need
                else:
                    self.chunks.popleft()
                    taken = len(arr)
            else:
                taken = min(need, head.count)
                runs.append((head.payload, taken))
                head.count -= taken
                if head.count == 0:
                    self.chunks.popleft()
            need -= taken
        self.tokens -= k
        return runs


@dataclass
class InferenceResult:
    logits: np.ndarray
    predicted_class: int
    token_counts: dict = field(default_factory=dict)
    high_water: dict = field(default_factory=dict)
    fired: dict = field(default_factory=dict)
    linebuffer_peaks: dict = field(default_factory=dict)


def argmax_lowest(logits) -> int:
    best, best_i = None, 0
    for i, v in enumerate(logits):
        if best is None or v > best:
            best, best_i = v, i
    return best_i


class _Run:
    """Runtime adapter binding an actor's kernel to its FIFOs."""

    def __init__(self, actor: Actor, ins: dict[str, Fifo], outs: dict[str, Fifo]):
        self.actor = actor
        self.ins = ins
        self.outs = outs
        self.fired = 0

    def reset(self) -> None:
        pass

    def fire(self) -> bool:
        raise NotImplementedError


class _SourceRun(_Run):
    def reset(self) -> None:
        self.rows: list[np.ndarray] = []
        self.next_row = 0

    def set_image(self, image: np.ndarray) -> None:
        c, h, w = self.actor.config["shape"]
        img = np.asarray(image, dtype=np.int64).reshape(c, h, w)
        stream = img.transpose(1, 2, 0).reshape(h, w * c)  # raster, ch-interleaved
        self.rows = [stream[y] for y in range(h)]
        self.next_row = 0

    def fire(self) -> bool:
        if self.next_row >= len(self.rows):
            return False
        out = self.outs["out"]
        row = self.rows[self.next_row]
        if out.free < len(row):
            return False
        out.push(row.copy())
        self.next_row += 1
        return True


class _StoreRun(_Run):
    def reset(self) -> None:
        self.pushed = False

    def fire(self) -> bool:
        if self.pushed:
            return False
        cfg = self.actor.config
        out = self.outs["out"]
        if self.actor.kind == "WeightStore" and "weights" in cfg:
            chunk = _Repeat(cfg["weights"].reshape(-1), cfg["count"])
        elif self.actor.kind == "WeightStore":
            chunk = cfg["columns"]  # dense: one column token per input index
        else:
            bias = cfg["bias"]
            chunk = (_Repeat(bias, cfg["count"]) if cfg["count"] > 1
                     else bias.reshape(1, -1))
        if out.free < (chunk.count if isinstance(chunk, _Repeat) else len(chunk)):
            return False
        out.push(chunk)
        self.pushed = True
        return True


class _LineBufferRun(_Run):
    def reset(self) -> None:
        cfg = self.actor.config
        kh, kw = cfg["kernel"]
        self.kernel = df.LineBufferKernel(
            cfg["in_shape"], kh, kw, cfg["stride"], cfg["per_channel"]
        )
        c, _, w = cfg["in_shape"]
        ow = (w - kw) // cfg["stride"] + 1
        self.max_burst = ow * c if cfg["per_channel"] else ow
        self.peak = 0

    def fire(self) -> bool:
        cfg = self.actor.config
        c, _, w = cfg["in_shape"]
        row = w * c
        fifo = self.ins["in"]
        out = self.outs["win"]
        if fifo.tokens < row or out.free < self.max_burst:
            return False
        burst = self.kernel.feed_row(fifo.pop_array(row))
        self.peak = max(self.peak, self.kernel.buffered_tokens)
        if burst is not None:
            out.push(burst)
        return True


class _ConvRun(_Run):
    def reset(self) -> None:
        self.wide = self.actor.config["acc_format"].word_bits >= _SAFE_BITS

    def fire(self) -> bool:
        cfg = self.actor.config
        oc = cfg["out_channels"]
        wins, wts, bias = self.ins["window"], self.ins["weight"], self.ins["bias"]
        out = self.outs["acc"]
        k = min(wins.tokens, wts.tokens, bias.tokens, out.free // oc)
        if k == 0:
            return False
        windows = wins.pop_array(k)
        w_runs = wts.pop_repeat(k)
        b_runs = bias.pop_repeat(k)
        accs = []
        wi = 0
        for (w_pay, w_cnt), (b_pay, _) in _zip_runs(w_runs, b_runs):
            chunk = windows[wi : wi + w_cnt]
            weights = w_pay.reshape(oc, cfg["window_size"])
            accs.append(df.conv_fire(chunk, weights, b_pay, wide=self.wide))
            wi += w_cnt
        out.push(np.concatenate(accs))
        return True


def _zip_runs(a_runs, b_runs):
    """Align two (payload, count) run lists to common boundaries."""
    ai = bi = 0
    a_pay, a_cnt = a_runs[0]
    b_pay, b_cnt = b_runs[0]
    while True:
        take = min(a_cnt, b_cnt)
        yield (a_pay, take), (b_pay, take)
        a_cnt -= take
        b_cnt -= take
        if a_cnt == 0:
            ai += 1
            if ai == len(a_runs):
                return
            a_pay, a_cnt = a_runs[ai]
        if b_cnt == 0:
            bi += 1
            if bi == len(b_runs):
                return
            b_pay, b_cnt = b_runs[bi]


class _RequantRun(_Run):
    def reset(self) -> None:
        cfg = self.actor.config
        self.kernel = df.RequantKernel(
            in_scale=cfg.get("in_scale", 1.0),
            out=cfg["out"],
            relu=cfg["relu"],
            in_zero_point=cfg.get("in_zero_point", 0),
            acc_bits=cfg["acc_format"].word_bits,
        )

    def fire(self) -> bool:
        fifo, out = self.ins["in"], self.outs["out"]
        k = min(fifo.tokens, out.free)
        if k == 0:
            return False
        out.push(np.asarray(self.kernel.apply(fifo.pop_array(k))))
        return True


class _MaxPoolRun(_Run):
    def fire(self) -> bool:
        fifo, out = self.ins["win"], self.outs["out"]
        k = min(fifo.tokens, out.free)
        if k == 0:
            return False
        out.push(df.maxpool_fire(fifo.pop_array(k)))
        return True


class _DenseRun(_Run):
    def reset(self) -> None:
        cfg = self.actor.config
        self.kernel = df.DenseKernel(
            cfg["in_features"], cfg["out_features"],
            wide=cfg["acc_format"].word_bits >= _SAFE_BITS,
        )

    def fire(self) -> bool:
        cfg = self.actor.config
        xs, wts, bias = self.ins["in"], self.ins["weight"], self.ins["bias"]
        out = self.outs["acc"]
        k = min(xs.tokens, wts.tokens)
        worked = False
        if k:
            self.kernel.consume(xs.pop_array(k), wts.pop_array(k))
            worked = True
        if (self.kernel.consumed == cfg["in_features"] and bias.tokens >= 1
                and out.free >= cfg["out_features"]):
            b = bias.pop_array(1).reshape(-1)
            out.push(np.asarray(self.kernel.finalize(b)))
            self.kernel.consumed = -1  # emitted
            worked = True
        return worked


class _SinkRun(_Run):
    def reset(self) -> None:
        self.collected: list = []

    def fire(self) -> bool:
        fifo = self.ins["in"]
        if fifo.tokens == 0:
            return False
        self.collected.extend(fifo.pop_array(fifo.tokens).tolist())
        return True


_RUNTIMES = {
    "Source": _SourceRun, "LineBuffer": _LineBufferRun, "Conv": _ConvRun,
    "WeightStore": _StoreRun, "BiasStore": _StoreRun, "Requant": _RequantRun,
    "MaxPool": _MaxPoolRun, "Dense": _DenseRun, "Sink": _SinkRun,
}


class StreamingEngine:
    """Reusable simulator instance for one ActorNetwork."""

    def __init__(self, network: ActorNetwork):
        self.network = network
        self.report = validate_network(network)
        self.fifos = {
            c.id: Fifo(c, max(c.capacity, self.report.min_capacities[c.id]))
            for c in network.channels
        }
        self.runs: list[_Run] = []
        for a in network.actors:
            ins = {c.dst[1]: self.fifos[c.id] for c in network.in_channels(a.id)}
            outs = {c.src[1]: self.fifos[c.id] for c in network.out_channels(a.id)}
            self.runs.append(_RUNTIMES[a.kind](a, ins, outs))
        self.by_id = {r.actor.id: r for r in self.runs}

    def run(self, image, schedule: str = "round_robin") -> InferenceResult:
        for f in self.fifos.values():
            f.chunks.clear()
            f.tokens = 0
            f.high_water = 0
            f.total = 0
        for r in self.runs:
            r.fired = 0
            r.reset()
        src = self.by_id[self.network.input_actor]
        src.set_image(image)
        sink = self.by_id[self.network.output_actor]

        if schedule == "round_robin":
            self._run_round_robin()
        elif schedule == "depth_first":
            self._run_depth_first()
        else:
            raise ValueError(f"unknown schedule {schedule!r}")

        expected = sink.actor.config["count"]
        leftover = {f.channel.id: f.tokens for f in self.fifos.values() if f.tokens}
        if len(sink.collected) != expected or leftover:
            raise Deadlock(
                f"run ended with {len(sink.collected)}/{expected} outputs, "
                f"tokens left {leftover}"
            )
        logits = np.array(sink.collected)
        return InferenceResult(
            logits=logits,
            predicted_class=argmax_lowest(logits),
            token_counts={cid: f.total for cid, f in self.fifos.items()},
            high_water={cid: f.high_water for cid, f in self.fifos.items()},
            fired={r.actor.id: r.fired for r in self.runs},
            linebuffer_peaks={
                r.actor.id: r.peak for r in self.runs
                if isinstance(r, _LineBufferRun)
            },
        )

    def _run_round_robin(self) -> None:
        while True:
            worked = False
            for r in self.runs:
                if r.fire():
                    r.fired += 1
                    worked = True
            if not worked:
                return

    def _run_depth_first(self) -> None:
        consumers = {
            a.id: [c.dst[0] for c in self.network.out_channels(a.id)]
            for a in self.network.actors
        }
        roots = [r.actor.id for r in self.runs
                 if not self.network.in_channels(r.actor.id)]
        progress = True
        while progress:
            progress = False
            stack = list(reversed(roots))
            while stack:
                aid = stack.pop()
                r = self.by_id[aid]
                if r.fire():
                    r.fired += 1
                    progress = True
                    for nxt in reversed(consumers[aid]):
                        stack.append(nxt)


def run_streaming(network: ActorNetwork, image,
                  schedule: str = "round_robin") -> InferenceResult:
    """Execute one inference; image holds codes in the source domain."""
    return StreamingEngine(network).run(image, schedule=schedule)
