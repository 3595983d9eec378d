"""Quantization-aware training of the two-conv-block CNN.

Scales are fixed powers of two chosen by calibration before fine-tuning
(weights from their range, activations from a calibration batch), and the
fake-quant forward mirrors the integer inference semantics: round half to
even, saturate, unsigned activations after ReLU.  Training minimizes
categorical cross-entropy with the Adam optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F


def po2_scale_for(max_abs: float, qmax: int) -> float:
    """Smallest power of two s with max_abs <= s * qmax."""
    if max_abs <= 0:
        return 2.0 ** -8
    return 2.0 ** math.ceil(math.log2(max_abs / qmax))


class FakeQuant(nn.Module):
    """Quantize-dequantize with a straight-through gradient."""

    def __init__(self, bits: int, signed: bool, scale: float | None = None):
        super().__init__()
        self.bits = bits
        self.signed = signed
        self.scale = scale

    @property
    def qmin(self) -> int:
        return -(1 << (self.bits - 1)) if self.signed else 0

    @property
    def qmax(self) -> int:
        return (1 << (self.bits - 1)) - 1 if self.signed else (1 << self.bits) - 1

    def calibrate(self, x: torch.Tensor) -> None:
        self.scale = po2_scale_for(float(x.abs().max()), self.qmax)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.scale is None:
            self.calibrate(x.detach())
        q = torch.clamp(torch.round(x / self.scale), self.qmin, self.qmax)
        y = q * self.scale
        return x + (y - x).detach()


@dataclass
class LayerSpec:
    act_bits: int      # output activation bits of this block
    weight_bits: int


@dataclass
class TrainConfig:
    input_bits: int = 8
    conv1: LayerSpec = field(default_factory=lambda: LayerSpec(8, 8))
    conv2: LayerSpec = field(default_factory=lambda: LayerSpec(8, 8))
    dense: LayerSpec = field(default_factory=lambda: LayerSpec(8, 8))
    inner_input_bits: int | None = None  # extra requant in front of conv2
    filters: int = 64
    seed: int = 7


class TinyCnn(nn.Module):
    """conv(3x3)+BN+ReLU+pool, twice, then a 10-way dense layer."""

    def __init__(self, filters: int = 64):
        super().__init__()
        self.conv1 = nn.Conv2d(1, filters, 3)
        self.bn1 = nn.BatchNorm2d(filters)
        self.conv2 = nn.Conv2d(filters, filters, 3)
        self.bn2 = nn.BatchNorm2d(filters)
        self.fc = nn.Linear(filters * 5 * 5, 10)

    def forward(self, x):
        x = F.max_pool2d(F.relu(self.bn1(self.conv1(x))), 2)
        x = F.max_pool2d(F.relu(self.bn2(self.conv2(x))), 2)
        return self.fc(torch.flatten(x, 1))


def fold_bn(conv: nn.Conv2d, bn: nn.BatchNorm2d) -> tuple[np.ndarray, np.ndarray]:
    """Folded float weights and bias (the exported convolution)."""
    gamma = bn.weight.detach().numpy()
    beta = bn.bias.detach().numpy()
    mean = bn.running_mean.detach().numpy()
    var = bn.running_var.detach().numpy()
    s = gamma / np.sqrt(var + bn.eps)
    w = conv.weight.detach().numpy() * s.reshape(-1, 1, 1, 1)
    b = conv.bias.detach().numpy() if conv.bias is not None else np.zeros(len(s))
    return w.astype(np.float64), ((b - mean) * s + beta).astype(np.float64)


class QatCnn(nn.Module):
    """BN-folded network fine-tuned with fake quantization everywhere."""

    def __init__(self, cfg: TrainConfig, folded: dict[str, np.ndarray]):
        super().__init__()
        f = cfg.filters
        self.cfg = cfg
        self.conv1 = nn.Conv2d(1, f, 3)
        self.conv2 = nn.Conv2d(f, f, 3)
        self.fc = nn.Linear(f * 5 * 5, 10)
        with torch.no_grad():
            self.conv1.weight.copy_(torch.from_numpy(folded["w1"]).float())
            self.conv1.bias.copy_(torch.from_numpy(folded["b1"]).float())
            self.conv2.weight.copy_(torch.from_numpy(folded["w2"]).float())
            self.conv2.bias.copy_(torch.from_numpy(folded["b2"]).float())
            self.fc.weight.copy_(torch.from_numpy(folded["wd"]).float())
            self.fc.bias.copy_(torch.from_numpy(folded["bd"]).float())

        self.q_in = FakeQuant(cfg.input_bits, signed=False,
                              scale=2.0 ** -min(cfg.input_bits, 8))
        self.q_w1 = FakeQuant(cfg.conv1.weight_bits, signed=True)
        self.q_a1 = FakeQuant(cfg.conv1.act_bits, signed=False)
        self.q_inner = (FakeQuant(cfg.inner_input_bits, signed=False)
                        if cfg.inner_input_bits else None)
        self.q_w2 = FakeQuant(cfg.conv2.weight_bits, signed=True)
        self.q_a2 = FakeQuant(cfg.conv2.act_bits, signed=False)
        self.q_wd = FakeQuant(cfg.dense.weight_bits, signed=True)

    def calibrate_weights(self) -> None:
        self.q_w1.calibrate(self.conv1.weight.detach())
        self.q_w2.calibrate(self.conv2.weight.detach())
        self.q_wd.calibrate(self.fc.weight.detach())

    def forward(self, x):
        x = self.q_in(x)
        x = F.conv2d(x, self.q_w1(self.conv1.weight), self.conv1.bias)
        x = self.q_a1(F.relu(x))
        x = F.max_pool2d(x, 2)
        if self.q_inner is not None:
            x = self.q_inner(x)
        x = F.conv2d(x, self.q_w2(self.conv2.weight), self.conv2.bias)
        x = self.q_a2(F.relu(x))
        x = F.max_pool2d(x, 2)
        return F.linear(torch.flatten(x, 1), self.q_wd(self.fc.weight),
                        self.fc.bias)


def _batches(images: np.ndarray, labels: np.ndarray, batch: int,
             rng: np.random.Generator):
    order = rng.permutation(len(images))
    for i in range(0, len(order), batch):
        idx = order[i : i + batch]
        x = torch.from_numpy(images[idx]).float().unsqueeze(1) / 256.0
        y = torch.from_numpy(labels[idx]).long()
        yield x, y


def train_float(images, labels, cfg: TrainConfig, epochs: int = 3,
                batch: int = 128, lr: float = 1e-3) -> TinyCnn:
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    model = TinyCnn(cfg.filters)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.CrossEntropyLoss()  # categorical cross-entropy
    model.train()
    for _ in range(epochs):
        for x, y in _batches(images, labels, batch, rng):
            opt.zero_grad()
            loss_fn(model(x), y).backward()
            opt.step()
    model.eval()
    return model


def finetune_qat(model: QatCnn, images, labels, epochs: int = 2,
                 batch: int = 128, lr: float = 2e-4,
                 train_only: list[str] | None = None,
                 seed: int = 11) -> QatCnn:
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    params = []
    for name, p in model.named_parameters():
        trainable = train_only is None or any(name.startswith(t) for t in train_only)
        p.requires_grad_(trainable)
        if trainable:
            params.append(p)
    opt = torch.optim.Adam(params, lr=lr)
    loss_fn = nn.CrossEntropyLoss()
    model.train()
    for _ in range(epochs):
        for x, y in _batches(images, labels, batch, rng):
            opt.zero_grad()
            loss_fn(model(x), y).backward()
            opt.step()
    model.eval()
    return model


def calibrate_activations(model: QatCnn, images: np.ndarray,
                          count: int = 512) -> None:
    """Fix activation scales from a calibration batch (then freeze)."""
    model.eval()
    x = torch.from_numpy(images[:count]).float().unsqueeze(1) / 256.0
    with torch.no_grad():
        x = model.q_in(x)
        a1 = F.relu(F.conv2d(x, model.q_w1(model.conv1.weight), model.conv1.bias))
        model.q_a1.calibrate(a1)
        p1 = F.max_pool2d(model.q_a1(a1), 2)
        if model.q_inner is not None:
            model.q_inner.calibrate(p1)
            p1 = model.q_inner(p1)
        a2 = F.relu(F.conv2d(p1, model.q_w2(model.conv2.weight), model.conv2.bias))
        model.q_a2.calibrate(a2)


def accuracy(model: nn.Module, images: np.ndarray, labels: np.ndarray,
             batch: int = 256) -> float:
    model.eval()
    hits = 0
    with torch.no_grad():
        for i in range(0, len(images), batch):
            x = torch.from_numpy(images[i : i + batch]).float().unsqueeze(1) / 256.0
            pred = model(x).argmax(dim=1).numpy()
            hits += int((pred == labels[i : i + batch]).sum())
    return 100.0 * hits / len(images)
