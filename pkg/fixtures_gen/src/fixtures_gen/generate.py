"""Fixture generation: train the precision profiles, export QONNX files,
dump the IDX subset, and record golden predictions/accuracies."""

from __future__ import annotations

import json
import os

import numpy as np

from . import intforward
from .dataset import get_dataset, write_idx
from .export import export_qonnx
from .qat import (
    QatCnn,
    TrainConfig,
    LayerSpec,
    accuracy,
    calibrate_activations,
    finetune_qat,
    fold_bn,
    train_float,
)

PROFILES = {
    "a16w8": ((16, 8), None),
    "a16w4": ((16, 4), None),
    "a8w8": ((8, 8), None),
    "a8w4": ((8, 4), None),
    "a4w4": ((4, 4), None),
}

_F32 = lambda a: np.ascontiguousarray(a, dtype=np.float32)


def _collect_params(model: QatCnn, cfg: TrainConfig,
                    inner: tuple[float, int] | None = None) -> dict:
    p = {
        "input_scale": model.q_in.scale, "input_bits": cfg.input_bits,
        "w1": _F32(model.conv1.weight.detach().numpy()),
        "b1": _F32(model.conv1.bias.detach().numpy()),
        "w1_scale": model.q_w1.scale, "w1_bits": cfg.conv1.weight_bits,
        "a1_scale": model.q_a1.scale, "a1_bits": cfg.conv1.act_bits,
        "w2": _F32(model.conv2.weight.detach().numpy()),
        "b2": _F32(model.conv2.bias.detach().numpy()),
        "w2_scale": model.q_w2.scale, "w2_bits": cfg.conv2.weight_bits,
        "a2_scale": model.q_a2.scale, "a2_bits": cfg.conv2.act_bits,
        "wd": _F32(model.fc.weight.detach().numpy()),
        "bd": _F32(model.fc.bias.detach().numpy()),
        "wd_scale": model.q_wd.scale, "wd_bits": cfg.dense.weight_bits,
        "inner_input": inner,
    }
    return p


def _int_accuracy(params: dict, images, labels, limit: int = 2000) -> float:
    return intforward.evaluate(params, images[:limit], labels[:limit])


def generate_all(out_dir: str, mnist_dir: str | None = None,
                 train_count: int = 12000, test_count: int = 2000,
                 float_epochs: int = 3, qat_epochs: int = 2,
                 filters: int = 64, seed: int = 7,
                 subset: int = 100) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    ds_name, tr_i, tr_l, te_i, te_l = get_dataset(
        mnist_dir, train_count, test_count, seed
    )

    manifest: dict = {"dataset": ds_name, "seed": seed, "filters": filters,
                      "fixtures": {}}

    # the 100-image evaluation subset, bundled with the primary tests
    write_idx(os.path.join(out_dir, "images_100.idx"),
              te_i[:subset].astype(np.uint8))
    write_idx(os.path.join(out_dir, "labels_100.idx"),
              te_l[:subset].astype(np.uint8))

    # stage 1: one float model with BatchNorm, shared by every profile
    base_cfg = TrainConfig(filters=filters, seed=seed)
    float_model = train_float(tr_i, tr_l, base_cfg, epochs=float_epochs)
    float_acc = accuracy(float_model, te_i, te_l)
    manifest["float_accuracy_pct"] = round(float_acc, 2)
    w1, b1 = fold_bn(float_model.conv1, float_model.bn1)
    w2, b2 = fold_bn(float_model.conv2, float_model.bn2)
    folded = {
        "w1": w1, "b1": b1, "w2": w2, "b2": b2,
        "wd": float_model.fc.weight.detach().numpy().astype(np.float64),
        "bd": float_model.fc.bias.detach().numpy().astype(np.float64),
    }

    predictions: dict[str, list[int]] = {}
    a8w8_model: QatCnn | None = None

    def finish(stem: str, params: dict, graph_name: str,
               also_json: bool = False) -> None:
        blob, mirror = export_qonnx(params, graph_name)
        with open(os.path.join(out_dir, f"mnist_tiny_{stem}.onnx"), "wb") as fh:
            fh.write(blob)
        if also_json:
            with open(os.path.join(out_dir, f"mnist_tiny_{stem}.json"), "w") as fh:
                fh.write(mirror)
        acc = _int_accuracy(params, te_i, te_l)
        preds = [intforward.predict(params, im) for im in te_i[:subset]]
        predictions[stem] = preds
        manifest["fixtures"][stem] = {
            "graph": graph_name,
            "accuracy_pct": round(acc, 2),
            "subset_accuracy_pct": round(
                100.0 * sum(p == int(l) for p, l in zip(preds, te_l[:subset]))
                / subset, 2),
        }

    # stage 2: per-profile QAT fine-tune of the folded model
    for stem, ((a_bits, w_bits), _) in PROFILES.items():
        cfg = TrainConfig(
            input_bits=a_bits,
            conv1=LayerSpec(a_bits, w_bits),
            conv2=LayerSpec(a_bits, w_bits),
            dense=LayerSpec(a_bits, w_bits),
            filters=filters, seed=seed,
        )
        qat = QatCnn(cfg, folded)
        qat.calibrate_weights()
        calibrate_activations(qat, tr_i)
        # scales stay frozen through the tune; the fake-quant clamp keeps
        # drifting weights on the calibrated grid
        qat = finetune_qat(qat, tr_i, tr_l, epochs=qat_epochs, seed=seed + 1)
        params = _collect_params(qat, cfg)
        finish(stem, params, f"A{a_bits}-W{w_bits}", also_json=(stem == "a8w8"))
        if stem == "a8w8":
            a8w8_model = qat
            a8w8_params = params

    # mixed profile: start from A8-W8, retune only the inner conv at 4 bits,
    # keeping its output in the shared 8-bit activation domain
    mixed_cfg = TrainConfig(
        input_bits=8,
        conv1=LayerSpec(8, 8),
        conv2=LayerSpec(8, 4),
        dense=LayerSpec(8, 8),
        inner_input_bits=4,
        filters=filters, seed=seed,
    )
    mixed = QatCnn(mixed_cfg, {
        "w1": a8w8_params["w1"].astype(np.float64),
        "b1": a8w8_params["b1"].astype(np.float64),
        "w2": a8w8_model.conv2.weight.detach().numpy().astype(np.float64),
        "b2": a8w8_model.conv2.bias.detach().numpy().astype(np.float64),
        "wd": a8w8_params["wd"].astype(np.float64),
        "bd": a8w8_params["bd"].astype(np.float64),
    })
    # frozen pieces reuse the A8-W8 scales so shared actors stay identical
    mixed.q_in.scale = a8w8_params["input_scale"]
    mixed.q_w1.scale = a8w8_params["w1_scale"]
    mixed.q_a1.scale = a8w8_params["a1_scale"]
    mixed.q_a2.scale = a8w8_params["a2_scale"]
    mixed.q_wd.scale = a8w8_params["wd_scale"]
    mixed.q_w2.calibrate(mixed.conv2.weight.detach())
    calibrate_activations_inner_only(mixed, tr_i)
    mixed = finetune_qat(mixed, tr_i, tr_l, epochs=qat_epochs,
                         train_only=["conv2"], seed=seed + 2)
    mixed_params = _collect_params(
        mixed, mixed_cfg, inner=(mixed.q_inner.scale, 4)
    )
    # shared tensors must be byte-identical to the A8-W8 export
    for key in ("w1", "b1", "wd", "bd"):
        mixed_params[key] = a8w8_params[key]
    finish("mixed", mixed_params, "Mixed")

    # explicit-BatchNormalization variant: the stage-1 float model with
    # post-training 8-bit annotations and BN left in the graph
    bn_params = _ptq_bn_params(float_model, tr_i)
    finish("a8w8_bn", bn_params, "A8-W8-BN")

    with open(os.path.join(out_dir, "golden_predictions.json"), "w") as fh:
        json.dump({"dataset": ds_name, "subset": subset,
                   "labels": [int(x) for x in te_l[:subset]],
                   "predictions": predictions}, fh, indent=1, sort_keys=True)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
    return manifest


def calibrate_activations_inner_only(model: QatCnn, images: np.ndarray) -> None:
    import torch
    import torch.nn.functional as F

    x = torch.from_numpy(images[:512]).float().unsqueeze(1) / 256.0
    with torch.no_grad():
        x = model.q_in(x)
        a1 = F.relu(F.conv2d(x, model.q_w1(model.conv1.weight), model.conv1.bias))
        p1 = F.max_pool2d(model.q_a1(a1), 2)
        model.q_inner.calibrate(p1)


def _ptq_bn_params(float_model, images: np.ndarray) -> dict:
    """Post-training 8-bit annotations for the unfolded float model."""
    import torch
    import torch.nn.functional as F

    from .qat import po2_scale_for

    eps1 = float(np.float32(float_model.bn1.eps))
    eps2 = float(np.float32(float_model.bn2.eps))
    x = torch.from_numpy(images[:512]).float().unsqueeze(1) / 256.0
    float_model.eval()
    with torch.no_grad():
        a1 = F.relu(float_model.bn1(float_model.conv1(x)))
        p1 = F.max_pool2d(a1, 2)
        a2 = F.relu(float_model.bn2(float_model.conv2(p1)))
    w1f, b1f = fold_bn(float_model.conv1, float_model.bn1)
    w2f, b2f = fold_bn(float_model.conv2, float_model.bn2)
    wd = float_model.fc.weight.detach().numpy()
    bn1 = (
        _F32(float_model.bn1.weight.detach().numpy()),
        _F32(float_model.bn1.bias.detach().numpy()),
        _F32(float_model.bn1.running_mean.detach().numpy()),
        _F32(float_model.bn1.running_var.detach().numpy()),
        eps1,
    )
    bn2 = (
        _F32(float_model.bn2.weight.detach().numpy()),
        _F32(float_model.bn2.bias.detach().numpy()),
        _F32(float_model.bn2.running_mean.detach().numpy()),
        _F32(float_model.bn2.running_var.detach().numpy()),
        eps2,
    )
    return {
        "input_scale": 2.0 ** -8, "input_bits": 8,
        "w1": _F32(float_model.conv1.weight.detach().numpy()),
        "b1": _F32(float_model.conv1.bias.detach().numpy()),
        # weight quantization applies to the folded weights, so the scale
        # must cover the folded range
        "w1_scale": po2_scale_for(float(np.abs(w1f).max()), 127),
        "w1_bits": 8,
        "a1_scale": po2_scale_for(float(a1.max()), 255), "a1_bits": 8,
        "w2": _F32(float_model.conv2.weight.detach().numpy()),
        "b2": _F32(float_model.conv2.bias.detach().numpy()),
        "w2_scale": po2_scale_for(float(np.abs(w2f).max()), 127),
        "w2_bits": 8,
        "a2_scale": po2_scale_for(float(a2.max()), 255), "a2_bits": 8,
        "wd": _F32(wd),
        "bd": _F32(float_model.fc.bias.detach().numpy()),
        "wd_scale": po2_scale_for(float(np.abs(wd).max()), 127), "wd_bits": 8,
        "inner_input": None,
        "bn1": bn1, "bn2": bn2,
    }
