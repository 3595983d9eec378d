"""Export -> primary toolchain roundtrip, via the CLI boundary only."""

import json
import subprocess
import sys

import numpy as np
import pytest

from fixtures_gen import intforward
from fixtures_gen.dataset import synth_digits, write_idx
from fixtures_gen.export import export_qonnx


def tiny_params(seed=0, bn=False, inner=False):
    rng = np.random.default_rng(seed)
    f32 = lambda a: np.asarray(a, dtype=np.float32)
    p = {
        "input_scale": 2.0**-8, "input_bits": 8,
        "w1": f32(rng.uniform(-0.3, 0.3, (4, 1, 3, 3))),
        "b1": f32(rng.uniform(-0.1, 0.1, 4)),
        "w1_scale": 2.0**-8, "w1_bits": 8,
        "a1_scale": 2.0**-6, "a1_bits": 8,
        "w2": f32(rng.uniform(-0.2, 0.2, (4, 4, 3, 3))),
        "b2": f32(rng.uniform(-0.1, 0.1, 4)),
        "w2_scale": 2.0**-8, "w2_bits": 8,
        "a2_scale": 2.0**-6, "a2_bits": 8,
        "wd": f32(rng.uniform(-0.2, 0.2, (10, 4 * 5 * 5))),
        "bd": f32(rng.uniform(-0.1, 0.1, 10)),
        "wd_scale": 2.0**-8, "wd_bits": 8,
        "inner_input": (2.0**-4, 4) if inner else None,
    }
    if bn:
        p["bn1"] = (f32(rng.uniform(0.5, 1.5, 4)), f32(rng.uniform(-0.2, 0.2, 4)),
                    f32(rng.uniform(-0.2, 0.2, 4)), f32(rng.uniform(0.5, 1.5, 4)),
                    float(np.float32(1e-5)))
        p["bn2"] = (f32(rng.uniform(0.5, 1.5, 4)), f32(rng.uniform(-0.2, 0.2, 4)),
                    f32(rng.uniform(-0.2, 0.2, 4)), f32(rng.uniform(0.5, 1.5, 4)),
                    float(np.float32(1e-5)))
    return p


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "adaflow.cli", *args],
        capture_output=True, text=True,
    )


@pytest.mark.parametrize("variant", ["plain", "bn", "inner"])
def test_compile_accepts_export(tmp_path, variant):
    params = tiny_params(bn=variant == "bn", inner=variant == "inner")
    blob, mirror = export_qonnx(params, "roundtrip")
    model = tmp_path / "m.onnx"
    model.write_bytes(blob)
    out = tmp_path / "out"
    res = run_cli("compile", "--model", str(model), "--out", str(out))
    assert res.returncode == 0, res.stderr
    doc = json.loads((out / "network.json").read_text())
    expected = 22 if variant == "inner" else 21
    assert len(doc["actors"]) == expected
    assert "A8-W8" in (out / "report.txt").read_text() or variant == "inner"

    # the JSON mirror compiles to the identical artifact
    jmodel = tmp_path / "m.json"
    jmodel.write_text(mirror)
    out2 = tmp_path / "out2"
    res2 = run_cli("compile", "--model", str(jmodel), "--out", str(out2))
    assert res2.returncode == 0, res2.stderr
    assert (out / "network.json").read_bytes() == (out2 / "network.json").read_bytes()


def test_predictions_match_toolchain(tmp_path):
    """The independent integer forward agrees with the inference engine."""
    params = tiny_params(seed=3)
    blob, _ = export_qonnx(params, "agree")
    model = tmp_path / "m.onnx"
    model.write_bytes(blob)
    images, _ = synth_digits(25, seed=9)
    labels = np.array([intforward.predict(params, im) for im in images],
                      dtype=np.uint8)
    write_idx(str(tmp_path / "i.idx"), images)
    write_idx(str(tmp_path / "l.idx"), labels)
    res = run_cli("simulate", "--model", str(model),
                  "--dataset", str(tmp_path / "i.idx"), str(tmp_path / "l.idx"),
                  "--engine", "streaming")
    assert res.returncode == 0, res.stderr
    assert "accuracy 100.0%" in res.stdout


def test_bn_fixture_brings_bn_nodes(tmp_path):
    blob, _ = export_qonnx(tiny_params(bn=True), "withbn")
    # count BatchNormalization op names in the wire bytes
    assert blob.count(b"BatchNormalization") == 2
