"""Structure and semantics of the bundled trained fixtures."""

import numpy as np

from adaflow.dataflow import lower
from adaflow.engine import StreamingEngine, dense_oracle, load_dataset
from adaflow.graph_ir import build_ir, extract_profile
from adaflow.qonnx_io import load_model, parse_model_json
from conftest import (
    PRECISION_STEMS,
    fixture_path,
    load_golden,
    model_path,
    requires_fixtures,
)

pytestmark = requires_fixtures


class TestFixtureStructure:
    def test_a8w8_node_counts(self):
        m = load_model(model_path("a8w8"))
        ops = [n.op_type for n in m.nodes]
        assert ops.count("Conv") == 2
        assert ops.count("MaxPool") == 2
        assert ops.count("Gemm") == 1
        assert ops.count("BatchNormalization") == 0  # exported pre-folded
        # one Quant per quantized tensor: input, 2 activations, 3 weights
        assert ops.count("Quant") == 6

    def test_bn_fixture_counts(self):
        m = load_model(model_path("a8w8_bn"))
        ops = [n.op_type for n in m.nodes]
        assert ops.count("BatchNormalization") == 2
        assert ops.count("Conv") == 2

    def test_five_layer_chain(self):
        g = build_ir(load_model(model_path("a8w8")))
        assert [l.kind for l in g.layers] == [
            "Conv", "MaxPool", "Conv", "MaxPool", "Dense"
        ]
        conv1 = g.layers[0]
        assert (conv1.kernel_h, conv1.kernel_w) == (3, 3)
        assert conv1.out_channels == 64
        assert conv1.fused_relu
        # valid-padding shape chain on 28x28
        assert [l.out_shape for l in g.layers] == [
            (64, 26, 26), (64, 13, 13), (64, 11, 11), (64, 5, 5), (10, 1, 1)
        ]

    def test_uniform_profiles(self):
        for stem, (a, w) in zip(PRECISION_STEMS,
                                ((16, 8), (16, 4), (8, 8), (8, 4), (4, 4))):
            g = build_ir(load_model(model_path(stem)))
            p = extract_profile(g)
            assert p.name == f"A{a}-W{w}", stem
            assert all(aw[1] in (w, aw[0]) for aw in p.assignments)

    def test_mixed_profile_inner_conv_only(self):
        g = build_ir(load_model(model_path("mixed")))
        p = extract_profile(g)
        assert p.name == "Mixed"
        # layers: conv, pool, conv(inner), pool, dense
        assert p.assignments[2] == (4, 4)
        assert all(a == (8, 8) for i, a in enumerate(p.assignments) if i != 2)

    def test_bn_fixture_builds_and_runs(self):
        g = build_ir(load_model(model_path("a8w8_bn")))
        assert len(g.layers) == 5
        images, _ = load_dataset(fixture_path("images_100.idx"),
                                 fixture_path("labels_100.idx"))
        logits = dense_oracle(g, images[0].reshape(1, 28, 28))
        assert len(logits) == 10

    def test_json_mirror_matches_binary(self):
        binary = load_model(model_path("a8w8"))
        with open(fixture_path("mnist_tiny_a8w8.json")) as fh:
            mirrored = parse_model_json(fh.read())
        assert mirrored == binary

    def test_shared_tensors_identical_between_a8w8_and_mixed(self):
        a = load_model(model_path("a8w8"))
        b = load_model(model_path("mixed"))

        def init_of(m, node_name, idx):
            node = next(n for n in m.nodes if n.name == node_name)
            return m.initializers[node.inputs[idx]]

        # conv1 weights (behind the weight Quant) and dense weights
        for name in ("wq0", "wqd"):
            wa = init_of(a, name, 0)
            wb = init_of(b, name, 0)
            assert wa.data == wb.data
        # inner conv weights differ
        assert init_of(a, "wq1", 0).data != init_of(b, "wq1", 0).data


class TestFixtureExecution:
    def test_streaming_equals_dense_on_subset(self):
        images, _ = load_dataset(fixture_path("images_100.idx"),
                                 fixture_path("labels_100.idx"))
        for stem in ("a8w8", "mixed"):
            g = build_ir(load_model(model_path(stem)))
            eng = StreamingEngine(lower(g))
            for img in images[:3]:
                codes = img.reshape(1, 28, 28).astype(np.int64)
                assert (eng.run(codes).logits.tolist()
                        == dense_oracle(g, codes).tolist()), stem

    def test_recorded_accuracies_sane(self):
        golden = load_golden()
        images, labels = load_dataset(fixture_path("images_100.idx"),
                                      fixture_path("labels_100.idx"))
        assert (labels == np.array(golden["labels"])).all()
        preds = golden["predictions"]["a8w8"]
        acc = 100.0 * sum(p == int(l) for p, l in zip(preds, labels)) / len(labels)
        assert acc >= 90.0  # trained fixture classifies its own subset well
