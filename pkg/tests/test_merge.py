"""Multi-dataflow merging: sharing, SBox placement, per-profile bit-exactness."""

import dataclasses

import numpy as np
import pytest

from adaflow.dataflow import lower, validate_network
from adaflow.engine import StreamingEngine, estimate
from adaflow.errors import DuplicateProfileName, TopologyMismatch, UnknownProfile
from adaflow.graph_ir import build_ir
from adaflow.mdc_merge import (
    ActorSignature,
    configure,
    estimate_merged,
    merge,
    merged_from_json,
    merged_to_json,
    sharing_report,
)
from modelbuild import ChainBuilder, mnist_like_model


def a8w8_and_mixed(filters=8):
    """Two profiles sharing weights everywhere but the inner conv block."""
    base = mnist_like_model(8, 8, seed=42, filters=filters, name="A8-W8")
    shared = base.weights_used
    mixed = mnist_like_model(8, 8, inner=(4, 4), seed=42, filters=filters,
                             name="Mixed", weights=dict(shared))
    na = lower(build_ir(base.build()))
    nm = lower(build_ir(mixed.build()))
    return na, nm


class TestSelfMerge:
    def test_no_sboxes_everything_shared(self):
        n = lower(build_ir(mnist_like_model(seed=1).build()))
        n2 = dataclasses.replace(n, profile_name="B")
        m = merge([n, n2])
        assert len(m.sboxes) == 0
        assert len(m.actors) == len(n.actors)
        assert len(m.shared_actors()) == len(n.actors)

    def test_configure_reproduces_original(self):
        from adaflow.dataflow import networks_structurally_equal

        n = lower(build_ir(mnist_like_model(seed=1).build()))
        n2 = dataclasses.replace(n, profile_name="B")
        m = merge([n, n2])
        got = configure(m, n.profile_name)
        assert networks_structurally_equal(
            dataclasses.replace(got, meta={}),
            dataclasses.replace(n, meta={}),
        )

    def test_sharing_report_self(self):
        n = lower(build_ir(mnist_like_model(seed=1).build()))
        m = merge([n, dataclasses.replace(n, profile_name="B")])
        rep = sharing_report(m)
        assert rep["sbox_count"] == 0
        assert rep["overhead"]["lut_pct"] == pytest.approx(0.0, abs=1e-9)
        assert rep["savings"]["lut_pct"] > 0

    def test_single_network_degenerate(self):
        n = lower(build_ir(mnist_like_model(seed=1).build()))
        m = merge([n])
        assert m.profiles == (n.profile_name,) and len(m.sboxes) == 0


class TestMixedMerge:
    def test_structure(self):
        na, nm = a8w8_and_mixed()
        m = merge([na, nm])
        assert len(m.sboxes) == 2
        kinds = sorted(b.kind for b in m.sboxes)
        assert kinds == ["select", "switch"]
        # shared everywhere but the inner conv template
        excl_a = {a.id for a in m.exclusive_actors("A8-W8")}
        excl_m = {a.id for a in m.exclusive_actors("Mixed")}
        assert excl_a == {"L2_linebuf", "L2_weights", "L2_bias", "L2_conv",
                         "L2_requant"}
        assert excl_m == {"L2_requant_in", "L2_linebuf@Mixed",
                          "L2_weights@Mixed", "L2_bias@Mixed", "L2_conv@Mixed",
                          "L2_requant@Mixed"}
        assert len(m.shared_actors()) == len(na.actors) - 5
        assert len(m.actors) == len(na.actors) + len(excl_m)

    def test_profiles_bit_exact(self):
        na, nm = a8w8_and_mixed()
        m = merge([na, nm])
        rng = np.random.default_rng(50)
        engines = {
            "A8-W8": (StreamingEngine(na), StreamingEngine(configure(m, "A8-W8"))),
            "Mixed": (StreamingEngine(nm), StreamingEngine(configure(m, "Mixed"))),
        }
        for _ in range(20):
            img = rng.integers(0, 256, size=(1, 28, 28))
            for name, (standalone, merged_view) in engines.items():
                a = standalone.run(img).logits
                b = merged_view.run(img).logits
                assert a.tolist() == b.tolist(), name

    def test_profiles_differ_from_each_other(self):
        na, nm = a8w8_and_mixed()
        m = merge([na, nm])
        rng = np.random.default_rng(51)
        ea = StreamingEngine(configure(m, "A8-W8"))
        em = StreamingEngine(configure(m, "Mixed"))
        diffs = 0
        for _ in range(10):
            img = rng.integers(0, 256, size=(1, 28, 28))
            diffs += ea.run(img).logits.tolist() != em.run(img).logits.tolist()
        assert diffs > 0  # the 4-bit inner conv visibly changes logits

    def test_sharing_report(self):
        na, nm = a8w8_and_mixed()
        m = merge([na, nm])
        rep = sharing_report(m)
        assert rep["sbox_count"] == 2
        assert rep["shared_actor_count"] == len(na.actors) - 5
        lut_a = estimate(na).lut_pct
        lut_m = estimate(nm).lut_pct
        assert rep["merged"]["lut_pct"] < lut_a + lut_m
        assert rep["merged"]["lut_pct"] >= max(lut_a, lut_m)
        assert rep["overhead"]["lut_pct"] >= 0
        assert rep["savings"]["lut_pct"] > 0

    def test_merged_latency_invariant(self):
        na, nm = a8w8_and_mixed()
        m = merge([na, nm])
        em = estimate_merged(m)
        assert em["latency_us"] == 329.0

    def test_unknown_profile(self):
        na, nm = a8w8_and_mixed()
        m = merge([na, nm])
        with pytest.raises(UnknownProfile):
            configure(m, "A2-W2")

    def test_serialization_roundtrip(self):
        na, nm = a8w8_and_mixed()
        m = merge([na, nm])
        again = merged_from_json(merged_to_json(m))
        assert merged_to_json(again) == merged_to_json(m)
        got = configure(again, "Mixed")
        validate_network(got)
        img = np.random.default_rng(3).integers(0, 256, (1, 28, 28))
        assert (StreamingEngine(got).run(img).logits.tolist()
                == StreamingEngine(configure(m, "Mixed")).run(img).logits.tolist())


class TestThreeProfileMerge:
    def test_audit_shared_set(self):
        nets = [
            lower(build_ir(mnist_like_model(a, w, seed=s, name=f"A{a}-W{w}").build()))
            for (a, w), s in (((8, 8), 1), ((8, 4), 2), ((4, 4), 3))
        ]
        m = merge(nets)
        shared_ids = {a.id for a in m.shared_actors()}
        # all three share source and sink; the two A8 profiles share the
        # pixel-domain requantizer and every pooling line buffer
        assert {"source", "sink", "input_requant"} <= shared_ids
        assert {"L1_linebuf", "L1_pool", "L3_linebuf", "L3_pool"} <= shared_ids
        for name in m.profiles:
            validate_network(configure(m, name))

    def test_associative_sharing_counts(self):
        nets = [
            lower(build_ir(mnist_like_model(a, w, seed=s, name=f"A{a}-W{w}").build()))
            for (a, w), s in (((8, 8), 1), ((8, 4), 2), ((4, 4), 3))
        ]
        m_all = merge(nets)
        m_ab = merge(nets[:2])
        re_merged = merge([
            configure(m_ab, nets[0].profile_name),
            configure(m_ab, nets[1].profile_name),
            nets[2],
        ])
        assert len(m_all.shared_actors()) == len(re_merged.shared_actors())
        assert len(m_all.actors) == len(re_merged.actors)
        assert len(m_all.sboxes) == len(re_merged.sboxes)


class TestErrors:
    def test_topology_mismatch(self):
        small = ChainBuilder((1, 8, 8), name="A")
        small.quant(scale=2.0**-8, bits=8, signed=False)
        small.conv(np.random.default_rng(0).uniform(-0.4, 0.4, (2, 1, 3, 3)),
                   w_scale=2.0**-6, w_bits=8)
        n1 = dataclasses.replace(lower(build_ir(small.build())),
                                 profile_name="small")
        n2 = lower(build_ir(mnist_like_model(name="B").build()))
        with pytest.raises(TopologyMismatch):
            merge([n1, n2])

    def test_duplicate_names(self):
        n = lower(build_ir(mnist_like_model(seed=1).build()))
        with pytest.raises(DuplicateProfileName):
            merge([n, n])


class TestRandomizedMergeProperty:
    """Per-profile bit-exactness over random topologies and divergences."""

    def _variants(self, rng, count):
        """count profiles over one random topology, diverging at random
        layers (weights, bias, weight precision, or an entry requant)."""
        from adaflow.fixedpoint import QuantParams
        from netgen import random_tiny_graph

        base = random_tiny_graph(rng)
        variants = []
        for v in range(count):
            layers = []
            for layer in base.layers:
                layer_v = layer
                if layer.kind in ("Conv", "Dense") and rng.integers(0, 2):
                    mut = dict(
                        weights=rng.integers(
                            layer.weights_q.qmin, layer.weights_q.qmax + 1,
                            size=layer.weights.shape).astype(np.int64),
                        bias=rng.integers(-16, 16, size=layer.bias.shape
                                          ).astype(np.int64),
                    )
                    if rng.integers(0, 3) == 0:
                        bits = int(rng.choice([4, 8]))
                        mut["weights_q"] = QuantParams(
                            scale=2.0 ** -int(rng.integers(3, 7)),
                            bitwidth=bits, signed=True)
                        mut["weights"] = rng.integers(
                            mut["weights_q"].qmin, mut["weights_q"].qmax + 1,
                            size=layer.weights.shape).astype(np.int64)
                    layer_v = dataclasses.replace(layer, **mut)
                layers.append(layer_v)
            g = dataclasses.replace(base, layers=tuple(layers))
            net = dataclasses.replace(lower(g), profile_name=f"v{v}")
            variants.append((g, net))
        return variants

    def test_bit_exact_over_random_divergences(self):
        from adaflow.mdc_merge import merge as do_merge
        from netgen import random_image

        rng = np.random.default_rng(777)
        checked = 0
        for _ in range(40):
            count = int(rng.integers(2, 4))
            variants = self._variants(rng, count)
            merged = do_merge([net for _, net in variants])
            for (g, net), name in zip(variants, merged.profiles):
                eng_standalone = StreamingEngine(net)
                eng_view = StreamingEngine(configure(merged, name))
                img = random_image(rng, g)
                a = eng_standalone.run(img).logits
                b = eng_view.run(img).logits
                assert [int(x) for x in a] == [int(x) for x in b]
                checked += 1
        assert checked >= 80

    def test_area_bounds_hold(self):
        rng = np.random.default_rng(778)
        for _ in range(10):
            variants = self._variants(rng, 3)
            merged = merge([net for _, net in variants])
            costs = [estimate(configure(merged, p)).lut_pct
                     for p in merged.profiles]
            lut = estimate_merged(merged)["lut_pct"]
            assert lut <= sum(costs) + 1e-9
            assert lut >= max(costs) - 1e-9


class TestWidening:
    def _dense_net(self, bits, name):
        b = ChainBuilder((1, 2, 2), name=name)
        b.quant(scale=2.0 ** -bits, bits=bits, signed=False)
        w = np.random.default_rng(bits).uniform(-0.4, 0.4, (3, 4))
        b.dense(w, w_scale=2.0 ** -(bits - 1), w_bits=bits)
        return dataclasses.replace(lower(build_ir(b.build())), profile_name=name)

    def test_select_widens_to_max_format(self):
        n8 = self._dense_net(8, "w8")
        n4 = self._dense_net(4, "w4")
        m = merge([n8, n4])
        selects = [b for b in m.sboxes if b.kind == "select"]
        assert selects, "expected a select in front of the shared sink"
        for box in selects:
            for f in box.way_formats:
                assert box.token.fmt.word_bits >= f.fmt.word_bits
        rng = np.random.default_rng(4)
        for name, net in (("w8", n8), ("w4", n4)):
            img = rng.integers(0, 16, size=(1, 2, 2))
            assert (StreamingEngine(configure(m, name)).run(img).logits.tolist()
                    == StreamingEngine(net).run(img).logits.tolist())

    def test_signature_includes_parameters(self):
        n = lower(build_ir(mnist_like_model(seed=1).build()))
        sigs = {a.id: ActorSignature.of(a) for a in n.actors}
        n2 = lower(build_ir(mnist_like_model(seed=2).build()))
        sigs2 = {a.id: ActorSignature.of(a) for a in n2.actors}
        assert sigs["L0_weights"] != sigs2["L0_weights"]  # weights differ
        assert sigs["source"] == sigs2["source"]
