"""Command-line behavior: artifacts, exit codes, determinism, emission."""

import json
import os

import numpy as np
import pytest

from adaflow.cli import main
from modelbuild import ChainBuilder, mnist_like_model


@pytest.fixture()
def mnist_json(tmp_path):
    path = tmp_path / "a8w8.json"
    path.write_text(mnist_like_model(seed=42, name="A8-W8").to_json())
    return str(path)


@pytest.fixture()
def mixed_json(tmp_path):
    base = mnist_like_model(seed=42, name="A8-W8")
    mixed = mnist_like_model(seed=42, inner=(4, 4), name="Mixed",
                             weights=dict(base.weights_used))
    path = tmp_path / "mixed.json"
    path.write_text(mixed.to_json())
    return str(path)


class TestCompile:
    def test_writes_network_and_report(self, mnist_json, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["compile", "--model", mnist_json, "--out", str(out)]) == 0
        doc = json.loads((out / "network.json").read_text())
        assert len(doc["actors"]) == 21
        report = (out / "report.txt").read_text()
        assert "A8-W8" in report and "Conv" in report
        assert "21" in capsys.readouterr().out

    def test_deterministic(self, mnist_json, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["compile", "--model", mnist_json, "--out", str(a)])
        main(["compile", "--model", mnist_json, "--out", str(b)])
        assert (a / "network.json").read_bytes() == (b / "network.json").read_bytes()

    def test_bad_file_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.onnx"
        bad.write_bytes(b"\xff\xff\xff")
        rc = main(["compile", "--model", str(bad), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "MalformedWire" in capsys.readouterr().err

    def test_missing_file_exit_2(self, tmp_path):
        rc = main(["compile", "--model", str(tmp_path / "nope.onnx"),
                   "--out", str(tmp_path / "o")])
        assert rc == 2

    def test_unsupported_op_exit_3(self, tmp_path):
        b = ChainBuilder((1, 4, 4)).quant(scale=0.5, bits=8).raw_node("Sigmoid")
        path = tmp_path / "sig.json"
        path.write_text(b.to_json())
        assert main(["compile", "--model", str(path),
                     "--out", str(tmp_path / "o")]) == 3

    def test_json_flag_equivalent_output(self, mnist_json, tmp_path):
        # same model under an extension the sniffer ignores
        opaque = tmp_path / "model.qonnx.txt"
        opaque.write_text(open(mnist_json).read())
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["compile", "--model", mnist_json, "--out", str(a)]) == 0
        assert main(["compile", "--model", str(opaque), "--json",
                     "--out", str(b)]) == 0
        assert (a / "network.json").read_bytes() == (b / "network.json").read_bytes()


class TestSweep:
    def test_rows_and_latency(self, tmp_path, capsys):
        paths = []
        for a, w in ((8, 8), (8, 4)):
            p = tmp_path / f"a{a}w{w}.json"
            p.write_text(mnist_like_model(a, w, seed=a + w).to_json())
            paths.append(str(p))
        out = tmp_path / "metrics.csv"
        jout = tmp_path / "metrics.json"
        assert main(["sweep", "--models", *paths, "--out", str(out),
                     "--json-out", str(jout)]) == 0
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 3
        assert lines[1].startswith("A8-W8,,329")
        assert lines[2].startswith("A8-W4,,329")
        detail = json.loads(jout.read_text())
        assert "per_actor" in detail["A8-W8"]
        assert "L0_conv" in detail["A8-W8"]["per_actor"]


class TestMerge:
    def test_two_profiles(self, mnist_json, mixed_json, tmp_path, capsys):
        out = tmp_path / "merged"
        rc = main(["merge", "--models", mnist_json, mixed_json,
                   "--out", str(out)])
        assert rc == 0
        text = (out / "sharing_report.txt").read_text()
        assert "sboxes: 2" in text
        doc = json.loads((out / "merged.json").read_text())
        assert doc["profiles"] == ["A8-W8", "Mixed"]

    def test_single_model_degenerate(self, mnist_json, tmp_path):
        out = tmp_path / "m1"
        assert main(["merge", "--models", mnist_json, "--out", str(out)]) == 0
        doc = json.loads((out / "merged.json").read_text())
        assert doc["sboxes"] == [] and len(doc["profiles"]) == 1

    def test_topology_mismatch_exit_3(self, mnist_json, tmp_path):
        small = ChainBuilder((1, 8, 8))
        small.quant(scale=2.0**-8, bits=8, signed=False)
        small.conv(np.random.default_rng(0).uniform(-0.3, 0.3, (2, 1, 3, 3)),
                   w_scale=2.0**-6, w_bits=8)
        p = tmp_path / "small.json"
        p.write_text(small.to_json())
        rc = main(["merge", "--models", mnist_json, str(p),
                   "--names", "big", "small", "--out", str(tmp_path / "o")])
        assert rc == 3


class TestAdaptiveSim:
    def test_threshold_scenario(self, tmp_path, capsys):
        rc = main([
            "adaptive-sim",
            "--policy", "threshold:0.5:A8-W8:Mixed",
            "--battery-mwh", "10000",
            "--profile", "A8-W8:142:98.8",
            "--profile", "Mixed:134.9:97.3",
            "--out", str(tmp_path / "mission"),
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "duration gain: +2.63%" in out
        assert (tmp_path / "mission" / "mission.csv").exists()

    def test_infeasible_constraint_exit_3(self, capsys):
        rc = main([
            "adaptive-sim", "--policy", "constraint:99.9",
            "--baseline", "fixed:A8-W8",
            "--battery-mwh", "100",
            "--profile", "A8-W8:142:98.8",
        ])
        assert rc == 3

    def test_mission_document(self, tmp_path, capsys):
        doc = {
            "battery_mwh": 10000.0,
            "policy": "threshold:0.5:A8-W8:Mixed",
            "step_s": 1.0,
            "latency_us": 329.0,
            "profiles": {
                "A8-W8": {"power_mw": 142.0, "accuracy_pct": 98.8},
                "Mixed": {"power_mw": 134.9, "accuracy_pct": 97.3},
            },
        }
        p = tmp_path / "mission.json"
        p.write_text(json.dumps(doc))
        assert main(["adaptive-sim", "--mission", str(p)]) == 0
        assert "duration gain: +2.63%" in capsys.readouterr().out


class TestEmitHls:
    def test_source_sink_network(self, tmp_path):
        p = tmp_path / "empty.json"
        p.write_text(ChainBuilder((1, 28, 28)).to_json())
        out = tmp_path / "hls"
        assert main(["emit-hls", "--network", str(p), "--out", str(out)]) == 0
        files = sorted(os.listdir(out / "src"))
        assert files == ["sink.cpp", "source.cpp", "top.cpp"]
        assert (out / "build.tcl").exists()

    def test_conv_constants_present(self, mnist_json, tmp_path):
        out = tmp_path / "hls"
        main(["emit-hls", "--network", mnist_json, "--out", str(out)])
        conv = (out / "src" / "L0_conv.cpp").read_text()
        assert "WINDOW_SIZE" in conv and "= 9;" in conv
        assert "ACT_BITS" in conv and "WEIGHT_BITS" in conv
        lb = (out / "src" / "L0_linebuf.cpp").read_text()
        assert "KERNEL_H" in lb and "KERNEL_W" in lb

    def test_deterministic(self, mnist_json, tmp_path):
        outs = []
        for sub in ("x", "y"):
            out = tmp_path / sub
            main(["emit-hls", "--network", mnist_json, "--out", str(out)])
            blob = b"".join(
                (out / "src" / f).read_bytes()
                for f in sorted(os.listdir(out / "src"))
            ) + (out / "build.tcl").read_bytes()
            outs.append(blob)
        assert outs[0] == outs[1]

    def test_golden_digest_manifest_mnist_fixture(self, tmp_path):
        import hashlib

        import conftest

        if not conftest.have_fixtures():
            pytest.skip("bundled fixtures not generated yet")
        manifest_path = os.path.join(os.path.dirname(__file__), "golden",
                                     "emit_a8w8_manifest.json")
        want = json.loads(open(manifest_path).read())
        out = tmp_path / "hls"
        assert main(["emit-hls", "--network", conftest.model_path("a8w8"),
                     "--out", str(out)]) == 0
        got = {}
        for root, _, files in os.walk(out):
            for f in files:
                p = os.path.join(root, f)
                rel = os.path.relpath(p, out)
                got[rel] = hashlib.sha256(open(p, "rb").read()).hexdigest()
        assert got == want

    def test_emit_accepts_compiled_network_json(self, mnist_json, tmp_path):
        cmp_dir = tmp_path / "cmp"
        main(["compile", "--model", mnist_json, "--out", str(cmp_dir)])
        out = tmp_path / "hls"
        rc = main(["emit-hls", "--network", str(cmp_dir / "network.json"),
                   "--out", str(out)])
        assert rc == 0 and (out / "src" / "L0_conv.cpp").exists()

    def test_emit_merged_profile(self, mnist_json, mixed_json, tmp_path, capsys):
        merged_dir = tmp_path / "merged"
        main(["merge", "--models", mnist_json, mixed_json,
              "--out", str(merged_dir)])
        # without a profile: clear semantic error
        rc = main(["emit-hls", "--network", str(merged_dir / "merged.json"),
                   "--out", str(tmp_path / "x")])
        assert rc == 3
        assert "A8-W8" in capsys.readouterr().err
        out = tmp_path / "hls"
        rc = main(["emit-hls", "--network", str(merged_dir / "merged.json"),
                   "--profile", "Mixed", "--out", str(out)])
        assert rc == 0
        assert (out / "src" / "L2_requant_in.cpp").exists()

    def test_merge_accepts_network_json(self, mnist_json, mixed_json, tmp_path):
        a_dir, m_dir = tmp_path / "a", tmp_path / "m"
        main(["compile", "--model", mnist_json, "--out", str(a_dir)])
        main(["compile", "--model", mixed_json, "--out", str(m_dir)])
        out = tmp_path / "merged"
        rc = main(["merge", "--models", str(a_dir / "network.json"),
                   str(m_dir / "network.json"), "--out", str(out)])
        assert rc == 0
        assert "sboxes: 2" in (out / "sharing_report.txt").read_text()

    def test_golden_tiny_network(self, tmp_path):
        golden_dir = os.path.join(os.path.dirname(__file__), "golden", "emit_tiny")
        b = ChainBuilder((1, 4, 4), name="tiny")
        b.quant(scale=2.0**-8, bits=8, signed=False)
        w = (np.arange(9).reshape(1, 1, 3, 3) - 4) / 16.0
        b.conv(w, w_scale=2.0**-4, w_bits=8, bias=np.array([0.5]), relu=True)
        b.quant(scale=2.0**-8, bits=8, signed=False)
        p = tmp_path / "tiny.json"
        p.write_text(b.to_json())
        out = tmp_path / "hls"
        assert main(["emit-hls", "--network", str(p), "--out", str(out)]) == 0
        for name in sorted(os.listdir(golden_dir)):
            got = (out / "src" / name) if name.endswith(".cpp") else (out / name)
            want = os.path.join(golden_dir, name)
            assert got.read_bytes() == open(want, "rb").read(), name
