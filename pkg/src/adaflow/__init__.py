"""adaflow: quantized ONNX CNNs -> streaming dataflow engines with
runtime-switchable precision profiles."""

__version__ = "0.1.0"
