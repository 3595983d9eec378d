"""Fixture regeneration: QAT training, QONNX export, IDX subsets, golden
predictions. Consumes the inference toolchain only through its file
formats and CLI."""

__version__ = "0.1.0"
