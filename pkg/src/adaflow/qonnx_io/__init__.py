"""QONNX/ONNX model file parsing: binary wire format and JSON mirror."""

from .mirror import load_model, model_to_json, parse_model_json
from .model import (
    Attribute,
    ModelDescription,
    NodeDescription,
    RawTensor,
    ValueInfo,
    read_tensor,
    tensor_from_array,
    validate_model,
)
from .wire import parse_model

__all__ = [
    "Attribute",
    "ModelDescription",
    "NodeDescription",
    "RawTensor",
    "ValueInfo",
    "load_model",
    "model_to_json",
    "parse_model",
    "parse_model_json",
    "read_tensor",
    "tensor_from_array",
    "validate_model",
]
