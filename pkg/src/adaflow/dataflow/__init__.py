"""Streaming dataflow networks: template lowering, actors, validation."""

from .kernels import (
    DenseKernel,
    LineBufferKernel,
    RequantKernel,
    conv_fire,
    maxpool_fire,
)
from .lower import lower
from .structure import (
    Actor,
    ActorNetwork,
    Channel,
    ChannelFormat,
    network_from_dict,
    network_from_json,
    network_to_dict,
    network_to_json,
    networks_structurally_equal,
)
from .validate import ValidationReport, validate_network

__all__ = [
    "Actor",
    "ActorNetwork",
    "Channel",
    "ChannelFormat",
    "DenseKernel",
    "LineBufferKernel",
    "RequantKernel",
    "ValidationReport",
    "conv_fire",
    "lower",
    "maxpool_fire",
    "network_from_dict",
    "network_from_json",
    "network_to_dict",
    "network_to_json",
    "networks_structurally_equal",
    "validate_network",
]
