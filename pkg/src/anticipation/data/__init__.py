"""Timing protocol, storage formats, dataset index and synthetic benchmark."""

from .dataset import (
    DEFAULT_MODALITY,
    ClassInfo,
    Dataset,
    FeatureSequence,
    Sample,
    assemble_batch,
)
from .protocol import AnticipationProtocol, ProtocolError
from .storage import (
    FormatError,
    read_feature_file,
    read_index,
    read_json,
    write_feature_file,
    write_index,
    write_json,
)
from .synthetic import ConfigError, SynthConfig, generate, mixed_transition

__all__ = [
    "AnticipationProtocol",
    "ClassInfo",
    "ConfigError",
    "DEFAULT_MODALITY",
    "Dataset",
    "FeatureSequence",
    "FormatError",
    "ProtocolError",
    "Sample",
    "SynthConfig",
    "assemble_batch",
    "generate",
    "mixed_transition",
    "read_feature_file",
    "read_index",
    "read_json",
    "write_feature_file",
    "write_index",
    "write_json",
]
