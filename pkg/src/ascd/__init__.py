"""Acoustic and semantic cooperative decoding for encoder-decoder ASR, in numpy."""

from .masking import (
    AttentionMask,
    build_causal_mask,
    build_padding_mask,
    build_s_ascd_mask,
    compose_ascd_mask,
)
from .model import ASRModel, ModelConfig, count_parameters
from .tensor import Parameter, Tensor, no_grad

__all__ = [
    "ASRModel",
    "AttentionMask",
    "ModelConfig",
    "Parameter",
    "Tensor",
    "build_causal_mask",
    "build_padding_mask",
    "build_s_ascd_mask",
    "compose_ascd_mask",
    "count_parameters",
    "no_grad",
]

__version__ = "0.1.0"
