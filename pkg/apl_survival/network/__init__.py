"""The APL survival network."""

from .apl import (
    AplModel,
    ForwardResult,
    encode_pathways,
    encode_patches,
    forward,
    init_model,
    validate_apl_config,
)
from .attention import AttentionProjections, cross_attention_prototypes, mixed_self_attention
from .checkpoint import decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint
from .interpret import InterpretationReport, PrototypeAttention, export_interpretation, write_interpretation
from .layers import Linear, PatchEncoder, SNNEncoder

__all__ = [
    "AplModel",
    "AttentionProjections",
    "ForwardResult",
    "InterpretationReport",
    "Linear",
    "PatchEncoder",
    "PrototypeAttention",
    "SNNEncoder",
    "cross_attention_prototypes",
    "decode_checkpoint",
    "encode_checkpoint",
    "encode_pathways",
    "encode_patches",
    "export_interpretation",
    "forward",
    "init_model",
    "load_checkpoint",
    "mixed_self_attention",
    "save_checkpoint",
    "validate_apl_config",
    "write_interpretation",
]
