"""Single-head scaled dot-product attention blocks."""

import math

import numpy as np

from ..engine import ops
from ..engine.tensor import Parameter, Tensor
from ..errors import DimensionError, EmptyInputError
from .layers import Linear


class AttentionProjections:
    """Query, key and value projections, each d_model -> d_model."""

    def __init__(self, name: str, d_model: int, rng: np.random.Generator, init_std: float = 0.02):
        self.d_model = d_model
        self.query = Linear(f"{name}.q", d_model, d_model, rng, init_std)
        self.key = Linear(f"{name}.k", d_model, d_model, rng, init_std)
        self.value = Linear(f"{name}.v", d_model, d_model, rng, init_std)

    def parameters(self) -> list[Parameter]:
        return self.query.parameters() + self.key.parameters() + self.value.parameters()


def _attend(queries: Tensor, keys_src: Tensor, proj: AttentionProjections) -> tuple[Tensor, Tensor]:
    scores = ops.matmul(proj.query(queries), ops.transpose(proj.key(keys_src)))
    attn = ops.softmax_rows(ops.mul_scalar(scores, 1.0 / math.sqrt(proj.d_model)))
    return ops.matmul(attn, proj.value(keys_src)), attn


def cross_attention_prototypes(queries, tokens, proj: AttentionProjections) -> tuple[Tensor, Tensor]:
    """Summarize a token set into one prototype per learnable query.

    Returns:
        Tuple of (prototypes n_q x d_model, attention n_q x n_t)

    Raises:
        EmptyInputError: If there are no tokens to attend over
    """
    if not isinstance(tokens, Tensor) and np.shape(tokens)[0] == 0:
        raise EmptyInputError("cross-attention over an empty token set is undefined")
    queries, tokens = ops.as_tensor(queries), ops.as_tensor(tokens)
    if queries.shape[1] != proj.d_model or tokens.shape[1] != proj.d_model:
        raise DimensionError(
            f"cross-attention expects width {proj.d_model}, got queries {queries.shape} and tokens {tokens.shape}"
        )
    return _attend(queries, tokens, proj)


def mixed_self_attention(tokens, proj: AttentionProjections,
                         residual: bool = False) -> tuple[Tensor, Tensor]:
    """Joint self-attention over all rows, with no modality masking.

    Returns:
        Tuple of (refined tokens n x d_model, attention n x n)
    """
    tokens = ops.as_tensor(tokens)
    if tokens.data.ndim != 2 or tokens.shape[1] != proj.d_model:
        raise DimensionError(f"self-attention expects width {proj.d_model}, got {tokens.shape}")
    out, attn = _attend(tokens, tokens, proj)
    if residual:
        out = ops.add(out, tokens)
    return out, attn
