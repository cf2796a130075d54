"""Dense layers and the per-modality encoders."""

from typing import Optional

import numpy as np

from ..engine import ops
from ..engine.tensor import Parameter, Tensor
from ..errors import DimensionError


class Linear:
    """Affine map x @ W + b with W of shape in_features x out_features.

    Weights are drawn from N(0, init_std); the bias starts at zero.
    """

    def __init__(self, name: str, in_features: int, out_features: int,
                 rng: np.random.Generator, init_std: float = 0.02, bias: bool = True):
        self.name = name
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter.from_array(
            f"{name}.weight", rng.normal(0.0, init_std, size=(in_features, out_features))
        )
        self.bias = Parameter.from_array(f"{name}.bias", np.zeros(out_features)) if bias else None

    def parameters(self) -> list[Parameter]:
        return [self.weight] + ([self.bias] if self.bias is not None else [])

    def __call__(self, x) -> Tensor:
        x = ops.as_tensor(x)
        if x.data.ndim != 2 or x.shape[1] != self.in_features:
            raise DimensionError(
                f"{self.name}: expected input with {self.in_features} columns, got shape {x.shape}"
            )
        return ops.linear(x, self.weight.tensor, self.bias.tensor if self.bias is not None else None)


class SNNEncoder:
    """Self-normalizing pathway encoder: linear, SELU, alpha-dropout, linear."""

    def __init__(self, name: str, n_genes: int, hidden: int, d_model: int,
                 dropout: float, rng: np.random.Generator, init_std: float = 0.02):
        self.name = name
        self.n_genes = n_genes
        self.dropout = dropout
        self.fc1 = Linear(f"{name}.fc1", n_genes, hidden, rng, init_std)
        self.fc2 = Linear(f"{name}.fc2", hidden, d_model, rng, init_std)

    def parameters(self) -> list[Parameter]:
        return self.fc1.parameters() + self.fc2.parameters()

    def __call__(self, x, training: bool = False,
                 rng: Optional[np.random.Generator] = None) -> Tensor:
        """Map a length-g vector to a 1 x d_model token."""
        x = ops.as_tensor(x)
        if x.data.ndim == 1:
            x = ops.reshape(x, (1, x.shape[0]))
        hidden = ops.selu(self.fc1(x))
        hidden = ops.alpha_dropout(hidden, self.dropout, rng, training)
        return self.fc2(hidden)


class PatchEncoder:
    """Projects patch embeddings to d_model.

    ``kind="linear"`` is a single affine map; ``kind="mlp"`` inserts a ReLU
    hidden layer of width ``hidden``.
    """

    def __init__(self, name: str, d_in: int, d_model: int, rng: np.random.Generator,
                 kind: str = "linear", hidden: int = 512, init_std: float = 0.02):
        if kind not in ("linear", "mlp"):
            raise ValueError(f"Unknown patch encoder kind {kind!r}")
        self.kind = kind
        self.d_in = d_in
        if kind == "linear":
            self.layers = [Linear(name, d_in, d_model, rng, init_std)]
        else:
            self.layers = [
                Linear(f"{name}.fc1", d_in, hidden, rng, init_std),
                Linear(f"{name}.fc2", hidden, d_model, rng, init_std),
            ]

    def parameters(self) -> list[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def __call__(self, x) -> Tensor:
        if self.kind == "linear":
            return self.layers[0](x)
        return self.layers[1](ops.relu(self.layers[0](x)))
