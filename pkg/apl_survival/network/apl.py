"""The APL network: modality encoders, query prototyping, fusion and predictor."""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..engine import ops
from ..engine.tensor import Parameter, Tensor
from ..errors import ConfigError, DimensionError, EmptyInputError
from ..models import AplConfig, CaseRecord, SurvivalOutput
from ..survival.metrics import survival_output
from .attention import AttentionProjections, cross_attention_prototypes, mixed_self_attention
from .layers import Linear, PatchEncoder, SNNEncoder


def validate_apl_config(config: AplConfig) -> None:
    """Raise ConfigError if the architecture cannot be built."""
    problems = []
    for name in ("d_in", "d_model", "snn_hidden", "n_hist_queries", "n_gene_queries",
                 "n_bins", "patch_hidden"):
        if getattr(config, name) < 1:
            problems.append(f"{name} must be >= 1 (got {getattr(config, name)})")
    if not config.pathway_sizes:
        problems.append("pathway_sizes is empty; build the config from a loaded cohort")
    if any(g < 1 for g in config.pathway_sizes):
        problems.append(f"every pathway needs at least one gene (got {config.pathway_sizes})")
    if config.pathway_names and len(config.pathway_names) != len(config.pathway_sizes):
        problems.append("pathway_names and pathway_sizes differ in length")
    if not 0.0 <= config.snn_dropout < 1.0:
        problems.append(f"snn_dropout must lie in [0, 1) (got {config.snn_dropout})")
    if config.patch_encoder not in ("linear", "mlp"):
        problems.append(f"patch_encoder must be 'linear' or 'mlp' (got {config.patch_encoder!r})")
    ab = config.ablation
    if ab.use_self_attention and not (ab.use_hist_prototypes or ab.use_gene_prototypes):
        problems.append("self-attention fusion needs at least one prototype branch")
    if problems:
        raise ConfigError("Invalid model config: " + "; ".join(problems))


class AplModel:
    """Parameters of one APL network plus its train/eval mode.

    Parameters are created only for the branches the ablation enables and
    are kept in a name-ordered registry that fixes initialization and
    checkpoint order.
    """

    def __init__(self, config: AplConfig, rng: np.random.Generator):
        validate_apl_config(config)
        self.config = config
        self.training = False
        ab = config.ablation
        std = config.init_std
        d = config.d_model

        self.patch_encoder = PatchEncoder("patch_encoder", config.d_in, d, rng,
                                          config.patch_encoder, config.patch_hidden, std)
        self.snn = [
            SNNEncoder(f"snn.{i}", g, config.snn_hidden, d, config.snn_dropout, rng, std)
            for i, g in enumerate(config.pathway_sizes)
        ]
        self.hist_queries: Optional[Parameter] = None
        self.gene_queries: Optional[Parameter] = None
        self.hist_attention: Optional[AttentionProjections] = None
        self.gene_attention: Optional[AttentionProjections] = None
        self.self_attention: Optional[AttentionProjections] = None
        if ab.use_hist_prototypes:
            self.hist_queries = Parameter.from_array(
                "queries.hist", rng.normal(0.0, std, size=(config.n_hist_queries, d)))
            self.hist_attention = AttentionProjections("cross_attn.hist", d, rng, std)
        if ab.use_gene_prototypes:
            self.gene_queries = Parameter.from_array(
                "queries.gene", rng.normal(0.0, std, size=(config.n_gene_queries, d)))
            self.gene_attention = AttentionProjections("cross_attn.gene", d, rng, std)
        if ab.use_self_attention:
            self.self_attention = AttentionProjections("self_attn", d, rng, std)
        self.predictor = Linear("predictor", d if ab.use_self_attention else 2 * d,
                                config.n_bins, rng, std)

        self._registry: dict[str, Parameter] = {}
        for p in self._collect():
            if p.name in self._registry:
                raise ConfigError(f"Duplicate parameter name {p.name}")
            self._registry[p.name] = p

    def _collect(self) -> list[Parameter]:
        params = self.patch_encoder.parameters()
        for enc in self.snn:
            params += enc.parameters()
        if self.hist_queries is not None:
            params.append(self.hist_queries)
        if self.gene_queries is not None:
            params.append(self.gene_queries)
        for block in (self.hist_attention, self.gene_attention, self.self_attention):
            if block is not None:
                params += block.parameters()
        return params + self.predictor.parameters()

    def parameters(self) -> list[Parameter]:
        return list(self._registry.values())

    def named_parameters(self) -> dict[str, Parameter]:
        return dict(self._registry)

    def parameter(self, name: str) -> Parameter:
        return self._registry[name]

    @property
    def n_parameters(self) -> int:
        return sum(p.tensor.size for p in self._registry.values())

    def train(self) -> "AplModel":
        self.training = True
        return self

    def eval(self) -> "AplModel":
        self.training = False
        return self

    def zero_grad(self) -> None:
        for p in self._registry.values():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._registry.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._registry) - set(state)
        extra = set(state) - set(self._registry)
        if missing or extra:
            raise DimensionError(f"State mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, values in state.items():
            p = self._registry[name]
            values = np.asarray(values, dtype=np.float64)
            if values.shape != p.shape:
                raise DimensionError(f"{name}: expected shape {p.shape}, got {values.shape}")
            p.tensor.data[...] = values


def init_model(config: AplConfig, seed: Optional[int] = None) -> AplModel:
    """Build a model with N(0, init_std) weights and zero biases.

    Deterministic per seed (default: ``config.seed``).
    """
    return AplModel(config, np.random.default_rng(config.seed if seed is None else seed))


@dataclass
class ForwardResult:
    """Logits plus every attention map produced on the way."""

    logits: Tensor
    hist_attention: Optional[np.ndarray] = None
    gene_attention: Optional[np.ndarray] = None
    fused_attention: Optional[np.ndarray] = None

    def survival(self) -> SurvivalOutput:
        return survival_output(self.logits.data)


def encode_patches(model: AplModel, patch_embeddings) -> Tensor:
    """Project N_H patch embeddings to N_H x d_model histology tokens."""
    values = patch_embeddings.data if isinstance(patch_embeddings, Tensor) else np.asarray(patch_embeddings)
    if values.ndim == 2 and values.shape[0] == 0:
        raise EmptyInputError("A case needs at least one patch")
    return model.patch_encoder(ops.as_tensor(patch_embeddings))


def encode_pathways(model: AplModel, pathway_inputs: Sequence, training: bool = False,
                    rng: Optional[np.random.Generator] = None) -> Tensor:
    """Encode each pathway with its own SNN and stack the N_G tokens in order."""
    if len(pathway_inputs) != len(model.snn):
        raise DimensionError(
            f"Expected {len(model.snn)} pathway vectors, got {len(pathway_inputs)}"
        )
    names = model.config.pathway_names
    tokens = []
    for i, (encoder, x) in enumerate(zip(model.snn, pathway_inputs)):
        values = x.data if isinstance(x, Tensor) else np.asarray(x)
        if values.shape[-1] != encoder.n_genes:
            label = names[i] if names else f"#{i}"
            raise DimensionError(
                f"Pathway {label} has {values.shape[-1]} values, its encoder expects {encoder.n_genes}"
            )
        tokens.append(encoder(x, training, rng))
    return ops.concat(tokens)


def forward(model: AplModel, case: CaseRecord, training: Optional[bool] = None,
            rng: Optional[np.random.Generator] = None) -> ForwardResult:
    """Run one case through the network.

    Ablation semantics: a modality without prototypes contributes its raw
    tokens. Without self-attention the two modalities are mean-pooled
    separately and concatenated; with it, their tokens are concatenated,
    attended jointly and then mean-pooled.

    Args:
        model: The network
        case: Case with patch embeddings and pathway vectors
        training: Dropout on/off (default: the model's mode)
        rng: Dropout mask generator, required when training with dropout
    """
    training = model.training if training is None else training
    ab = model.config.ablation
    x_hist = encode_patches(model, case.patch_embeddings)
    x_gene = encode_pathways(model, case.pathway_inputs, training, rng)

    maps: dict[str, np.ndarray] = {}
    if ab.use_hist_prototypes:
        x_hist, attn = cross_attention_prototypes(model.hist_queries.tensor, x_hist, model.hist_attention)
        maps["hist_attention"] = attn.data
    if ab.use_gene_prototypes:
        x_gene, attn = cross_attention_prototypes(model.gene_queries.tensor, x_gene, model.gene_attention)
        maps["gene_attention"] = attn.data

    if ab.use_self_attention:
        fused, attn = mixed_self_attention(ops.concat_rows(x_hist, x_gene), model.self_attention,
                                           model.config.residual)
        maps["fused_attention"] = attn.data
        pooled = ops.mean_rows(fused)
    else:
        pooled = ops.concat([ops.mean_rows(x_hist), ops.mean_rows(x_gene)])

    logits = model.predictor(ops.reshape(pooled, (1, pooled.shape[0])))
    return ForwardResult(ops.reshape(logits, (model.config.n_bins,)), **maps)
