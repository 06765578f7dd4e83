"""Model variants: CNN and LSTM baselines plus the graph models.

Every variant ends the same way: max-pool over its representation rows,
then a linear projection to class logits. Graph variants share the
pipeline encoder -> document graph -> graph layer(s) -> pool -> project;
the baselines flatten the document to one token sequence.

Single-sentence documents have no neighbors, so graph variants bypass
the propagation step and project the lone node feature through the
layer weights directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import ClassSet, Document
from .encoder import EncoderParams, embed, encode_document, lstm_last_hidden, xavier_uniform
from .errors import ModelError
from .graph import EdgeWeightSet, build_graph
from .layers import (
    GatHeadParams,
    GcnParams,
    SelfAttnParams,
    gcn_layer,
    multi_head,
    row_normalize,
    self_attention,
)

VARIANTS = ("cnn", "lstm", "gcn", "gcn_ss", "gcn_attn", "gcn_attn_ss", "gat", "gat2")
SS_VARIANTS = ("gcn_ss", "gcn_attn_ss")
ATTENTION_VARIANTS = ("gcn_attn", "gcn_attn_ss", "gat", "gat2")
GRAPH_VARIANTS = ("gcn", "gcn_ss", "gcn_attn", "gcn_attn_ss", "gat", "gat2")
CNN_WIDTH = 3


@dataclass(frozen=True)
class ModelConfig:
    """Variant selector, dimensions, and training hyperparameters."""

    variant: str
    vocab_size: int
    class_names: tuple[str, ...]
    embed_dim: int = 100
    hidden_dim: int = 100
    node_dim: int = 32
    leaky_slope: float = 0.2
    gcn_layers: int = 1
    seed: int = 0
    lr: float = 0.001
    max_epochs: int = 10
    max_sentences: int = 64
    max_tokens: int = 64
    clip_norm: Optional[float] = None
    normalize_adjacency: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ModelError(f"unknown variant '{self.variant}'; choose from {VARIANTS}")
        if len(self.class_names) < 2:
            raise ModelError("a model needs at least 2 classes")
        for name in ("vocab_size", "embed_dim", "hidden_dim", "node_dim", "gcn_layers",
                     "max_sentences", "max_tokens"):
            if getattr(self, name) < 1:
                raise ModelError(f"{name} must be positive")
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def heads(self) -> int:
        return 2 if self.variant == "gat2" else 1

    @property
    def needs_edge_weights(self) -> bool:
        return self.variant in SS_VARIANTS

    @property
    def produces_attention(self) -> bool:
        return self.variant in ATTENTION_VARIANTS

    @property
    def pool_dim(self) -> int:
        if self.variant in ("cnn", "lstm"):
            return self.hidden_dim
        if self.variant in ("gat", "gat2"):
            return self.node_dim * self.heads
        return self.node_dim

    @property
    def class_set(self) -> ClassSet:
        return ClassSet(self.class_names)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ModelError(f"unknown config fields: {sorted(unknown)}")
        data = dict(data)
        data["class_names"] = tuple(data["class_names"])
        return cls(**data)


@dataclass
class CnnParams:
    """Width-3 convolution filters over word embeddings, plus bias."""

    w0: Tensor
    w1: Tensor
    w2: Tensor
    bias: Tensor

    @classmethod
    def init(cls, rng: np.random.Generator, embed_dim: int, n_filters: int) -> "CnnParams":
        ws = [Tensor(xavier_uniform(rng, embed_dim, n_filters), requires_grad=True)
              for _ in range(CNN_WIDTH)]
        return cls(*ws, bias=Tensor(np.zeros(n_filters), requires_grad=True))


@dataclass
class ModelParams:
    """All learned tensors for one variant, each with a unique name."""

    tensors: dict[str, Tensor]
    embedding: Tensor
    proj_w: Tensor
    proj_b: Tensor
    encoder: EncoderParams | None = None
    cnn: CnnParams | None = None
    gcn: list[GcnParams] = field(default_factory=list)
    self_attn: SelfAttnParams | None = None
    gat_heads: list[GatHeadParams] = field(default_factory=list)

    def total_parameters(self) -> int:
        return sum(t.size for t in self.tensors.values())


def param_names(config: ModelConfig) -> list[str]:
    """The exact tensor names a variant owns, in initialization order."""
    names = ["embedding"]
    if config.variant != "cnn":
        for gate in ("i", "f", "g", "o"):
            names += [f"lstm.{gate}.w_x", f"lstm.{gate}.w_h", f"lstm.{gate}.b"]
    if config.variant == "cnn":
        names += ["cnn.w0", "cnn.w1", "cnn.w2", "cnn.b"]
    if config.variant.startswith("gcn"):
        names += [f"gcn.{layer}.w" for layer in range(config.gcn_layers)]
    if config.variant in ("gcn_attn", "gcn_attn_ss"):
        names += ["attn.q", "attn.k", "attn.v"]
    if config.variant in ("gat", "gat2"):
        for h in range(config.heads):
            names += [f"gat.{h}.w", f"gat.{h}.a"]
    names += ["proj.w", "proj.b"]
    return names


def init_params(config: ModelConfig, rng: np.random.Generator | None = None) -> ModelParams:
    """Build all parameter tensors for a variant, in a fixed draw order."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    tensors: dict[str, Tensor] = {}
    encoder = None
    cnn = None
    gcn: list[GcnParams] = []
    self_attn = None
    gat_heads: list[GatHeadParams] = []

    if config.variant == "cnn":
        embedding = Tensor(xavier_uniform(rng, config.vocab_size, config.embed_dim),
                           requires_grad=True)
        tensors["embedding"] = embedding
        cnn = CnnParams.init(rng, config.embed_dim, config.hidden_dim)
        tensors.update({"cnn.w0": cnn.w0, "cnn.w1": cnn.w1, "cnn.w2": cnn.w2,
                        "cnn.b": cnn.bias})
    else:
        encoder = EncoderParams.init(rng, config.vocab_size, config.embed_dim,
                                     config.hidden_dim)
        embedding = encoder.embedding
        tensors.update(encoder.named_tensors())

    if config.variant.startswith("gcn"):
        in_dim = config.hidden_dim
        for layer in range(config.gcn_layers):
            p = GcnParams.init(rng, in_dim, config.node_dim, config.leaky_slope)
            gcn.append(p)
            tensors[f"gcn.{layer}.w"] = p.weight
            in_dim = config.node_dim
    if config.variant in ("gcn_attn", "gcn_attn_ss"):
        self_attn = SelfAttnParams.init(rng, config.node_dim)
        tensors.update({"attn.q": self_attn.query, "attn.k": self_attn.key,
                        "attn.v": self_attn.value})
    if config.variant in ("gat", "gat2"):
        for h in range(config.heads):
            head = GatHeadParams.init(rng, config.hidden_dim, config.node_dim,
                                      config.leaky_slope)
            gat_heads.append(head)
            tensors[f"gat.{h}.w"] = head.weight
            tensors[f"gat.{h}.a"] = head.attn

    proj_w = Tensor(xavier_uniform(rng, config.pool_dim, config.n_classes),
                    requires_grad=True)
    proj_b = Tensor(np.zeros(config.n_classes), requires_grad=True)
    tensors["proj.w"] = proj_w
    tensors["proj.b"] = proj_b

    assert list(tensors) == param_names(config)
    return ModelParams(tensors=tensors, embedding=embedding, proj_w=proj_w,
                       proj_b=proj_b, encoder=encoder, cnn=cnn, gcn=gcn,
                       self_attn=self_attn, gat_heads=gat_heads)


def validate_params(params: ModelParams, config: ModelConfig) -> None:
    expected = param_names(config)
    actual = list(params.tensors)
    if actual != expected:
        raise ModelError(
            f"parameter set does not match variant '{config.variant}': "
            f"expected {expected}, got {actual}"
        )


def _project(pooled: Tensor, params: ModelParams, n_classes: int) -> Tensor:
    row = ad.reshape(pooled, (1, pooled.shape[0]))
    logits = ad.add(ad.matmul(row, params.proj_w), params.proj_b)
    return ad.reshape(logits, (n_classes,))


def _flat_tokens(doc: Document) -> list[int]:
    return [token for sentence in doc.sentences for token in sentence]


def cnn_forward(doc: Document, params: ModelParams, config: ModelConfig) -> Tensor:
    """Width-3 convolution over the flattened document, max-pooled over time."""
    tokens = _flat_tokens(doc)
    x = embed(tokens, params.embedding)
    padded = ad.pad_rows(x, 1, 1)  # 'same' padding keeps one output per token
    t = len(tokens)
    conv = ad.add(
        ad.add(ad.matmul(ad.slice_rows(padded, 0, t), params.cnn.w0),
               ad.matmul(ad.slice_rows(padded, 1, t + 1), params.cnn.w1)),
        ad.matmul(ad.slice_rows(padded, 2, t + 2), params.cnn.w2),
    )
    conv = ad.add(conv, params.cnn.bias)
    activated = ad.leaky_relu(conv, config.leaky_slope)
    return _project(ad.max_over_rows(activated), params, config.n_classes)


def lstm_forward(doc: Document, params: ModelParams, config: ModelConfig) -> Tensor:
    """Document-level LSTM over the flattened token sequence."""
    x = embed(_flat_tokens(doc), params.embedding)
    hidden = lstm_last_hidden(x, params.encoder)
    return _project(hidden, params, config.n_classes)


def _graph_forward(
    doc: Document,
    params: ModelParams,
    config: ModelConfig,
    weights: EdgeWeightSet | None,
) -> tuple[Tensor, list[Tensor] | None]:
    features = encode_document(doc, params.encoder)
    use_weights = weights if config.needs_edge_weights else None
    document_graph = build_graph(doc, features, use_weights)
    attentions: list[Tensor] | None = None

    if doc.n_sentences == 1:
        # no neighbors to propagate over: project the node through the layer weights
        if config.variant in ("gat", "gat2"):
            parts = [ad.matmul(features, head.weight) for head in params.gat_heads]
            z = parts[0] if len(parts) == 1 else ad.concat_cols(parts)
        else:
            z = features
            for layer in params.gcn:
                z = ad.matmul(z, layer.weight)
            if params.self_attn is not None:
                z, attention = self_attention(z, params.self_attn)
                attentions = [attention]
    elif config.variant in ("gat", "gat2"):
        z, attentions = multi_head(document_graph.adjacency, features, params.gat_heads)
    else:
        adjacency = document_graph.adjacency
        if config.normalize_adjacency:
            adjacency = row_normalize(adjacency)
        z = features
        for layer in params.gcn:
            z = gcn_layer(adjacency, z, layer)
        if params.self_attn is not None:
            z, attention = self_attention(z, params.self_attn)
            attentions = [attention]

    logits = _project(ad.max_over_rows(z), params, config.n_classes)
    return logits, attentions


def forward(
    doc: Document,
    params: ModelParams,
    config: ModelConfig,
    weights: EdgeWeightSet | None = None,
) -> tuple[Tensor, list[Tensor] | None]:
    """Class logits for one document, plus attention matrices when the
    variant produces them (one per head for gat2)."""
    validate_params(params, config)
    if config.needs_edge_weights and weights is None:
        raise ModelError(f"variant '{config.variant}' requires an edge-weight set")
    if config.variant == "cnn":
        return cnn_forward(doc, params, config), None
    if config.variant == "lstm":
        return lstm_forward(doc, params, config), None
    return _graph_forward(doc, params, config, weights)


def loss(logits: Tensor, label: int) -> Tensor:
    return ad.cross_entropy_logits(logits, label)
