"""Sentence encoder: embedding lookup plus a shared LSTM.

A document's node feature matrix has one row per sentence: the last
hidden state of an LSTM run over that sentence's word embeddings. The
same parameters are shared by every sentence, so gradients from all
rows accumulate into one parameter set, and rows depend only on their
own sentence (no cross-sentence interaction before the graph layer).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import Document

GATES = ("i", "f", "g", "o")


def xavier_uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out))."""
    a = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-a, a, size=(rows, cols))


@dataclass
class EncoderParams:
    """Embedding matrix plus per-gate LSTM weights (input, hidden, bias)."""

    embedding: Tensor
    gates: dict[str, tuple[Tensor, Tensor, Tensor]]

    @classmethod
    def init(
        cls,
        rng: np.random.Generator,
        vocab_size: int,
        embed_dim: int,
        hidden_dim: int,
    ) -> "EncoderParams":
        embedding = Tensor(xavier_uniform(rng, vocab_size, embed_dim), requires_grad=True)
        gates = {}
        for gate in GATES:
            w_x = Tensor(xavier_uniform(rng, embed_dim, hidden_dim), requires_grad=True)
            w_h = Tensor(xavier_uniform(rng, hidden_dim, hidden_dim), requires_grad=True)
            # forget-gate bias starts at 1 to keep early cell state open
            bias = np.full(hidden_dim, 1.0) if gate == "f" else np.zeros(hidden_dim)
            gates[gate] = (w_x, w_h, Tensor(bias, requires_grad=True))
        return cls(embedding=embedding, gates=gates)

    @property
    def hidden_dim(self) -> int:
        return self.gates["i"][0].shape[1]

    def named_tensors(self, prefix: str = "lstm") -> dict[str, Tensor]:
        out = {"embedding": self.embedding}
        for gate in GATES:
            w_x, w_h, b = self.gates[gate]
            out[f"{prefix}.{gate}.w_x"] = w_x
            out[f"{prefix}.{gate}.w_h"] = w_h
            out[f"{prefix}.{gate}.b"] = b
        return out


def embed(token_ids: Sequence[int], embedding: Tensor) -> Tensor:
    """Look up embedding rows for a token-id sequence; shape (T, embed_dim)."""
    return ad.gather_rows(embedding, token_ids)


def _lstm_last_row(x: Tensor, params: EncoderParams) -> Tensor:
    """Run the LSTM over the rows of x; returns h_T with shape (1, hidden)."""
    hidden = params.hidden_dim
    h = Tensor(np.zeros((1, hidden)))
    c = Tensor(np.zeros((1, hidden)))
    steps = x.shape[0]
    for t in range(steps):
        x_t = ad.slice_rows(x, t, t + 1)
        pre = {}
        for gate in GATES:
            w_x, w_h, b = params.gates[gate]
            pre[gate] = ad.add(ad.add(ad.matmul(x_t, w_x), ad.matmul(h, w_h)), b)
        i = ad.sigmoid(pre["i"])
        f = ad.sigmoid(pre["f"])
        g = ad.tanh(pre["g"])
        o = ad.sigmoid(pre["o"])
        c = ad.add(ad.mul(f, c), ad.mul(i, g))
        h = ad.mul(o, ad.tanh(c))
    return h


def lstm_last_hidden(x: Tensor, params: EncoderParams) -> Tensor:
    """Last hidden state of the LSTM over x's rows, as a flat vector."""
    h = _lstm_last_row(x, params)
    return ad.reshape(h, (params.hidden_dim,))


def encode_document(doc: Document, params: EncoderParams) -> Tensor:
    """Node feature matrix: row i is the LSTM encoding of sentence i."""
    rows = [
        _lstm_last_row(embed(sentence, params.embedding), params)
        for sentence in doc.sentences
    ]
    if len(rows) == 1:
        return rows[0]
    return ad.concat_rows(rows)
