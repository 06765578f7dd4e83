"""Confusion matrices and macro-averaged precision/recall/F1.

Predictions are argmax over logits (lowest class index on ties).
Zero-denominator precision/recall/F1 are defined as 0, which is the
conservative convention and is recorded in the JSON output so reported
macro averages are unambiguous.

Out-of-domain corpora are re-encoded with the checkpoint's vocabulary;
unknown tokens map to UNK. Per-document scoring can fan out over a
thread pool capped by the DOCGRAPH_THREADS environment variable;
results merge in input order, so parallelism never changes the metrics.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from . import autodiff as ad
from .corpus import Document, RawDocument, encode_corpus
from .errors import EvaluationError
from .graph import EdgeWeightSet
from .model import ModelConfig, ModelParams, forward

if TYPE_CHECKING:  # pragma: no cover
    from .training import Checkpoint

ZERO_DENOMINATOR_VALUE = 0.0


@dataclass(frozen=True)
class Metrics:
    """Per-class and macro-averaged scores for one evaluation."""

    confusion: np.ndarray  # rows = gold, cols = predicted
    precision: tuple[float, ...]
    recall: tuple[float, ...]
    f1: tuple[float, ...]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    n_documents: int

    def to_dict(self, class_names: tuple[str, ...] | None = None) -> dict:
        names = class_names or tuple(str(i) for i in range(len(self.precision)))
        return {
            "accuracy": self.accuracy,
            "confusion": [[int(v) for v in row] for row in self.confusion],
            "documents": self.n_documents,
            "macro": {
                "f1": self.macro_f1,
                "precision": self.macro_precision,
                "recall": self.macro_recall,
            },
            "per_class": {
                name: {
                    "f1": self.f1[i],
                    "precision": self.precision[i],
                    "recall": self.recall[i],
                }
                for i, name in enumerate(names)
            },
            "zero_denominator_value": ZERO_DENOMINATOR_VALUE,
        }


def compute_metrics(confusion: np.ndarray) -> Metrics:
    """Macro-averaged metrics from a gold-by-predicted confusion matrix."""
    confusion = np.asarray(confusion)
    if confusion.ndim != 2 or confusion.shape[0] != confusion.shape[1]:
        raise EvaluationError(f"confusion matrix must be square, got {confusion.shape}")
    if np.any(confusion < 0) or not np.issubdtype(confusion.dtype, np.integer):
        raise EvaluationError("confusion matrix must hold non-negative integers")
    total = int(confusion.sum())
    if total == 0:
        raise EvaluationError("no documents to evaluate")

    c = confusion.shape[0]
    precision, recall, f1 = [], [], []
    for i in range(c):
        tp = float(confusion[i, i])
        fp = float(confusion[:, i].sum()) - tp
        fn = float(confusion[i, :].sum()) - tp
        p = tp / (tp + fp) if tp + fp > 0 else ZERO_DENOMINATOR_VALUE
        r = tp / (tp + fn) if tp + fn > 0 else ZERO_DENOMINATOR_VALUE
        f = 2 * p * r / (p + r) if p + r > 0 else ZERO_DENOMINATOR_VALUE
        precision.append(p)
        recall.append(r)
        f1.append(f)

    return Metrics(
        confusion=confusion.copy(),
        precision=tuple(precision),
        recall=tuple(recall),
        f1=tuple(f1),
        macro_precision=float(np.mean(precision)),
        macro_recall=float(np.mean(recall)),
        macro_f1=float(np.mean(f1)),
        accuracy=float(np.trace(confusion)) / total,
        n_documents=total,
    )


def _thread_count(n_docs: int) -> int:
    raw = os.environ.get("DOCGRAPH_THREADS", "1")
    try:
        limit = max(1, int(raw))
    except ValueError:
        limit = 1
    return min(limit, max(1, n_docs))


def predict_label(
    doc: Document,
    params: ModelParams,
    config: ModelConfig,
    weights: EdgeWeightSet | None = None,
) -> int:
    logits, _ = forward(doc, params, config, weights)
    return int(np.argmax(logits.values))  # lowest index wins ties


def predict_probabilities(
    doc: Document,
    params: ModelParams,
    config: ModelConfig,
    weights: EdgeWeightSet | None = None,
) -> np.ndarray:
    logits, _ = forward(doc, params, config, weights)
    row = ad.reshape(logits, (1, logits.shape[0]))
    return ad.softmax_rows(row).values[0]


def evaluate_documents(
    params: ModelParams,
    config: ModelConfig,
    docs: list[Document],
    weights: EdgeWeightSet | None = None,
) -> Metrics:
    """Score already-encoded documents against their gold labels."""
    if not docs:
        raise EvaluationError("no documents to evaluate")
    threads = _thread_count(len(docs))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            predicted = list(pool.map(
                lambda d: predict_label(d, params, config, weights), docs))
    else:
        predicted = [predict_label(d, params, config, weights) for d in docs]
    c = config.n_classes
    confusion = np.zeros((c, c), dtype=np.int64)
    for doc, pred in zip(docs, predicted):
        confusion[doc.label, pred] += 1
    return compute_metrics(confusion)


def evaluate(
    ckpt: "Checkpoint",
    docs: list[RawDocument],
    weights: EdgeWeightSet | None = None,
) -> Metrics:
    """Re-encode raw documents with the checkpoint's vocabulary and score them.

    Labels outside the checkpoint's class set raise; unknown tokens map
    to UNK, which is how unseen publication sources are handled.
    """
    config = ckpt.config
    encoded = encode_corpus(docs, ckpt.vocab, config.class_set,
                            config.max_sentences, config.max_tokens)
    if not encoded:
        raise EvaluationError("no documents to evaluate")
    return evaluate_documents(ckpt.to_params(), config, encoded, weights)
