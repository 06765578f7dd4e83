"""Training loop, dev-set model selection, and checkpoint persistence.

Updates are per-document (batch size 1) with Adam; documents are
reshuffled every epoch from a seeded stream, so a (data, config, seed)
triple fully determines the run, including the checkpoint bytes.
After each epoch the dev set is scored with macro-F1 and the best
epoch's parameters are kept (ties go to the earliest epoch).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import AdamState, Tape
from .corpus import Document, Vocabulary
from .errors import CheckpointError, NumericError, TrainingError
from .evaluation import evaluate_documents
from .graph import EdgeWeightSet
from .model import ModelConfig, ModelParams, forward, init_params, loss, param_names

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    dev_macro_f1: float


@dataclass
class Checkpoint:
    """A trained model: config, vocabulary, named values, run metadata."""

    config: ModelConfig
    vocab: Vocabulary
    values: dict[str, np.ndarray]
    metadata: dict

    def to_params(self) -> ModelParams:
        """Materialize parameter tensors (structure validated against config)."""
        params = init_params(self.config)
        expected = param_names(self.config)
        if list(self.values) != expected:
            raise CheckpointError(
                f"checkpoint parameters {list(self.values)} do not match "
                f"variant '{self.config.variant}' (expected {expected})"
            )
        for name in expected:
            stored = self.values[name]
            if stored.shape != params.tensors[name].shape:
                raise CheckpointError(
                    f"parameter '{name}' has shape {stored.shape}, "
                    f"expected {params.tensors[name].shape}"
                )
            params.tensors[name].values = stored.copy()
        return params


@dataclass
class TrainRun:
    """Per-epoch log plus the best checkpoint of one training run."""

    config: ModelConfig
    seed: int
    epochs: list[EpochStats] = field(default_factory=list)
    best_epoch: int = 0
    checkpoint: Checkpoint | None = None

    @property
    def best_dev_macro_f1(self) -> float:
        return self.epochs[self.best_epoch - 1].dev_macro_f1

    def log_dict(self) -> dict:
        return {
            "best_epoch": self.best_epoch,
            "best_dev_macro_f1": self.best_dev_macro_f1,
            "epochs": [
                {"epoch": e.epoch, "train_loss": e.train_loss,
                 "dev_macro_f1": e.dev_macro_f1}
                for e in self.epochs
            ],
            "seed": self.seed,
            "variant": self.config.variant,
        }


def select_best_epoch(dev_scores: list[float]) -> int:
    """1-based index of the highest dev score; earliest epoch wins ties."""
    best = 0
    for i, score in enumerate(dev_scores[1:], start=1):
        if score > dev_scores[best]:
            best = i
    return best + 1


def _clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> None:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        factor = max_norm / total
        for g in grads.values():
            g *= factor


def train(
    train_docs: list[Document],
    dev_docs: list[Document],
    config: ModelConfig,
    vocab: Vocabulary,
    weights: EdgeWeightSet | None = None,
) -> TrainRun:
    if config.max_epochs < 1:
        raise TrainingError("training requires at least one epoch")
    if not train_docs or not dev_docs:
        raise TrainingError("training and dev sets must be non-empty")
    present = {d.label for d in train_docs}
    missing = [name for i, name in enumerate(config.class_names) if i not in present]
    if missing:
        raise TrainingError(f"no training documents for class(es): {missing}")

    rng = np.random.default_rng(config.seed)
    params = init_params(config, rng)
    optimizer = AdamState.for_params(params.tensors, lr=config.lr)
    run = TrainRun(config=config, seed=config.seed)

    best_values: dict[str, np.ndarray] | None = None
    best_score = -1.0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_docs))
        total_loss = 0.0
        for idx in order:
            doc = train_docs[idx]
            with Tape() as tape:
                logits, _ = forward(doc, params, config, weights)
                step_loss = loss(logits, doc.label)
            value = float(step_loss.values[0])
            if not np.isfinite(value):
                raise NumericError(f"non-finite loss on document '{doc.id}'")
            ad.zero_grads(params.tensors)
            ad.backward(tape, step_loss)
            grads = {
                name: t.grad if t.grad is not None else np.zeros_like(t.values)
                for name, t in params.tensors.items()
            }
            if config.clip_norm is not None:
                _clip_gradients(grads, config.clip_norm)
            ad.adam_step(params.tensors, grads, optimizer)
            total_loss += value

        dev_metrics = evaluate_documents(params, config, dev_docs, weights)
        stats = EpochStats(
            epoch=epoch,
            train_loss=total_loss / len(train_docs),
            dev_macro_f1=dev_metrics.macro_f1,
        )
        run.epochs.append(stats)
        if stats.dev_macro_f1 > best_score:
            best_score = stats.dev_macro_f1
            best_values = {n: t.values.copy() for n, t in params.tensors.items()}

    run.best_epoch = select_best_epoch([e.dev_macro_f1 for e in run.epochs])
    run.checkpoint = Checkpoint(
        config=config,
        vocab=vocab,
        values=best_values,
        metadata={
            "seed": config.seed,
            "best_epoch": run.best_epoch,
            "best_dev_macro_f1": run.best_dev_macro_f1,
        },
    )
    return run


# ---------------------------------------------------------------------------
# checkpoint persistence
#
# One file: a single JSON manifest line (sorted keys), then the parameter
# values as little-endian float64 in manifest directory order. The layout
# round-trips byte-exactly.

def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "config": ckpt.config.to_dict(),
        "vocabulary": {
            "id_to_token": ckpt.vocab.id_to_token,
            "min_frequency": ckpt.vocab.min_frequency,
        },
        "parameters": [
            {"name": name, "shape": list(values.shape)}
            for name, values in ckpt.values.items()
        ],
        "metadata": ckpt.metadata,
    }
    header = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    blob = b"".join(v.astype("<f8").tobytes() for v in ckpt.values.values())
    Path(path).write_bytes(header.encode("utf-8") + b"\n" + blob)


def load_checkpoint(path: str | Path) -> Checkpoint:
    try:
        raw = Path(path).read_bytes()
    except OSError as err:
        raise CheckpointError(f"cannot read checkpoint {path}: {err}") from err
    newline = raw.find(b"\n")
    if newline < 0:
        raise CheckpointError(f"{path}: missing manifest line")
    try:
        manifest = json.loads(raw[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise CheckpointError(f"{path}: invalid manifest: {err}") from err
    version = manifest.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format version {version!r} "
            f"(expected {CHECKPOINT_FORMAT_VERSION})"
        )
    try:
        config = ModelConfig.from_dict(manifest["config"])
        vocab = Vocabulary(
            id_to_token=list(manifest["vocabulary"]["id_to_token"]),
            min_frequency=int(manifest["vocabulary"]["min_frequency"]),
        )
        directory = [(str(p["name"]), tuple(int(s) for s in p["shape"]))
                     for p in manifest["parameters"]]
        metadata = manifest["metadata"]
    except (KeyError, TypeError, ValueError) as err:
        raise CheckpointError(f"{path}: malformed manifest: {err}") from err

    blob = raw[newline + 1:]
    values: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in directory:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(blob):
            raise CheckpointError(f"{path}: truncated parameter data at '{name}'")
        values[name] = np.frombuffer(
            blob, dtype="<f8", count=count, offset=offset
        ).reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")

    ckpt = Checkpoint(config=config, vocab=vocab, values=values, metadata=metadata)
    ckpt.to_params()  # validates names and shapes against the config
    return ckpt
