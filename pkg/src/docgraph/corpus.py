"""Corpus ingestion: loading, segmentation, tokenization, encoding, splits.

The whole pipeline is deterministic: given the same file bytes, caps, and
seed, loading, vocabulary construction, encoding, and the stratified
train/dev split always produce identical results.
"""

from __future__ import annotations

import json
import logging
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorpusError

log = logging.getLogger(__name__)

PAD = "<pad>"
UNK = "<unk>"
PAD_ID = 0
UNK_ID = 1

DEFAULT_MAX_SENTENCES = 64
DEFAULT_MAX_TOKENS = 64
DEFAULT_MIN_FREQUENCY = 2

# Words that end with a period without terminating a sentence.
ABBREVIATIONS = frozenset(
    ["mr", "mrs", "ms", "dr", "st", "vs", "etc", "e.g", "i.e", "u.s", "inc", "jr", "sr"]
)

_PUNCT = set(string.punctuation)


@dataclass(frozen=True)
class RawDocument:
    """An article as read from disk, before any encoding."""

    id: str
    label: str
    source: str
    text: str


@dataclass(frozen=True)
class Document:
    """A sentence-segmented, token-encoded article."""

    id: str
    label: int
    sentences: tuple[tuple[int, ...], ...]

    @property
    def n_sentences(self) -> int:
        return len(self.sentences)


@dataclass(frozen=True)
class ClassSet:
    """Ordered class names; order fixes the label indices."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.names) < 2:
            raise CorpusError("a class set needs at least 2 classes")
        if len(set(self.names)) != len(self.names):
            raise CorpusError("class names must be unique")

    @property
    def n_classes(self) -> int:
        return len(self.names)

    def index(self, label: str) -> int:
        try:
            return self.names.index(label)
        except ValueError:
            raise CorpusError(f"label '{label}' not in class set {list(self.names)}") from None


@dataclass
class Vocabulary:
    """Token/id bijection with reserved PAD=0 and UNK=1 entries."""

    id_to_token: list[str]
    min_frequency: int
    token_to_id: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.id_to_token[:2] != [PAD, UNK]:
            raise CorpusError("vocabulary must reserve PAD=0 and UNK=1")
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise CorpusError("vocabulary tokens must be unique")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def encode_token(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def decode_id(self, token_id: int) -> str:
        return self.id_to_token[token_id]


# ---------------------------------------------------------------------------
# loading

def load_corpus(
    path: str | Path,
    fmt: str,
    class_set: ClassSet | None = None,
) -> list[RawDocument]:
    """Read a JSONL or TSV corpus file, preserving record order.

    Blank lines are skipped. When ``class_set`` is given, a record whose
    label falls outside it is an error (use :func:`filter_by_labels` to
    subset instead).
    """
    path = Path(path)
    if fmt not in ("jsonl", "tsv"):
        raise CorpusError(f"unknown corpus format '{fmt}'")
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as err:
        raise CorpusError(f"cannot read corpus file {path}: {err}") from err

    docs: list[RawDocument] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        k = len(docs)
        if fmt == "jsonl":
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as err:
                raise CorpusError(f"{path}:{lineno}: invalid JSON: {err}") from err
            if not isinstance(rec, dict) or "label" not in rec or "text" not in rec:
                raise CorpusError(f"{path}:{lineno}: record needs 'label' and 'text' fields")
            doc = RawDocument(
                id=str(rec.get("id", f"row-{k}")),
                label=str(rec["label"]),
                source=str(rec.get("source", "")),
                text=str(rec["text"]),
            )
        else:
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise CorpusError(f"{path}:{lineno}: expected label<TAB>text")
            doc = RawDocument(id=f"row-{k}", label=parts[0], source="", text=parts[1])
        if not doc.text.strip():
            raise CorpusError(f"{path}:{lineno}: empty text for document '{doc.id}'")
        if class_set is not None and doc.label not in class_set.names:
            raise CorpusError(
                f"{path}:{lineno}: label '{doc.label}' not in class set "
                f"{list(class_set.names)}"
            )
        docs.append(doc)
    return docs


def filter_by_labels(docs: list[RawDocument], labels: tuple[str, ...]) -> list[RawDocument]:
    """Keep only documents whose label is in ``labels`` (order preserved)."""
    keep = set(labels)
    return [d for d in docs if d.label in keep]


def infer_format(path: str | Path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".json"):
        return "jsonl"
    if suffix == ".tsv":
        return "tsv"
    raise CorpusError(
        f"cannot infer corpus format from '{path}'; pass the format explicitly"
    )


# ---------------------------------------------------------------------------
# segmentation and tokenization

def _word_before(text: str, idx: int) -> str:
    """The maximal [letter/digit/period] run ending just before ``idx``."""
    j = idx
    while j > 0 and (text[j - 1].isalnum() or text[j - 1] == "."):
        j -= 1
    return text[j:idx]


def split_sentences(text: str) -> list[str]:
    """Rule-based segmentation of whitespace-normalized text.

    Splits after '.', '!' or '?' when followed by whitespace and an
    uppercase letter or digit, unless the period closes a known
    abbreviation. Text without a terminator comes back as one segment.
    """
    normalized = " ".join(text.split())
    if not normalized:
        raise CorpusError("cannot split empty text")
    segments: list[str] = []
    start = 0
    i = 0
    n = len(normalized)
    while i < n:
        ch = normalized[i]
        if ch in ".!?":
            nxt = i + 1
            if nxt < n and normalized[nxt] == " ":
                follow = nxt + 1
                if follow < n and (normalized[follow].isupper() or normalized[follow].isdigit()):
                    word = _word_before(normalized, i)
                    if not (ch == "." and word.lower().rstrip(".") in ABBREVIATIONS):
                        segments.append(normalized[start : i + 1])
                        start = follow
                        i = follow
                        continue
        i += 1
    tail = normalized[start:].strip()
    if tail:
        segments.append(tail)
    return segments


def tokenize(sentence: str) -> list[str]:
    """Lowercase whitespace tokenization with outer punctuation detached.

    Leading and trailing punctuation characters become single-character
    tokens; punctuation inside a token (hyphens, acronym periods) stays.
    """
    if not sentence.strip():
        raise CorpusError("cannot tokenize empty sentence")
    tokens: list[str] = []
    for chunk in sentence.lower().split():
        left = 0
        right = len(chunk)
        while left < right and chunk[left] in _PUNCT:
            left += 1
        while right > left and chunk[right - 1] in _PUNCT:
            right -= 1
        tokens.extend(chunk[:left])
        if right > left:
            tokens.append(chunk[left:right])
        tokens.extend(chunk[right:])
    return tokens


# ---------------------------------------------------------------------------
# vocabulary and encoding

def build_vocab(docs: list[RawDocument], min_frequency: int = DEFAULT_MIN_FREQUENCY) -> Vocabulary:
    """Frequency-cutoff vocabulary over the tokenized corpus.

    Ordering is deterministic: by descending frequency, ties broken
    lexicographically. Tokens below ``min_frequency`` encode to UNK.
    """
    if not docs:
        raise CorpusError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    for doc in docs:
        for sentence in split_sentences(doc.text):
            counts.update(tokenize(sentence))
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_frequency),
        key=lambda tok: (-counts[tok], tok),
    )
    return Vocabulary(id_to_token=[PAD, UNK] + kept, min_frequency=min_frequency)


def encode_document(
    doc: RawDocument,
    vocab: Vocabulary,
    class_set: ClassSet,
    max_sentences: int = DEFAULT_MAX_SENTENCES,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> Document | None:
    """Encode one document, or None when nothing survives encoding."""
    if max_sentences < 1 or max_tokens < 1:
        raise CorpusError("length caps must be at least 1")
    label = class_set.index(doc.label)
    try:
        sentences = split_sentences(doc.text)
    except CorpusError:
        return None
    encoded = []
    for sentence in sentences[:max_sentences]:
        ids = tuple(vocab.encode_token(t) for t in tokenize(sentence)[:max_tokens])
        if ids:
            encoded.append(ids)
    if not encoded:
        return None
    return Document(id=doc.id, label=label, sentences=tuple(encoded))


def encode_corpus(
    docs: list[RawDocument],
    vocab: Vocabulary,
    class_set: ClassSet,
    max_sentences: int = DEFAULT_MAX_SENTENCES,
    max_tokens: int = DEFAULT_MAX_TOKENS,
) -> list[Document]:
    """Encode a corpus, dropping empty-after-encoding documents with a warning."""
    out: list[Document] = []
    dropped = 0
    for doc in docs:
        enc = encode_document(doc, vocab, class_set, max_sentences, max_tokens)
        if enc is None:
            dropped += 1
        else:
            out.append(enc)
    if dropped:
        log.warning("dropped %d empty-after-encoding document(s)", dropped)
    return out


# ---------------------------------------------------------------------------
# splits

def split_train_dev(docs: list, ratio: float, seed: int) -> tuple[list, list]:
    """Stratified shuffle split; works on anything with a ``label`` attribute.

    Per class the train share is round(ratio * count), clamped so both
    sides stay non-empty. Deterministic given the seed.
    """
    if not (0.0 < ratio < 1.0):
        raise CorpusError(f"split ratio must be in (0, 1), got {ratio}")
    groups: dict[object, list] = {}
    for d in docs:
        groups.setdefault(d.label, []).append(d)
    rng = np.random.default_rng(seed)
    train: list = []
    dev: list = []
    for label in sorted(groups, key=str):
        members = groups[label]
        if len(members) < 2:
            raise CorpusError(
                f"class '{label}' has fewer than 2 documents; cannot split"
            )
        n_train = int(ratio * len(members) + 0.5)
        n_train = min(max(n_train, 1), len(members) - 1)
        order = rng.permutation(len(members))
        train.extend(members[i] for i in order[:n_train])
        dev.extend(members[i] for i in order[n_train:])
    return train, dev
