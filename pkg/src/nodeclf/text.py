"""Tokenization, vocabulary building, and TF-IDF featurization.

The tokenizer lowercases and splits on every maximal run of
non-alphanumeric characters (hyphens split, pure-digit tokens survive).
Term weights are raw in-document counts times a smoothed inverse document
frequency, idf = ln((1 + N) / (1 + df)) + 1, and each document vector is
L2-normalized.  A document with no in-vocabulary token maps to the zero
vector and is left unnormalized.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import ConfigError
from .linalg import Vector

# alphanumeric = \w minus underscore; keeps digits and non-ASCII letters
_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercased tokens; empty input yields an empty list."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocabulary:
    """Token index plus the document-frequency statistics it was fit on."""

    token_to_index: dict[str, int]
    index_to_token: list[str]
    document_frequency: dict[str, int]
    n_documents: int

    def __len__(self) -> int:
        return len(self.index_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index


@dataclass
class TfidfModel:
    """Fitted featurizer: vocabulary plus per-token idf weights."""

    vocab: Vocabulary
    idf: Vector
    max_features: Optional[int] = None

    @property
    def n_features(self) -> int:
        return len(self.vocab)


def fit(corpus: Sequence[str], max_features: Optional[int] = None) -> TfidfModel:
    """Build a TF-IDF model over ``corpus``.

    When ``max_features`` is given, the vocabulary keeps the most frequent
    tokens by total corpus count, breaking ties lexicographically.  Final
    indices are assigned in lexicographic token order.
    """
    if len(corpus) == 0:
        raise ConfigError("cannot fit a TF-IDF model on an empty corpus")
    if max_features is not None and max_features < 1:
        raise ConfigError(f"max_features must be >= 1, got {max_features}")
    df: Counter[str] = Counter()
    cf: Counter[str] = Counter()
    for doc in corpus:
        toks = tokenize(doc)
        cf.update(toks)
        df.update(set(toks))
    if not cf:
        raise ConfigError("corpus produced an empty vocabulary")
    tokens = sorted(cf)
    if max_features is not None and len(tokens) > max_features:
        keep = sorted(tokens, key=lambda t: (-cf[t], t))[:max_features]
        tokens = sorted(keep)
    n = len(corpus)
    idf = Vector.of(
        math.log((1.0 + n) / (1.0 + df[t])) + 1.0 for t in tokens
    )
    vocab = Vocabulary(
        token_to_index={t: i for i, t in enumerate(tokens)},
        index_to_token=tokens,
        document_frequency={t: df[t] for t in tokens},
        n_documents=n,
    )
    return TfidfModel(vocab=vocab, idf=idf, max_features=max_features)


def transform(model: TfidfModel, text: str) -> Vector:
    """Featurize one document as a count-times-idf vector, L2-normalized."""
    out = Vector.zeros(model.n_features)
    index = model.vocab.token_to_index
    idf = model.idf.data
    data = out.data
    hit = False
    for tok, count in Counter(tokenize(text)).items():
        i = index.get(tok)
        if i is not None:
            data[i] = count * idf[i]
            hit = True
    if not hit:
        return out
    norm = math.sqrt(sum(v * v for v in data))
    for i in range(len(data)):
        data[i] /= norm
    return out
