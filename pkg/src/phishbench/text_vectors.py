"""Sparse TF-IDF vectors, character n-grams, cosine similarity, and
frequency-based feature selection.

Weighting: raw term frequency times smoothed idf, ln((1+N)/(1+df)) + 1,
L2-normalized. The serialized model format is documented in the README for
cross-language reimplementation.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from sklearn.base import BaseEstimator

from .errors import EmptyCorpusError
from .validation import check_same_dim

_WORD = re.compile(r"\w+", re.UNICODE)

FORMAT_VERSION = 1


@dataclass
class SparseVector:
    """Map of feature id to weight; zero weights are never stored."""

    entries: dict[int, float]
    dim: int

    def __post_init__(self):
        self.entries = {i: w for i, w in self.entries.items() if w != 0.0}

    def dot(self, other: "SparseVector") -> float:
        check_same_dim(self, other)
        a, b = self.entries, other.entries
        if len(a) > len(b):
            a, b = b, a
        return sum(w * b[i] for i, w in a.items() if i in b)

    def norm(self) -> float:
        return math.sqrt(sum(w * w for w in self.entries.values()))

    def scale(self, factor: float) -> "SparseVector":
        return SparseVector({i: w * factor for i, w in self.entries.items()}, self.dim)

    def __len__(self) -> int:
        return len(self.entries)


def cosine_similarity(a: SparseVector, b: SparseVector) -> float:
    """dot(a,b) / (|a||b|); zero-norm operands yield 0.0 rather than NaN."""
    check_same_dim(a, b)
    na, nb = a.norm(), b.norm()
    if na == 0.0 or nb == 0.0:
        return 0.0
    return a.dot(b) / (na * nb)


def cosine_distance(a: SparseVector, b: SparseVector) -> float:
    return 1.0 - cosine_similarity(a, b)


def cosine_defined(a: SparseVector, b: SparseVector) -> bool:
    """False when either operand has zero norm (similarity is conventional)."""
    return a.norm() != 0.0 and b.norm() != 0.0


def word_tokens(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def char_ngrams(text: str, sizes: Iterable[int] = (2, 3, 4)) -> Counter:
    """Sliding-window character n-grams per size; multiset semantics."""
    grams: Counter = Counter()
    for n in sizes:
        if n < 1:
            raise ValueError(f"n-gram size must be >= 1, got {n}")
        for i in range(len(text) - n + 1):
            grams[text[i:i + n]] += 1
    return grams


def select_top_features(feature_counts: Mapping[str, int], k: int) -> dict[str, int]:
    """The k highest-count features, ties broken by lexicographic order.

    Returns a term -> dense id vocabulary (ids follow the selection order).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(feature_counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return {term: idx for idx, (term, _) in enumerate(ranked)}


class TfidfEncoder(BaseEstimator):
    """Fit a vocabulary + idf table, then transform documents to SparseVectors.

    tokenization: "words" for lowercase word tokens (cleaning stage) or
    "char_ngrams" for character n-grams of ``ngram_sizes`` (model features).
    Immutable after fit; transform is safe to call concurrently.
    """

    def __init__(self, tokenization: str = "words", ngram_sizes: tuple = (2, 3, 4)):
        self.tokenization = tokenization
        self.ngram_sizes = ngram_sizes

    def _tokens(self, doc: str) -> Counter:
        if self.tokenization == "words":
            return Counter(word_tokens(doc))
        if self.tokenization == "char_ngrams":
            return Counter(char_ngrams(doc, self.ngram_sizes))
        raise ValueError(f"unknown tokenization {self.tokenization!r}")

    def fit(self, docs: Iterable[str]):
        docs = list(docs)
        df: Counter = Counter()
        n_docs = 0
        any_tokens = False
        for doc in docs:
            tokens = self._tokens(doc)
            n_docs += 1
            if tokens:
                any_tokens = True
            df.update(tokens.keys())
        if n_docs == 0 or not any_tokens:
            raise EmptyCorpusError("fit requires at least one non-empty document")
        self.vocabulary_ = {term: idx for idx, term in enumerate(sorted(df))}
        self.idf_ = [0.0] * len(self.vocabulary_)
        for term, idx in self.vocabulary_.items():
            self.idf_[idx] = math.log((1 + n_docs) / (1 + df[term])) + 1.0
        self.n_docs_ = n_docs
        return self

    @property
    def dim(self) -> int:
        return len(self.vocabulary_)

    def transform_one(self, doc: str) -> SparseVector:
        vocab = self.vocabulary_
        weights: dict[int, float] = {}
        for term, tf in self._tokens(doc).items():
            idx = vocab.get(term)
            if idx is not None:
                weights[idx] = tf * self.idf_[idx]
        norm = math.sqrt(sum(w * w for w in weights.values()))
        if norm > 0:
            weights = {i: w / norm for i, w in weights.items()}
        return SparseVector(weights, self.dim)

    def transform(self, docs: Iterable[str]) -> list[SparseVector]:
        return [self.transform_one(doc) for doc in docs]

    def to_json(self) -> str:
        terms = sorted(self.vocabulary_, key=self.vocabulary_.get)
        return json.dumps({
            "format_version": FORMAT_VERSION,
            "tokenization": self.tokenization,
            "ngram_sizes": list(self.ngram_sizes),
            "terms": terms,
            "idf": self.idf_,
            "n_docs": self.n_docs_,
        }, ensure_ascii=False)

    @classmethod
    def from_json(cls, payload: str) -> "TfidfEncoder":
        obj = json.loads(payload)
        if obj.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {obj.get('format_version')!r}")
        enc = cls(tokenization=obj["tokenization"], ngram_sizes=tuple(obj["ngram_sizes"]))
        enc.vocabulary_ = {term: idx for idx, term in enumerate(obj["terms"])}
        enc.idf_ = [float(x) for x in obj["idf"]]
        enc.n_docs_ = obj["n_docs"]
        return enc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TfidfEncoder":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def fit_tfidf(docs: Iterable[str], tokenization: str = "words",
              ngram_sizes: tuple = (2, 3, 4)) -> TfidfEncoder:
    return TfidfEncoder(tokenization=tokenization, ngram_sizes=ngram_sizes).fit(docs)


def transform(model: TfidfEncoder, doc: str) -> SparseVector:
    return model.transform_one(doc)
